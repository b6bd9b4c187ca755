#ifndef FLATCHECK_MODELIO_HPP
#define FLATCHECK_MODELIO_HPP

#include <json.hpp>

#include "flatcheck/flatout.hpp"

namespace flatcheck {

using Json = nlohmann::ordered_json;

/// Infix expression text over declared symbols and the fixed function set
/// {sin, cos, tan, arcsin, sqrt, exp, log}; ^ takes integer exponents,
/// decimal literals are converted to exact rationals. Every identifier
/// parses as a variable; resolve_constants rebinds declared constant names.
Expr parse_expression(const std::string& text);
Expr resolve_constants(const Expr& e, const std::vector<ConstantDecl>& constants);

/// Line-oriented model format: system/states/inputs/constant headers, then
/// `dynamics` and `assumptions` blocks. Throws ModelError with the line.
SystemModel parse_model(const std::string& text);
std::string serialize_model(const SystemModel& model);
bool model_equal(const SystemModel& a, const SystemModel& b);

// ---- bundled corpus --------------------------------------------------------

std::vector<std::string> corpus_names();
std::string corpus_text(const std::string& name);  // throws ModelError when unknown
SystemModel load_corpus_model(const std::string& name);

/// Loads a model from a file path, falling back to the bundled corpus when
/// no such file exists.
SystemModel load_model(const std::string& path_or_name);

// ---- reports ---------------------------------------------------------------

struct ReportInputs {
  const SystemModel* model = nullptr;
  const ClassifyOutcome* outcome = nullptr;
  std::vector<FlatOutputCandidate> candidates;  // one per accepted branch, optional
  std::vector<VerifyResult> verifications;      // parallel to candidates
  std::vector<std::optional<RelativeDegreeReport>> degrees;  // parallel; set for closed-form pairs
  bool with_flat_outputs = false;
};

Json build_report(const ReportInputs& in, const SamplingConfig& cfg, int dmax);
std::string render_text_report(const ReportInputs& in, const SamplingConfig& cfg);

}  // namespace flatcheck

#endif
