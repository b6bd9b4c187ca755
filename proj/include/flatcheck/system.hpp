#ifndef FLATCHECK_SYSTEM_HPP
#define FLATCHECK_SYSTEM_HPP

#include <optional>
#include <string>
#include <vector>

#include "flatcheck/sampling.hpp"

namespace flatcheck {

struct ConstantDecl {
  std::string name;
  std::optional<Rat> pinned;  // sampled like a variable when absent
};

/// Two-input control system x' = f(x, u) on the product of state and input
/// space. Coordinates are ordered states first, then the two inputs; every
/// vector field / one-form in liealg uses that coordinate order.
struct SystemModel {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> inputs;  // exactly two
  std::vector<ConstantDecl> constants;
  std::vector<Expr> dynamics;  // one Expr per state
  std::vector<Assumption> assumptions;

  int n() const { return static_cast<int>(states.size()); }
  int dim() const { return n() + 2; }

  /// states followed by inputs.
  std::vector<std::string> coordinates() const;
  int coordinate_index(const std::string& name) const;

  SampleSpace sample_space() const;

  /// Declaration checks plus the generic input-rank condition
  /// rank(df/du) = 2 at sampled points. Throws ModelError.
  void validate(const SamplingConfig& cfg) const;
};

/// Numeric rank of df/du across samples (max over samples).
int input_rank(const SystemModel& model, const SamplingConfig& cfg);

}  // namespace flatcheck

#endif
