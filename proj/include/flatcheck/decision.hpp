#ifndef FLATCHECK_DECISION_HPP
#define FLATCHECK_DECISION_HPP

#include <optional>
#include <string>
#include <vector>

#include "flatcheck/liealg.hpp"

namespace flatcheck {

enum class Stage { SFL, D1, D2 };

const char* stage_name(Stage s);

/// One recorded check inside a decision run. `kind` plus the named
/// distributions make the claim replayable against the stored table.
struct Claim {
  enum class Kind {
    DimEquals,          // rank(a) == expected
    Growth,             // rank(a) - rank(b) == expected
    SumGrowth,          // rank([f,a] + b) - rank(b) == expected
    CauchyContainment,  // a subset of C(b) == holds
    Involutive,         // is_involutive(a) == holds where expected==1 demands true
    FullSpace,          // rank(a) == dim
    Text,               // informational only
  };
  std::string item;
  std::string description;
  bool holds = true;
  Kind kind = Kind::Text;
  std::string a, b;
  int expected = -1;
};

struct NamedDistribution {
  std::string name;
  Distribution dist;
  int rank = 0;
};

/// One rung of the involutive ladder used for flat-output extraction.
/// Splice members the decision conditions leave implicit are marked missing and carry
/// the construction triple (lo, hi, closure_hi).
struct LadderEntry {
  bool missing = false;
  std::string name;
  Distribution dist;
  int rank = 0;
  Distribution lo, hi, closure_hi;
};

struct AlgWithinSolution {
  Expr alpha1, alpha2;
  std::string normalization;
  VectorField vc;
};

/// Every candidate the quadratic produced, including discarded ones.
struct AlgWithinRecord {
  std::string alpha1, alpha2;
  bool verified = false;        // componentwise is_zero of the quadratic
  bool survived_filter = false; // E_{k1-1} subset of C(E_{k1})
  std::string note;
};

struct BranchTrace {
  std::string id;  // "main", or "1"/"2" for the two 2b branches
  std::optional<AlgWithinSolution> solution;
  std::vector<Claim> items;
  std::vector<std::string> item_path;
  bool accepted = false;
  std::string reject_item;
  std::string reject_reason;
  std::optional<int> k2;
  std::optional<int> s;
  std::vector<LadderEntry> ladder;
};

struct DecisionTrace {
  Stage stage = Stage::SFL;
  bool accepted = false;
  std::optional<int> d;
  std::optional<int> k1;
  std::vector<Claim> shared_items;
  std::vector<std::string> shared_path;
  std::vector<AlgWithinRecord> alg_records;
  std::vector<BranchTrace> branches;
  std::vector<NamedDistribution> table;
  std::string diagnosis;
  SamplingConfig cfg;

  const Distribution* find(const std::string& name) const;
  void add(const SystemModel& model, const std::string& name, const Distribution& dist,
           const SamplingConfig& cfg);
  const BranchTrace* accepted_branch() const;
};

/// D_0, D_i = D_{i-1} + [f, D_{i-1}], stopping at the first non-involutive
/// member, at the full tangent space, or at rank stagnation.
struct BracketSequence {
  std::vector<Distribution> D;
  std::vector<int> dims;
  std::optional<int> k1;      // index of the first non-involutive member
  std::optional<int> s_full;  // first index spanning the full space
  bool stagnated = false;
};

BracketSequence build_bracket_sequence(const SystemModel& model, const SamplingConfig& cfg);

DecisionTrace check_sfl(const SystemModel& model, const SamplingConfig& cfg);
DecisionTrace check_d1(const SystemModel& model, const SamplingConfig& cfg);
DecisionTrace check_d2(const SystemModel& model, const SamplingConfig& cfg);

/// Projective solutions (alpha1, alpha2) of the componentwise quadratic
/// membership condition, at most two (enumerated by the residual-rank case
/// split); each returned solution is verified componentwise. Candidates
/// are normalized by clearing denominators and common factors.
std::vector<AlgWithinSolution> solve_alg_within(const SystemModel& model,
                                                const Distribution& D_lo, const VectorField& v1,
                                                const VectorField& v2, const Distribution& D_k1,
                                                const SamplingConfig& cfg,
                                                std::vector<AlgWithinRecord>* records);

struct ClassifyOutcome {
  std::string verdict;
  std::optional<int> d;
  std::string diagnosis;
  int dmax = 2;
  DecisionTrace sfl;
  std::optional<DecisionTrace> d1;
  std::optional<DecisionTrace> d2;

  const DecisionTrace* accepted_trace() const;
};

/// Runs the tests in order of increasing difference (minimality policy:
/// the first accepting stage wins).
ClassifyOutcome classify(const SystemModel& model, int dmax, const SamplingConfig& cfg);

/// Re-verifies every replayable claim of a trace against its stored
/// distributions. Returns false and fills `why` on the first mismatch.
bool replay_trace(const SystemModel& model, const DecisionTrace& trace, const SamplingConfig& cfg,
                  std::string* why);

}  // namespace flatcheck

#endif
