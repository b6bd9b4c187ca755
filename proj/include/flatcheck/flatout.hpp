#ifndef FLATCHECK_FLATOUT_HPP
#define FLATCHECK_FLATOUT_HPP

#include "flatcheck/decision.hpp"

namespace flatcheck {

struct FlatOutputComponent {
  std::optional<Expr> closed_form;
  OneForm form;  // annihilator form the component realizes
  bool integrated = false;
};

/// Candidate flat output: two components, each a closed form phi(x,u) or an
/// unintegrated one-form. Integration failures never affect the flatness
/// verdict; raw forms are first-class results. When even the splice
/// distribution cannot be built in closed form the candidate comes back
/// empty with an extraction note.
struct FlatOutputCandidate {
  enum class Recipe { Codim2, Codim1Chain };
  std::vector<FlatOutputComponent> components;
  Recipe recipe = Recipe::Codim2;
  std::string branch_id;
  std::optional<Expr> psi_used;  // recorded choice in the full-space construction
  bool partial = false;
  std::string extraction_note;

  // verification payload
  Codistribution top_annihilator;
  std::optional<Codistribution> deep_annihilator;
  int chain_length = 0;  // number of Lie-chain differentials of phi^1
  int trace_d = 0;
};

struct RelativeDegreeReport {
  int k1 = 0, k2 = 0;
  int r1 = 0, r2 = 0;
  int d = 0;
};

struct VerifyResult {
  bool accepted = false;
  std::string reason;
};

struct OracleResult {
  bool sfl = false;
  Expr ubar1;
  std::string complement_input;
  SystemModel prolonged;
  DecisionTrace trace;
};

/// Splice construction: the involutive distribution between lo and hi that
/// the decision conditions leave implicit. With closure_hi short of the full space the
/// direction is unique ([v,f] must stay inside closure_hi); with
/// closure_hi = TXU a function psi with d(psi) annihilating lo is chosen
/// and recorded (different psi give different, equally valid results).
Distribution complete_missing_distribution(const SystemModel& model, const Distribution& lo,
                                           const Distribution& hi, const Distribution& closure_hi,
                                           const SamplingConfig& cfg, const std::string& label,
                                           std::optional<Expr>* psi_used);

/// Closed-form potential of a one-form: exact forms are path-integrated;
/// otherwise a finite menu of integrating factors built from the form's own
/// components is tried before giving up.
std::optional<Expr> integrate_one_form(const OneForm& w, const SystemModel& model,
                                       const SamplingConfig& cfg);

/// Flat-output extraction along the accepted branch's involutive ladder.
FlatOutputCandidate extract_flat_output(const SystemModel& model, const DecisionTrace& trace,
                                        const BranchTrace& branch, const SamplingConfig& cfg);

/// Relative degrees of a closed-form candidate pair and the induced
/// difference d = n - k1 - k2.
RelativeDegreeReport relative_degrees(const SystemModel& model, const Expr& phi1, const Expr& phi2,
                                      const SamplingConfig& cfg);

/// Span re-verification of a closed-form candidate against the recipe it
/// was extracted with, plus the relative-degree consistency check.
VerifyResult verify_flat_output(const SystemModel& model, const FlatOutputCandidate& candidate,
                                const SamplingConfig& cfg);

/// A new first input annihilated by the branch direction (d(ubar1) vc = 0),
/// for feeding the prolongation oracle on k1 = 1 branches.
Expr derive_prolongation_input(const SystemModel& model, const VectorField& vc,
                               const SamplingConfig& cfg);

/// Builds the system obtained by d-fold prolonging the new input ubar1
/// (complement chosen automatically) and runs the static-feedback test on it.
OracleResult prolongation_oracle(const SystemModel& model, const Expr& ubar1, int d,
                                 const SamplingConfig& cfg);

}  // namespace flatcheck

#endif
