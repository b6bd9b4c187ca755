#ifndef FLATCHECK_LIEALG_HPP
#define FLATCHECK_LIEALG_HPP

#include <optional>
#include <string>
#include <vector>

#include "flatcheck/system.hpp"

namespace flatcheck {

/// Vector field on the state-input space; one coefficient Expr per
/// coordinate in SystemModel::coordinates() order.
struct VectorField {
  std::vector<Expr> comps;

  bool structurally_zero() const;
  std::string str(const SystemModel& model) const;
};

/// One-form; coefficient per coordinate differential, same order.
struct OneForm {
  std::vector<Expr> comps;

  bool structurally_zero() const;
  std::string str(const SystemModel& model) const;
};

/// Finite generator set with cached generic rank and a provenance label
/// (the name a trace prints, e.g. "D_2" or "E_2,1"). Caches are bound to
/// the (model, config) a distribution was built under; use each value with
/// a single run configuration.
struct Distribution {
  std::vector<VectorField> generators;
  std::string label;
  mutable std::optional<int> rank_cache;
  mutable std::optional<bool> involutive_cache;

  bool empty() const { return generators.empty(); }
};

struct Codistribution {
  std::vector<OneForm> generators;
  std::string label;
  mutable std::optional<int> rank_cache;
};

// ---- basic constructions -------------------------------------------------

/// Drift field f = f^i d_xi (zero input components).
VectorField drift_field(const SystemModel& model);
VectorField coordinate_field(const SystemModel& model, int index);
VectorField zero_field(const SystemModel& model);

/// D_0 = span{d_u1, d_u2}.
Distribution input_distribution(const SystemModel& model);
Distribution full_tangent_space(const SystemModel& model);

Expr pairing(const OneForm& w, const VectorField& v);

/// Differential of a scalar function of (x, u).
OneForm differential(const SystemModel& model, const Expr& fn);

/// Lie derivative of a scalar along a vector field.
Expr lie_derivative(const SystemModel& model, const VectorField& v, const Expr& fn);

/// [v, w] = v(w) - w(v), componentwise exact.
VectorField lie_bracket(const SystemModel& model, const VectorField& v, const VectorField& w);

/// Ad_f^k v ([f, .] applied k times, Ad^0 = v).
VectorField ad_iterate(const SystemModel& model, const VectorField& f, const VectorField& v, int k);

// ---- probabilistic linear algebra over the function field ------------------

int generic_rank(const SystemModel& model, const Distribution& D, const SamplingConfig& cfg);
int generic_rank(const SystemModel& model, const Codistribution& W, const SamplingConfig& cfg);

bool contains(const SystemModel& model, const Distribution& D, const VectorField& v,
              const SamplingConfig& cfg);
bool contains_form(const SystemModel& model, const Codistribution& W, const OneForm& w,
                   const SamplingConfig& cfg);

/// Subset of generators that already spans D generically (greedy).
std::vector<VectorField> reduced_generators(const SystemModel& model, const Distribution& D,
                                            const SamplingConfig& cfg);

bool is_involutive(const SystemModel& model, const Distribution& D, const SamplingConfig& cfg);

/// True iff [a, g] lies in D for every generator a of A and g of D.
bool subset_of_cauchy(const SystemModel& model, const Distribution& A, const Distribution& D,
                      const SamplingConfig& cfg);

Distribution sum(const Distribution& a, const Distribution& b, const std::string& label);
Distribution with_field(const Distribution& a, const VectorField& v, const std::string& label);

/// Brackets of f with each generator of D.
Distribution bracket_with(const SystemModel& model, const VectorField& f, const Distribution& D,
                          const std::string& label);

/// Bracket saturation until the rank stabilizes (or the full space is hit).
Distribution involutive_closure(const SystemModel& model, const Distribution& D,
                                const SamplingConfig& cfg, const std::string& label);

/// D + [D, D].
Distribution derived_flag(const SystemModel& model, const Distribution& D,
                          const SamplingConfig& cfg, const std::string& label);

/// Cauchy characteristic distribution C(D): all c in D with [c, D] in D.
/// Generators come out with exact Expr coefficients.
Distribution cauchy_characteristic(const SystemModel& model, const Distribution& D,
                                   const SamplingConfig& cfg, const std::string& label);

/// Codistribution of one-forms annihilating D; rank = dim - rank(D).
Codistribution annihilator(const SystemModel& model, const Distribution& D,
                           const SamplingConfig& cfg, const std::string& label);

// ---- symbolic elimination --------------------------------------------------

/// Right nullspace basis of a symbolic matrix over the function field.
/// Pivot-nonzero decisions are probabilistic (is_zero); pivot order prefers
/// structurally small entries. The pivot count is cross-checked against the
/// numeric rank at samples; disagreement raises DegeneracyError.
std::vector<std::vector<Expr>> symbolic_nullspace(std::vector<std::vector<Expr>> m,
                                                  const SampleSpace& space,
                                                  const SamplingConfig& cfg);

/// Solves M x = rhs when consistent; entries verified by is_zero.
std::optional<std::vector<Expr>> solve_linear(const std::vector<std::vector<Expr>>& m,
                                              const std::vector<Expr>& rhs,
                                              const SampleSpace& space, const SamplingConfig& cfg);

/// Clears denominators and common factors across the components of a
/// generator, fixes the sign of the leading coefficient. Span-preserving.
void normalize_generator(std::vector<Expr>& comps);

}  // namespace flatcheck

#endif
