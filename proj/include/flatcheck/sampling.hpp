#ifndef FLATCHECK_SAMPLING_HPP
#define FLATCHECK_SAMPLING_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flatcheck/expr.hpp"

namespace flatcheck {

/// Tolerances and sampling parameters shared by every probabilistic
/// decision in a run. Fixed (seed, samples, tau_zero) makes all verdicts,
/// ranks and reports deterministic.
struct SamplingConfig {
  std::uint64_t seed = 20240817;
  int samples = 25;
  double tau_zero = 1e-9;
  double assumption_margin = 0.1;   // |expr| resp. expr must clear this at samples
  double rank_tolerance = 1e-9;     // pivot threshold, relative to the largest entry
  int max_point_attempts = 2000;    // rejection-sampling budget per point
  int max_eval_retries = 50;        // extra draws when evaluation hits a domain edge
};

/// Deterministic uniform integers on top of mt19937_64; avoids
/// std::uniform_int_distribution so streams are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform integer in [lo, hi], inclusive, by rejection.
  std::int64_t int_in(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

 private:
  std::mt19937_64 eng_;
};

/// Assignment of exact rational values to every sampled symbol.
struct Point {
  std::map<std::string, Rat> values;

  bool has(const std::string& name) const { return values.count(name) > 0; }
  double get(const std::string& name) const;
  std::string str() const;
};

/// Domain assumption attached to a model: expr != 0 or expr > 0.
struct Assumption {
  enum class Relation { NonZero, Positive };
  Expr expr;
  Relation relation;

  std::string str() const { return expr.str() + (relation == Relation::NonZero ? " != 0" : " > 0"); }
};

/// Everything the sampler needs to know about a model: which symbols to
/// draw, which constants are pinned, and the feasibility constraints.
struct SampleSpace {
  std::vector<std::string> symbols;      // drawn uniformly from the rational grid on [-2,2]
  std::map<std::string, Rat> pinned;     // constants with fixed values
  std::vector<Assumption> assumptions;
};

/// Numeric evaluation at a point (double precision, ~1e-15 relative).
/// Throws EvalError naming the offending subterm on domain violations;
/// near-singular denominators count as violations so sampled decisions
/// stay away from blowup regions.
double evaluate(const Expr& e, const Point& p);

/// Draws one feasible point (all assumptions clear the margin).
/// Throws SamplingError when the budget is exhausted.
Point sample_point(const SampleSpace& space, Rng& rng, const SamplingConfig& cfg);

struct ZeroVerdict {
  bool identically_zero;            // probabilistic when true
  std::optional<Point> witness;     // set when nonzero
  double witness_value = 0.0;
  int samples_used = 0;
  std::uint64_t seed = 0;
};

/// Probabilistic identity test: evaluates e at cfg.samples feasible points;
/// nonzero on the first |value| > tau_zero, else identically-zero.
/// Deterministic for fixed seed and monotone in the sample count.
ZeroVerdict zero_verdict(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg);

/// Convenience wrapper over zero_verdict.
bool is_zero(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg);

struct SignProbe {
  int positive = 0;
  int negative = 0;
  int near_zero = 0;

  bool all_positive() const { return negative == 0 && positive > 0; }
  bool all_negative() const { return positive == 0 && negative > 0; }
};

/// Sign of e across sampled points, with |value| <= tau counted as near-zero.
SignProbe sign_probe(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg);

/// Rank of a numeric matrix by Gaussian elimination with complete pivoting.
int numeric_rank(std::vector<std::vector<double>> m, double tolerance);

}  // namespace flatcheck

#endif
