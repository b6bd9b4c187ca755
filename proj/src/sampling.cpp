#include "flatcheck/sampling.hpp"

#include <cmath>
#include <sstream>

#include "flatcheck/errors.hpp"

namespace flatcheck {

double Point::get(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw ExprError("unbound symbol in point: " + name);
  return it->second.to_double();
}

std::string Point::str() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, value] : values) {
    if (!first) os << ", ";
    os << name << "=" << value.str();
    first = false;
  }
  return os.str();
}

namespace {

constexpr double kDenominatorFloor = 1e-8;
constexpr double kArcsinCeiling = 0.999999;
constexpr double kLogFloor = 1e-12;

double eval_impl(const Expr& e, const Point& p) {
  switch (e.kind()) {
    case Kind::Rational:
      return e.value().to_double();
    case Kind::Constant:
    case Kind::Var:
      return p.get(e.name());
    case Kind::Add: {
      double s = 0;
      for (const Expr& k : e.kids()) s += eval_impl(k, p);
      return s;
    }
    case Kind::Mul: {
      double s = 1;
      for (const Expr& k : e.kids()) s *= eval_impl(k, p);
      return s;
    }
    case Kind::Neg:
      return -eval_impl(e.kids()[0], p);
    case Kind::Div: {
      double den = eval_impl(e.kids()[1], p);
      if (std::abs(den) < kDenominatorFloor) throw EvalError("near-zero denominator", e.kids()[1].str());
      return eval_impl(e.kids()[0], p) / den;
    }
    case Kind::Pow: {
      double b = eval_impl(e.kids()[0], p);
      double r = 1;
      for (int i = 0; i < e.exponent(); ++i) r *= b;
      return r;
    }
    case Kind::Fun: {
      double a = eval_impl(e.kids()[0], p);
      switch (e.fn()) {
        case Fn::Sin: return std::sin(a);
        case Fn::Cos: return std::cos(a);
        case Fn::Tan:
          if (std::abs(std::cos(a)) < kDenominatorFloor) throw EvalError("tan near a pole", e.str());
          return std::tan(a);
        case Fn::Arcsin:
          if (std::abs(a) > kArcsinCeiling) throw EvalError("arcsin argument out of range", e.str());
          return std::asin(a);
        case Fn::Sqrt:
          if (a < 0) throw EvalError("sqrt of a negative value", e.str());
          return std::sqrt(a);
        case Fn::Exp:
          if (a > 300) throw EvalError("exp overflow", e.str());
          return std::exp(a);
        case Fn::Log:
          if (a < kLogFloor) throw EvalError("log of a non-positive value", e.str());
          return std::log(a);
      }
      throw ExprError("unreachable function kind");
    }
  }
  throw ExprError("unreachable node kind in evaluate");
}

}  // namespace

double evaluate(const Expr& e, const Point& p) {
  double v = eval_impl(e, p);
  if (!std::isfinite(v)) throw EvalError("non-finite value", e.str());
  return v;
}

Point sample_point(const SampleSpace& space, Rng& rng, const SamplingConfig& cfg) {
  for (int attempt = 0; attempt < cfg.max_point_attempts; ++attempt) {
    Point p;
    for (const auto& [name, value] : space.pinned) p.values[name] = value;
    for (const std::string& name : space.symbols) {
      if (p.values.count(name)) continue;
      p.values[name] = Rat(rng.int_in(-128, 128), 64);  // rational grid on [-2, 2]
    }
    bool ok = true;
    for (const Assumption& a : space.assumptions) {
      double v;
      try {
        v = evaluate(a.expr, p);
      } catch (const EvalError&) {
        ok = false;
        break;
      }
      if (a.relation == Assumption::Relation::NonZero) {
        if (std::abs(v) <= cfg.assumption_margin) ok = false;
      } else {
        if (v <= cfg.assumption_margin) ok = false;
      }
      if (!ok) break;
    }
    if (ok) return p;
  }
  throw SamplingError("no feasible sample point found; domain assumptions may be too tight");
}

namespace {

// Draws feasible points and evaluates e, skipping points where evaluation
// hits a domain edge (expressions produced by elimination contain quotients
// whose denominators vanish on thin sets).
template <typename Visitor>
void for_each_sample(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg,
                     Visitor&& visit) {
  Rng rng(cfg.seed);
  for (int s = 0; s < cfg.samples; ++s) {
    bool done = false;
    for (int retry = 0; retry < cfg.max_eval_retries && !done; ++retry) {
      Point p = sample_point(space, rng, cfg);
      try {
        double v = evaluate(e, p);
        done = true;
        if (!visit(p, v)) return;
      } catch (const EvalError&) {
        // draw another point
      }
    }
    if (!done)
      throw SamplingError("expression could not be evaluated at feasible points: " + e.str());
  }
}

}  // namespace

ZeroVerdict zero_verdict(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg) {
  ZeroVerdict out;
  out.identically_zero = true;
  out.seed = cfg.seed;
  if (e.is_rational()) {  // exact short-circuit
    out.identically_zero = e.value().is_zero();
    if (!out.identically_zero) {
      out.witness = Point{};
      out.witness_value = e.value().to_double();
    }
    return out;
  }
  for_each_sample(e, space, cfg, [&](const Point& p, double v) {
    ++out.samples_used;
    if (std::abs(v) > cfg.tau_zero) {
      out.identically_zero = false;
      out.witness = p;
      out.witness_value = v;
      return false;
    }
    return true;
  });
  return out;
}

bool is_zero(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg) {
  return zero_verdict(e, space, cfg).identically_zero;
}

SignProbe sign_probe(const Expr& e, const SampleSpace& space, const SamplingConfig& cfg) {
  SignProbe probe;
  for_each_sample(e, space, cfg, [&](const Point&, double v) {
    if (v > cfg.tau_zero)
      ++probe.positive;
    else if (v < -cfg.tau_zero)
      ++probe.negative;
    else
      ++probe.near_zero;
    return true;
  });
  return probe;
}

int numeric_rank(std::vector<std::vector<double>> m, double tolerance) {
  if (m.empty() || m[0].empty()) return 0;
  const std::size_t rows = m.size(), cols = m[0].size();
  double max_entry = 0;
  for (const auto& row : m)
    for (double v : row) max_entry = std::max(max_entry, std::abs(v));
  const double threshold = tolerance * std::max(1.0, max_entry);

  std::vector<bool> row_used(rows, false);
  int rank = 0;
  for (std::size_t step = 0; step < std::min(rows, cols); ++step) {
    // complete pivoting over the remaining block
    double best = 0;
    std::size_t pr = 0, pc = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_used[r]) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        if (std::abs(m[r][c]) > best) {
          best = std::abs(m[r][c]);
          pr = r;
          pc = c;
        }
      }
    }
    if (best <= threshold) break;
    row_used[pr] = true;
    ++rank;
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_used[r] || m[r][pc] == 0.0) continue;
      double factor = m[r][pc] / m[pr][pc];
      for (std::size_t c = 0; c < cols; ++c) m[r][c] -= factor * m[pr][c];
      m[r][pc] = 0.0;
    }
  }
  return rank;
}

}  // namespace flatcheck
