#include "flatcheck/simplify.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "flatcheck/errors.hpp"

namespace flatcheck {

namespace detail {

void Factors::merge(const Expr& base, int power) {
  if (power == 0) return;
  auto it = std::lower_bound(powers.begin(), powers.end(), base,
                             [](const auto& p, const Expr& b) { return Expr::compare(p.first, b) < 0; });
  if (it != powers.end() && Expr::compare(it->first, base) == 0) {
    it->second += power;
    if (it->second == 0) powers.erase(it);
  } else {
    powers.insert(it, {base, power});
  }
}

void decompose_into(const Expr& e, int mult, Factors& out) {
  switch (e.kind()) {
    case Kind::Rational:
      out.coeff = out.coeff * e.value().pow(mult);
      return;
    case Kind::Mul:
      for (const Expr& k : e.kids()) decompose_into(k, mult, out);
      return;
    case Kind::Neg:
      out.coeff = out.coeff * Rat(-1).pow(mult);
      decompose_into(e.kids()[0], mult, out);
      return;
    case Kind::Div:
      decompose_into(e.kids()[0], mult, out);
      decompose_into(e.kids()[1], -mult, out);
      return;
    case Kind::Pow:
      decompose_into(e.kids()[0], mult * e.exponent(), out);
      return;
    case Kind::Fun:
      if (e.fn() == Fn::Sqrt) {
        // sqrt(t)^k -> t^(k/2) * sqrt(t)^(k mod 2); argument nonnegative on domain
        int k = mult;
        int whole = (k >= 0 ? k / 2 : -((-k) / 2));
        int rest = k - 2 * whole;
        if (whole != 0) out.merge(e.kids()[0], whole);
        if (rest != 0) out.merge(e, rest);
        return;
      }
      out.merge(e, mult);
      return;
    default:
      out.merge(e, mult);
      return;
  }
}

Factors decompose(const Expr& e) {
  Factors f;
  decompose_into(e, 1, f);
  return f;
}

Expr rebuild(const Factors& f) {
  std::vector<Expr> num, den;
  for (const auto& [base, power] : f.powers) {
    if (power > 0)
      num.push_back(Expr::pow(base, power));
    else
      den.push_back(Expr::pow(base, -power));
  }
  Rat c = f.coeff;
  if (den.empty()) {
    num.insert(num.begin(), Expr::rational(c));
    return Expr::mul(std::move(num));
  }
  // split the rational between numerator and denominator for readability
  num.insert(num.begin(), Expr::rational(Rat(c.num())));
  den.insert(den.begin(), Expr::rational(Rat(c.den())));
  return Expr::div(Expr::mul(std::move(num)), Expr::mul(std::move(den)));
}

}  // namespace detail

namespace {

using detail::decompose;
using detail::Factors;
using detail::rebuild;

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return Expr::compare(a, b) < 0; }
};

class Simplifier {
 public:
  Expr run(const Expr& e) {
    auto it = memo_.find(e.raw());
    if (it != memo_.end()) return it->second;
    Expr out = dispatch(e);
    memo_.emplace(e.raw(), out);
    return out;
  }

 private:
  Expr dispatch(const Expr& e) {
    switch (e.kind()) {
      case Kind::Rational:
      case Kind::Constant:
      case Kind::Var:
        return e;
      case Kind::Neg:
        return simplify_product({Expr::integer(-1), run(e.kids()[0])});
      case Kind::Mul: {
        std::vector<Expr> kids;
        kids.reserve(e.kids().size());
        for (const Expr& k : e.kids()) kids.push_back(run(k));
        return simplify_product(std::move(kids));
      }
      case Kind::Div:
        return simplify_quotient(run(e.kids()[0]), run(e.kids()[1]));
      case Kind::Pow:
        return simplify_power(run(e.kids()[0]), e.exponent());
      case Kind::Fun:
        return simplify_function(e.fn(), run(e.kids()[0]));
      case Kind::Add: {
        std::vector<Expr> terms;
        terms.reserve(e.kids().size());
        for (const Expr& k : e.kids()) {
          Expr t = run(k);
          if (t.kind() == Kind::Add) {
            for (const Expr& kk : t.kids()) terms.push_back(kk);
          } else {
            terms.push_back(t);
          }
        }
        return simplify_sum(std::move(terms));
      }
    }
    throw ExprError("unreachable node kind in simplify");
  }

  Expr simplify_product(std::vector<Expr> kids) {
    Factors f;
    for (const Expr& k : kids) detail::decompose_into(k, 1, f);
    if (f.coeff.is_zero()) return Expr::integer(0);
    return rebuild(f);
  }

  Expr simplify_quotient(const Expr& num, const Expr& den) {
    Factors f = decompose(num);
    if (f.coeff.is_zero()) return Expr::integer(0);
    Factors d = decompose(den);
    if (d.coeff.is_zero()) throw ExprError("division by zero after simplification");
    f.coeff = f.coeff / d.coeff;
    for (const auto& [base, power] : d.powers) f.merge(base, -power);
    return rebuild(f);
  }

  Expr simplify_power(const Expr& base, int exponent) {
    if (exponent == 0) return Expr::integer(1);
    if (exponent == 1) return base;
    switch (base.kind()) {
      case Kind::Mul:
      case Kind::Div:
      case Kind::Neg:
      case Kind::Pow: {
        Factors f;
        detail::decompose_into(base, exponent, f);
        return rebuild(f);
      }
      case Kind::Fun:
        if (base.fn() == Fn::Sqrt) {
          Factors f;
          detail::decompose_into(base, exponent, f);
          return rebuild(f);
        }
        return Expr::pow(base, exponent);
      default:
        return Expr::pow(base, exponent);
    }
  }

  Expr simplify_function(Fn fn, const Expr& arg) {
    bool odd = (fn == Fn::Sin || fn == Fn::Tan || fn == Fn::Arcsin);
    bool even = (fn == Fn::Cos);
    if (odd || even) {
      Factors f = decompose(arg);
      if (f.coeff.is_negative()) {
        Factors flipped = f;
        flipped.coeff = -flipped.coeff;
        Expr inner = Expr::apply(fn, rebuild(flipped));
        return even ? inner : simplify_product({Expr::integer(-1), inner});
      }
    }
    return Expr::apply(fn, arg);
  }

  Expr simplify_sum(std::vector<Expr> terms) {
    // hoist quotients: combine everything over the least common denominator
    bool has_quotient = false;
    std::vector<Factors> decomps;
    decomps.reserve(terms.size());
    for (const Expr& t : terms) {
      decomps.push_back(decompose(t));
      for (const auto& [base, power] : decomps.back().powers)
        if (power < 0) has_quotient = true;
    }
    if (!has_quotient) return collect(terms);

    Factors lcm;  // per-base max denominator power
    for (const Factors& f : decomps) {
      for (const auto& [base, power] : f.powers) {
        if (power >= 0) continue;
        int need = -power;
        auto it = std::lower_bound(
            lcm.powers.begin(), lcm.powers.end(), base,
            [](const auto& p, const Expr& b) { return Expr::compare(p.first, b) < 0; });
        if (it != lcm.powers.end() && Expr::compare(it->first, base) == 0)
          it->second = std::max(it->second, need);
        else
          lcm.powers.insert(it, {base, need});
      }
    }
    std::vector<Expr> scaled;
    scaled.reserve(decomps.size());
    for (const Factors& f : decomps) {
      Factors g = f;
      for (const auto& [base, power] : lcm.powers) g.merge(base, power);
      scaled.push_back(rebuild(g));
    }
    Expr numerator = collect(scaled);
    return simplify_quotient(numerator, rebuild(lcm));
  }

  // plain collection of Div-free terms; keys are monic products. A term that
  // is a rational multiple of a single sum is inlined so nested sums cancel.
  Expr collect(const std::vector<Expr>& terms) {
    std::map<Expr, Rat, ExprLess> bucket;
    std::vector<Expr> work = terms;
    for (std::size_t i = 0; i < work.size(); ++i) {
      Factors f = decompose(work[i]);
      if (f.coeff.is_zero()) continue;
      if (f.powers.size() == 1 && f.powers[0].second == 1 &&
          f.powers[0].first.kind() == Kind::Add) {
        Expr scale = Expr::rational(f.coeff);
        for (const Expr& kid : f.powers[0].first.kids())
          work.push_back(Expr::mul({scale, kid}));
        continue;
      }
      Rat c = f.coeff;
      f.coeff = Rat(1);
      Expr monic = rebuild(f);
      auto [it, inserted] = bucket.emplace(monic, c);
      if (!inserted) it->second = it->second + c;
    }
    collapse_pythagorean(bucket);
    std::vector<Expr> out;
    out.reserve(bucket.size());
    for (const auto& [monic, c] : bucket) {
      if (c.is_zero()) continue;
      out.push_back(Expr::mul({Expr::rational(c), monic}));
    }
    return Expr::add(std::move(out));
  }

  // c*sin(t)^2*R + c*cos(t)^2*R -> c*R
  void collapse_pythagorean(std::map<Expr, Rat, ExprLess>& bucket) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto it = bucket.begin(); it != bucket.end() && !changed; ++it) {
        if (it->second.is_zero()) continue;
        Factors f = decompose(it->first);
        for (std::size_t i = 0; i < f.powers.size(); ++i) {
          const Expr& base = f.powers[i].first;
          if (base.kind() != Kind::Fun || base.fn() != Fn::Sin || f.powers[i].second < 2) continue;
          Factors partner = f;
          partner.merge(base, -2);
          partner.merge(Expr::apply(Fn::Cos, base.kids()[0]), 2);
          Expr partner_key = rebuild(partner);
          auto pit = bucket.find(partner_key);
          if (pit == bucket.end() || !(pit->second == it->second)) continue;
          Rat c = it->second;
          Factors rest = f;
          rest.merge(base, -2);
          Expr rest_key = rebuild(rest);
          it->second = Rat(0);
          pit->second = Rat(0);
          auto [rit, inserted] = bucket.emplace(rest_key, c);
          if (!inserted) rit->second = rit->second + c;
          changed = true;
          break;
        }
      }
    }
  }

  std::unordered_map<const Expr::Node*, Expr> memo_;
};

}  // namespace

Expr simplify(const Expr& e) {
  Simplifier s;
  return s.run(e);
}

// ------------------------------------------------------------------ expand

namespace {

constexpr std::size_t kExpandTermCap = 4096;

// a sum-of-products representation; nullopt = bailed out
using TermList = std::vector<Expr>;

std::optional<TermList> expand_terms(const Expr& e);

std::optional<TermList> multiply_lists(const TermList& a, const TermList& b) {
  if (a.size() * b.size() > kExpandTermCap) return std::nullopt;
  TermList out;
  out.reserve(a.size() * b.size());
  for (const Expr& x : a)
    for (const Expr& y : b) out.push_back(Expr::mul({x, y}));
  return out;
}

std::optional<TermList> expand_terms(const Expr& e) {
  switch (e.kind()) {
    case Kind::Add: {
      TermList out;
      for (const Expr& k : e.kids()) {
        auto sub = expand_terms(k);
        if (!sub) return std::nullopt;
        out.insert(out.end(), sub->begin(), sub->end());
        if (out.size() > kExpandTermCap) return std::nullopt;
      }
      return out;
    }
    case Kind::Neg: {
      auto sub = expand_terms(e.kids()[0]);
      if (!sub) return std::nullopt;
      for (Expr& t : *sub) t = Expr::mul({Expr::integer(-1), t});
      return sub;
    }
    case Kind::Mul: {
      TermList acc = {Expr::integer(1)};
      for (const Expr& k : e.kids()) {
        auto sub = expand_terms(k);
        if (!sub) return std::nullopt;
        auto next = multiply_lists(acc, *sub);
        if (!next) return std::nullopt;
        acc = std::move(*next);
      }
      return acc;
    }
    case Kind::Pow: {
      if (e.exponent() >= 2 && e.exponent() <= 8 && e.kids()[0].kind() == Kind::Add) {
        auto base = expand_terms(e.kids()[0]);
        if (!base) return std::nullopt;
        TermList acc = *base;
        for (int i = 1; i < e.exponent(); ++i) {
          auto next = multiply_lists(acc, *base);
          if (!next) return std::nullopt;
          acc = std::move(*next);
        }
        return acc;
      }
      return TermList{e};
    }
    case Kind::Div: {
      auto num = expand_terms(e.kids()[0]);
      if (!num) return std::nullopt;
      TermList out;
      out.reserve(num->size());
      for (const Expr& t : *num) out.push_back(Expr::div(t, e.kids()[1]));
      return out;
    }
    default:
      return TermList{e};
  }
}

}  // namespace

Expr expand(const Expr& e) {
  auto terms = expand_terms(e);
  if (!terms) return e;
  return Expr::add(std::move(*terms));
}

// ---------------------------------------------------------- sqrt_of_square

namespace {

std::optional<Rat> rational_root(const Rat& r) {
  if (r.is_negative()) return std::nullopt;
  Expr root = Expr::apply(Fn::Sqrt, Expr::rational(r));
  if (!root.is_rational()) return std::nullopt;
  return root.value();
}

/// Graded-lex monomial order on multiplicative decompositions (a genuine
/// monomial order, needed for leading-term square-root extraction).
bool mono_less(const Factors& a, const Factors& b) {
  int da = 0, db = 0;
  for (const auto& [base, power] : a.powers) da += power;
  for (const auto& [base, power] : b.powers) db += power;
  if (da != db) return da < db;
  std::size_t i = 0, j = 0;
  while (i < a.powers.size() && j < b.powers.size()) {
    int c = Expr::compare(a.powers[i].first, b.powers[j].first);
    if (c != 0) return c > 0;  // smaller base = larger monomial: treat consistently
    if (a.powers[i].second != b.powers[j].second) return a.powers[i].second < b.powers[j].second;
    ++i;
    ++j;
  }
  return a.powers.size() < b.powers.size();
}

/// Square root of an expanded polynomial-style sum by leading monomials;
/// the result is verified structurally, so a failed extraction is harmless.
std::optional<Expr> polynomial_sqrt(const Expr& sum) {
  std::vector<Expr> terms =
      sum.kind() == Kind::Add ? sum.kids() : std::vector<Expr>{sum};
  auto leading = [](const Expr& e) -> std::optional<std::pair<Factors, Expr>> {
    std::vector<Expr> kids = e.kind() == Kind::Add ? e.kids() : std::vector<Expr>{e};
    std::optional<Factors> best;
    Expr best_term;
    for (const Expr& t : kids) {
      Factors f = decompose(t);
      if (f.coeff.is_zero()) continue;
      if (!best || mono_less(*best, f)) {
        best = f;
        best_term = t;
      }
    }
    if (!best) return std::nullopt;
    return std::make_pair(*best, best_term);
  };

  auto lead = leading(sum);
  if (!lead) return std::nullopt;
  Factors lf = lead->first;
  auto coeff_root = rational_root(lf.coeff);
  if (!coeff_root) return std::nullopt;
  Factors half;
  half.coeff = *coeff_root;
  for (const auto& [base, power] : lf.powers) {
    if (power % 2 != 0) return std::nullopt;
    half.merge(base, power / 2);
  }
  Expr r = rebuild(half);
  Expr two_r0 = simplify(Expr::integer(2) * r);

  const std::size_t max_steps = terms.size() + 8;
  for (std::size_t step = 0; step < max_steps; ++step) {
    Expr residual = simplify(expand(sum - r * r));
    if (residual.is_zero_literal()) return simplify(r);
    auto lr = leading(residual);
    if (!lr) return std::nullopt;
    Expr t = simplify(Expr::div(lr->second, two_r0));
    if (t.is_zero_literal()) return std::nullopt;
    r = simplify(r + t);
  }
  return std::nullopt;
}

std::optional<Expr> structural_root(const Expr& s) {
  if (s.kind() == Kind::Add) return polynomial_sqrt(s);
  Factors f = decompose(s);
  auto coeff_root = rational_root(f.coeff);
  if (!coeff_root) return std::nullopt;
  Factors half;
  half.coeff = *coeff_root;
  std::vector<std::pair<Expr, int>> odd_sums;
  for (const auto& [base, power] : f.powers) {
    if (power % 2 == 0) {
      half.merge(base, power / 2);
    } else if (base.kind() == Kind::Add) {
      odd_sums.emplace_back(base, power);
    } else {
      return std::nullopt;
    }
  }
  Expr out = rebuild(half);
  for (const auto& [base, power] : odd_sums) {
    auto root = polynomial_sqrt(simplify(expand(base)));
    if (!root) return std::nullopt;
    out = out * Expr::pow(*root, power);
  }
  return simplify(out);
}

}  // namespace

std::optional<Expr> sqrt_of_square(const Expr& e) {
  // best-effort: iterated expansion can overflow the exact rationals on
  // dense inputs, in which case the caller falls back to a sqrt node
  try {
    Expr s = simplify(e);
    if (auto r = structural_root(s)) return simplify(*r);
    Expr s2 = simplify(expand(s));
    if (auto r = structural_root(s2)) return simplify(*r);
  } catch (const ExprError&) {
  }
  return std::nullopt;
}

}  // namespace flatcheck
