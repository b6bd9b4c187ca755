#ifndef FLATCHECK_SIMPLIFY_HPP
#define FLATCHECK_SIMPLIFY_HPP

#include <optional>

#include "flatcheck/expr.hpp"

namespace flatcheck {

/// Best-effort simplification, equivalent on the model domain: constant
/// folding, term collection, quotient cancellation, sum-over-common-
/// denominator combining, sin^2+cos^2 collapse, sign normalization of
/// odd/even function arguments. Never required for the correctness of
/// verdicts; is_zero stays authoritative.
Expr simplify(const Expr& e);

/// Distributes products and integer powers over sums. Bails out (returning
/// the input subtree) past a term-count cap so pathological inputs stay
/// bounded.
Expr expand(const Expr& e);

/// Structural square root: succeeds when e simplifies to a product /
/// quotient of even powers and perfect-square rationals. Returns a root r
/// with r^2 == e on the domain (up to sign of r).
std::optional<Expr> sqrt_of_square(const Expr& e);

namespace detail {

/// Multiplicative decomposition coeff * prod(base^power).
struct Factors {
  Rat coeff{1};
  std::vector<std::pair<Expr, int>> powers;  // sorted by Expr::compare, power != 0

  void merge(const Expr& base, int power);
};

Factors decompose(const Expr& e);
Expr rebuild(const Factors& f);

}  // namespace detail

}  // namespace flatcheck

#endif
