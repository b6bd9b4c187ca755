#ifndef FLATCHECK_EXPR_HPP
#define FLATCHECK_EXPR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flatcheck/rational.hpp"

namespace flatcheck {

enum class Kind : std::uint8_t {
  Rational,  ///< exact rational constant
  Constant,  ///< named symbolic constant (eps, R, Omega, ...)
  Var,       ///< variable reference
  Add,       ///< n-ary sum
  Mul,       ///< n-ary product
  Neg,       ///< unary negation
  Div,       ///< binary quotient
  Pow,       ///< integer power, exponent >= 2
  Fun,       ///< unary function application
};

enum class Fn : std::uint8_t { Sin, Cos, Tan, Arcsin, Sqrt, Exp, Log };

const char* fn_name(Fn f);

/// Immutable symbolic expression with structural sharing. Copying an Expr
/// copies a handle; nodes are never mutated after construction. Equality
/// is structural; semantic equality is decided by sampling (see is_zero).
class Expr {
 public:
  struct Node {
    Kind kind;
    Fn fn = Fn::Sin;
    int exponent = 0;
    Rat value;
    std::string name;
    std::vector<Expr> kids;
    std::size_t hash = 0;
    std::size_t size = 1;  // node count of the subtree
  };

  Expr() : Expr(rational(Rat(0))) {}

  // -- factories ------------------------------------------------------
  static Expr rational(const Rat& r);
  static Expr integer(std::int64_t n) { return rational(Rat(n)); }
  static Expr constant(const std::string& name);
  static Expr variable(const std::string& name);
  static Expr add(std::vector<Expr> terms);
  static Expr mul(std::vector<Expr> factors);
  static Expr neg(const Expr& e);
  static Expr div(const Expr& num, const Expr& den);
  static Expr pow(const Expr& base, int exponent);
  static Expr apply(Fn f, const Expr& arg);

  // -- accessors ------------------------------------------------------
  Kind kind() const { return node_->kind; }
  Fn fn() const { return node_->fn; }
  int exponent() const { return node_->exponent; }
  const Rat& value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  const std::vector<Expr>& kids() const { return node_->kids; }
  std::size_t hash() const { return node_->hash; }
  std::size_t size() const { return node_->size; }
  const Node* raw() const { return node_.get(); }

  bool is_rational() const { return kind() == Kind::Rational; }
  bool is_zero_literal() const { return is_rational() && value().is_zero(); }
  bool is_one_literal() const { return is_rational() && value().is_one(); }

  /// Structural equality (pointer short-circuit, then hash, then shape).
  friend bool operator==(const Expr& a, const Expr& b) { return equal(a, b); }
  friend bool operator!=(const Expr& a, const Expr& b) { return !equal(a, b); }

  static bool equal(const Expr& a, const Expr& b);
  /// Total order used for canonical sorting of sums/products.
  static int compare(const Expr& a, const Expr& b);

  std::string str() const;

  // convenience operators (light normalization only)
  friend Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }
  friend Expr operator-(const Expr& a, const Expr& b) { return add({a, neg(b)}); }
  friend Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }
  friend Expr operator/(const Expr& a, const Expr& b) { return div(a, b); }
  Expr operator-() const { return neg(*this); }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Node&& n);

  std::shared_ptr<const Node> node_;
};

/// Partial derivative with respect to a variable or symbolic constant name,
/// by the structural rules of the fixed function set.
Expr differentiate(const Expr& e, const std::string& var);

/// Simultaneous capture-free substitution of variables/constants by name.
Expr substitute(const Expr& e, const std::map<std::string, Expr>& bindings);

/// Names of all variables and symbolic constants appearing in e.
void collect_symbols(const Expr& e, std::map<std::string, Kind>& out);

/// Collect Var names only.
std::vector<std::string> free_variables(const Expr& e);

}  // namespace flatcheck

#endif
