#include "flatcheck/expr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "flatcheck/errors.hpp"

namespace flatcheck {

const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Tan: return "tan";
    case Fn::Arcsin: return "arcsin";
    case Fn::Sqrt: return "sqrt";
    case Fn::Exp: return "exp";
    case Fn::Log: return "log";
  }
  return "?";
}

namespace {

std::size_t hash_combine(std::size_t h, std::size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::size_t hash_string(const std::string& s) { return std::hash<std::string>{}(s); }

}  // namespace

Expr Expr::make(Node&& n) {
  std::size_t h = static_cast<std::size_t>(n.kind) * 0x100000001b3ULL;
  switch (n.kind) {
    case Kind::Rational:
      h = hash_combine(h, std::hash<std::int64_t>{}(n.value.num()));
      h = hash_combine(h, std::hash<std::int64_t>{}(n.value.den()));
      break;
    case Kind::Constant:
    case Kind::Var:
      h = hash_combine(h, hash_string(n.name));
      break;
    case Kind::Fun:
      h = hash_combine(h, static_cast<std::size_t>(n.fn));
      break;
    case Kind::Pow:
      h = hash_combine(h, static_cast<std::size_t>(n.exponent));
      break;
    default:
      break;
  }
  std::size_t sz = 1;
  for (const Expr& k : n.kids) {
    h = hash_combine(h, k.hash());
    sz += k.size();
  }
  n.hash = h;
  n.size = sz;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::rational(const Rat& r) {
  Node n;
  n.kind = Kind::Rational;
  n.value = r;
  return make(std::move(n));
}

Expr Expr::constant(const std::string& name) {
  Node n;
  n.kind = Kind::Constant;
  n.name = name;
  return make(std::move(n));
}

Expr Expr::variable(const std::string& name) {
  Node n;
  n.kind = Kind::Var;
  n.name = name;
  return make(std::move(n));
}

Expr Expr::add(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  Rat c(0);
  for (Expr& t : terms) {
    if (t.kind() == Kind::Add) {
      for (const Expr& k : t.kids()) {
        if (k.is_rational())
          c = c + k.value();
        else
          flat.push_back(k);
      }
    } else if (t.is_rational()) {
      c = c + t.value();
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (!c.is_zero()) flat.push_back(rational(c));
  if (flat.empty()) return rational(Rat(0));
  if (flat.size() == 1) return flat[0];
  Node n;
  n.kind = Kind::Add;
  n.kids = std::move(flat);
  return make(std::move(n));
}

Expr Expr::mul(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  Rat c(1);
  for (Expr& f : factors) {
    if (f.kind() == Kind::Mul) {
      for (const Expr& k : f.kids()) {
        if (k.is_rational())
          c = c * k.value();
        else
          flat.push_back(k);
      }
    } else if (f.is_rational()) {
      c = c * f.value();
    } else {
      flat.push_back(std::move(f));
    }
  }
  if (c.is_zero()) return rational(Rat(0));
  if (!c.is_one()) {
    flat.insert(flat.begin(), rational(c));
  }
  if (flat.empty()) return rational(Rat(1));
  if (flat.size() == 1) return flat[0];
  Node n;
  n.kind = Kind::Mul;
  n.kids = std::move(flat);
  return make(std::move(n));
}

Expr Expr::neg(const Expr& e) {
  if (e.is_rational()) return rational(-e.value());
  if (e.kind() == Kind::Neg) return e.kids()[0];
  Node n;
  n.kind = Kind::Neg;
  n.kids = {e};
  return make(std::move(n));
}

Expr Expr::div(const Expr& num, const Expr& den) {
  if (den.is_rational()) {
    if (den.value().is_zero()) throw ExprError("division by zero constant");
    if (den.value().is_one()) return num;
    if (num.is_rational()) return rational(num.value() / den.value());
    return mul({rational(Rat(1) / den.value()), num});
  }
  if (num.is_zero_literal()) return num;
  Node n;
  n.kind = Kind::Div;
  n.kids = {num, den};
  return make(std::move(n));
}

Expr Expr::pow(const Expr& base, int exponent) {
  if (exponent == 0) return rational(Rat(1));
  if (exponent == 1) return base;
  if (exponent < 0) return div(rational(Rat(1)), pow(base, -exponent));
  if (base.is_rational()) return rational(base.value().pow(exponent));
  if (base.kind() == Kind::Pow) return pow(base.kids()[0], base.exponent() * exponent);
  Node n;
  n.kind = Kind::Pow;
  n.exponent = exponent;
  n.kids = {base};
  return make(std::move(n));
}

Expr Expr::apply(Fn f, const Expr& arg) {
  if (arg.is_rational()) {
    const Rat& r = arg.value();
    if (r.is_zero()) {
      switch (f) {
        case Fn::Sin:
        case Fn::Tan:
        case Fn::Arcsin:
        case Fn::Sqrt:
          return rational(Rat(0));
        case Fn::Cos:
        case Fn::Exp:
          return rational(Rat(1));
        case Fn::Log:
          throw ExprError("log(0)");
      }
    }
    if (r.is_one()) {
      if (f == Fn::Sqrt) return rational(Rat(1));
      if (f == Fn::Log) return rational(Rat(0));
    }
    if (f == Fn::Sqrt && !r.is_negative()) {
      // exact square roots of perfect-square rationals
      auto isqrt = [](std::int64_t v) -> std::int64_t {
        if (v < 0) return -1;
        auto r0 = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
        for (std::int64_t cand = std::max<std::int64_t>(0, r0 - 2); cand <= r0 + 2; ++cand)
          if (cand * cand == v) return cand;
        return -1;
      };
      std::int64_t sn = isqrt(r.num()), sd = isqrt(r.den());
      if (sn >= 0 && sd > 0) return rational(Rat(sn, sd));
    }
  }
  Node n;
  n.kind = Kind::Fun;
  n.fn = f;
  n.kids = {arg};
  return make(std::move(n));
}

bool Expr::equal(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.hash() != b.hash() || a.kind() != b.kind() || a.size() != b.size()) return false;
  switch (a.kind()) {
    case Kind::Rational: return a.value() == b.value();
    case Kind::Constant:
    case Kind::Var: return a.name() == b.name();
    case Kind::Fun:
      if (a.fn() != b.fn()) return false;
      break;
    case Kind::Pow:
      if (a.exponent() != b.exponent()) return false;
      break;
    default: break;
  }
  if (a.kids().size() != b.kids().size()) return false;
  for (std::size_t i = 0; i < a.kids().size(); ++i)
    if (!equal(a.kids()[i], b.kids()[i])) return false;
  return true;
}

int Expr::compare(const Expr& a, const Expr& b) {
  if (a.raw() == b.raw()) return 0;
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  switch (a.kind()) {
    case Kind::Rational: {
      if (a.value() == b.value()) return 0;
      return a.value() < b.value() ? -1 : 1;
    }
    case Kind::Constant:
    case Kind::Var:
      return a.name().compare(b.name());
    case Kind::Fun:
      if (a.fn() != b.fn()) return a.fn() < b.fn() ? -1 : 1;
      break;
    case Kind::Pow:
      if (a.exponent() != b.exponent()) return a.exponent() < b.exponent() ? -1 : 1;
      break;
    default:
      break;
  }
  if (a.kids().size() != b.kids().size()) return a.kids().size() < b.kids().size() ? -1 : 1;
  for (std::size_t i = 0; i < a.kids().size(); ++i) {
    int c = compare(a.kids()[i], b.kids()[i]);
    if (c != 0) return c;
  }
  return 0;
}

// ---------------------------------------------------------------- printing

namespace {

// precedence: Add 1, Mul/Div 2, Neg 3, Pow 4, atoms 5
int precedence(const Expr& e) {
  switch (e.kind()) {
    case Kind::Add: return 1;
    case Kind::Mul:
    case Kind::Div: return 2;
    case Kind::Neg: return 3;
    case Kind::Pow: return 4;
    default: return 5;
  }
}

void print(std::ostringstream& os, const Expr& e, int parent_prec);

void print_wrapped(std::ostringstream& os, const Expr& e, int min_prec) {
  bool need = precedence(e) < min_prec;
  // negative rationals need parens inside products/powers
  if (e.is_rational() && e.value().is_negative() && min_prec >= 2) need = true;
  if (e.is_rational() && !e.value().is_integer() && min_prec >= 2) need = true;
  if (need) os << '(';
  print(os, e, 0);
  if (need) os << ')';
}

void print(std::ostringstream& os, const Expr& e, int) {
  switch (e.kind()) {
    case Kind::Rational:
      os << e.value().str();
      return;
    case Kind::Constant:
    case Kind::Var:
      os << e.name();
      return;
    case Kind::Add: {
      bool first = true;
      for (const Expr& t : e.kids()) {
        // render "+ (-c)*x" as "- c*x"
        bool negative = false;
        Expr shown = t;
        if (t.is_rational() && t.value().is_negative()) {
          negative = true;
          shown = Expr::rational(-t.value());
        } else if (t.kind() == Kind::Neg) {
          negative = true;
          shown = t.kids()[0];
        } else if (t.kind() == Kind::Mul && t.kids()[0].is_rational() &&
                   t.kids()[0].value().is_negative()) {
          negative = true;
          std::vector<Expr> ks = t.kids();
          ks[0] = Expr::rational(-ks[0].value());
          shown = Expr::mul(std::move(ks));
        }
        if (first) {
          if (negative) os << '-';
          first = false;
        } else {
          os << (negative ? " - " : " + ");
        }
        print_wrapped(os, shown, 2);
      }
      return;
    }
    case Kind::Mul: {
      bool first = true;
      std::size_t start = 0;
      const std::vector<Expr>& ks = e.kids();
      if (ks[0].is_rational()) {
        const Rat& c = ks[0].value();
        if (c == Rat(-1)) {
          os << '-';
          start = 1;
        }
      }
      for (std::size_t i = start; i < ks.size(); ++i) {
        if (!first) os << '*';
        print_wrapped(os, ks[i], 3);
        first = false;
      }
      return;
    }
    case Kind::Neg:
      os << '-';
      print_wrapped(os, e.kids()[0], 3);
      return;
    case Kind::Div:
      print_wrapped(os, e.kids()[0], 3);
      os << '/';
      print_wrapped(os, e.kids()[1], 4);
      return;
    case Kind::Pow:
      print_wrapped(os, e.kids()[0], 5);
      os << '^' << e.exponent();
      return;
    case Kind::Fun:
      os << fn_name(e.fn()) << '(';
      print(os, e.kids()[0], 0);
      os << ')';
      return;
  }
}

}  // namespace

std::string Expr::str() const {
  std::ostringstream os;
  print(os, *this, 0);
  return os.str();
}

// ---------------------------------------------------------- differentiate

Expr differentiate(const Expr& e, const std::string& var) {
  using E = Expr;
  switch (e.kind()) {
    case Kind::Rational:
      return E::integer(0);
    case Kind::Constant:
    case Kind::Var:
      return E::integer(e.name() == var ? 1 : 0);
    case Kind::Add: {
      std::vector<Expr> terms;
      terms.reserve(e.kids().size());
      for (const Expr& k : e.kids()) terms.push_back(differentiate(k, var));
      return E::add(std::move(terms));
    }
    case Kind::Mul: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < e.kids().size(); ++i) {
        Expr d = differentiate(e.kids()[i], var);
        if (d.is_zero_literal()) continue;
        std::vector<Expr> prod;
        prod.reserve(e.kids().size());
        for (std::size_t j = 0; j < e.kids().size(); ++j) prod.push_back(j == i ? d : e.kids()[j]);
        terms.push_back(E::mul(std::move(prod)));
      }
      return E::add(std::move(terms));
    }
    case Kind::Neg:
      return E::neg(differentiate(e.kids()[0], var));
    case Kind::Div: {
      const Expr& num = e.kids()[0];
      const Expr& den = e.kids()[1];
      Expr dn = differentiate(num, var);
      Expr dd = differentiate(den, var);
      if (dd.is_zero_literal()) return E::div(dn, den);
      return E::div(dn * den - num * dd, E::pow(den, 2));
    }
    case Kind::Pow: {
      Expr d = differentiate(e.kids()[0], var);
      if (d.is_zero_literal()) return d;
      return E::integer(e.exponent()) * E::pow(e.kids()[0], e.exponent() - 1) * d;
    }
    case Kind::Fun: {
      const Expr& a = e.kids()[0];
      Expr d = differentiate(a, var);
      if (d.is_zero_literal()) return d;
      Expr outer;
      switch (e.fn()) {
        case Fn::Sin: outer = E::apply(Fn::Cos, a); break;
        case Fn::Cos: outer = E::neg(E::apply(Fn::Sin, a)); break;
        case Fn::Tan: outer = E::integer(1) + E::pow(E::apply(Fn::Tan, a), 2); break;
        case Fn::Arcsin:
          outer = E::div(E::integer(1), E::apply(Fn::Sqrt, E::integer(1) - E::pow(a, 2)));
          break;
        case Fn::Sqrt:
          outer = E::div(E::integer(1), E::integer(2) * E::apply(Fn::Sqrt, a));
          break;
        case Fn::Exp: outer = e; break;
        case Fn::Log: outer = E::div(E::integer(1), a); break;
      }
      return outer * d;
    }
  }
  throw ExprError("unreachable node kind in differentiate");
}

// ------------------------------------------------------------ substitute

namespace {

Expr substitute_impl(const Expr& e, const std::map<std::string, Expr>& b,
                     std::unordered_map<const Expr::Node*, Expr>& memo) {
  switch (e.kind()) {
    case Kind::Rational:
      return e;
    case Kind::Constant:
    case Kind::Var: {
      auto it = b.find(e.name());
      return it == b.end() ? e : it->second;
    }
    default:
      break;
  }
  auto hit = memo.find(e.raw());
  if (hit != memo.end()) return hit->second;
  std::vector<Expr> kids;
  kids.reserve(e.kids().size());
  bool changed = false;
  for (const Expr& k : e.kids()) {
    kids.push_back(substitute_impl(k, b, memo));
    if (kids.back().raw() != k.raw()) changed = true;
  }
  Expr out = e;
  if (changed) {
    switch (e.kind()) {
      case Kind::Add: out = Expr::add(std::move(kids)); break;
      case Kind::Mul: out = Expr::mul(std::move(kids)); break;
      case Kind::Neg: out = Expr::neg(kids[0]); break;
      case Kind::Div: out = Expr::div(kids[0], kids[1]); break;
      case Kind::Pow: out = Expr::pow(kids[0], e.exponent()); break;
      case Kind::Fun: out = Expr::apply(e.fn(), kids[0]); break;
      default: break;
    }
  }
  memo.emplace(e.raw(), out);
  return out;
}

}  // namespace

Expr substitute(const Expr& e, const std::map<std::string, Expr>& bindings) {
  if (bindings.empty()) return e;
  std::unordered_map<const Expr::Node*, Expr> memo;
  return substitute_impl(e, bindings, memo);
}

void collect_symbols(const Expr& e, std::map<std::string, Kind>& out) {
  if (e.kind() == Kind::Var || e.kind() == Kind::Constant) {
    out.emplace(e.name(), e.kind());
    return;
  }
  for (const Expr& k : e.kids()) collect_symbols(k, out);
}

std::vector<std::string> free_variables(const Expr& e) {
  std::map<std::string, Kind> syms;
  collect_symbols(e, syms);
  std::vector<std::string> out;
  for (const auto& [name, kind] : syms)
    if (kind == Kind::Var) out.push_back(name);
  return out;
}

}  // namespace flatcheck
