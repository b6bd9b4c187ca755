#ifndef FLATCHECK_RATIONAL_HPP
#define FLATCHECK_RATIONAL_HPP

#include <cstdint>
#include <numeric>
#include <string>

#include "flatcheck/errors.hpp"

namespace flatcheck {

/// Exact rational number on 64-bit numerator/denominator, always stored
/// reduced with a positive denominator. Intermediate products go through
/// 128-bit arithmetic; a result that does not fit 64 bits throws ExprError.
class Rat {
 public:
  constexpr Rat() : num_(0), den_(1) {}
  Rat(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit on purpose
  Rat(std::int64_t n, std::int64_t d) { assign(n, d); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_integer() const { return den_ == 1; }
  bool is_negative() const { return num_ < 0; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rat operator+(const Rat& a, const Rat& b) {
    return make128(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Rat operator-(const Rat& a, const Rat& b) {
    return make128(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Rat operator*(const Rat& a, const Rat& b) {
    return make128(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
  }
  friend Rat operator/(const Rat& a, const Rat& b) {
    if (b.num_ == 0) throw ExprError("rational division by zero");
    return make128(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
  }
  Rat operator-() const {
    Rat r;
    r.num_ = -num_;
    r.den_ = den_;
    return r;
  }

  friend bool operator==(const Rat& a, const Rat& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
  friend bool operator<(const Rat& a, const Rat& b) { return i128(a.num_) * b.den_ < i128(b.num_) * a.den_; }

  /// Integer power; e must be modest, base reduced.
  Rat pow(int e) const {
    if (e == 0) return Rat(1);
    Rat base = e > 0 ? *this : Rat(1) / *this;
    int k = e > 0 ? e : -e;
    Rat acc(1);
    for (int i = 0; i < k; ++i) acc = acc * base;
    return acc;
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

 private:
  using i128 = __int128;

  void assign(std::int64_t n, std::int64_t d) {
    if (d == 0) throw ExprError("rational with zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    num_ = n;
    den_ = d;
  }

  static Rat make128(i128 n, i128 d) {
    if (d == 0) throw ExprError("rational with zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    i128 an = n < 0 ? -n : n;
    i128 g = gcd128(an, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX) throw ExprError("rational overflow");
    Rat r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }

  static i128 gcd128(i128 a, i128 b) {
    while (b != 0) {
      i128 t = a % b;
      a = b;
      b = t;
    }
    return a < 0 ? -a : a;
  }

  std::int64_t num_;
  std::int64_t den_;
};

}  // namespace flatcheck

#endif
