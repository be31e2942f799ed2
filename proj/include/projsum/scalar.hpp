#pragma once

// Scalar layer shared by every module.  Two arithmetic modes are supported:
// exact rationals (GMP-backed) whenever every input is rational, and binary
// floating point otherwise.  Algorithms are templates over the scalar type and
// query scalar_traits for the equality rule: exact comparison for Rational,
// absolute tolerance for double.

#include <boost/multiprecision/gmp.hpp>

#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

#include "projsum/error.hpp"

namespace projsum {

using Rational = boost::multiprecision::mpq_rational;
using BigInt = boost::multiprecision::mpz_int;

/// Default tolerance replacing equality in floating-point mode.
inline constexpr double kFloatTol = 1e-9;

template <class T>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static constexpr const char* name = "float";
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool exact = true;
  static constexpr const char* name = "exact";
};

template <class T>
concept Scalar = requires { scalar_traits<T>::exact; };

template <Scalar T>
inline constexpr bool is_exact_v = scalar_traits<T>::exact;

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.convert_to<double>(); }

template <Scalar T>
T make_scalar(long long num, long long den = 1) {
  if constexpr (is_exact_v<T>) {
    return Rational(num, den);
  } else {
    return static_cast<double>(num) / static_cast<double>(den);
  }
}

template <Scalar T>
bool is_zero(const T& x, double tol = kFloatTol) {
  if constexpr (is_exact_v<T>) {
    (void)tol;
    return x == 0;
  } else {
    return std::abs(x) <= tol;
  }
}

template <Scalar T>
bool approx_eq(const T& a, const T& b, double tol = kFloatTol) {
  return is_zero<T>(T(a - b), tol);
}

/// -1, 0 or +1, with the float-mode dead zone of width tol around zero.
template <Scalar T>
int sign_of(const T& x, double tol = kFloatTol) {
  if (is_zero<T>(x, tol)) return 0;
  return x > 0 ? 1 : -1;
}

inline Rational floor_of(const Rational& x) {
  BigInt q;
  mpz_fdiv_q(q.backend().data(), numerator(x).backend().data(), denominator(x).backend().data());
  return Rational(q);
}
inline double floor_of(double x) { return std::floor(x); }

inline Rational ceil_of(const Rational& x) {
  BigInt q;
  mpz_cdiv_q(q.backend().data(), numerator(x).backend().data(), denominator(x).backend().data());
  return Rational(q);
}
inline double ceil_of(double x) { return std::ceil(x); }

inline bool is_integer(const Rational& x) { return denominator(x) == 1; }

/// Nearest integer if x is integral (exactly, or within tol in float mode).
template <Scalar T>
std::optional<long long> integral_value(const T& x, double tol = kFloatTol) {
  if constexpr (is_exact_v<T>) {
    (void)tol;
    if (!is_integer(x)) return std::nullopt;
    return numerator(x).template convert_to<long long>();
  } else {
    double r = std::round(x);
    if (std::abs(x - r) > tol) return std::nullopt;
    return static_cast<long long>(r);
  }
}

template <Scalar T>
T ipow(T base, unsigned long long n) {
  T out = make_scalar<T>(1);
  while (n) {
    if (n & 1ULL) out *= base;
    n >>= 1ULL;
    if (n) base *= base;
  }
  return out;
}

template <Scalar T>
T abs_of(const T& x) {
  return x < 0 ? T(-x) : x;
}

/// sqrt always leaves the exact field; vectors are carried in double.
template <Scalar T>
double sqrt_d(const T& x) {
  double d = to_double(x);
  return d <= 0.0 ? 0.0 : std::sqrt(d);
}

inline std::string to_string(const Rational& x) {
  if (denominator(x) == 1) return numerator(x).str();
  return numerator(x).str() + "/" + denominator(x).str();
}

/// Shortest decimal that round-trips.
inline std::string to_string(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Parses "p", "p/q", or a finite decimal literal ("1.25", "-3e-2") into an
/// exact rational.  Decimal literals are read exactly (1.1 is 11/10).
inline Rational parse_rational(std::string_view s) {
  auto bad = [&]() -> Rational { fail(ErrorCode::Parse, "not a rational number: '" + std::string(s) + "'"); };
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return bad();
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    std::string num(s.substr(0, slash)), den(s.substr(slash + 1));
    if (num.empty() || den.empty()) return bad();
    try {
      BigInt n(num), d(den);
      if (d == 0) fail(ErrorCode::Parse, "zero denominator in '" + std::string(s) + "'");
      return Rational(n, d);
    } catch (const std::runtime_error&) {
      return bad();
    }
  }
  // decimal with optional exponent
  std::string mant(s);
  long long exp10 = 0;
  if (auto e = mant.find_first_of("eE"); e != std::string::npos) {
    std::string ex = mant.substr(e + 1);
    mant = mant.substr(0, e);
    auto r = std::from_chars(ex.data(), ex.data() + ex.size(), exp10);
    if (r.ec != std::errc() || r.ptr != ex.data() + ex.size()) return bad();
  }
  bool neg = false;
  if (!mant.empty() && (mant[0] == '-' || mant[0] == '+')) {
    neg = mant[0] == '-';
    mant.erase(0, 1);
  }
  std::string digits;
  long long frac = 0;
  bool seen_dot = false;
  for (char c : mant) {
    if (c == '.') {
      if (seen_dot) return bad();
      seen_dot = true;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_dot) ++frac;
    } else {
      return bad();
    }
  }
  if (digits.empty()) return bad();
  BigInt n(digits);
  Rational out;
  long long shift = exp10 - frac;
  BigInt ten(10);
  BigInt scale = boost::multiprecision::pow(ten, static_cast<unsigned>(shift < 0 ? -shift : shift));
  out = shift < 0 ? Rational(n, scale) : Rational(n * scale);
  return neg ? Rational(-out) : out;
}

/// A nonnegative quantity that may be +infinity (traces of infinite parts).
template <Scalar T>
struct Extended {
  bool infinite = false;
  T value{};

  static Extended inf() { return Extended{true, T{}}; }
  static Extended finite(T v) { return Extended{false, std::move(v)}; }

  Extended& operator+=(const Extended& o) {
    if (o.infinite) infinite = true;
    if (!infinite) value += o.value;
    return *this;
  }
  std::string str() const { return infinite ? std::string("inf") : to_string(value); }
};

}  // namespace projsum
