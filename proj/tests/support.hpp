#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "projsum/linalg.hpp"
#include "projsum/scalar.hpp"

namespace testing_support {

using projsum::Mat;
using projsum::Rational;
using projsum::Vec;

inline Rational Q(const std::string& s) { return projsum::parse_rational(s); }

inline Mat diag_of(const std::vector<Rational>& d) {
  std::vector<double> x;
  for (const auto& r : d) x.push_back(projsum::to_double(r));
  return projsum::diagonal_matrix(x);
}

inline double projection_defect(const Mat& p) { return std::max((p * p - p).norm(), (p - p.transpose()).norm()); }

/// Random rational in (0, hi] with denominator at most max_den.
inline Rational random_rational(std::mt19937_64& rng, long long hi, long long max_den) {
  std::uniform_int_distribution<long long> den(1, max_den);
  long long q = den(rng);
  std::uniform_int_distribution<long long> num(1, hi * q);
  return Rational(num(rng), q);
}

/// Random diagonal in (0,4]^n with integer trace >= n.
inline std::vector<Rational> random_feasible_diagonal(std::mt19937_64& rng, int n) {
  for (;;) {
    std::vector<Rational> d;
    Rational t = 0;
    for (int i = 0; i + 1 < n; ++i) {
      d.push_back(random_rational(rng, 4, 12));
      t += d.back();
    }
    Rational k = projsum::floor_of(t) + 1;
    if (k < n) k = n;
    Rational last = k - t;
    if (last > 0 && last <= 4) {
      d.push_back(last);
      std::shuffle(d.begin(), d.end(), rng);
      return d;
    }
  }
}

/// Shuffled diagonal where every t in (0,1) appears alongside 2-t, plus
/// some eigenvalues 1 and 2.
inline std::vector<Rational> random_symmetric_diagonal(std::mt19937_64& rng, int max_rank) {
  std::uniform_int_distribution<int> pairs_dist(0, max_rank / 2), extra(0, 2);
  std::vector<Rational> d;
  int pairs = pairs_dist(rng);
  for (int k = 0; k < pairs; ++k) {
    Rational t;
    do t = random_rational(rng, 1, 16);
    while (t >= 1);
    d.push_back(t);
    d.push_back(2 - t);
  }
  for (int k = extra(rng); k > 0 && static_cast<int>(d.size()) < max_rank; --k) d.push_back(1);
  for (int k = extra(rng); k > 0 && static_cast<int>(d.size()) < max_rank; --k) d.push_back(2);
  if (d.empty()) d.push_back(1);
  std::shuffle(d.begin(), d.end(), rng);
  return d;
}

}  // namespace testing_support
