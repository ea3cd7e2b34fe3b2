#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spca {

// invalid arguments / broken preconditions, detected before any computation
class domain_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// failure at run time: divergent iterate, singular linear system, lost bracket
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// file / stream trouble; kept separate from numerics for exit-code mapping
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// log(e^x + e^y), safe against overflow and -inf arguments
inline double logaddexp(double x, double y) {
  if (x == neg_inf) return y;
  if (y == neg_inf) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(std::min(x, y) - m));
}

// logistic sigmoid evaluated without overflow in either tail
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace spca
