#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "spca/common.hpp"

namespace spca {

enum class prior_family { gauss_bernoulli, bernoulli_spike, rademacher_bernoulli };

// Declarative signal prior: family, density rho, rank r.
//   gauss_bernoulli      (1-rho) delta_0 + rho N(0, I_r)        mean 0,    cov rho I
//   bernoulli_spike      (1-rho) delta_0 + rho delta_1   (r=1)  mean rho,  var rho(1-rho)
//   rademacher_bernoulli (1-rho) delta_0 + rho/2 at +-1  (r=1)  mean 0,    var rho
// All three share E[x x^T] = rho I.
struct prior_spec {
  prior_family family = prior_family::gauss_bernoulli;
  double rho = 0.1;
  int rank = 1;
};

inline void validate(const prior_spec& p) {
  if (!(p.rho > 0.0) || !(p.rho <= 1.0))
    throw domain_error("prior: rho must lie in (0, 1]");
  if (p.rank < 1) throw domain_error("prior: rank must be >= 1");
  if (p.family != prior_family::gauss_bernoulli && p.rank != 1)
    throw domain_error("prior: bernoulli_spike and rademacher_bernoulli are rank-1 families");
}

inline prior_spec gauss_bernoulli(double rho, int rank = 1) {
  prior_spec p{prior_family::gauss_bernoulli, rho, rank};
  validate(p);
  return p;
}

inline prior_spec bernoulli_spike(double rho) {
  prior_spec p{prior_family::bernoulli_spike, rho, 1};
  validate(p);
  return p;
}

inline prior_spec rademacher_bernoulli(double rho) {
  prior_spec p{prior_family::rademacher_bernoulli, rho, 1};
  validate(p);
  return p;
}

inline bool zero_mean(const prior_spec& p) {
  return p.family != prior_family::bernoulli_spike;
}

inline Eigen::VectorXd prior_mean(const prior_spec& p) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p.rank);
  if (p.family == prior_family::bernoulli_spike) m(0) = p.rho;
  return m;
}

inline Eigen::MatrixXd prior_covariance(const prior_spec& p) {
  const int r = p.rank;
  switch (p.family) {
    case prior_family::gauss_bernoulli:
      return p.rho * Eigen::MatrixXd::Identity(r, r);
    case prior_family::bernoulli_spike:
      return Eigen::MatrixXd::Constant(1, 1, p.rho * (1.0 - p.rho));
    case prior_family::rademacher_bernoulli:
      return Eigen::MatrixXd::Constant(1, 1, p.rho);
  }
  throw domain_error("prior: unknown family");
}

inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> prior_moments(const prior_spec& p) {
  validate(p);
  return {prior_mean(p), prior_covariance(p)};
}

// per-component second moment E[x_k^2]; equal to rho for every family here
inline double prior_second_moment(const prior_spec& p) { return p.rho; }

inline Eigen::MatrixXd prior_second_moment_matrix(const prior_spec& p) {
  return p.rho * Eigen::MatrixXd::Identity(p.rank, p.rank);
}

inline std::string to_string(prior_family f) {
  switch (f) {
    case prior_family::gauss_bernoulli: return "gb";
    case prior_family::bernoulli_spike: return "spike";
    case prior_family::rademacher_bernoulli: return "rademacher";
  }
  return "?";
}

inline prior_family parse_family(const std::string& s) {
  if (s == "gb" || s == "gauss-bernoulli" || s == "gauss_bernoulli") return prior_family::gauss_bernoulli;
  if (s == "spike" || s == "bernoulli-spike" || s == "bernoulli_spike") return prior_family::bernoulli_spike;
  if (s == "rademacher" || s == "rademacher-bernoulli" || s == "rademacher_bernoulli")
    return prior_family::rademacher_bernoulli;
  throw domain_error("unknown prior family '" + s + "' (expected gb | spike | rademacher)");
}

}  // namespace spca
