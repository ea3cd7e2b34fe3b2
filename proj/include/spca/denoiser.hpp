#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "spca/common.hpp"
#include "spca/prior.hpp"

namespace spca {

// local tilted measure  M(x) ∝ P0(x) exp(-x^T A x / 2 + B^T x)
struct denoiser_input {
  Eigen::MatrixXd a_mat;  // r x r coupling, symmetric PSD
  Eigen::VectorXd b_vec;  // r field
};

namespace detail {

// symmetric + PSD gate shared by every consumer of a coupling matrix.
// a slightly negative eigenvalue is roundoff, anything worse is a caller bug;
// an ill-conditioned I + A is a numerical failure rather than a usage error.
inline void check_coupling(const Eigen::MatrixXd& a_mat) {
  if (a_mat.rows() != a_mat.cols()) throw domain_error("denoiser: A must be square");
  const double scale = 1.0 + a_mat.cwiseAbs().maxCoeff();
  if ((a_mat - a_mat.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw domain_error("denoiser: A must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_mat, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo < -1e-9 * scale) throw domain_error("denoiser: A must be positive semidefinite");
  const double cond = (1.0 + std::max(hi, 0.0)) / std::max(1.0 + lo, 1e-300);
  if (cond > 1e12) throw numerical_error("denoiser: I + A is numerically singular");
}

}  // namespace detail

// Gauss-Bernoulli tilted measure.  I + A is factorized once at construction;
// each site then costs a triangular solve plus a few transcendentals, which is
// what keeps the matrix-rank sweep affordable inside the iteration.
class gb_measure {
 public:
  gb_measure(const Eigen::MatrixXd& a_mat, const prior_spec& prior)
      : rho_(prior.rho), r_(prior.rank) {
    if (prior.family != prior_family::gauss_bernoulli)
      throw domain_error("gb_measure: prior must be gauss_bernoulli");
    if (a_mat.rows() != r_) throw domain_error("gb_measure: A has wrong dimension");
    detail::check_coupling(a_mat);
    const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(r_, r_) + a_mat;
    llt_.compute(s);
    if (llt_.info() != Eigen::Success)
      throw numerical_error("gb_measure: Cholesky of I + A failed");
    log_det_ = 0.0;
    for (int i = 0; i < r_; ++i) log_det_ += 2.0 * std::log(llt_.matrixLLT()(i, i));
    s_inv_ = llt_.solve(Eigen::MatrixXd::Identity(r_, r_));
  }

  // slab mean (I + A)^{-1} B
  Eigen::VectorXd slab_mean(const Eigen::VectorXd& b) const { return llt_.solve(b); }

  // log of the Gaussian-slab weight relative to the zero atom
  double slab_exponent(const Eigen::VectorXd& b) const {
    return -0.5 * log_det_ + 0.5 * b.dot(llt_.solve(b));
  }

  double log_norm(const Eigen::VectorXd& b) const {
    if (rho_ >= 1.0) return slab_exponent(b);
    return logaddexp(std::log1p(-rho_), std::log(rho_) + slab_exponent(b));
  }

  // posterior probability that the site is on the slab
  double rho_hat(const Eigen::VectorXd& b) const {
    if (rho_ >= 1.0) return 1.0;
    return sigmoid(std::log(rho_) + slab_exponent(b) - std::log1p(-rho_));
  }

  Eigen::VectorXd mean(const Eigen::VectorXd& b) const { return rho_hat(b) * slab_mean(b); }

  // rho_hat (I+A)^{-1} + rho_hat (1 - rho_hat) xg xg^T  with xg the slab mean
  Eigen::MatrixXd cov(const Eigen::VectorXd& b) const {
    const double rh = rho_hat(b);
    const Eigen::VectorXd xg = slab_mean(b);
    return rh * s_inv_ + (rh * (1.0 - rh)) * (xg * xg.transpose());
  }

  const Eigen::MatrixXd& slab_cov() const { return s_inv_; }
  double log_det() const { return log_det_; }

 private:
  double rho_;
  int r_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  Eigen::MatrixXd s_inv_;
};

// ---------------------------------------------------------------------------
// closed forms for the rank-1 atomic families

inline double spike_mean(double a, double b, double rho) {
  if (rho >= 1.0) return 1.0;
  return sigmoid(b - 0.5 * a + std::log(rho) - std::log1p(-rho));
}

inline double spike_var(double a, double b, double rho) {
  const double f = spike_mean(a, b, rho);
  return f * (1.0 - f);
}

inline double spike_log_norm(double a, double b, double rho) {
  if (rho >= 1.0) return b - 0.5 * a;
  return logaddexp(std::log1p(-rho), std::log(rho) + b - 0.5 * a);
}

struct rademacher_stats {
  double mean = 0.0;
  double var = 0.0;
  double log_norm = 0.0;
};

// three-atom log-sum-exp; stable for |b| up to the overflow edge
inline rademacher_stats rademacher_posterior(double a, double b, double rho) {
  const double lhalf = std::log(0.5 * rho) - 0.5 * a;
  const double lp = lhalf + b;
  const double lm = lhalf - b;
  const double l0 = rho >= 1.0 ? neg_inf : std::log1p(-rho);
  const double lz = logaddexp(logaddexp(lp, lm), l0);
  const double wp = std::exp(lp - lz);
  const double wm = std::exp(lm - lz);
  rademacher_stats out;
  out.mean = wp - wm;
  out.var = (wp + wm) - out.mean * out.mean;
  out.log_norm = lz;
  return out;
}

// ---------------------------------------------------------------------------
// prior-dispatched entry points

namespace detail {

inline double scalar_coupling(const denoiser_input& in) {
  if (in.a_mat.rows() != 1 || in.a_mat.cols() != 1 || in.b_vec.size() != 1)
    throw domain_error("denoiser: atomic priors are rank-1");
  const double a = in.a_mat(0, 0);
  if (a < 0.0) throw domain_error("denoiser: A must be positive semidefinite");
  if (1.0 + a > 1e12) throw numerical_error("denoiser: I + A is numerically singular");
  return a;
}

inline void check_input(const denoiser_input& in, const prior_spec& prior) {
  validate(prior);
  if (in.a_mat.rows() != prior.rank || in.a_mat.cols() != prior.rank)
    throw domain_error("denoiser: A must be rank x rank");
  if (in.b_vec.size() != prior.rank) throw domain_error("denoiser: B must have length rank");
}

}  // namespace detail

inline Eigen::VectorXd posterior_mean(const denoiser_input& in, const prior_spec& prior) {
  detail::check_input(in, prior);
  switch (prior.family) {
    case prior_family::gauss_bernoulli:
      return gb_measure(in.a_mat, prior).mean(in.b_vec);
    case prior_family::bernoulli_spike:
      return Eigen::VectorXd::Constant(
          1, spike_mean(detail::scalar_coupling(in), in.b_vec(0), prior.rho));
    case prior_family::rademacher_bernoulli:
      return Eigen::VectorXd::Constant(
          1, rademacher_posterior(detail::scalar_coupling(in), in.b_vec(0), prior.rho).mean);
  }
  throw domain_error("denoiser: unknown family");
}

inline Eigen::MatrixXd posterior_cov(const denoiser_input& in, const prior_spec& prior) {
  detail::check_input(in, prior);
  switch (prior.family) {
    case prior_family::gauss_bernoulli:
      return gb_measure(in.a_mat, prior).cov(in.b_vec);
    case prior_family::bernoulli_spike:
      return Eigen::MatrixXd::Constant(
          1, 1, spike_var(detail::scalar_coupling(in), in.b_vec(0), prior.rho));
    case prior_family::rademacher_bernoulli:
      return Eigen::MatrixXd::Constant(
          1, 1, rademacher_posterior(detail::scalar_coupling(in), in.b_vec(0), prior.rho).var);
  }
  throw domain_error("denoiser: unknown family");
}

inline double log_norm(const denoiser_input& in, const prior_spec& prior) {
  detail::check_input(in, prior);
  switch (prior.family) {
    case prior_family::gauss_bernoulli:
      return gb_measure(in.a_mat, prior).log_norm(in.b_vec);
    case prior_family::bernoulli_spike:
      return spike_log_norm(detail::scalar_coupling(in), in.b_vec(0), prior.rho);
    case prior_family::rademacher_bernoulli:
      return rademacher_posterior(detail::scalar_coupling(in), in.b_vec(0), prior.rho).log_norm;
  }
  throw domain_error("denoiser: unknown family");
}

// support probability on the isotropic slice A = a I, parametrized by |B|^2;
// log-sum-exp form keeps it exact down to rho_hat ~ e^{-700}
inline double rho_hat_iso(double a, double b_sq, double rho, int r) {
  if (rho >= 1.0) return 1.0;
  const double lz = std::log1p(-rho) - b_sq / (2.0 * (1.0 + a)) + 0.5 * r * std::log1p(a);
  const double ls = std::log(rho);
  return std::exp(ls - logaddexp(lz, ls));
}

inline double posterior_support(double a, double b_sq, const prior_spec& prior) {
  validate(prior);
  if (prior.family != prior_family::gauss_bernoulli)
    throw domain_error("posterior_support: defined on the gauss_bernoulli isotropic slice");
  if (a < 0.0 || b_sq < 0.0) throw domain_error("posterior_support: a and b_sq must be >= 0");
  return rho_hat_iso(a, b_sq, prior.rho, prior.rank);
}

}  // namespace spca
