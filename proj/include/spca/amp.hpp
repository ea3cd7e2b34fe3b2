#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "spca/common.hpp"
#include "spca/denoiser.hpp"
#include "spca/instance.hpp"
#include "spca/prior.hpp"
#include "spca/rng.hpp"

namespace spca {

// Iteration state.  a_mat always equals a^T a / (N delta) for the CURRENT a;
// it is refreshed at the end of every sweep so the invariant holds between
// calls as well.  b stores the fields that produced the current a (zero at
// t = 0).  v keeps one row-flattened r x r covariance block per site; for a
// symmetric block the flattening order is immaterial.  The memory term pairs
// the covariances of the CURRENT iterate (the input derivatives evaluated
// where the current means were produced) with the PREVIOUS means; pairing the
// previous covariances instead destabilizes the transient into a growing
// period-2 oscillation.
struct amp_state {
  Eigen::MatrixXd a;       // N x r posterior means
  Eigen::MatrixXd v;       // N x r^2 per-site covariance blocks
  Eigen::MatrixXd a_mat;   // r x r coupling
  Eigen::MatrixXd b;       // N x r fields
  Eigen::MatrixXd a_prev;  // N x r previous means (memory term)
  int t = 0;
};

enum class amp_init_mode { uninformative, informative };

struct amp_options {
  double tol = 1e-8;
  int max_iter = 2000;
  double damping = 0.0;  // 0 = plain iteration; blend factor toward the old iterate
};

struct amp_report {
  double mse = 0.0;
  double phi = 0.0;
  std::vector<double> q_trajectory;        // ||a||_F^2 / (N r) per iteration
  std::vector<double> overlap_trajectory;  // rotation-aligned signal overlap
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void check_instance(const instance& ins, const prior_spec& prior) {
  validate(prior);
  if (ins.n < 1 || ins.x0.cols() != ins.n || ins.y.rows() != ins.n || ins.y.cols() != ins.n)
    throw domain_error("amp: malformed instance");
  if (ins.x0.rows() != prior.rank) throw domain_error("amp: instance rank != prior rank");
  if (!(ins.delta > 0.0)) throw domain_error("amp: delta must be > 0");
}

inline Eigen::MatrixXd coupling_of(const Eigen::MatrixXd& a, double n, double delta) {
  return a.transpose() * a / (n * delta);
}

}  // namespace detail

inline amp_state amp_init(const instance& ins, const prior_spec& prior, amp_init_mode mode) {
  detail::check_instance(ins, prior);
  const Eigen::Index n = ins.n;
  const int r = prior.rank;
  amp_state st;
  st.v.resize(n, r * r);
  if (mode == amp_init_mode::uninformative) {
    st.a.resize(n, r);
    const counter_rng init{ins.seed, stream_amp_init};
    for (Eigen::Index mu = 0; mu < n; ++mu)
      for (int k = 0; k < r; ++k)
        st.a(mu, k) = init.uniform(static_cast<std::uint64_t>(mu) * r + k, -1e-6, 1e-6);
    const Eigen::MatrixXd c = prior_covariance(prior);
    const Eigen::Map<const Eigen::RowVectorXd> c_flat(c.data(), r * r);
    st.v.rowwise() = c_flat;
  } else {
    st.a = ins.x0.transpose();
    st.v.setZero();
  }
  st.a_mat = detail::coupling_of(st.a, static_cast<double>(n), ins.delta);
  st.b = Eigen::MatrixXd::Zero(n, r);
  st.a_prev = Eigen::MatrixXd::Zero(n, r);
  st.t = 0;
  return st;
}

// One sweep: fields with the memory correction, sitewise denoising, optional
// damping of both the means and the covariances.  Returns the mean squared
// change of a, the statistic the convergence test uses.
inline double amp_step(amp_state& st, const instance& ins, const prior_spec& prior,
                       double damping = 0.0) {
  detail::check_instance(ins, prior);
  if (damping < 0.0 || damping >= 1.0) throw domain_error("amp_step: damping must be in [0, 1)");
  const Eigen::Index n = ins.n;
  const int r = prior.rank;
  if (st.a.rows() != n || st.a.cols() != r) throw domain_error("amp_step: state/instance mismatch");
  const double nd = static_cast<double>(n);
  const double delta = ins.delta;

  const Eigen::MatrixXd a_cur = st.a_mat;  // coupling of the current iterate

  // B = y a / (delta sqrt(N)) - a_prev (sum_nu v_nu) / (delta N); the
  // covariance sum belongs to the current iterate, the mean factor to the
  // previous one (see the state comment).
  const Eigen::RowVectorXd v_sum = st.v.colwise().sum();
  const Eigen::Map<const Eigen::MatrixXd> v_bar(v_sum.data(), r, r);
  Eigen::MatrixXd b = ins.y * st.a / (delta * std::sqrt(nd));
  b.noalias() -= st.a_prev * v_bar / (delta * nd);

  Eigen::MatrixXd a_new(n, r), v_new(n, r * r);
  switch (prior.family) {
    case prior_family::gauss_bernoulli: {
      const gb_measure meas(a_cur, prior);
      Eigen::VectorXd bmu(r);
      for (Eigen::Index mu = 0; mu < n; ++mu) {
        bmu = b.row(mu);
        a_new.row(mu) = meas.mean(bmu);
        const Eigen::MatrixXd c = meas.cov(bmu);
        v_new.row(mu) = Eigen::Map<const Eigen::RowVectorXd>(c.data(), r * r);
      }
      break;
    }
    case prior_family::bernoulli_spike:
    case prior_family::rademacher_bernoulli: {
      const double a_sc = a_cur(0, 0);
      if (a_sc < 0.0) throw domain_error("amp_step: negative coupling");
      if (1.0 + a_sc > 1e12) throw numerical_error("amp_step: coupling blew up");
      if (prior.family == prior_family::bernoulli_spike) {
        for (Eigen::Index mu = 0; mu < n; ++mu) {
          const double f = spike_mean(a_sc, b(mu, 0), prior.rho);
          a_new(mu, 0) = f;
          v_new(mu, 0) = f * (1.0 - f);
        }
      } else {
        for (Eigen::Index mu = 0; mu < n; ++mu) {
          const rademacher_stats rs = rademacher_posterior(a_sc, b(mu, 0), prior.rho);
          a_new(mu, 0) = rs.mean;
          v_new(mu, 0) = rs.var;
        }
      }
      break;
    }
  }

  if (damping > 0.0) {
    a_new = (1.0 - damping) * a_new + damping * st.a;
    v_new = (1.0 - damping) * v_new + damping * st.v;
  }

  const double diff = (a_new - st.a).squaredNorm() / (nd * r);

  // memory for the next sweep: the pre-update means
  st.a_prev.swap(st.a);
  st.a = std::move(a_new);
  st.v = std::move(v_new);
  st.b = std::move(b);
  ++st.t;

  if (!st.a.allFinite() || st.a.rowwise().norm().maxCoeff() > 1e6)
    throw numerical_error("amp_step: iterate diverged");
  st.a_mat = detail::coupling_of(st.a, nd, delta);
  return diff;
}

// nuclear-norm Procrustes alignment:  min_R ||a R - x0^T||_F^2 / N
inline double mse_aligned(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x0) {
  if (a.cols() != x0.rows() || a.rows() != x0.cols())
    throw domain_error("mse_aligned: want a as N x r and x0 as r x N");
  const double n = static_cast<double>(a.rows());
  const Eigen::MatrixXd c = a.transpose() * x0.transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  return (a.squaredNorm() + x0.squaredNorm() - 2.0 * svd.singularValues().sum()) / n;
}

// rotation-invariant overlap, Tr of the aligned cross-moment per component
inline double aligned_overlap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x0) {
  if (a.cols() != x0.rows() || a.rows() != x0.cols())
    throw domain_error("aligned_overlap: want a as N x r and x0 as r x N");
  const Eigen::MatrixXd c = a.transpose() * x0.transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  return svd.singularValues().sum() / (static_cast<double>(a.rows()) * a.cols());
}

// Per-site Bethe log-likelihood of the current state.  Exactly 0 at the zero
// state; under the iteration's own statistics it matches the replica value of
// the corresponding overlap.  Non-finite results mean the state is far from
// any fixed point.
inline double bethe_likelihood(const amp_state& st, const instance& ins,
                               const prior_spec& prior) {
  detail::check_instance(ins, prior);
  const Eigen::Index n = ins.n;
  const int r = prior.rank;
  if (st.a.rows() != n || st.a.cols() != r)
    throw domain_error("bethe_likelihood: state/instance mismatch");
  const double nd = static_cast<double>(n);

  const Eigen::RowVectorXd v_sum = st.v.colwise().sum();
  const Eigen::MatrixXd v_bar = Eigen::Map<const Eigen::MatrixXd>(v_sum.data(), r, r) / nd;

  double ln_sum = 0.0;
  switch (prior.family) {
    case prior_family::gauss_bernoulli: {
      const gb_measure meas(st.a_mat, prior);
      Eigen::VectorXd bmu(r);
      for (Eigen::Index mu = 0; mu < n; ++mu) {
        bmu = st.b.row(mu);
        ln_sum += meas.log_norm(bmu);
      }
      break;
    }
    case prior_family::bernoulli_spike:
      for (Eigen::Index mu = 0; mu < n; ++mu)
        ln_sum += spike_log_norm(st.a_mat(0, 0), st.b(mu, 0), prior.rho);
      break;
    case prior_family::rademacher_bernoulli:
      for (Eigen::Index mu = 0; mu < n; ++mu)
        ln_sum += rademacher_posterior(st.a_mat(0, 0), st.b(mu, 0), prior.rho).log_norm;
      break;
  }

  const double ba = st.b.cwiseProduct(st.a).sum();
  const double aaa = (st.a * st.a_mat).cwiseProduct(st.a).sum();
  const double ava = (st.a * v_bar).cwiseProduct(st.a).sum();
  const double phi = ln_sum / nd - 0.5 * (ba - 0.5 * aaa - ava / ins.delta) / nd;
  if (!std::isfinite(phi))
    throw numerical_error("bethe_likelihood: non-finite value (state is not near a fixed point)");
  return phi;
}

inline amp_report amp_run(const instance& ins, const prior_spec& prior, amp_init_mode mode,
                          amp_options opt = {}) {
  if (!(opt.tol > 0.0) || opt.max_iter < 1) throw domain_error("amp_run: bad options");
  if (opt.damping < 0.0 || opt.damping >= 1.0)
    throw domain_error("amp_run: damping must be in [0, 1)");
  amp_state st = amp_init(ins, prior, mode);
  amp_report rep;
  const double nr = static_cast<double>(ins.n) * prior.rank;
  auto record = [&] {
    rep.q_trajectory.push_back(st.a.squaredNorm() / nr);
    rep.overlap_trajectory.push_back(aligned_overlap(st.a, ins.x0));
  };
  record();
  const double thresh = opt.tol * opt.tol;
  for (int t = 0; t < opt.max_iter; ++t) {
    const double diff = amp_step(st, ins, prior, opt.damping);
    record();
    if (diff < thresh) {
      rep.converged = true;
      break;
    }
  }
  rep.iterations = st.t;
  rep.mse = mse_aligned(st.a, ins.x0);
  rep.phi = bethe_likelihood(st, ins, prior);
  return rep;
}

}  // namespace spca
