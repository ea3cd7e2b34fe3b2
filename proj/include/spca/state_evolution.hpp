#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "spca/common.hpp"
#include "spca/denoiser.hpp"
#include "spca/prior.hpp"
#include "spca/quadrature.hpp"
#include "spca/rng.hpp"

namespace spca {

namespace detail {

// density of |u| for u ~ N(0, I_r); the (r-1) log u term is skipped at r = 1
// so the integrand stays finite at the origin
inline double log_chi_pdf(double u, int r) {
  double lp = -0.5 * u * u + std::log(2.0) - std::lgamma(0.5 * r) - 0.5 * r * std::log(2.0);
  if (r != 1) lp += (r - 1) * std::log(u);
  return lp;
}

// integration cutoff: chi_r tail mass beyond sqrt(r) + 12 sqrt(2) is < 1e-14
inline double chi_upper(int r) { return std::sqrt(static_cast<double>(r)) + 12.0 * std::sqrt(2.0); }

}  // namespace detail

// ---------------------------------------------------------------------------
// scalar recursion on the isotropic Bayes path

// one overlap update for the Gauss-Bernoulli prior at any rank.  The angular
// directions integrate out exactly, leaving a 1-d chi_r mixture; tau is the
// squared field magnitude over the slab.
inline double se_step_scalar_gb(double q, double delta, double rho, int r) {
  if (!(delta > 0.0)) throw domain_error("se_step_scalar_gb: delta must be > 0");
  if (!(rho > 0.0) || rho > 1.0 || r < 1)
    throw domain_error("se_step_scalar_gb: bad prior parameters");
  if (q <= 0.0) return 0.0;
  const double a = q / delta;
  const double tau = a + a * a;
  auto integrand = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double uu = u * u;
    const double rh = rho_hat_iso(a, tau * uu, rho, r);
    return std::exp(detail::log_chi_pdf(u, r)) *
           (1.0 + tau * uu * (1.0 - rh) / (r * (1.0 + a))) * rh;
  };
  const double j = integrate_gk(integrand, 0.0, detail::chi_upper(r), 1e-13);
  return (rho * q / (delta + q)) * j;
}

namespace detail {

inline double gb_scalar_f(double a, double b, double rho) {
  return rho_hat_iso(a, b * b, rho, 1) * b / (1.0 + a);
}

struct order_pair {
  double q = 0.0;  // second-moment route E[f^2]
  double m = 0.0;  // overlap route E[f x0]
};

// rank-1 recursion with independent (q, m): the field given x0 is
// N((m/delta) x0, q/delta), the coupling is a = q/delta.  Atom sums are
// exact; Gaussian integrals use the 61-node rule (nested for the slab).
inline order_pair se_step_r1(double q, double m, double delta, const prior_spec& prior) {
  const double rho = prior.rho;
  const double a = std::max(q, 0.0) / delta;
  const double s = std::sqrt(a);
  const double g = m / delta;
  switch (prior.family) {
    case prior_family::gauss_bernoulli: {
      const double q0 = expect_normal([&](double z) {
        const double f = gb_scalar_f(a, s * z, rho);
        return f * f;
      });
      const double q1 = expect_normal([&](double x) {
        return expect_normal([&](double z) {
          const double f = gb_scalar_f(a, g * x + s * z, rho);
          return f * f;
        });
      });
      const double m1 = expect_normal([&](double x) {
        return x * expect_normal([&](double z) { return gb_scalar_f(a, g * x + s * z, rho); });
      });
      return {(1.0 - rho) * q0 + rho * q1, rho * m1};
    }
    case prior_family::bernoulli_spike: {
      const double q1 = expect_normal([&](double z) {
        const double f = spike_mean(a, g + s * z, rho);
        return f * f;
      });
      const double m1 = expect_normal([&](double z) { return spike_mean(a, g + s * z, rho); });
      const double q0 = expect_normal([&](double z) {
        const double f = spike_mean(a, s * z, rho);
        return f * f;
      });
      return {rho * q1 + (1.0 - rho) * q0, rho * m1};
    }
    case prior_family::rademacher_bernoulli: {
      auto f2 = [&](double shift) {
        return expect_normal([&](double z) {
          const double f = rademacher_posterior(a, shift + s * z, rho).mean;
          return f * f;
        });
      };
      auto f1 = [&](double shift) {
        return expect_normal(
            [&](double z) { return rademacher_posterior(a, shift + s * z, rho).mean; });
      };
      const double qp = f2(g), qm = f2(-g), q0 = f2(0.0);
      const double mp = f1(g), mm = f1(-g);
      return {0.5 * rho * (qp + qm) + (1.0 - rho) * q0, 0.5 * rho * (mp - mm)};
    }
  }
  throw domain_error("se_step_r1: unknown family");
}

}  // namespace detail

// Bayes-path overlap update, q -> q', for any supported prior
inline double se_step_scalar(double q, double delta, const prior_spec& prior) {
  validate(prior);
  if (!(delta > 0.0)) throw domain_error("se_step_scalar: delta must be > 0");
  if (prior.family == prior_family::gauss_bernoulli)
    return se_step_scalar_gb(q, delta, prior.rho, prior.rank);
  return detail::se_step_r1(q, q, delta, prior).q;
}

// ---------------------------------------------------------------------------
// general-(Q, M) recursion

struct se_state {
  Eigen::MatrixXd q_mat;  // r x r second moment of the estimator
  Eigen::MatrixXd m_mat;  // r x r overlap with the signal
  double delta = 0.0;
};

// One update of (Q, M).  r = 1 is handled by quadrature and is deterministic;
// r >= 2 uses antithetic Monte Carlo over (x0, field noise), reproducible for
// a fixed seed and independent of threading.
inline se_state se_step_general(const se_state& st, const prior_spec& prior,
                                int n_samples = 100000, std::uint64_t seed = 0) {
  validate(prior);
  const int r = prior.rank;
  if (st.q_mat.rows() != r || st.q_mat.cols() != r || st.m_mat.rows() != r ||
      st.m_mat.cols() != r)
    throw domain_error("se_step_general: Q and M must be rank x rank");
  if (!(st.delta > 0.0)) throw domain_error("se_step_general: delta must be > 0");
  if (n_samples < 1000) throw domain_error("se_step_general: n_samples must be >= 1000");

  Eigen::MatrixXd field_cov = st.q_mat / st.delta;
  field_cov = 0.5 * (field_cov + field_cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(field_cov);
  const double scale = 1.0 + es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw numerical_error("se_step_general: Q/delta is not positive semidefinite");

  se_state out;
  out.delta = st.delta;
  if (r == 1) {
    const detail::order_pair p =
        detail::se_step_r1(st.q_mat(0, 0), st.m_mat(0, 0), st.delta, prior);
    out.q_mat = Eigen::MatrixXd::Constant(1, 1, p.q);
    out.m_mat = Eigen::MatrixXd::Constant(1, 1, p.m);
    return out;
  }

  const Eigen::MatrixXd t_fac =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::MatrixXd gain = st.m_mat / st.delta;
  const gb_measure meas(field_cov, prior);
  const counter_rng mask{seed, stream_se_mc_signal_mask};
  const counter_rng val{seed, stream_se_mc_signal_value};
  const counter_rng wrng{seed, stream_se_mc_noise};

  const int pairs = n_samples / 2;
  Eigen::MatrixXd qn = Eigen::MatrixXd::Zero(r, r);
  Eigen::MatrixXd mn = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd x0(r), z(r), base(r), w(r), b(r), f(r);
  for (int i = 0; i < pairs; ++i) {
    const std::uint64_t ui = static_cast<std::uint64_t>(i);
    x0.setZero();
    if (mask.u01(ui) < prior.rho)
      for (int k = 0; k < r; ++k) x0(k) = val.normal(ui * r + k);
    for (int k = 0; k < r; ++k) z(k) = wrng.normal(ui * r + k);
    base.noalias() = gain * x0;
    w.noalias() = t_fac * z;
    for (int sgn = 0; sgn < 2; ++sgn) {
      if (sgn)
        b = base - w;
      else
        b = base + w;
      f = meas.mean(b);
      qn.noalias() += f * f.transpose();
      mn.noalias() += f * x0.transpose();
    }
  }
  const double inv = 1.0 / (2.0 * pairs);
  out.q_mat = qn * inv;
  out.m_mat = mn * inv;
  return out;
}

// ---------------------------------------------------------------------------
// replica potential on the Bayes path

// Per-site log-likelihood functional at overlap q (M = Q = q I).  Exactly 0 at
// q = 0.  For gauss_bernoulli the expression extends analytically to
// q in (-delta, 0), which the asymptotic sign reference relies on.
inline double se_likelihood(double q, const prior_spec& prior, double delta) {
  validate(prior);
  if (!(delta > 0.0)) throw domain_error("se_likelihood: delta must be > 0");
  if (!(q > -delta)) throw domain_error("se_likelihood: q must exceed -delta");
  const double rho = prior.rho;
  const int r = prior.rank;

  if (prior.family == prior_family::gauss_bernoulli) {
    const double a = q / delta;
    const double tau_s = (q + delta) * q / (delta * delta);
    const double tau_0 = q / delta;
    auto psi = [&](double c) {
      const double slab = -0.5 * r * std::log1p(a) + c / (2.0 * (1.0 + a));
      if (rho >= 1.0) return slab;
      return logaddexp(std::log1p(-rho), std::log(rho) + slab);
    };
    auto integrand = [&](double u) {
      if (u <= 0.0) return 0.0;
      const double uu = u * u;
      return std::exp(detail::log_chi_pdf(u, r)) *
             (rho * psi(tau_s * uu) + (1.0 - rho) * psi(tau_0 * uu));
    };
    const double i1 = integrate_gk(integrand, 0.0, detail::chi_upper(r), 1e-13);
    return i1 - r * q * q / (4.0 * delta);
  }

  if (q < 0.0) throw domain_error("se_likelihood: atomic families require q >= 0");
  const double a = q / delta;
  const double s = std::sqrt(a);
  if (prior.family == prior_family::bernoulli_spike) {
    const double t =
        rho * expect_normal([&](double z) { return spike_log_norm(a, a + s * z, rho); }) +
        (1.0 - rho) * expect_normal([&](double z) { return spike_log_norm(a, s * z, rho); });
    return t - q * q / (4.0 * delta);
  }
  auto eln = [&](double shift) {
    return expect_normal(
        [&](double z) { return rademacher_posterior(a, shift + s * z, rho).log_norm; });
  };
  const double t = 0.5 * rho * (eln(a) + eln(-a)) + (1.0 - rho) * eln(0.0);
  return t - q * q / (4.0 * delta);
}

inline double mse_from_order_params(const Eigen::MatrixXd& q_mat, const Eigen::MatrixXd& m_mat,
                                    const prior_spec& prior) {
  validate(prior);
  if (q_mat.rows() != prior.rank || q_mat.cols() != prior.rank ||
      m_mat.rows() != prior.rank || m_mat.cols() != prior.rank)
    throw domain_error("mse_from_order_params: Q and M must be rank x rank");
  return (prior_second_moment_matrix(prior) - 2.0 * m_mat + q_mat).trace();
}

// ---------------------------------------------------------------------------
// fixed points

enum class se_init { uninformative, informative };

struct se_options {
  double tol = 1e-10;
  int max_iter = 100000;
  double eps = 1e-8;       // seed overlap of the uninformative branch
  bool aitken = false;     // periodic delta-squared extrapolation
  bool record_trajectory = false;
};

struct fixed_point_report {
  double q = 0.0;
  double mse = 0.0;
  double phi = 0.0;
  se_init init = se_init::uninformative;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trajectory;  // q per step when recorded
};

// Scalar fixed-point iteration on the Bayes path.  The map is monotone, so an
// uninformative iterate of a zero-mean prior that falls below its seed can
// only be heading to 0 and is short-circuited there.  Aitken extrapolation is
// accepted only when the residual re-check confirms a genuine fixed point;
// near a spinodal the bare extrapolation happily lands on ghosts.
inline fixed_point_report se_fixed_point(const prior_spec& prior, double delta, se_init mode,
                                         se_options opt = {}) {
  validate(prior);
  if (!(delta > 0.0)) throw domain_error("se_fixed_point: delta must be > 0");
  if (!(opt.tol > 0.0) || opt.max_iter < 1 || !(opt.eps > 0.0))
    throw domain_error("se_fixed_point: bad options");

  fixed_point_report rep;
  rep.init = mode;
  const double qmax = prior_second_moment(prior);
  double q = mode == se_init::informative ? qmax : opt.eps;
  if (opt.record_trajectory) rep.trajectory.push_back(q);
  double q_prev = q;
  bool have_prev = false;

  for (int t = 0; t < opt.max_iter; ++t) {
    const double qn = se_step_scalar(q, delta, prior);
    ++rep.iterations;
    if (opt.record_trajectory) rep.trajectory.push_back(qn);
    if (std::abs(qn - q) < opt.tol) {
      q = qn;
      rep.converged = true;
      break;
    }
    if (mode == se_init::uninformative && zero_mean(prior) && qn < q && qn < 10.0 * opt.eps) {
      q = 0.0;
      rep.converged = true;
      break;
    }
    if (opt.aitken && have_prev && t % 8 == 7) {
      const double d1 = qn - q, d0 = q - q_prev, den = d1 - d0;
      if (std::abs(den) > 1e-300) {
        const double qa = qn - d1 * d1 / den;
        if (std::isfinite(qa) && qa >= 0.0 && qa <= qmax * (1.0 + 1e-9)) {
          const double qr = se_step_scalar(qa, delta, prior);
          ++rep.iterations;
          if (std::abs(qr - qa) < 10.0 * opt.tol) {
            q = qr;
            rep.converged = true;
            if (opt.record_trajectory) rep.trajectory.push_back(qr);
            break;
          }
        }
      }
    }
    q_prev = q;
    q = qn;
    have_prev = true;
  }

  rep.q = q;
  rep.mse = static_cast<double>(prior.rank) * (prior_second_moment(prior) - q);
  rep.phi = se_likelihood(q, prior, delta);
  return rep;
}

// branch selection: largest likelihood wins; ties within 1e-10 go to the
// branch with smaller MSE
inline fixed_point_report mmse_select(const std::vector<fixed_point_report>& branches) {
  if (branches.empty()) throw domain_error("mmse_select: no branches given");
  const fixed_point_report* best = &branches.front();
  for (std::size_t i = 1; i < branches.size(); ++i) {
    const fixed_point_report& b = branches[i];
    if (b.phi > best->phi + 1e-10) {
      best = &b;
    } else if (std::abs(b.phi - best->phi) <= 1e-10 && b.mse < best->mse) {
      best = &b;
    }
  }
  return *best;
}

}  // namespace spca
