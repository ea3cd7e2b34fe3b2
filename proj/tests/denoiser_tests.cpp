#include <catch2/catch_amalgamated.hpp>
#include <spca/spca.hpp>

#include "oracle_quadrature.hpp"

using namespace spca;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

denoiser_input scalar_in(double a, double b) {
  denoiser_input in;
  in.a_mat = Eigen::MatrixXd::Constant(1, 1, a);
  in.b_vec = Eigen::VectorXd::Constant(1, b);
  return in;
}

// agreement with an |x| floor so near-zero values compare absolutely
void check_close(double got, double want, double rel, double floor) {
  CHECK_THAT(got, WithinRel(want, rel) || WithinAbs(want, floor));
}

}  // namespace

TEST_CASE("rank-1 posterior moments: pinned reference values") {
  const prior_spec gb = gauss_bernoulli(0.1);
  const gb_measure m(Eigen::MatrixXd::Constant(1, 1, 0.5), gb);
  const Eigen::VectorXd b1 = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THAT(m.log_norm(b1), WithinAbs(0.013854854052331, 1e-12));
  CHECK_THAT(m.mean(b1)(0), WithinAbs(0.074922257038777, 1e-12));
  CHECK_THAT(m.cov(b1)(0, 0), WithinAbs(0.119257083798176, 1e-12));
  CHECK_THAT(m.rho_hat(b1), WithinAbs(0.112383385558165, 1e-12));

  CHECK_THAT(spike_mean(0.5, 1.0, 0.3), WithinAbs(0.475694706473698, 1e-12));
  CHECK_THAT(spike_var(0.5, 1.0, 0.3), WithinAbs(0.249409252706600, 1e-12));
  CHECK_THAT(spike_log_norm(0.5, 1.0, 0.3), WithinAbs(0.289006199146818, 1e-12));

  const rademacher_stats rs = rademacher_posterior(0.5, 1.0, 0.3);
  CHECK_THAT(rs.mean, WithinAbs(0.258903935342224, 1e-12));
  CHECK_THAT(rs.var, WithinAbs(0.272918754923287, 1e-12));
  CHECK_THAT(rs.log_norm, WithinAbs(0.058764749345086, 1e-12));
}

TEST_CASE("rank-2 posterior moments: pinned reference values") {
  SECTION("isotropic coupling") {
    const prior_spec p = gauss_bernoulli(0.1, 2);
    const gb_measure m(0.3 * Eigen::MatrixXd::Identity(2, 2), p);
    Eigen::VectorXd b(2);
    b << 1.0, -1.0;
    CHECK_THAT(m.log_norm(b), WithinAbs(0.063920941096, 1e-10));
  }
  SECTION("full coupling matrix") {
    const prior_spec p = gauss_bernoulli(0.25, 2);
    Eigen::MatrixXd a(2, 2);
    a << 0.3, 0.1, 0.1, 0.5;
    Eigen::VectorXd b(2);
    b << 1.0, -0.5;
    const gb_measure m(a, p);
    CHECK_THAT(m.log_norm(b), WithinAbs(0.043812441635991, 1e-12));
    CHECK_THAT(m.mean(b)(0), WithinAbs(0.225429048393689, 1e-12));
    CHECK_THAT(m.mean(b)(1), WithinAbs(-0.109078571803398, 1e-12));
    CHECK_THAT(m.rho_hat(b), WithinAbs(0.282149905731456, 1e-12));
    const Eigen::MatrixXd c = m.cov(b);
    CHECK_THAT(c(0, 0), WithinAbs(0.347449725381245, 1e-12));
    CHECK_THAT(c(0, 1), WithinAbs(-0.077104736238842, 1e-12));
    CHECK_THAT(c(1, 0), WithinAbs(-0.077104736238842, 1e-12));
    CHECK_THAT(c(1, 1), WithinAbs(0.219340940587476, 1e-12));
  }
}

TEST_CASE("rank-1 moments agree with direct quadrature over a parameter sweep") {
  const double as[] = {0.05, 0.5, 2.0, 10.0};
  const double bs[] = {-3.0, -0.5, 0.0, 0.7, 4.0};
  const double rhos[] = {0.02, 0.3, 0.9};
  for (double rho : rhos)
    for (double a : as)
      for (double b : bs) {
        CAPTURE(rho, a, b);
        const denoiser_input in = scalar_in(a, b);

        const oracle::moments og = oracle::gb_r1(a, b, rho);
        const prior_spec gb = gauss_bernoulli(rho);
        check_close(log_norm(in, gb), og.log_norm, 1e-5, 1e-12);
        check_close(posterior_mean(in, gb)(0), og.mean(0), 1e-5, 1e-12);
        check_close(posterior_cov(in, gb)(0, 0), og.cov(0, 0), 1e-5, 1e-12);
        check_close(gb_measure(in.a_mat, gb).rho_hat(in.b_vec), og.rho_hat, 1e-5, 1e-12);

        const oracle::moments os = oracle::spike(a, b, rho);
        const prior_spec sp = bernoulli_spike(rho);
        check_close(log_norm(in, sp), os.log_norm, 1e-5, 1e-12);
        check_close(posterior_mean(in, sp)(0), os.mean(0), 1e-5, 1e-12);
        check_close(posterior_cov(in, sp)(0, 0), os.cov(0, 0), 1e-5, 1e-12);

        const oracle::moments orad = oracle::rademacher(a, b, rho);
        const prior_spec ra = rademacher_bernoulli(rho);
        check_close(log_norm(in, ra), orad.log_norm, 1e-5, 1e-12);
        check_close(posterior_mean(in, ra)(0), orad.mean(0), 1e-5, 1e-12);
        check_close(posterior_cov(in, ra)(0, 0), orad.cov(0, 0), 1e-5, 1e-12);
      }
}

TEST_CASE("rank-2 moments agree with nested quadrature") {
  Eigen::Matrix2d a;
  a << 0.3, 0.1, 0.1, 0.5;
  Eigen::Vector2d b(1.0, -0.5);
  const oracle::moments o = oracle::gb_r2(a, b, 0.25);
  const gb_measure m(a, gauss_bernoulli(0.25, 2));
  CHECK_THAT(m.log_norm(b), WithinAbs(o.log_norm, 1e-9));
  CHECK((m.mean(b) - o.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((m.cov(b) - o.cov).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THAT(m.rho_hat(b), WithinAbs(o.rho_hat, 1e-9));
}

TEST_CASE("log-normalizer derivatives reproduce mean and covariance") {
  // d log Z / d B = posterior mean, d mean / d B = posterior covariance --
  // central differences on the library's own functions
  const double h = 1e-5;

  SECTION("rank 1, all families") {
    const prior_spec priors[] = {gauss_bernoulli(0.2), bernoulli_spike(0.2),
                                 rademacher_bernoulli(0.2)};
    for (const prior_spec& p : priors)
      for (double b : {-1.5, 0.0, 0.9}) {
        CAPTURE(static_cast<int>(p.family), b);
        const double a = 0.7;
        const double dlz =
            (log_norm(scalar_in(a, b + h), p) - log_norm(scalar_in(a, b - h), p)) / (2 * h);
        CHECK_THAT(dlz, WithinAbs(posterior_mean(scalar_in(a, b), p)(0), 1e-8));
        const double dm = (posterior_mean(scalar_in(a, b + h), p)(0) -
                           posterior_mean(scalar_in(a, b - h), p)(0)) /
                          (2 * h);
        CHECK_THAT(dm, WithinAbs(posterior_cov(scalar_in(a, b), p)(0, 0), 1e-8));
      }
  }

  SECTION("rank 2, full coupling") {
    const prior_spec p = gauss_bernoulli(0.25, 2);
    Eigen::MatrixXd a(2, 2);
    a << 0.3, 0.1, 0.1, 0.5;
    Eigen::VectorXd b(2);
    b << 1.0, -0.5;
    denoiser_input in{a, b};
    const Eigen::VectorXd mean = posterior_mean(in, p);
    const Eigen::MatrixXd cov = posterior_cov(in, p);
    for (int k = 0; k < 2; ++k) {
      denoiser_input up{a, b}, dn{a, b};
      up.b_vec(k) += h;
      dn.b_vec(k) -= h;
      CHECK_THAT((log_norm(up, p) - log_norm(dn, p)) / (2 * h), WithinAbs(mean(k), 1e-8));
      const Eigen::VectorXd dm = (posterior_mean(up, p) - posterior_mean(dn, p)) / (2 * h);
      CHECK_THAT(dm(0), WithinAbs(cov(k, 0), 1e-8));
      CHECK_THAT(dm(1), WithinAbs(cov(k, 1), 1e-8));
    }
  }
}

TEST_CASE("posterior respects the prior's structure") {
  SECTION("rotational equivariance of the sparse-Gaussian measure") {
    const prior_spec p = gauss_bernoulli(0.25, 2);
    Eigen::MatrixXd a(2, 2);
    a << 0.6, 0.15, 0.15, 0.2;
    Eigen::VectorXd b(2);
    b << 0.8, -1.1;
    const double th = 0.4;
    Eigen::Matrix2d rot;
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);

    const gb_measure orig(a, p);
    const gb_measure turned(rot.transpose() * a * rot, p);
    const Eigen::VectorXd bt = rot.transpose() * b;
    CHECK_THAT(turned.log_norm(bt), WithinAbs(orig.log_norm(b), 1e-12));
    CHECK((turned.mean(bt) - rot.transpose() * orig.mean(b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((turned.cov(bt) - rot.transpose() * orig.cov(b) * rot).cwiseAbs().maxCoeff() <
          1e-12);
  }

  SECTION("support probability is monotone in the field") {
    double prev = 0.0;
    for (double b = -4.0; b <= 4.0; b += 0.25) {
      const double cur = spike_mean(1.2, b, 0.15);  // two-state mean = support mass
      if (b > -4.0) CHECK(cur > prev);
      prev = cur;
    }
    // isotropic-slice support matches the rank-1 measure at r = 1
    const prior_spec gb = gauss_bernoulli(0.3);
    const gb_measure m(Eigen::MatrixXd::Constant(1, 1, 0.8), gb);
    for (double b : {0.0, 0.5, 2.0})
      CHECK_THAT(posterior_support(0.8, b * b, gb),
                 WithinAbs(m.rho_hat(Eigen::VectorXd::Constant(1, b)), 1e-13));
  }

  SECTION("zero field, zero coupling returns the prior") {
    for (const prior_spec& p : {gauss_bernoulli(0.3), bernoulli_spike(0.3),
                                rademacher_bernoulli(0.3)}) {
      const denoiser_input in = scalar_in(0.0, 0.0);
      CHECK_THAT(log_norm(in, p), WithinAbs(0.0, 1e-14));
      CHECK_THAT(posterior_mean(in, p)(0), WithinAbs(prior_mean(p)(0), 1e-14));
      CHECK_THAT(posterior_cov(in, p)(0, 0), WithinAbs(prior_covariance(p)(0, 0), 1e-14));
    }
  }
}

TEST_CASE("denoiser input validation") {
  const prior_spec p2 = gauss_bernoulli(0.25, 2);

  Eigen::MatrixXd asym(2, 2);
  asym << 0.3, 0.2, -0.2, 0.5;
  CHECK_THROWS_AS(gb_measure(asym, p2), domain_error);

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(gb_measure(indef, p2), domain_error);

  CHECK_THROWS_AS(gb_measure(Eigen::MatrixXd::Identity(3, 3), p2), domain_error);
  CHECK_THROWS_AS(gb_measure(Eigen::MatrixXd::Identity(1, 1), bernoulli_spike(0.1)),
                  domain_error);

  // ill-conditioned I + A (the matrix guard is on the condition number, so a
  // large isotropic coupling is fine; a wildly anisotropic one is not)
  Eigen::MatrixXd skewed = Eigen::MatrixXd::Zero(2, 2);
  skewed(0, 0) = 1e13;
  CHECK_THROWS_AS(gb_measure(skewed, p2), numerical_error);
  CHECK_NOTHROW(gb_measure(Eigen::MatrixXd::Constant(1, 1, 1e10), gauss_bernoulli(0.1)));
  CHECK_THROWS_AS(posterior_mean(scalar_in(1e13, 0.0), bernoulli_spike(0.1)),
                  numerical_error);
  CHECK_THROWS_AS(posterior_mean(scalar_in(-0.1, 0.0), bernoulli_spike(0.1)), domain_error);

  // shape mismatches through the dispatching wrappers
  denoiser_input in;
  in.a_mat = Eigen::MatrixXd::Identity(2, 2);
  in.b_vec = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(posterior_mean(in, p2), domain_error);
  in.b_vec = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(posterior_mean(in, gauss_bernoulli(0.25, 3)), domain_error);

  CHECK_THROWS_AS(posterior_support(-1.0, 0.0, gauss_bernoulli(0.1)), domain_error);
  CHECK_THROWS_AS(posterior_support(0.5, 1.0, bernoulli_spike(0.1)), domain_error);
}
