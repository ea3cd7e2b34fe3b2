#pragma once

#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>
#include <cmath>
#include <utility>

namespace spca {

// adaptive 15-point Gauss-Kronrod on [a, b]
template <class F>
double integrate_gk(F&& f, double a, double b, double tol = 1e-12, unsigned max_depth = 12) {
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      std::forward<F>(f), a, b, max_depth, tol);
}

// 61-node Gauss-Hermite rule for weight e^{-t^2}.  Nodes are eigenvalues of
// the symmetric Jacobi matrix (Golub-Welsch), weights come from the first
// eigenvector components; both reproduce tabulated values to ~1e-14.
struct gh_rule {
  static constexpr int n = 61;
  std::array<double, n> node{};
  std::array<double, n> weight{};
};

inline const gh_rule& gauss_hermite_61() {
  static const gh_rule rule = [] {
    constexpr int n = gh_rule::n;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const double b = std::sqrt(0.5 * k);
      jac(k, k - 1) = b;
      jac(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    gh_rule r;
    const double sqrt_pi = 1.77245385090551602729816748;
    for (int i = 0; i < n; ++i) {
      r.node[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
      const double v0 = es.eigenvectors()(0, i);
      r.weight[static_cast<std::size_t>(i)] = sqrt_pi * v0 * v0;
    }
    return r;
  }();
  return rule;
}

// E_{z ~ N(0,1)}[h(z)] through the 61-node rule: sum_i w_i h(sqrt2 t_i) / sqrt(pi)
template <class F>
double expect_normal(F&& h) {
  const gh_rule& r = gauss_hermite_61();
  const double inv_sqrt_pi = 0.56418958354775628694807945;
  const double sqrt2 = 1.41421356237309504880168872;
  double s = 0.0;
  for (int i = 0; i < gh_rule::n; ++i)
    s += r.weight[static_cast<std::size_t>(i)] * h(sqrt2 * r.node[static_cast<std::size_t>(i)]);
  return s * inv_sqrt_pi;
}

}  // namespace spca
