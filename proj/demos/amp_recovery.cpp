// Samples one noisy rank-1 instance on each side of the recovery threshold
// and shows the iteration's error against the asymptotic prediction.
#include <cstdio>

#include "spca/spca.hpp"

int main() {
  const spca::prior_spec prior = spca::gauss_bernoulli(0.1);
  const Eigen::Index n = 2000;

  for (const double delta : {0.005, 0.02}) {
    const spca::instance ins = spca::make_instance(prior, n, delta, 7);
    const spca::amp_report rep =
        spca::amp_run(ins, prior, spca::amp_init_mode::uninformative);

    spca::se_options opt;
    opt.aitken = true;
    const spca::fixed_point_report se =
        spca::se_fixed_point(prior, delta, spca::se_init::uninformative, opt);

    std::printf("delta = %.3f  (N = %ld, %d iterations, %s)\n", delta,
                static_cast<long>(n), rep.iterations,
                rep.converged ? "converged" : "not converged");
    std::printf("  mse             %.5f\n", rep.mse);
    std::printf("  asymptotic mse  %.5f\n", se.mse);
    std::printf("  likelihood      %.5f  (asymptotic %.5f)\n\n", rep.phi, se.phi);
  }
  return 0;
}
