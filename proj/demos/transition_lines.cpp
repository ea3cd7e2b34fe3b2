// Locates the three critical noise levels for a sparse Gauss-Bernoulli signal
// and prints a small sweep of the branch structure around them.
#include <cstdio>

#include "spca/spca.hpp"

int main() {
  const spca::prior_spec prior = spca::gauss_bernoulli(0.1);

  const spca::transition_set ts = spca::find_transitions(prior, 1e-5);
  std::printf("critical noise levels at rho = %.2f:\n", prior.rho);
  std::printf("  stability edge    delta_u   = %.6f\n", *ts.delta_u);
  std::printf("  from-scratch edge delta_amp = %.6f\n", *ts.delta_amp);
  std::printf("  equilibrium swap  delta_c   = %.6f\n", *ts.delta_c);
  std::printf("  branch ceiling    delta_2nd = %.6f\n", *ts.delta_2nd);
  std::printf("  order: %s\n\n", spca::to_string(ts.order));

  std::printf("%-10s %-12s %-12s %s\n", "delta", "q(scratch)", "q(signal)", "label");
  for (double delta = 0.006; delta < 0.0201; delta += 0.002) {
    const spca::phase_point pt =
        spca::classify_point(prior.family, prior.rho, delta, prior.rank);
    std::printf("%-10.4f %-12.6f %-12.6f %s\n", delta, pt.q_uninf, pt.q_inf,
                spca::to_string(pt.label));
  }
  return 0;
}
