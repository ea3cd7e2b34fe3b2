#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spca/common.hpp"
#include "spca/prior.hpp"
#include "spca/state_evolution.hpp"

namespace spca {

enum class transition_order { continuous, first_order, none };

inline const char* to_string(transition_order o) {
  switch (o) {
    case transition_order::continuous: return "continuous";
    case transition_order::first_order: return "first_order";
    case transition_order::none: return "none";
  }
  return "?";
}

// critical noise levels along delta at fixed prior; fields are absent when the
// corresponding line does not exist for the family / regime
struct transition_set {
  std::optional<double> delta_u;    // linear stability edge (zero-mean priors)
  std::optional<double> delta_amp;  // uninformative-branch spinodal
  std::optional<double> delta_c;    // equilibrium (likelihood) crossing
  std::optional<double> delta_2nd;  // informative-branch spinodal
  transition_order order = transition_order::none;
};

namespace detail {

// pred true at lo, false at hi; geometric errors are usage bugs, a predicate
// that fails to change is a lost bracket
template <class P>
double bisect_falling(P&& pred, double lo, double hi, double tol, const char* what) {
  if (!(lo < hi) || !(tol > 0.0)) throw domain_error(std::string(what) + ": invalid bracket");
  if (!pred(lo) || pred(hi))
    throw numerical_error(std::string(what) + ": predicate does not change over the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

template <class P>
double bisect_rising(P&& pred, double lo, double hi, double tol, const char* what) {
  return bisect_falling([&](double x) { return !pred(x); }, lo, hi, tol, what);
}

inline se_options branch_options() {
  se_options opt;
  opt.aitken = true;
  return opt;
}

constexpr double branch_threshold = 1e-4;  // a fixed point below this is "trivial"
constexpr double merge_threshold = 1e-6;   // branch gap below this is "one branch"

}  // namespace detail

// noise level where the trivial point loses linear stability: the squared top
// eigenvalue of the prior covariance.  Only meaningful for zero-mean priors.
inline std::optional<double> stability_threshold(const prior_spec& prior) {
  validate(prior);
  if (!zero_mean(prior)) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prior_covariance(prior),
                                                    Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  return lmax * lmax;
}

// The scalar map is monotone, so one step from the seed decides whether the
// trivial point repels: growth at eps means growth everywhere below the
// spinodal.  This sidesteps the critical slowdown a full fixed-point run
// suffers next to the threshold.
inline bool uninformative_escapes(const prior_spec& prior, double delta, double eps = 1e-8) {
  validate(prior);
  if (!zero_mean(prior))
    throw domain_error("uninformative_escapes: defined for zero-mean priors only");
  if (!(delta > 0.0)) throw domain_error("uninformative_escapes: delta must be > 0");
  return se_step_scalar(eps, delta, prior) > eps;
}

inline double instability_onset(const prior_spec& prior, double lo, double hi,
                                double tol = 1e-6) {
  return detail::bisect_falling([&](double d) { return uninformative_escapes(prior, d); }, lo,
                                hi, tol, "instability_onset");
}

namespace detail {

struct branch_pair {
  fixed_point_report uninf, inf;
};

inline branch_pair branches_at(const prior_spec& prior, double delta) {
  const se_options opt = branch_options();
  branch_pair bp;
  bp.uninf = se_fixed_point(prior, delta, se_init::uninformative, opt);
  bp.inf = se_fixed_point(prior, delta, se_init::informative, opt);
  return bp;
}

inline bool branches_merged(const prior_spec& prior, double delta) {
  const branch_pair bp = branches_at(prior, delta);
  return std::abs(bp.inf.q - bp.uninf.q) < merge_threshold;
}

}  // namespace detail

// Spinodal of the branch reached from scratch.  Zero-mean priors: the noise
// level where the escaped fixed point stops being macroscopic.  Nonzero-mean
// priors have no trivial point; the line is where the from-scratch branch
// detaches from the informative one, so bracket.second must sit inside the
// coexistence window.
inline double find_spinodal_amp(const prior_spec& prior, std::pair<double, double> bracket,
                                double tol = 1e-4) {
  validate(prior);
  if (zero_mean(prior)) {
    // full fixed-point membership stalls right below the threshold (the map
    // slope tends to 1 there); the one-step probe is exact and has no bias
    auto pred = [&](double d) { return uninformative_escapes(prior, d); };
    return detail::bisect_falling(pred, bracket.first, bracket.second, tol,
                                  "find_spinodal_amp");
  }
  auto merged = [&](double d) { return detail::branches_merged(prior, d); };
  return detail::bisect_falling(merged, bracket.first, bracket.second, tol,
                                "find_spinodal_amp");
}

// spinodal of the informative branch: where it stops existing as a separate
// fixed point (macroscopic for zero-mean priors, distinct for nonzero-mean)
inline double find_spinodal_2nd(const prior_spec& prior, std::pair<double, double> bracket,
                                double tol = 1e-4) {
  validate(prior);
  if (zero_mean(prior)) {
    auto pred = [&](double d) {
      return se_fixed_point(prior, d, se_init::informative, detail::branch_options()).q >
             detail::branch_threshold;
    };
    return detail::bisect_falling(pred, bracket.first, bracket.second, tol,
                                  "find_spinodal_2nd");
  }
  auto distinct = [&](double d) { return !detail::branches_merged(prior, d); };
  return detail::bisect_falling(distinct, bracket.first, bracket.second, tol,
                                "find_spinodal_2nd");
}

// equilibrium crossing: the noise level where the two branch likelihoods swap.
// Requires genuinely distinct branches over the whole bracket.
inline double find_delta_c(const prior_spec& prior, std::pair<double, double> bracket,
                           double tol = 1e-4) {
  validate(prior);
  auto pred = [&](double d) {
    const detail::branch_pair bp = detail::branches_at(prior, d);
    if (std::abs(bp.inf.q - bp.uninf.q) < detail::merge_threshold)
      throw numerical_error("find_delta_c: branches merge inside the bracket");
    return bp.inf.phi > bp.uninf.phi;
  };
  return detail::bisect_falling(pred, bracket.first, bracket.second, tol, "find_delta_c");
}

// ---------------------------------------------------------------------------
// coexistence-window scan for priors without a trivial fixed point

struct gap_scan {
  double delta_star = 0.0;  // a noise level strictly inside the coexistence window
  double gap = 0.0;         // jump in q across the unstable stretch (lower-bounds
                            // every two-branch gap inside the window)
  double delta_lo = 0.0;    // window edges: the two spinodal noise levels, clipped
  double delta_hi = 0.0;    // to the requested search range
};

// The scalar step depends on (q, delta) only through the coupling a = q/delta,
// so the nontrivial fixed points form the parametric curve
//   q = psi(a),  delta = h(a) = psi(a)/a,  with psi(a) = step(q=a, delta=1).
// A coexistence window is a non-monotone stretch of h: it spans
// (h(a_m), h(a_M)) in delta between a local minimum a_m and the following
// local maximum a_M, which are exactly the two spinodals.  Scanning h cannot
// miss a window the way a delta grid of fixed-point runs can: near its tip the
// window covers an arbitrarily thin delta range while staying wide in a.  For
// zero-mean priors the running minimum sits at the a -> 0 boundary, where
// h -> rho^2 recovers the trivial-point stability edge.
inline gap_scan max_branch_gap(const prior_spec& prior, double d_lo, double d_hi,
                               int grid_n = 192, int zooms = 6) {
  validate(prior);
  if (!(0.0 < d_lo) || !(d_lo < d_hi)) throw domain_error("max_branch_gap: bad delta range");
  if (grid_n < 8) throw domain_error("max_branch_gap: grid too small");
  const double qmax = prior_second_moment(prior);
  auto psi = [&](double a) { return se_step_scalar(a, 1.0, prior); };
  auto h = [&](double a) { return psi(a) / a; };

  // any curve point with delta in range and a nonvanishing overlap lands here
  const double a_min = 1e-7 * qmax / d_hi, a_max = qmax / d_lo;

  // best rising pair of h over a log grid, zooming on the wiggle; a monotone
  // looking grid is densified a few times before concluding there is none
  double pair_lo = 0.0, pair_hi = 0.0, rise = 0.0, cell = 0.0;
  {
    double lo = a_min, hi = a_max;
    int n = grid_n, densify_left = 5;
    for (int round = 0; round <= zooms;) {
      const double step = std::pow(hi / lo, 1.0 / (n - 1));
      double run_min = std::numeric_limits<double>::infinity(), run_arg = lo;
      double best = 0.0, blo = 0.0, bhi = 0.0;
      for (int i = 0; i < n; ++i) {
        const double a = lo * std::pow(step, static_cast<double>(i));
        const double v = h(a);
        if (v < run_min) {
          run_min = v;
          run_arg = a;
        } else if (v - run_min > best) {
          best = v - run_min;
          blo = run_arg;
          bhi = a;
        }
      }
      if (!(best > 0.0)) {
        if (--densify_left < 0) break;
        n *= 2;
        continue;
      }
      pair_lo = blo;
      pair_hi = bhi;
      rise = best;
      cell = step;
      lo = std::max(blo / step, a_min);
      hi = std::min(bhi * step, a_max);
      n = grid_n;
      ++round;
    }
  }
  if (!(rise > 0.0)) return {};  // h monotone over the whole range: no window

  // polish each extremum by ternary search one final-grid cell around it
  auto refine = [&](double a_lo, double a_hi, bool minimize) {
    a_lo = std::max(a_lo, a_min);
    a_hi = std::min(a_hi, a_max);
    while (a_hi - a_lo > 1e-12 * a_hi) {
      const double m1 = a_lo + (a_hi - a_lo) / 3.0, m2 = a_hi - (a_hi - a_lo) / 3.0;
      if ((h(m1) < h(m2)) == minimize)
        a_hi = m2;
      else
        a_lo = m1;
    }
    return 0.5 * (a_lo + a_hi);
  };
  const double a_m = refine(pair_lo / cell, pair_lo * cell, true);
  const double a_M = refine(pair_hi / cell, pair_hi * cell, false);
  const double w_lo = std::max(h(a_m), d_lo), w_hi = std::min(h(a_M), d_hi);
  if (!(w_hi > w_lo)) return {};  // window lies outside the requested range

  gap_scan out;
  out.delta_star = std::sqrt(w_lo * w_hi);
  out.gap = psi(a_M) - psi(a_m);
  out.delta_lo = w_lo;
  out.delta_hi = w_hi;
  return out;
}

// ---------------------------------------------------------------------------
// transition search along delta at fixed prior

inline transition_set find_transitions(const prior_spec& prior, double tol = 1e-4) {
  validate(prior);
  if (!(tol > 0.0)) throw domain_error("find_transitions: tol must be > 0");
  transition_set ts;

  if (zero_mean(prior)) {
    const double du = *stability_threshold(prior);
    ts.delta_u = du;
    const double d2 = find_spinodal_2nd(prior, {0.5 * du, 4.0 * du}, tol);
    if (d2 - du > 2.0 * tol) {
      ts.order = transition_order::first_order;
      ts.delta_2nd = d2;
      ts.delta_amp = find_spinodal_amp(prior, {0.5 * du, 0.5 * (du + d2)}, tol);
      // the likelihoods cross strictly inside the window, possibly close to
      // either edge, so the margins must scale with the window itself; they
      // must also keep the endpoint branch evaluations out of the tangent
      // region right at the spinodals, where fixed-point runs are unreliable
      const double m = std::min(tol, 0.05 * (d2 - *ts.delta_amp));
      ts.delta_c = find_delta_c(prior, {*ts.delta_amp + m, d2 - m}, tol);
    } else {
      // the window is unresolvable at this tol: one continuous line
      ts.order = transition_order::continuous;
      ts.delta_amp = ts.delta_c = ts.delta_2nd = d2;
    }
    return ts;
  }

  // nonzero mean: no stability line; look for a coexistence window around the
  // natural rho^2 scale
  const double r2 = prior.rho * prior.rho;
  const gap_scan gs = max_branch_gap(prior, 0.25 * r2, 8.0 * r2);
  if (gs.gap < detail::branch_threshold) {
    ts.order = transition_order::none;
    return ts;
  }
  ts.order = transition_order::first_order;
  ts.delta_amp = find_spinodal_amp(prior, {0.25 * r2, gs.delta_star}, tol);
  ts.delta_2nd = find_spinodal_2nd(prior, {gs.delta_star, 8.0 * r2}, tol);
  // window-relative margins: the crossing can hug an edge of a thin window,
  // while the endpoint evaluations must stay clear of the spinodal tangencies
  const double m = std::min(tol, 0.05 * (*ts.delta_2nd - *ts.delta_amp));
  ts.delta_c = find_delta_c(prior, {*ts.delta_amp + m, *ts.delta_2nd - m}, tol);
  return ts;
}

// ---------------------------------------------------------------------------
// transition search along rho at fixed delta

struct rho_transition_set {
  std::optional<double> rho_u;  // sqrt(delta) stability edge (zero-mean priors)
  std::optional<double> rho_amp, rho_c, rho_2nd;
  transition_order order = transition_order::none;
};

inline rho_transition_set find_transitions_rho(prior_family family, int rank, double delta,
                                               std::pair<double, double> bracket,
                                               double tol = 1e-4) {
  if (!(delta > 0.0)) throw domain_error("find_transitions_rho: delta must be > 0");
  if (!(0.0 < bracket.first) || !(bracket.first < bracket.second) || bracket.second > 1.0)
    throw domain_error("find_transitions_rho: bracket must satisfy 0 < lo < hi <= 1");
  auto prior_at = [&](double rho) {
    prior_spec p{family, rho, rank};
    validate(p);
    return p;
  };
  const se_options opt = detail::branch_options();
  rho_transition_set out;
  if (zero_mean(prior_at(bracket.second)) && delta <= 1.0) out.rho_u = std::sqrt(delta);

  auto escapes = [&](double rho) {
    const prior_spec p = prior_at(rho);
    return zero_mean(p)
               ? uninformative_escapes(p, delta)
               : se_fixed_point(p, delta, se_init::uninformative, opt).q >
                     detail::branch_threshold;
  };
  auto q_inf = [&](double rho) {
    return se_fixed_point(prior_at(rho), delta, se_init::informative, opt).q;
  };
  const double rho_amp = detail::bisect_rising(escapes, bracket.first, bracket.second, tol,
                                               "find_transitions_rho");
  const double rho_2nd =
      detail::bisect_rising([&](double rho) { return q_inf(rho) > detail::branch_threshold; },
                            bracket.first, bracket.second, tol, "find_transitions_rho");
  out.rho_amp = rho_amp;
  out.rho_2nd = rho_2nd;
  if (rho_amp - rho_2nd > 2.0 * tol) {
    out.order = transition_order::first_order;
    auto pred = [&](double rho) {
      const detail::branch_pair bp = detail::branches_at(prior_at(rho), delta);
      if (std::abs(bp.inf.q - bp.uninf.q) < detail::merge_threshold)
        throw numerical_error("find_transitions_rho: branches merge inside the bracket");
      return bp.inf.phi > bp.uninf.phi;
    };
    // window-relative margins, as in the delta search
    const double m = std::min(tol, 0.05 * (rho_amp - rho_2nd));
    out.rho_c = detail::bisect_rising(pred, rho_2nd + m, rho_amp - m, tol,
                                      "find_transitions_rho");
  } else {
    out.order = transition_order::continuous;
    out.rho_c = rho_amp;
  }
  return out;
}

// largest density at which a first-order window survives; bisection on window
// existence.  Zero-mean priors measure the window against the stability edge,
// nonzero-mean priors against a positive branch gap.
inline double tricritical_rho(prior_family family, int rank, double lo, double hi,
                              double rho_tol = 5e-4) {
  auto window_exists = [&](double rho) {
    prior_spec p{family, rho, rank};
    validate(p);
    if (zero_mean(p)) {
      // exact window width from the fixed-point curve: upper spinodal minus
      // the trivial-point stability edge (membership bisects crawl and bias
      // low right at the tip)
      const double du = *stability_threshold(p);
      const gap_scan gs = max_branch_gap(p, 0.5 * du, 4.0 * du);
      return gs.gap > 0.0 && gs.delta_hi - du > 2e-4;
    }
    const double r2 = rho * rho;
    return max_branch_gap(p, 0.25 * r2, 8.0 * r2).gap > detail::branch_threshold;
  };
  return detail::bisect_falling(window_exists, lo, hi, rho_tol, "tricritical_rho");
}

// ---------------------------------------------------------------------------
// pointwise phase classification

enum class phase_label { undetectable, amp_optimal, hard, single_phase };

inline const char* to_string(phase_label l) {
  switch (l) {
    case phase_label::undetectable: return "undetectable";
    case phase_label::amp_optimal: return "amp_optimal";
    case phase_label::hard: return "hard";
    case phase_label::single_phase: return "single_phase";
  }
  return "?";
}

struct phase_point {
  prior_family family = prior_family::gauss_bernoulli;
  double rho = 0.0;
  double delta = 0.0;
  int r = 1;
  double q_uninf = 0.0, q_inf = 0.0;
  double mse_uninf = 0.0, mse_inf = 0.0;
  double phi_uninf = 0.0, phi_inf = 0.0;
  phase_label label = phase_label::undetectable;
  int iters_uninf = 0, iters_inf = 0;
};

inline phase_point classify_point(prior_family family, double rho, double delta, int r) {
  const prior_spec prior{family, rho, r};
  validate(prior);
  if (!(delta > 0.0)) throw domain_error("classify_point: delta must be > 0");
  const detail::branch_pair bp = detail::branches_at(prior, delta);
  phase_point pt;
  pt.family = family;
  pt.rho = rho;
  pt.delta = delta;
  pt.r = r;
  pt.q_uninf = bp.uninf.q;
  pt.q_inf = bp.inf.q;
  pt.mse_uninf = bp.uninf.mse;
  pt.mse_inf = bp.inf.mse;
  pt.phi_uninf = bp.uninf.phi;
  pt.phi_inf = bp.inf.phi;
  pt.iters_uninf = bp.uninf.iterations;
  pt.iters_inf = bp.inf.iterations;
  const bool merged = std::abs(bp.inf.q - bp.uninf.q) < detail::merge_threshold;
  if (merged) {
    if (!zero_mean(prior))
      pt.label = phase_label::single_phase;
    else
      pt.label = bp.uninf.q <= detail::branch_threshold ? phase_label::undetectable
                                                        : phase_label::amp_optimal;
  } else if (bp.inf.phi > bp.uninf.phi) {
    pt.label = phase_label::hard;
  } else {
    pt.label = zero_mean(prior) ? phase_label::undetectable : phase_label::amp_optimal;
  }
  return pt;
}

inline std::vector<phase_point> scan_phase_diagram(prior_family family,
                                                   const std::vector<double>& rho_grid,
                                                   const std::vector<double>& delta_grid,
                                                   int r) {
  auto check_grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw domain_error(std::string("scan_phase_diagram: empty ") + name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(g[i] > 0.0)) throw domain_error(std::string("scan_phase_diagram: nonpositive ") + name);
      if (i > 0 && !(g[i] > g[i - 1]))
        throw domain_error(std::string("scan_phase_diagram: unsorted ") + name);
    }
  };
  check_grid(rho_grid, "rho grid");
  check_grid(delta_grid, "delta grid");
  std::vector<phase_point> out;
  out.reserve(rho_grid.size() * delta_grid.size());
  for (const double rho : rho_grid)
    for (const double delta : delta_grid) out.push_back(classify_point(family, rho, delta, r));
  return out;
}

// ---------------------------------------------------------------------------
// wide-prior asymptotics

struct large_r_estimate {
  double q_pred = 0.0;
  double phi_pred = 0.0;
};

// support-recovery exponent; positive once the slab field separates from the
// zero atom
inline double large_r_exponent(double a, double tau) {
  if (!(a > -1.0)) throw domain_error("large_r_exponent: need a > -1");
  return -tau / (1.0 + a) + std::log1p(a);
}

// leading-order likelihood at overlap q; the signed reference q = rho - delta
// makes this cross zero exactly at delta = rho
inline double large_r_phi(double q, double rho, double delta, int r) {
  if (!(delta > 0.0) || !(q > -delta))
    throw domain_error("large_r_phi: need delta > 0 and q > -delta");
  if (!(rho > 0.0) || rho > 1.0 || r < 1) throw domain_error("large_r_phi: bad prior parameters");
  const double a = q / delta;
  return -0.5 * rho * r * (std::log1p(a) - a + q * q / (2.0 * rho * delta));
}

inline large_r_estimate large_r_prediction(double rho, double delta, int r) {
  if (!(rho > 0.0) || rho > 1.0 || r < 1)
    throw domain_error("large_r_prediction: bad prior parameters");
  if (!(delta > 0.0)) throw domain_error("large_r_prediction: delta must be > 0");
  const double q = std::max(rho - delta, 0.0);
  return {q, large_r_phi(q, rho, delta, r)};
}

}  // namespace spca
