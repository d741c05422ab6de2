#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/parallel.hpp"
#include "vlsf/saddlepoint.hpp"
#include "vlsf/schedule.hpp"

namespace vlsf {

inline constexpr int kExactCdfCap = 100000;

// log P[B = k] for B ~ Binomial(n, q), via Loader's saddle-point expansion.
double log_binomial_pmf(int k, int n, double q);

// P[B <= m] for B ~ Binomial(n, q) by direct summation.
double binomial_cdf(int m, int n, double q);

// P[S_n < gamma] for a lattice law, summed exactly: S_n = n * origin + B * step
// with B ~ Binomial(n, success).
double exact_cdf_lattice(const info_density_law& law, int n, double gamma,
                         int cap = kExactCdfCap);

struct mc_estimate {
  double p_hat = 0.0;
  double std_err = 0.0;
};

// Empirical P[S_n < gamma] from i.i.d. draws of the single-letter density.
mc_estimate mc_cdf(const info_density_law& law, int n, double gamma, const mc_config& cfg);

// One set of draws of S_n scored against every threshold in `gammas`.
std::vector<mc_estimate> mc_cdf_multi(const info_density_law& law, int n,
                                      std::span<const double> gammas, const mc_config& cfg);

struct fb_options {
  overshoot_mode mode = overshoot_mode::lower;
  double eps_s = kDefaultEpsS;
  mc_config mc{};
};

struct fb_estimate {
  double value = 0.0;
  double std_err = 0.0;  // zero for threshold_union
  double gamma = 0.0;    // minimizing threshold, threshold_union only
};

// Error of a single fixed-length decoding attempt at blocklength n with M - 1
// competitors (log_competitors = log(M - 1)).
fb_estimate eps_fb(const channel_model& channel, double n, double log_competitors,
                   fb_method method = fb_method::threshold_union, const fb_options& opts = {});

struct instant_range {
  int lo;
  int hi;
  int stride = 1;
};

struct search_grid {
  std::vector<instant_range> instants;  // one range per decoding attempt
  // Optional threshold grid for P1. Empty means gamma is eliminated through
  // the binding constraint, as for P2.
  std::vector<double> gammas;
};

// Grid built from Gaussian pilots: n from where mu(n) + 6 sigma(n) first reaches
// the nominal threshold log((M-1)/eps) to where mu(n) - 6 sigma(n) passes it.
search_grid default_search_grid(const channel_model& channel, const code_spec& spec);

// The default P1 threshold grid: 200 points over [log M, log M + 20].
std::vector<double> default_gamma_grid(const code_spec& spec);

// Exhaustive minimum of the objective over every strictly increasing schedule
// drawn from the grid (t <= 3), using the same CDF evaluator as the optimizer.
optimization_result brute_force_search(const channel_model& channel, const code_spec& spec,
                                       decoding_rule rule, const search_grid& grid,
                                       overshoot_mode mode, double eps_s = kDefaultEpsS);

}  // namespace vlsf
