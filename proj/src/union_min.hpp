#pragma once

#include <cmath>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/optimizer.hpp"

namespace vlsf::detail {

struct union_min {
  double value;  // min over g of P[S_n < g] + (M - 1) e^{-g}
  double gamma;  // minimizer
};

// Continuous modes: coarse scan of [mu - 8 sigma, mu + 8 sigma], then Brent
// around the best scan point. exact_lattice: scan over lattice points, where
// each cell attains its infimum at its right end.
union_min minimize_union(const info_density_law& law, double n, double log_competitors,
                         const cdf_settings& settings);

// P[S_n >= gamma] when the codeword is drawn independently of the output,
// i.e. E[e^{-S_n} 1{S_n >= gamma}] under the joint law. AWGN only.
double independent_tail_awgn(const info_density_law& law, double n, double gamma);

// E[exp(-(S_n - log((M - 1) / 2))^+)]. AWGN by saddlepoint; BSC and BEC exact
// at integer n, interpolated in between.
double dependence_testing(const info_density_law& law, double n, double log_competitors,
                          const cdf_settings& settings);

// Random-coding union bound. AWGN by quadrature over |y|^2 with saddlepoint
// noncentral chi-square tails; BSC and BEC by exact sums. Exact at integer n,
// interpolated in between, memoized.
double random_coding_union(const info_density_law& law, double n, double log_competitors);

// Value at real n >= 1 of a positive sequence known at integers: Catmull-Rom
// in log space over the four nearest integers, so the result is C^1 in n.
template <class F>
double interpolate_integers(F&& at, double n) {
  const double lo = std::floor(n);
  const double x = n - lo;
  const int k = static_cast<int>(lo);
  const double p0 = at(k);
  if (x == 0.0) return p0;
  const double p1 = at(k + 1);
  const double pm = k > 1 ? at(k - 1) : 2.0 * p0 - p1;
  const double p2 = at(k + 2);
  if (!(pm > 0.0 && p0 > 0.0 && p1 > 0.0 && p2 > 0.0)) return p0 + x * (p1 - p0);
  const double a = std::log(pm), b = std::log(p0), c = std::log(p1), d = std::log(p2);
  const double h = 0.5 * (2.0 * b + (c - a) * x + (2.0 * a - 5.0 * b + 4.0 * c - d) * x * x +
                          (3.0 * b - a - 3.0 * c + d) * x * x * x);
  return std::exp(h);
}

// log P[S_n >= k_b] for an output-independent codeword, by change of measure:
// log sum_{b' >= b} P(B = b') e^{-(n origin + b' step)}, b = 0..n, plus -inf at n + 1.
std::vector<double> tilted_log_tail(const info_density_law& law, int n);

// eps_fb per settings.final_attempt.
double final_attempt_error(const info_density_law& law, double n, double log_competitors,
                           const cdf_settings& settings);

// Lattice point index b of the cell (k_{b-1}, k_b] holding gamma, with
// k_b = n * origin + b * step.
double lattice_cell(const info_density_law& law, double n, double gamma);

}  // namespace vlsf::detail
