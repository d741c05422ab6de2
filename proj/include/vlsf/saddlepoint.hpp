#pragma once

#include <optional>

#include "vlsf/channels.hpp"

namespace vlsf {

// Where the lattice point is placed relative to the threshold for discrete
// laws. `lower` evaluates at gamma itself (no overshoot), `upper` at gamma
// plus one lattice step, `exact_lattice` at the smallest attainable lattice
// point >= gamma. Continuous laws have no overshoot and ignore lower/upper.
enum class overshoot_mode { lower, upper, exact_lattice };

enum class cdf_branch {
  continuous_lr,
  discrete_lr,
  mean_gaussian,
  mean_skew_formula,
  // Lattice target on or beyond the edge of the support; value is exact.
  boundary,
};

struct cdf_query {
  info_density_law law;
  double n;
  double gamma;  // threshold on the unshifted S_n, nats
  overshoot_mode mode = overshoot_mode::lower;
};

struct cdf_result {
  double p = 0.0;
  double saddlepoint = 0.0;
  cdf_branch branch = cdf_branch::continuous_lr;
  std::optional<double> lattice_point;  // unshifted k, exact_lattice only
  double w_hat = 0.0;
  double u_hat = 0.0;
  double target = 0.0;  // unshifted point the formula was evaluated at
  bool clamped = false;
  bool degenerate = false;  // gamma outside the attainable range
};

inline constexpr double kDefaultEpsS = 0.1;

// Closed-form root of K'(s) = gamma - n * shift for the AWGN shifted sum.
double saddlepoint_awgn(const info_density_law& law, double n, double gamma);

// Closed-form root of K'(s) = k_shifted for a two-point lattice law (BSC, and
// BEC as its special case). k_shifted must lie strictly inside (0, n * step).
double saddlepoint_lattice(const info_density_law& law, double n, double k_shifted);

// P[S_n < gamma] by Lugannani-Rice (continuous) or its first-order
// continuity-corrected form (lattice), with the near-mean Gaussian band
// |z| <= eps_s.
cdf_result cdf(const cdf_query& query, double eps_s = kDefaultEpsS);

inline double cdf_value(const info_density_law& law, double n, double gamma,
                        overshoot_mode mode = overshoot_mode::lower,
                        double eps_s = kDefaultEpsS) {
  return cdf({law, n, gamma, mode}, eps_s).p;
}

// Near-mean value Phi(z) + phi(z) * c with z = (gamma - mu) / sigma, where c is
// the mean-point limit of 1/w - 1/u. For AWGN c = 0 (symmetric, continuous),
// so this is exactly Phi(z). For lattice laws c carries the skewness and the
// half-step continuity terms, and gamma is read as the lattice target.
double mean_fallback(const info_density_law& law, double n, double gamma);

}  // namespace vlsf
