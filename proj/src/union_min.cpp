#include "union_min.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "vlsf/error.hpp"
#include "vlsf/normal.hpp"
#include "vlsf/oracles.hpp"

namespace vlsf::detail {

double lattice_cell(const info_density_law& law, double n, double gamma) {
  const auto& lat = *law.lattice;
  const double ratio = (gamma - n * lat.origin) / lat.step;
  if (std::abs(ratio - std::round(ratio)) <= 1e-12 * std::max(1.0, std::abs(ratio))) {
    return std::round(ratio);
  }
  return std::ceil(ratio);
}

union_min minimize_union(const info_density_law& law, double n, double log_competitors,
                         const cdf_settings& settings) {
  auto union_value = [&](double g) {
    return cdf_value(law, n, g, settings.mode, settings.eps_s) + std::exp(log_competitors - g);
  };

  if (settings.mode == overshoot_mode::exact_lattice) {
    if (!law.is_lattice()) throw error(errc::invalid_argument, "exact lattice mode needs a lattice law");
    const auto& lat = *law.lattice;
    const int top = static_cast<int>(std::round(n));
    // Cells left of log(M - 1) have a union term above one.
    const int first = static_cast<int>(
        std::clamp(lattice_cell(law, n, log_competitors), 0.0, static_cast<double>(top)));
    union_min best{std::numeric_limits<double>::infinity(), 0.0};
    for (int b = first; b <= top; ++b) {
      const double k = n * lat.origin + b * lat.step;
      const double f = cdf_value(law, n, k, settings.mode, settings.eps_s);
      if (f >= best.value) break;
      const double v = f + std::exp(log_competitors - k);
      if (v < best.value) best = {v, k};
    }
    return best;
  }

  const auto m = moments(law, n);
  const double sigma = std::sqrt(m.variance);
  const double lo = m.mean - 8.0 * sigma;
  const double hi = m.mean + 8.0 * sigma;
  constexpr int kScan = 64;
  int best_i = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kScan; ++i) {
    const double g = lo + (hi - lo) * i / kScan;
    const double v = union_value(g);
    if (v < best_v) {
      best_v = v;
      best_i = i;
    }
  }
  const double a = lo + (hi - lo) * std::max(0, best_i - 1) / kScan;
  const double b = lo + (hi - lo) * std::min(kScan, best_i + 1) / kScan;
  std::uintmax_t iterations = 200;
  const auto [g, v] = boost::math::tools::brent_find_minima(union_value, a, b, 40, iterations);
  if (v <= best_v) return {v, g};
  return {best_v, lo + (hi - lo) * best_i / kScan};
}

double independent_tail_awgn(const info_density_law& law, double n, double gamma) {
  if (law.is_lattice()) throw error(errc::unsupported_law, "independent tail needs an AWGN law");
  // Tilting by -1 maps the joint law onto the independent one, so the
  // saddlepoint of the independent sum at gamma is s + 1.
  const double s = saddlepoint_awgn(law, n, gamma);
  const double shifted = gamma - n * law.shift;
  const auto k = cgf(law, s, n);
  const double t = s + 1.0;
  const double u = t * std::sqrt(k.k2);
  if (u < 1e-3) {
    const auto km = cgf(law, -1.0, n);
    const double mean = n * law.shift + km.k1;
    return normal_cdf(-(gamma - mean) / std::sqrt(km.k2));
  }
  const double w = std::sqrt(std::max(0.0, 2.0 * (s * shifted - k.k0) + 2.0 * gamma));
  if (std::abs(w - u) < 1e-9 * u) return normal_cdf(-w);
  return std::clamp(normal_cdf(-w) + normal_pdf(w) * (1.0 / u - 1.0 / w), 0.0, 1.0);
}

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Exact DT at integer n: sum over the success count b of
// P(B = b) min(1, exp(threshold - density(b))).
double dt_lattice_exact(const info_density_law& law, int n, double threshold) {
  const double origin = law.lattice->origin;
  const double step = law.lattice->step;
  const double q = law.lattice->success;
  const double cut = std::floor((threshold - n * origin) / step);
  const int b_star = static_cast<int>(std::clamp(cut, -1.0, static_cast<double>(n)));
  double head = b_star >= 0 ? binomial_cdf(b_star, n, q) : 0.0;
  double log_tail = -std::numeric_limits<double>::infinity();
  for (int b = b_star + 1; b <= n; ++b) {
    const double term = log_binomial_pmf(b, n, q) + threshold - (n * origin + b * step);
    log_tail = log_add(log_tail, term);
    if (term < log_tail - 40.0 && b > n * q) break;
  }
  return std::min(1.0, head + std::exp(log_tail));
}

}  // namespace

double dependence_testing(const info_density_law& law, double n, double log_competitors,
                          const cdf_settings& settings) {
  const double threshold = log_competitors - std::log(2.0);
  if (law.is_lattice()) {
    return interpolate_integers([&](int k) { return dt_lattice_exact(law, k, threshold); },
                                std::max(1.0, n));
  }
  // P[S_n <= t] + e^{t} P_indep[S_n > t]; the two tails meet at t.
  const double head = cdf_value(law, n, threshold, settings.mode, settings.eps_s);
  return std::min(1.0, head + std::exp(threshold) * independent_tail_awgn(law, n, threshold));
}

double final_attempt_error(const info_density_law& law, double n, double log_competitors,
                           const cdf_settings& settings) {
  switch (settings.final_attempt) {
    case fb_method::threshold_union:
      return minimize_union(law, n, log_competitors, settings).value;
    case fb_method::dependence_testing:
      return dependence_testing(law, n, log_competitors, settings);
    case fb_method::rcu:
      return random_coding_union(law, n, log_competitors);
    case fb_method::mc_rcu:
      break;
  }
  throw error(errc::invalid_argument, "Monte Carlo eps_fb cannot drive the optimizer");
}

}  // namespace vlsf::detail
