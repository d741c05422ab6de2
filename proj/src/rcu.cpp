#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "union_min.hpp"
#include "vlsf/error.hpp"
#include "vlsf/normal.hpp"
#include "vlsf/oracles.hpp"

namespace vlsf::detail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
}

// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Mills ratio asymptotics.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Noncentral chi-square with `dof` degrees of freedom and noncentrality
// `lambda`, by saddlepoint. v = 1 / (1 - 2s) solves dof v + lambda v^2 = x.
struct noncentral_chi2 {
  double dof;
  double lambda;

  struct point {
    double s, k0, k2;
  };

  point at(double x) const {
    const double v = lambda > 0.0
                         ? 2.0 * x / (dof + std::sqrt(dof * dof + 4.0 * lambda * x))
                         : x / dof;
    const double s = 0.5 * (1.0 - 1.0 / v);
    return {s, 0.5 * dof * std::log(v) + lambda * s * v, 2.0 * dof * v * v + 4.0 * lambda * v * v * v};
  }

  double mean() const { return dof + lambda; }
  double sd() const { return std::sqrt(2.0 * dof + 4.0 * lambda); }

  // log P[Q <= x] (lower) or log P[Q > x] (upper) by Lugannani-Rice.
  double log_tail(double x, bool upper) const {
    if (x <= 0.0) return upper ? 0.0 : kNegInf;
    const double z = (x - mean()) / sd();
    const auto p = at(x);
    if (std::abs(z) < 1e-3) {
      const double k3 = 8.0 * dof + 24.0 * lambda;
      const double var = sd() * sd();
      const double c = k3 / (6.0 * var * sd()) * (1.0 - z * z);
      const double lower = normal_cdf(z) + normal_pdf(z) * c;
      return std::log(upper ? 1.0 - lower : lower);
    }
    const double w = (p.s > 0.0 ? 1.0 : -1.0) * std::sqrt(std::max(0.0, 2.0 * (p.s * x - p.k0)));
    const double u = p.s * std::sqrt(p.k2);
    const double ww = upper ? -w : w;
    // Phi(ww) + phi(w) (1/ww - 1/uu) with the sign of w and u flipped for the
    // upper tail; factor out Phi(ww) in log space.
    const double uu = upper ? -u : u;
    const double log_phi_tail = log_normal_cdf(ww);
    const double ratio = std::exp(-0.5 * w * w - 0.5 * std::log(2.0 * std::numbers::pi) - log_phi_tail);
    const double factor = 1.0 + ratio * (1.0 / ww - 1.0 / uu);
    if (!(factor > 0.0)) return log_phi_tail + std::log(1e-300);
    return log_phi_tail + std::log(factor);
  }

  double log_density(double x) const {
    const auto p = at(x);
    return p.k0 - p.s * x - 0.5 * std::log(2.0 * std::numbers::pi * p.k2);
  }
};

// E[min(1, (M - 1) P[|y - Xbar|^2 <= |N|^2 | y, N])] for the Gaussian ensemble.
// Conditioned on R = |y|^2 / (1 + p) ~ chi2_n, V = (1 + p) |N|^2 / p is
// noncentral chi2_n(R / p), and the competitor event is W <= V / (1 + p) with
// W ~ noncentral chi2_n(R (1 + p) / p).
double rcu_awgn(double snr, double n, double log_competitors) {
  const boost::math::chi_squared_distribution<double> outer(n);
  double total = 0.0;
  const auto& nodes = boost::math::quadrature::gauss<double, 40>::abscissa();
  const auto& weights = boost::math::quadrature::gauss<double, 40>::weights();

  auto inner = [&](double r) {
    const noncentral_chi2 v_law{n, r / snr};
    const noncentral_chi2 w_law{n, r * (1.0 + snr) / snr};
    auto log_g = [&](double v) { return w_law.log_tail(v / (1.0 + snr), false); };

    // V* where (M - 1) G(V*) = 1.
    double lo = 1e-9;
    double hi = (1.0 + snr) * w_law.mean();
    while (log_competitors + log_g(hi) < 0.0) hi *= 2.0;
    if (log_competitors + log_g(lo) >= 0.0) return 1.0;
    for (int i = 0; i < 80 && hi - lo > 1e-10 * hi; ++i) {
      const double mid = 0.5 * (lo + hi);
      (log_competitors + log_g(mid) < 0.0 ? lo : hi) = mid;
    }
    const double v_star = hi;
    const double head = std::exp(v_law.log_tail(v_star, true));

    // (M - 1) * integral_0^{V*} G(v) f_V(v) dv with a log-linear integrand
    // per cell, which is exact for the exponential decay below V*. When V*
    // lies above the bulk of V (few competitors) the window covers the bulk.
    const bool bulk = v_star > v_law.mean();
    const double x_top = bulk ? std::min(v_star, v_law.mean() + 20.0 * v_law.sd()) : v_star;
    const double lo_v = std::max(1e-9 * x_top,
                                 (bulk ? v_law.mean() : v_star) - 14.0 * v_law.sd());
    const int kCells = bulk ? 800 : 160;
    double log_acc = kNegInf;
    double x1 = x_top;
    double f1 = log_g(x1) + v_law.log_density(x1);
    for (int c = 1; c <= kCells; ++c) {
      const double x0 = x_top - (x_top - lo_v) * c / kCells;
      const double f0 = log_g(x0) + v_law.log_density(x0);
      const double h = x1 - x0;
      const double d = f1 - f0;
      const double log_cell = std::abs(d) < 1e-8 ? f1 + std::log(h)
                              : d > 0.0 ? f1 + std::log(-std::expm1(-d)) + std::log(h / d)
                                        : f0 + std::log(-std::expm1(d)) + std::log(-h / d);
      log_acc = log_add(log_acc, log_cell);
      if (log_cell < log_acc - 40.0) break;
      x1 = x0;
      f1 = f0;
    }
    return std::min(1.0, head + std::exp(log_competitors + log_acc));
  };

  // Symmetric Gauss-Legendre nodes on u in (0, 1), mapped through the
  // chi-square quantile: R = F^{-1}(u).
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (int sign : {-1, 1}) {
      if (i == 0 && sign < 0 && nodes[0] == 0.0) continue;
      const double u = 0.5 * (1.0 + sign * nodes[i]);
      const double r = boost::math::quantile(outer, u);
      total += 0.5 * weights[i] * inner(r);
    }
  }
  return std::min(1.0, total);
}

double rcu_lattice(const info_density_law& law, int n, double log_competitors) {
  const double q = law.lattice->success;
  double acc = 0.0;
  if (law.channel.kind() == channel_kind::bec) {
    const auto log_tail = tilted_log_tail(law, n);
    for (int u = 0; u <= n; ++u) {
      acc += std::exp(log_binomial_pmf(u, n, q)) *
             std::min(1.0, std::exp(log_competitors + log_tail[u]));
    }
    return std::min(1.0, acc);
  }
  // BSC: agreements of the true codeword ~ Bin(n, q), of a competitor ~ Bin(n, 1/2).
  std::vector<double> log_tail(n + 2, kNegInf);
  for (int b = n; b >= 0; --b) log_tail[b] = log_add(log_tail[b + 1], log_binomial_pmf(b, n, 0.5));
  for (int a = 0; a <= n; ++a) {
    acc += std::exp(log_binomial_pmf(a, n, q)) *
           std::min(1.0, std::exp(log_competitors + log_tail[a]));
  }
  return std::min(1.0, acc);
}

double rcu_integer(const info_density_law& law, int n, double log_competitors) {
  if (n > kExactCdfCap) throw error(errc::invalid_argument, "n above the exact-sum cap");
  using key = std::tuple<int, double, int, double>;
  static std::mutex mu;
  static std::map<key, double> cache;
  const key k{static_cast<int>(law.channel.kind()), law.channel.param(), n, log_competitors};
  {
    std::lock_guard lock(mu);
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
  }
  const double v = law.is_lattice() ? rcu_lattice(law, n, log_competitors)
                                    : rcu_awgn(law.channel.param(), n, log_competitors);
  std::lock_guard lock(mu);
  if (cache.size() > 200000) cache.clear();
  cache.emplace(k, v);
  return v;
}

}  // namespace

std::vector<double> tilted_log_tail(const info_density_law& law, int n) {
  const auto& lat = *law.lattice;
  std::vector<double> out(n + 2, kNegInf);
  for (int b = n; b >= 0; --b) {
    const double density = n * lat.origin + b * lat.step;
    out[b] = log_add(out[b + 1], log_binomial_pmf(b, n, lat.success) - density);
  }
  return out;
}

double random_coding_union(const info_density_law& law, double n, double log_competitors) {
  if (!(n >= 1.0)) throw error(errc::invalid_argument, "n must be >= 1");
  return interpolate_integers([&](int k) { return rcu_integer(law, k, log_competitors); }, n);
}

}  // namespace vlsf::detail
