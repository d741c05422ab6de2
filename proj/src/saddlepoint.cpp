#include "vlsf/saddlepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vlsf/error.hpp"
#include "vlsf/normal.hpp"

namespace vlsf {

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Skewness and continuity terms of the mean-point limit of 1/w - 1/u.
double mean_correction(const info_density_law& law, const sum_moments& m) {
  const double sigma = std::sqrt(m.variance);
  double c = m.third_cumulant / (6.0 * m.variance * sigma);
  if (law.is_lattice()) c -= law.lattice->step / (2.0 * sigma);
  return c;
}

void finish(cdf_result& r, double raw) {
  if (!std::isfinite(raw)) raw = raw > 0.0 ? 1.0 : 0.0;
  r.p = std::clamp(raw, 0.0, 1.0);
  r.clamped = r.p != raw;
}

cdf_result continuous_cdf(const info_density_law& law, double n, double gamma,
                          double eps_s) {
  cdf_result r;
  r.target = gamma;
  const double snr = law.channel.param();
  const double a = snr / (snr + 1.0);
  const double shifted = gamma - n * law.shift;
  const auto m = moments(law, n);
  const double sigma = std::sqrt(m.variance);
  const double z = shifted / sigma;

  if (std::abs(shifted) < 1e-12) {
    r.branch = cdf_branch::mean_skew_formula;
    finish(r, 0.5 + mean_correction(law, m) / std::sqrt(2.0 * std::numbers::pi));
    return r;
  }
  if (std::abs(z) <= eps_s) {
    r.branch = cdf_branch::mean_gaussian;
    r.w_hat = z;
    finish(r, mean_fallback(law, n, gamma));
    return r;
  }

  const double s = saddlepoint_awgn(law, n, gamma);
  // K'(s) = n a s / (1 - a s^2) = shifted, so 1 - a s^2 = n a s / shifted
  // without cancellation near the edge of the convergence region.
  const double u = n * a * s / shifted;
  const double as2 = 1.0 - u;
  const double k0 = -0.5 * n * std::log(u);
  const double k2 = n * a * (1.0 + as2) / (u * u);
  const double w = sgn(s) * std::sqrt(std::max(0.0, 2.0 * (s * shifted - k0)));
  const double uhat = s * std::sqrt(k2);

  r.branch = cdf_branch::continuous_lr;
  r.saddlepoint = s;
  r.w_hat = w;
  r.u_hat = uhat;
  finish(r, normal_cdf(w) + normal_pdf(w) * (1.0 / w - 1.0 / uhat));
  return r;
}

// Lattice formula at a shifted target treated as a lattice point.
cdf_result lattice_at(const info_density_law& law, double n, double shifted_target,
                      double eps_s, cdf_result r) {
  const auto& lat = *law.lattice;
  const double step = lat.step;
  const double q = lat.success;
  const double top = n * step;
  const double tol = 1e-12 * std::max(1.0, top);
  r.target = shifted_target + n * law.shift;

  if (shifted_target < -tol) {
    r.branch = cdf_branch::boundary;
    r.degenerate = true;
    finish(r, 0.0);
    return r;
  }
  if (shifted_target <= tol) {
    // P[S_n < min support] = 0.
    r.branch = cdf_branch::boundary;
    finish(r, 0.0);
    return r;
  }
  if (shifted_target > top + tol) {
    r.branch = cdf_branch::boundary;
    r.degenerate = true;
    finish(r, 1.0);
    return r;
  }
  if (shifted_target >= top - tol) {
    // P[S_n < max support] = 1 - q^n.
    r.branch = cdf_branch::boundary;
    finish(r, -std::expm1(n * std::log(q)));
    return r;
  }
  // Cells next to the edges hold no lattice point of their own, and the
  // formula between lattice points is not usable there. The top cell is
  // exact; the bottom cell takes the value at the first lattice point.
  if (shifted_target > top - step + tol) {
    r.branch = cdf_branch::boundary;
    finish(r, -std::expm1(n * std::log(q)));
    return r;
  }
  if (shifted_target < step - tol) return lattice_at(law, n, step, eps_s, r);

  const auto m = moments(law, n);
  const double sigma = std::sqrt(m.variance);
  const double z = (r.target - m.mean) / sigma;
  if (std::abs(z) <= 1e-9) {
    r.branch = cdf_branch::mean_skew_formula;
    finish(r, 0.5 + mean_correction(law, m) / std::sqrt(2.0 * std::numbers::pi));
    return r;
  }
  if (std::abs(z) <= eps_s) {
    r.branch = cdf_branch::mean_gaussian;
    r.w_hat = z;
    finish(r, mean_fallback(law, n, r.target));
    return r;
  }

  const double s = saddlepoint_lattice(law, n, shifted_target);
  const auto k = cgf(law, s, n);
  const double w = sgn(s) * std::sqrt(std::max(0.0, 2.0 * (s * shifted_target - k.k0)));

  // u = (1 - e^{-step s}) / step * sqrt(K''(s)), assembled in log space so the
  // far tails neither overflow nor produce inf * 0.
  const double ls = step * s;
  const double log_gap = ls > 0.0 ? std::log(-std::expm1(-ls)) : -ls + std::log(-std::expm1(ls));
  const double t = ls + std::log(q / (1.0 - q));
  const double log_k2 = std::log(n) + 2.0 * std::log(step) - softplus(-t) - softplus(t);
  const double ubar = sgn(s) * std::exp(log_gap + 0.5 * log_k2) / step;

  r.branch = cdf_branch::discrete_lr;
  r.saddlepoint = s;
  r.w_hat = w;
  r.u_hat = ubar;
  finish(r, normal_cdf(w) + normal_pdf(w) * (1.0 / w - 1.0 / ubar));
  return r;
}

cdf_result lattice_cdf(const info_density_law& law, double n, double gamma,
                       overshoot_mode mode, double eps_s) {
  const double step = law.lattice->step;
  const double shifted = gamma - n * law.shift;
  cdf_result r;
  switch (mode) {
    case overshoot_mode::lower:
      return lattice_at(law, n, shifted, eps_s, r);
    case overshoot_mode::upper:
      return lattice_at(law, n, shifted + step, eps_s, r);
    case overshoot_mode::exact_lattice: {
      if (std::abs(n - std::round(n)) > 1e-9) {
        throw error(errc::invalid_argument, "exact lattice CDF needs an integer n");
      }
      const double ratio = shifted / step;
      double b = std::ceil(ratio);
      // gamma sitting on a lattice point up to round-off is that point.
      if (std::abs(ratio - std::round(ratio)) <= 1e-12 * std::max(1.0, std::abs(ratio))) {
        b = std::round(ratio);
      }
      const double k_shifted = b * step;
      r.lattice_point = k_shifted + n * law.shift;
      return lattice_at(law, std::round(n), k_shifted, eps_s, r);
    }
  }
  throw error(errc::invalid_argument, "unknown overshoot mode");
}

}  // namespace

double saddlepoint_awgn(const info_density_law& law, double n, double gamma) {
  if (law.is_lattice()) throw error(errc::unsupported_law, "saddlepoint_awgn needs an AWGN law");
  const double shifted = gamma - n * law.shift;
  if (shifted == 0.0) return 0.0;
  const double snr = law.channel.param();
  const double a = snr / (snr + 1.0);
  // (-n + sqrt(n^2 + 4 g^2 / a)) / (2 g), rationalized.
  return 2.0 * shifted / (a * (n + std::sqrt(n * n + 4.0 * shifted * shifted / a)));
}

double saddlepoint_lattice(const info_density_law& law, double n, double k_shifted) {
  if (!law.is_lattice()) {
    throw error(errc::unsupported_law, "saddlepoint_lattice needs a BSC or BEC law");
  }
  const auto& lat = *law.lattice;
  const double top = n * lat.step;
  if (!(k_shifted > 0.0 && k_shifted < top)) {
    throw error(errc::lattice_point_out_of_support,
                "shifted lattice point outside the open support interval");
  }
  const double frac = k_shifted / top;
  const double q = lat.success;
  return (std::log(frac) - std::log1p(-frac) + std::log((1.0 - q) / q)) / lat.step;
}

cdf_result cdf(const cdf_query& query, double eps_s) {
  if (!(query.n > 0.0) || !std::isfinite(query.n)) {
    throw error(errc::invalid_argument, "n must be positive");
  }
  if (!std::isfinite(query.gamma)) throw error(errc::invalid_argument, "gamma must be finite");
  if (!(eps_s > 0.0)) throw error(errc::invalid_argument, "eps_s must be positive");

  if (!query.law.is_lattice()) {
    if (query.mode == overshoot_mode::exact_lattice) {
      throw error(errc::invalid_argument, "exact lattice mode needs a lattice law");
    }
    return continuous_cdf(query.law, query.n, query.gamma, eps_s);
  }
  return lattice_cdf(query.law, query.n, query.gamma, query.mode, eps_s);
}

double mean_fallback(const info_density_law& law, double n, double gamma) {
  const auto m = moments(law, n);
  const double z = (gamma - m.mean) / std::sqrt(m.variance);
  return normal_cdf(z) + normal_pdf(z) * mean_correction(law, m);
}

}  // namespace vlsf
