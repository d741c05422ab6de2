#include "vlsf/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <thread>

#include "union_min.hpp"
#include "vlsf/error.hpp"

namespace vlsf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double union_term(double log_competitors, double gamma) {
  return std::exp(log_competitors - gamma);
}

double p1_bisect(const info_density_law& law, double n_t, double log_competitors, double epsilon,
                 const cdf_settings& settings) {
  auto c = [&](double g) {
    return cdf_value(law, n_t, g, settings.mode, settings.eps_s) + union_term(log_competitors, g);
  };
  double lo = log_competitors - std::log(epsilon);
  if (c(lo) <= epsilon) return lo;
  const auto best = detail::minimize_union(law, n_t, log_competitors, settings);
  if (best.value > epsilon) {
    throw error(errc::infeasible, "P1 constraint cannot be met at this final instant");
  }
  double hi = best.gamma;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (c(mid) <= epsilon ? hi : lo) = mid;
  }
  return hi;
}

// Cells (k_{b-1}, k_b] carry the constant F_b; inside, the union term alone
// decides feasibility, so the first feasible cell holds the smallest root.
double p1_cells(const info_density_law& law, double n_t, double log_competitors, double epsilon,
                const cdf_settings& settings) {
  const auto& lat = *law.lattice;
  const int top = static_cast<int>(std::round(n_t));
  const double floor_gamma = log_competitors - std::log(epsilon);
  const double first = std::max(0.0, detail::lattice_cell(law, n_t, floor_gamma));
  for (int b = static_cast<int>(first); b <= top + 1; ++b) {
    const double k = n_t * lat.origin + b * lat.step;
    const double prev = k - lat.step;
    const double f = b > top ? 1.0
                             : cdf_value(law, n_t, k, settings.mode, settings.eps_s);
    if (f >= epsilon) break;
    const double need = log_competitors - std::log(epsilon - f);
    if (b > top || need <= k) {
      const double inside = b == 0 ? need : prev + 1e-9 * std::max(1.0, std::abs(prev));
      return std::max(need, inside);
    }
  }
  throw error(errc::infeasible, "P1 constraint cannot be met at this final instant");
}

// Integer-schedule evaluation with gamma re-solved and cached per n_t.
class integer_evaluator {
 public:
  integer_evaluator(const channel_model& channel, const code_spec& spec, decoding_rule rule,
                    const cdf_settings& settings, int max_blocklength)
      : max_n_(max_blocklength),
        channel_(channel),
        law_(single_letter_law(channel)),
        spec_(spec),
        rule_(rule),
        settings_(settings),
        log_m1_(spec.log_competitors()) {}

  std::optional<double> gamma(int n_t) {
    auto it = gammas_.find(n_t);
    if (it != gammas_.end()) return it->second;
    std::optional<double> g;
    try {
      g = solve_gamma(channel_, rule_, n_t, log_m1_, spec_.epsilon, settings_);
    } catch (const error& e) {
      if (e.code() != errc::infeasible) throw;
    }
    gammas_.emplace(n_t, g);
    return g;
  }

  double value(const std::vector<int>& inst) {
    if (inst.front() < 1 || inst.back() > max_n_) return kInf;
    for (std::size_t j = 1; j < inst.size(); ++j) {
      if (inst[j] <= inst[j - 1]) return kInf;
    }
    auto it = values_.find(inst);
    if (it != values_.end()) return it->second;
    const auto g = gamma(inst.back());
    double v = kInf;
    if (g) v = objective(channel_, {*g, inst}, settings_);
    values_.emplace(inst, v);
    return v;
  }

 private:
  int max_n_;
  channel_model channel_;
  info_density_law law_;
  code_spec spec_;
  decoding_rule rule_;
  cdf_settings settings_;
  double log_m1_;
  std::map<int, std::optional<double>> gammas_;
  std::map<std::vector<int>, double> values_;
};

// Lexicographic (objective, n_t, n_1) with a small tolerance on the objective.
bool better(double v, const std::vector<int>& a, double w, const std::vector<int>& b) {
  if (v < w - 1e-12) return true;
  if (v > w + 1e-12 || b.empty()) return v < w;
  if (a.back() != b.back()) return a.back() < b.back();
  return a.front() < b.front();
}

bool feasible_at(const channel_model& channel, decoding_rule rule, double n, double log_m1,
                 double epsilon, const cdf_settings& settings) {
  try {
    solve_gamma(channel, rule, n, log_m1, epsilon, settings);
    return true;
  } catch (const error& e) {
    if (e.code() != errc::infeasible) throw;
    return false;
  }
}

// Smallest integer final instant that admits a feasible gamma.
int min_feasible_instant(const channel_model& channel, const code_spec& spec, decoding_rule rule,
                         const cdf_settings& settings, const optimizer_options& options) {
  const double log_m1 = spec.log_competitors();
  int hi = std::max(1, options.max_blocklength);
  while (!feasible_at(channel, rule, hi, log_m1, spec.epsilon, settings)) {
    if (hi >= options.blocklength_cap) {
      throw error(errc::infeasible, "no feasible final instant up to the blocklength cap " +
                                        std::to_string(options.blocklength_cap));
    }
    hi = std::min(2 * hi, options.blocklength_cap);
  }
  int lo = 0;  // infeasible sentinel
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (feasible_at(channel, rule, mid, log_m1, spec.epsilon, settings) ? hi : lo) = mid;
  }
  return hi;
}

double min_feasible_real(const channel_model& channel, const code_spec& spec, decoding_rule rule,
                         const cdf_settings& settings, int integer_hint) {
  const double log_m1 = spec.log_competitors();
  double hi = integer_hint;
  while (!feasible_at(channel, rule, hi, log_m1, spec.epsilon, settings)) hi *= 1.25;
  double lo = std::max(1.0, 0.5 * hi);
  if (feasible_at(channel, rule, lo, log_m1, spec.epsilon, settings)) return lo;
  for (int i = 0; i < 60 && hi - lo > 1e-9 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (feasible_at(channel, rule, mid, log_m1, spec.epsilon, settings) ? hi : lo) = mid;
  }
  return hi;
}

std::vector<double> to_instants(std::span<const double> theta) {
  std::vector<double> n(theta.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    acc += std::exp(theta[j]);
    n[j] = acc;
  }
  return n;
}

std::vector<double> to_theta(const std::vector<double>& n) {
  std::vector<double> theta(n.size());
  double prev = 0.0;
  for (std::size_t j = 0; j < n.size(); ++j) {
    theta[j] = std::log(n[j] - prev);
    prev = n[j];
  }
  return theta;
}

// Instant where mu(n) = gamma + z sigma(n) under the Gaussian approximation.
double gaussian_crossing(const info_density_law& law, double gamma, double z) {
  const auto one = moments(law, 1.0);
  const double c = one.mean;
  const double sv = std::sqrt(one.variance);
  const double x = (z * sv + std::sqrt(z * z * one.variance + 4.0 * c * gamma)) / (2.0 * c);
  return x * x;
}

class relaxed_problem {
 public:
  relaxed_problem(const channel_model& channel, const code_spec& spec, decoding_rule rule,
                  const cdf_settings& settings, double n_floor, double n_cap)
      : channel_(channel),
        law_(single_letter_law(channel)),
        spec_(spec),
        rule_(rule),
        settings_(settings),
        log_m1_(spec.log_competitors()),
        n_floor_(n_floor),
        n_cap_(n_cap) {}

  double gamma(double n_t) const {
    return solve_gamma(channel_, rule_, n_t, log_m1_, spec_.epsilon, settings_);
  }

  double operator()(std::span<const double> theta) const {
    for (double v : theta) {
      if (!std::isfinite(v) || v > 30.0) return kInf;
    }
    const auto n = to_instants(theta);
    if (n.back() < n_floor_ || n.back() > n_cap_) return kInf;
    double g = 0.0;
    try {
      g = gamma(n.back());
    } catch (const error& e) {
      if (e.code() != errc::infeasible) throw;
      return kInf;
    }
    return relaxed_objective(law_, n, g, settings_);
  }

  const info_density_law& law() const { return law_; }

 private:
  int max_n_;
  channel_model channel_;
  info_density_law law_;
  code_spec spec_;
  decoding_rule rule_;
  cdf_settings settings_;
  double log_m1_;
  double n_floor_;
  double n_cap_;
};

std::vector<double> fd_gradient(const relaxed_problem& f, const std::vector<double>& theta,
                                double f0) {
  std::vector<double> g(theta.size(), 0.0);
  auto x = theta;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double h = std::max(1e-4, 1e-6 * std::abs(theta[j]));
    x[j] = theta[j] + h;
    const double fp = f(x);
    x[j] = theta[j] - h;
    const double fm = f(x);
    x[j] = theta[j];
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[j] = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g[j] = (fp - f0) / h;
    } else if (std::isfinite(fm)) {
      g[j] = (f0 - fm) / h;
    }
  }
  return g;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Quasi-Newton (BFGS) descent with Armijo backtracking.
relaxed_solution descend(const relaxed_problem& f, std::vector<double> theta,
                         const optimizer_options& options) {
  relaxed_solution out;
  const std::size_t d = theta.size();
  double fx = f(theta);
  if (!std::isfinite(fx)) {
    out.objective = kInf;
    return out;
  }
  auto grad = fd_gradient(f, theta, fx);
  // Inverse Hessian estimate, started at a scaled identity.
  std::vector<double> h(d * d, 0.0);
  auto reset = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    const double scale = std::min(1.0, 0.1 / std::max(1e-12, norm(grad)));
    for (std::size_t i = 0; i < d; ++i) h[i * d + i] = scale;
  };
  reset();
  bool fresh = true;
  int it = 0;
  std::vector<double> dir(d), trial(d);
  for (; it < options.max_iterations; ++it) {
    const double gn = norm(grad);
    if (gn < options.gradient_tolerance) break;
    double slope = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dir[i] = 0.0;
      for (std::size_t j = 0; j < d; ++j) dir[i] -= h[i * d + j] * grad[j];
      slope += dir[i] * grad[i];
    }
    if (!(slope < 0.0)) {
      reset();
      for (std::size_t i = 0; i < d; ++i) dir[i] = -h[i * d + i] * grad[i];
      slope = 0.0;
      for (std::size_t i = 0; i < d; ++i) slope += dir[i] * grad[i];
    }
    double step = 1.0;
    double ft = kInf;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = theta[i] + step * dir[i];
      ft = f(trial);
      if (std::isfinite(ft) && ft <= fx + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
        if (fresh) break;
      reset();
      fresh = true;
      continue;
    }
    fresh = false;
    auto g_new = fd_gradient(f, trial, ft);
    std::vector<double> s(d), y(d), hy(d, 0.0);
    double sy = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      s[i] = trial[i] - theta[i];
      y[i] = g_new[i] - grad[i];
      sy += s[i] * y[i];
    }
    if (sy > 1e-12 * norm(s) * norm(y)) {
      double yhy = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) hy[i] += h[i * d + j] * y[j];
        yhy += y[i] * hy[i];
      }
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          h[i * d + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
      }
    }
    theta = trial;
    fx = ft;
    grad = std::move(g_new);
  }
  // Newton polish with a finite-difference Hessian.
  for (int k = 0; k < 20 && norm(grad) >= options.gradient_tolerance; ++k) {
    std::vector<double> hess(d * d, 0.0);
    auto x = theta;
    bool ok = true;
    for (std::size_t j = 0; j < d && ok; ++j) {
      const double hj = std::max(1e-3, 1e-5 * std::abs(theta[j]));
      x[j] = theta[j] + hj;
      const double fp = f(x);
      const auto gp = fd_gradient(f, x, fp);
      x[j] = theta[j] - hj;
      const double fm = f(x);
      const auto gm = fd_gradient(f, x, fm);
      x[j] = theta[j];
      ok = std::isfinite(fp) && std::isfinite(fm);
      for (std::size_t i = 0; i < d; ++i) hess[i * d + j] = (gp[i] - gm[i]) / (2.0 * hj);
    }
    if (!ok) break;
    std::vector<double> a(d * (d + 1));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        a[i * (d + 1) + j] = 0.5 * (hess[i * d + j] + hess[j * d + i]);
      }
      a[i * (d + 1) + d] = -grad[i];
    }
    for (std::size_t c = 0; c < d && ok; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < d; ++r) {
        if (std::abs(a[r * (d + 1) + c]) > std::abs(a[piv * (d + 1) + c])) piv = r;
      }
      if (std::abs(a[piv * (d + 1) + c]) < 1e-300) {
        ok = false;
        break;
      }
      for (std::size_t j = 0; j <= d; ++j) std::swap(a[c * (d + 1) + j], a[piv * (d + 1) + j]);
      for (std::size_t r = 0; r < d; ++r) {
        if (r == c) continue;
        const double m = a[r * (d + 1) + c] / a[c * (d + 1) + c];
        for (std::size_t j = c; j <= d; ++j) a[r * (d + 1) + j] -= m * a[c * (d + 1) + j];
      }
    }
    if (!ok) break;
    double slope = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dir[i] = a[i * (d + 1) + d] / a[i * (d + 1) + i];
      slope += dir[i] * grad[i];
    }
    if (!(slope < 0.0)) break;
    double step = 1.0;
    bool accepted = false;
    double ft = kInf;
    for (int m = 0; m < 30; ++m) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = theta[i] + step * dir[i];
      ft = f(trial);
      if (std::isfinite(ft) && ft <= fx + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    theta = trial;
    fx = ft;
    grad = fd_gradient(f, theta, fx);
  }
  out.instants = to_instants(theta);
  out.objective = fx;
  out.gradient_norm = norm(grad);
  out.iterations = it;
  out.gamma = f.gamma(out.instants.back());
  return out;
}

std::vector<std::vector<double>> starting_points(const relaxed_problem& f, int attempts,
                                                 double n_floor, int starts) {
  static constexpr double kFirstZ[] = {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  std::vector<std::vector<double>> out;
  for (int i = 0; i < starts; ++i) {
    const double n_t = n_floor * (1.01 + 0.03 * i);
    std::vector<double> n(attempts);
    n.back() = n_t;
    if (attempts > 1) {
      const double g = f.gamma(n_t);
      const auto m = moments(f.law(), n_t);
      const double z_last = (m.mean - g) / std::sqrt(m.variance);
      const double z_first = kFirstZ[i % 8];
      for (int j = 0; j + 1 < attempts; ++j) {
        const double z = z_first + (z_last - z_first) * j / (attempts - 1);
        n[j] = gaussian_crossing(f.law(), g, z);
      }
      // Keep the start strictly increasing and below n_t.
      for (int j = attempts - 2; j >= 0; --j) {
        const double cap = n[j + 1] * (1.0 - 0.5 / attempts);
        n[j] = std::clamp(n[j], 0.5 * (j + 1) / attempts * n_t, cap);
      }
    }
    out.push_back(to_theta(n));
  }
  return out;
}

std::vector<std::vector<int>> rounded_candidates(const std::vector<double>& n) {
  const int t = static_cast<int>(n.size());
  std::vector<std::vector<int>> out;
  for (int mask = 0; mask < (1 << t); ++mask) {
    std::vector<int> c(t);
    bool ok = true;
    for (int j = 0; j < t; ++j) {
      c[j] = static_cast<int>((mask >> j) & 1 ? std::ceil(n[j]) : std::floor(n[j]));
      if (c[j] < 1 || (j > 0 && c[j] <= c[j - 1])) ok = false;
    }
    if (ok) out.push_back(std::move(c));
  }
  return out;
}

// Every strictly increasing schedule in the box spanned by the relaxed
// solutions, widened by `margin`; returns the best few.
std::vector<std::vector<int>> box_candidates(integer_evaluator& eval,
                                             const std::vector<std::vector<double>>& corners,
                                             int margin, std::size_t keep) {
  const std::size_t t = corners.front().size();
  std::vector<int> lo(t), hi(t);
  double volume = 1.0;
  for (std::size_t j = 0; j < t; ++j) {
    double a = corners.front()[j];
    double b = a;
    for (const auto& c : corners) {
      a = std::min(a, c[j]);
      b = std::max(b, c[j]);
    }
    lo[j] = std::max(1, static_cast<int>(std::floor(a)) - margin);
    hi[j] = static_cast<int>(std::ceil(b)) + margin;
    volume *= hi[j] - lo[j] + 1;
  }
  if (volume > 2e5) return {};

  std::vector<std::pair<double, std::vector<int>>> found;
  std::vector<int> cur(lo);
  while (true) {
    const double v = eval.value(cur);
    if (std::isfinite(v)) found.emplace_back(v, cur);
    std::size_t j = 0;
    while (j < t && ++cur[j] > hi[j]) {
      cur[j] = lo[j];
      ++j;
    }
    if (j == t) break;
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return better(a.first, a.second, b.first, b.second);
  });
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < std::min(keep, found.size()); ++i) out.push_back(found[i].second);
  return out;
}

struct local_result {
  std::vector<int> instants;
  double value;
  int moves;
};

local_result local_search(integer_evaluator& eval, std::vector<int> cur, int max_moves) {
  double v = eval.value(cur);
  int moves = 0;
  static constexpr int kDeltas[] = {-2, -1, 1, 2};
  while (moves < max_moves) {
    std::vector<int> best = cur;
    double best_v = v;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      for (int d : kDeltas) {
        auto c = cur;
        c[j] += d;
        const double w = eval.value(c);
        if (std::isfinite(w) && better(w, c, best_v, best)) {
          best = std::move(c);
          best_v = w;
        }
      }
    }
    if (best == cur) break;
    cur = std::move(best);
    v = best_v;
    ++moves;
  }
  return {cur, v, moves};
}

}  // namespace

cdf_settings default_cdf_settings(const channel_model& channel) {
  return {channel.is_lattice() ? overshoot_mode::exact_lattice : overshoot_mode::lower,
          kDefaultEpsS};
}

double relaxed_objective(const info_density_law& law, std::span<const double> instants,
                         double gamma, const cdf_settings& settings) {
  if (instants.empty()) throw error(errc::invalid_argument, "schedule has no instants");
  double v = instants.front();
  for (std::size_t j = 0; j + 1 < instants.size(); ++j) {
    const double gap = instants[j + 1] - instants[j];
    v += gap * cdf_value(law, instants[j], gamma, settings.mode, settings.eps_s);
  }
  return v;
}

double objective(const channel_model& channel, const schedule& sched,
                 const cdf_settings& settings) {
  sched.validate();
  std::vector<double> n(sched.instants.begin(), sched.instants.end());
  return relaxed_objective(single_letter_law(channel), n, sched.gamma, settings);
}

double constraint_value(const channel_model& channel, decoding_rule rule, double n_t,
                        double gamma, double log_competitors, const cdf_settings& settings) {
  const auto law = single_letter_law(channel);
  if (rule == decoding_rule::p1) {
    return cdf_value(law, n_t, gamma, settings.mode, settings.eps_s) +
           union_term(log_competitors, gamma);
  }
  return union_term(log_competitors, gamma) +
         detail::final_attempt_error(law, n_t, log_competitors, settings);
}

double solve_gamma_p1(const channel_model& channel, double n_t, double log_competitors,
                      double epsilon, const cdf_settings& settings) {
  if (!(n_t >= 1.0)) throw error(errc::invalid_argument, "n_t must be >= 1");
  const auto law = single_letter_law(channel);
  if (settings.mode == overshoot_mode::exact_lattice && law.is_lattice()) {
    return p1_cells(law, n_t, log_competitors, epsilon, settings);
  }
  return p1_bisect(law, n_t, log_competitors, epsilon, settings);
}

double solve_gamma_p2(const channel_model& channel, double n_t, double log_competitors,
                      double epsilon, const cdf_settings& settings) {
  if (!(n_t >= 1.0)) throw error(errc::invalid_argument, "n_t must be >= 1");
  const auto law = single_letter_law(channel);
  const double fb = detail::final_attempt_error(law, n_t, log_competitors, settings);
  if (!(fb < epsilon)) {
    throw error(errc::infeasible, "final-attempt error alone exceeds the target");
  }
  return log_competitors - std::log(epsilon - fb);
}

double solve_gamma(const channel_model& channel, decoding_rule rule, double n_t,
                   double log_competitors, double epsilon, const cdf_settings& settings) {
  return rule == decoding_rule::p1
             ? solve_gamma_p1(channel, n_t, log_competitors, epsilon, settings)
             : solve_gamma_p2(channel, n_t, log_competitors, epsilon, settings);
}

relaxed_solution solve_relaxation(const channel_model& channel, const code_spec& spec,
                                  decoding_rule rule, const cdf_settings& settings,
                                  const optimizer_options& options) {
  spec.validate();
  const int hint = min_feasible_instant(channel, spec, rule, settings, options);
  const double n_floor = min_feasible_real(channel, spec, rule, settings, hint);
  const relaxed_problem f(channel, spec, rule, settings, n_floor, options.blocklength_cap);

  relaxed_solution best;
  best.objective = kInf;
  if (spec.attempts == 1) {
    best.instants = {n_floor};
    best.gamma = f.gamma(n_floor);
    best.objective = n_floor;
    return best;
  }
  int total_iterations = 0;
  for (const auto& start : starting_points(f, spec.attempts, n_floor, options.starts)) {
    auto r = descend(f, start, options);
    total_iterations += r.iterations;
    // Starts that agree to rounding are ranked by stationarity.
    const double tie =
        std::isfinite(best.objective) ? 1e-9 * std::max(1.0, std::abs(best.objective)) : 0.0;
    if (r.objective < best.objective - tie ||
        (std::abs(r.objective - best.objective) <= tie && r.gradient_norm < best.gradient_norm)) {
      best = std::move(r);
    }
  }
  best.iterations = total_iterations;
  if (!std::isfinite(best.objective)) {
    throw error(errc::infeasible, "relaxation found no feasible start");
  }
  return best;
}

schedule embed_schedule(const schedule& sched) {
  sched.validate();
  schedule out = sched;
  if (sched.instants.front() > 1) {
    out.instants.insert(out.instants.begin(), sched.instants.front() - 1);
    return out;
  }
  for (std::size_t j = 0; j + 1 < sched.instants.size(); ++j) {
    if (sched.instants[j + 1] - sched.instants[j] > 1) {
      out.instants.insert(out.instants.begin() + j + 1, sched.instants[j] + 1);
      return out;
    }
  }
  throw error(errc::invalid_argument, "schedule is dense and cannot be extended");
}

optimization_result optimize(const channel_model& channel, const code_spec& spec,
                             decoding_rule rule, const optimizer_options& options) {
  spec.validate();
  const auto final_settings =
      cdf_settings{default_cdf_settings(channel).mode, options.eps_s, options.final_attempt};
  integer_evaluator eval(channel, spec, rule, final_settings, options.blocklength_cap);
  const int n_min = min_feasible_instant(channel, spec, rule, final_settings, options);

  optimization_result result;
  result.rule = rule;
  std::vector<std::vector<int>> candidates;

  if (spec.attempts == 1) {
    candidates.push_back({n_min});
  } else {
    std::vector<overshoot_mode> modes = {overshoot_mode::lower};
    if (channel.is_lattice()) modes.push_back(overshoot_mode::upper);
    std::vector<std::vector<double>> corners;
    for (auto mode : modes) {
      relaxed_solution r;
      try {
        r = solve_relaxation(channel, spec, rule, {mode, options.eps_s, options.final_attempt},
                             options);
      } catch (const error& e) {
        if (e.code() != errc::infeasible) throw;
        continue;
      }
      result.diagnostics.iterations += r.iterations;
      result.diagnostics.restarts += options.starts;
      for (auto& c : rounded_candidates(r.instants)) candidates.push_back(std::move(c));
      corners.push_back(r.instants);
    }
    // Lattice channels: the overshoot extremes bracket the decoding ranges.
    if (corners.size() > 1) {
      for (auto& c : box_candidates(eval, corners, 4, 4)) candidates.push_back(std::move(c));
    }
    std::vector<int> fallback(spec.attempts);
    for (int j = 0; j < spec.attempts; ++j) fallback[j] = n_min - (spec.attempts - 1 - j);
    if (fallback.front() >= 1) candidates.push_back(fallback);
  }
  for (const auto& w : options.warm_starts) {
    if (static_cast<int>(w.instants.size()) == spec.attempts) candidates.push_back(w.instants);
  }

  std::vector<int> best;
  double best_v = kInf;
  std::vector<std::vector<int>> seen;
  for (const auto& c : candidates) {
    if (!std::isfinite(eval.value(c))) continue;
    if (std::find(seen.begin(), seen.end(), c) != seen.end()) continue;
    seen.push_back(c);
    auto r = local_search(eval, c, options.max_moves - result.diagnostics.local_search_moves);
    result.diagnostics.local_search_moves += r.moves;
    if (better(r.value, r.instants, best_v, best)) {
      best = r.instants;
      best_v = r.value;
    }
  }
  if (best.empty()) throw error(errc::infeasible, "no feasible integer schedule found");

  result.sched = {*eval.gamma(best.back()), best};
  result.objective = best_v;
  result.rate_bits = spec.message_bits / best_v;
  result.constraint_residual =
      constraint_value(channel, rule, best.back(), result.sched.gamma, spec.log_competitors(),
                       final_settings) -
      spec.epsilon;
  return result;
}

optimization_result dense_reference(const channel_model& channel, const code_spec& spec,
                                    const cdf_settings& settings, int max_blocklength) {
  spec.validate();
  const auto law = single_letter_law(channel);
  const double log_m1 = spec.log_competitors();
  optimizer_options opts;
  opts.max_blocklength = max_blocklength;
  const int n_min = min_feasible_instant(channel, spec, decoding_rule::p1, settings, opts);

  optimization_result best;
  best.rule = decoding_rule::p1;
  best.objective = kInf;
  int best_n = 0;
  double best_gamma = 0.0;
  for (int big_n = n_min; big_n <= std::max(n_min, 8 * n_min); ++big_n) {
    double g = 0.0;
    try {
      g = solve_gamma_p1(channel, big_n, log_m1, spec.epsilon, settings);
    } catch (const error& e) {
      if (e.code() != errc::infeasible) throw;
      continue;
    }
    double v = 1.0;
    double last = 1.0;
    for (int n = 1; n < big_n; ++n) {
      last = cdf_value(law, n, g, settings.mode, settings.eps_s);
      v += last;
      if (v >= best.objective) break;
    }
    if (v < best.objective) {
      best.objective = v;
      best_n = big_n;
      best_gamma = g;
    }
    // Further growth of N only adds negligible tail terms.
    if (last < 1e-15 && big_n > best_n + 16) break;
  }
  best.sched.gamma = best_gamma;
  best.sched.instants.resize(best_n);
  for (int n = 1; n <= best_n; ++n) best.sched.instants[n - 1] = n;
  best.rate_bits = spec.message_bits / best.objective;
  best.constraint_residual =
      constraint_value(channel, decoding_rule::p1, best_n, best_gamma, log_m1, settings) -
      spec.epsilon;
  return best;
}

std::vector<sweep_row> sweep(const std::vector<channel_model>& channels,
                             const std::vector<code_spec>& specs,
                             const std::vector<decoding_rule>& rules,
                             const optimizer_options& options, unsigned workers) {
  if (channels.empty() || specs.empty() || rules.empty()) {
    throw error(errc::empty_grid, "sweep grids must be nonempty");
  }
  std::vector<sweep_row> rows;
  for (const auto& c : channels) {
    for (const auto& s : specs) {
      for (auto r : rules) rows.push_back({c, s, r, false, {}, {}});
    }
  }

  // Chains of rows differing only in attempts, solved in increasing t.
  std::vector<std::vector<std::size_t>> chains;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool placed = false;
    for (auto& chain : chains) {
      const auto& h = rows[chain.front()];
      if (h.channel == rows[i].channel && h.rule == rows[i].rule &&
          h.spec.message_bits == rows[i].spec.message_bits &&
          h.spec.epsilon == rows[i].spec.epsilon) {
        chain.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) chains.push_back({i});
  }
  for (auto& chain : chains) {
    std::stable_sort(chain.begin(), chain.end(), [&](std::size_t a, std::size_t b) {
      return rows[a].spec.attempts < rows[b].spec.attempts;
    });
  }

  auto run_chain = [&](const std::vector<std::size_t>& chain) {
    std::optional<schedule> prev;
    for (std::size_t i : chain) {
      auto& row = rows[i];
      auto opts = options;
      if (prev) {
        try {
          auto w = *prev;
          while (static_cast<int>(w.instants.size()) < row.spec.attempts) w = embed_schedule(w);
          if (static_cast<int>(w.instants.size()) == row.spec.attempts) opts.warm_starts.push_back(w);
        } catch (const error&) {
        }
      }
      try {
        row.result = optimize(row.channel, row.spec, row.rule, opts);
        row.feasible = true;
        prev = row.result.sched;
      } catch (const error& e) {
        row.feasible = false;
        row.message = e.what();
      }
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < chains.size(); k = next++) run_chain(chains[k]);
  };
  const unsigned n_workers =
      static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, chains.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  return rows;
}

}  // namespace vlsf
