#include "vlsf/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "vlsf/error.hpp"
#include "vlsf/normal.hpp"
#include "vlsf/optimizer.hpp"
#include "union_min.hpp"

namespace vlsf {

namespace {

// log(n!) - log(sqrt(2 pi n) (n/e)^n), Loader (2000).
double stirlerr(int n) {
  static constexpr double kTable[] = {
      0.0,
      0.0810614667953272582196702,
      0.0413406959554092940938221,
      0.02767792568499833914878929,
      0.02079067210376509311152277,
      0.01664469118982119216319487,
      0.01387612882307074799874573,
      0.01189670994589177009505572,
      0.010411265261972096497478567,
      0.009255462182712732917728637,
      0.008330563433362871256469318,
      0.007573675487951840794972024,
      0.006942840107209529865664152,
      0.006408994188004207068439631,
      0.005951370112758847735624416,
      0.005554733551962801371038690,
  };
  constexpr double s0 = 1.0 / 12.0;
  constexpr double s1 = 1.0 / 360.0;
  constexpr double s2 = 1.0 / 1260.0;
  constexpr double s3 = 1.0 / 1680.0;
  constexpr double s4 = 1.0 / 1188.0;
  if (n <= 15) return kTable[n];
  const double x = n;
  const double nn = x * x;
  if (n > 500) return (s0 - s1 / nn) / x;
  if (n > 80) return (s0 - (s1 - s2 / nn) / nn) / x;
  if (n > 35) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / x;
  return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / x;
}

// x log(x / np) + np - x without cancellation near x = np.
double bd0(double x, double np) {
  if (std::abs(x - np) < 0.1 * (x + np)) {
    double v = (x - np) / (x + np);
    double s = (x - np) * v;
    double ej = 2.0 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / np) + np - x;
}

// Neumaier-compensated sum of exp(lp_k - anchor).
struct scaled_sum {
  double anchor;
  double sum = 0.0;
  double comp = 0.0;

  void add(double lp) {
    const double v = std::exp(lp - anchor);
    const double t = sum + v;
    comp += std::abs(sum) >= v ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double log_value() const { return anchor + std::log(sum + comp); }
};

// sum_{k=from}^{to} P[B = k], walking away from `start` (the largest term)
// until the terms stop mattering.
double log_binomial_range(int from, int to, int start, int n, double q) {
  scaled_sum acc{log_binomial_pmf(start, n, q)};
  acc.add(acc.anchor);
  constexpr double kNegligible = -45.0;
  for (int k = start - 1; k >= from; --k) {
    const double lp = log_binomial_pmf(k, n, q);
    acc.add(lp);
    if (lp - acc.anchor < kNegligible) break;
  }
  for (int k = start + 1; k <= to; ++k) {
    const double lp = log_binomial_pmf(k, n, q);
    acc.add(lp);
    if (lp - acc.anchor < kNegligible) break;
  }
  return acc.log_value();
}

double lattice_ratio_floor(const info_density_law& law, int n, double gamma) {
  const auto& lat = *law.lattice;
  const double ratio = (gamma - n * lat.origin) / lat.step;
  if (std::abs(ratio - std::round(ratio)) <= 1e-12 * std::max(1.0, std::abs(ratio))) {
    return std::round(ratio) - 1.0;
  }
  return std::ceil(ratio) - 1.0;
}

struct tally {
  double hits = 0.0;
  double count = 0.0;
};

double awgn_symbol(block_engine& engine, std::normal_distribution<double>& normal, double snr,
                   double shift) {
  const double x = std::sqrt(snr) * normal(engine);
  const double noise = normal(engine);
  const double y = x + noise;
  return shift + 0.5 * (y * y / (snr + 1.0) - noise * noise);
}

// P[Q <= x] for Q ~ noncentral chi-square(dof, lambda) by Lugannani-Rice. The
// CGF is -dof/2 log(1 - 2s) + lambda s / (1 - 2s); with v = 1/(1 - 2s) the
// saddlepoint equation dof v + lambda v^2 = x is a quadratic.
double noncentral_chi2_cdf(double x, double dof, double lambda) {
  if (x <= 0.0) return 0.0;
  const double mean = dof + lambda;
  const double var = 2.0 * dof + 4.0 * lambda;
  const double z = (x - mean) / std::sqrt(var);
  const double v = lambda > 0.0 ? (-dof + std::sqrt(dof * dof + 4.0 * lambda * x)) / (2.0 * lambda)
                                : x / dof;
  const double s = 0.5 * (1.0 - 1.0 / v);
  if (std::abs(z) < 1e-3 || std::abs(s) < 1e-9) {
    const double k3 = 8.0 * dof + 24.0 * lambda;
    return normal_cdf(z) + normal_pdf(z) * k3 / (6.0 * var * std::sqrt(var)) * (1.0 - z * z);
  }
  const double k0 = 0.5 * dof * std::log(v) + lambda * s * v;
  const double k2 = 2.0 * dof * v * v + 4.0 * lambda * v * v * v;
  const double w = (s > 0.0 ? 1.0 : -1.0) * std::sqrt(std::max(0.0, 2.0 * (s * x - k0)));
  const double u = s * std::sqrt(k2);
  return std::clamp(normal_cdf(w) + normal_pdf(w) * (1.0 / w - 1.0 / u), 0.0, 1.0);
}

fb_estimate rcu_monte_carlo(const channel_model& channel, int n, double log_competitors,
                            const mc_config& cfg) {
  const auto law = single_letter_law(channel);
  struct moments2 {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  auto record = [&](moments2& acc, double log_pair) {
    const double v = std::min(1.0, std::exp(log_competitors + log_pair));
    acc.sum += v;
    acc.sum_sq += v * v;
  };

  moments2 total{};
  auto merge = [](moments2& a, const moments2& b) {
    a.sum += b.sum;
    a.sum_sq += b.sum_sq;
  };

  if (channel.kind() == channel_kind::bsc) {
    // Agreements with y: true codeword ~ Bin(n, 1 - delta), competitor ~ Bin(n, 1/2).
    std::vector<double> log_tail(n + 2, -std::numeric_limits<double>::infinity());
    for (int b = n; b >= 0; --b) {
      const double lp = log_binomial_pmf(b, n, 0.5);
      const double prev = log_tail[b + 1];
      log_tail[b] = prev == -std::numeric_limits<double>::infinity()
                        ? lp
                        : std::max(prev, lp) + std::log1p(std::exp(-std::abs(prev - lp)));
    }
    const double q = law.lattice->success;
    total = run_blocks<moments2>(
        cfg,
        [&](block_engine& engine, std::uint64_t count) {
          std::binomial_distribution<int> agree(n, q);
          moments2 acc;
          for (std::uint64_t i = 0; i < count; ++i) record(acc, log_tail[agree(engine)]);
          return acc;
        },
        merge);
  } else if (channel.kind() == channel_kind::bec) {
    const auto log_tail = detail::tilted_log_tail(law, n);
    const double q = law.lattice->success;
    total = run_blocks<moments2>(
        cfg,
        [&](block_engine& engine, std::uint64_t count) {
          std::binomial_distribution<int> unerased(n, q);
          moments2 acc;
          for (std::uint64_t i = 0; i < count; ++i) record(acc, log_tail[unerased(engine)]);
          return acc;
        },
        merge);
  } else {
    const double snr = channel.param();
    total = run_blocks<moments2>(
        cfg,
        [&](block_engine& engine, std::uint64_t count) {
          std::normal_distribution<double> normal;
          moments2 acc;
          for (std::uint64_t i = 0; i < count; ++i) {
            double density = 0.0;
            double y_energy = 0.0;
            for (int k = 0; k < n; ++k) {
              const double x = std::sqrt(snr) * normal(engine);
              const double noise = normal(engine);
              const double y = x + noise;
              y_energy += y * y;
              density += law.shift + 0.5 * (y * y / (snr + 1.0) - noise * noise);
            }
            // i(Xbar; y) >= density  <=>  |y - Xbar|^2 <= bound, and
            // |y - Xbar|^2 / snr is noncentral chi-square(n, |y|^2 / snr).
            const double bound = n * std::log1p(snr) + y_energy / (snr + 1.0) - 2.0 * density;
            const double p = noncentral_chi2_cdf(bound / snr, n, y_energy / snr);
            record(acc, p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
          }
          return acc;
        },
        merge);
  }

  const double trials = static_cast<double>(cfg.trials);
  const double mean = total.sum / trials;
  const double var = std::max(0.0, total.sum_sq / trials - mean * mean);
  return {mean, std::sqrt(var / trials), 0.0};
}

}  // namespace

double log_binomial_pmf(int k, int n, double q) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  const double p = 1.0 - q;  // failure probability
  if (k == 0) return n * std::log1p(-q);
  if (k == n) return n * std::log(q);
  const double lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(k, n * q) - bd0(n - k, n * p);
  const double lf = std::log(2.0 * std::numbers::pi) + std::log(static_cast<double>(k)) +
                    std::log1p(-static_cast<double>(k) / n);
  return lc - 0.5 * lf;
}

double binomial_cdf(int m, int n, double q) {
  if (m < 0) return 0.0;
  if (m >= n) return 1.0;
  const int mode = std::clamp(static_cast<int>(std::floor((n + 1) * q)), 0, n);
  if (m < mode) return std::exp(log_binomial_range(0, m, m, n, q));
  return -std::expm1(log_binomial_range(m + 1, n, std::max(m + 1, mode), n, q));
}

double exact_cdf_lattice(const info_density_law& law, int n, double gamma, int cap) {
  if (!law.is_lattice()) throw error(errc::unsupported_law, "exact CDF needs a BSC or BEC law");
  if (n < 1 || n > cap) throw error(errc::invalid_argument, "n outside [1, cap] for exact CDF");
  const double m = lattice_ratio_floor(law, n, gamma);
  if (m < 0.0) return 0.0;
  if (m >= n) return 1.0;
  return binomial_cdf(static_cast<int>(m), n, law.lattice->success);
}

mc_estimate mc_cdf(const info_density_law& law, int n, double gamma, const mc_config& cfg) {
  return mc_cdf_multi(law, n, std::span<const double>(&gamma, 1), cfg).front();
}

std::vector<mc_estimate> mc_cdf_multi(const info_density_law& law, int n,
                                      std::span<const double> gammas, const mc_config& cfg) {
  if (n < 1) throw error(errc::invalid_argument, "n must be >= 1");
  using counts = std::vector<double>;
  const std::size_t g = gammas.size();
  auto merge = [g](counts& a, const counts& b) {
    if (a.empty()) a.assign(g, 0.0);
    for (std::size_t i = 0; i < g; ++i) a[i] += b[i];
  };

  counts hits;
  if (law.is_lattice()) {
    const auto& lat = *law.lattice;
    hits = run_blocks<counts>(
        cfg,
        [&](block_engine& engine, std::uint64_t count) {
          std::binomial_distribution<int> successes(n, lat.success);
          counts local(g, 0.0);
          for (std::uint64_t i = 0; i < count; ++i) {
            const double s = n * lat.origin + successes(engine) * lat.step;
            for (std::size_t j = 0; j < g; ++j) local[j] += s < gammas[j] ? 1.0 : 0.0;
          }
          return local;
        },
        merge);
  } else {
    const double snr = law.channel.param();
    hits = run_blocks<counts>(
        cfg,
        [&](block_engine& engine, std::uint64_t count) {
          std::normal_distribution<double> normal;
          counts local(g, 0.0);
          for (std::uint64_t i = 0; i < count; ++i) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += awgn_symbol(engine, normal, snr, law.shift);
            for (std::size_t j = 0; j < g; ++j) local[j] += s < gammas[j] ? 1.0 : 0.0;
          }
          return local;
        },
        merge);
  }

  std::vector<mc_estimate> out(g);
  const double trials = static_cast<double>(cfg.trials);
  for (std::size_t j = 0; j < g; ++j) {
    const double p = hits[j] / trials;
    out[j] = {p, std::sqrt(p * (1.0 - p) / trials)};
  }
  return out;
}

fb_estimate eps_fb(const channel_model& channel, double n, double log_competitors,
                   fb_method method, const fb_options& opts) {
  if (!(n >= 1.0)) throw error(errc::invalid_argument, "n must be >= 1");
  if (method == fb_method::mc_rcu) {
    if (std::abs(n - std::round(n)) > 1e-9) {
      throw error(errc::invalid_argument, "Monte Carlo RCU needs an integer n");
    }
    return rcu_monte_carlo(channel, static_cast<int>(std::round(n)), log_competitors, opts.mc);
  }
  const auto law = single_letter_law(channel);
  const cdf_settings settings{opts.mode, opts.eps_s, method};
  if (method == fb_method::rcu) {
    return {detail::random_coding_union(law, n, log_competitors), 0.0, 0.0};
  }
  if (method == fb_method::dependence_testing) {
    return {detail::dependence_testing(law, n, log_competitors, settings), 0.0,
            log_competitors - std::log(2.0)};
  }
  const auto best = detail::minimize_union(law, n, log_competitors, settings);
  return {std::min(1.0, best.value), 0.0, best.gamma};
}

search_grid default_search_grid(const channel_model& channel, const code_spec& spec) {
  spec.validate();
  if (spec.attempts > 3) {
    throw error(errc::invalid_argument, "brute-force search is limited to t <= 3");
  }
  const auto law = single_letter_law(channel);
  const double nominal = spec.log_competitors() - std::log(spec.epsilon);
  auto z_at = [&](double n) {
    const auto m = moments(law, n);
    return (m.mean - nominal) / std::sqrt(m.variance);
  };
  int lo = 1;
  while (z_at(lo) < -6.0 && lo < (1 << 20)) lo = std::max(lo + 1, static_cast<int>(lo * 1.05));
  while (lo > 1 && z_at(lo - 1) >= -6.0) --lo;
  int hi = lo + 1;
  while (z_at(hi) < 6.0 && hi < (1 << 20)) ++hi;

  search_grid grid;
  grid.instants.assign(spec.attempts, instant_range{lo, hi, 1});
  return grid;
}

std::vector<double> default_gamma_grid(const code_spec& spec) {
  const double base = spec.message_bits * std::numbers::ln2;
  std::vector<double> out(200);
  for (int i = 0; i < 200; ++i) out[i] = base + 20.0 * i / 199.0;
  return out;
}

optimization_result brute_force_search(const channel_model& channel, const code_spec& spec,
                                       decoding_rule rule, const search_grid& grid,
                                       overshoot_mode mode, double eps_s) {
  spec.validate();
  const int t = static_cast<int>(grid.instants.size());
  if (t != spec.attempts) {
    throw error(errc::invalid_argument, "grid dimension must equal the number of attempts");
  }
  if (t > 3) throw error(errc::invalid_argument, "brute-force search is limited to t <= 3");

  std::vector<std::vector<int>> values(t);
  for (int j = 0; j < t; ++j) {
    const auto& r = grid.instants[j];
    if (r.stride < 1) throw error(errc::invalid_argument, "grid stride must be >= 1");
    for (int n = std::max(1, r.lo); n <= r.hi; n += r.stride) values[j].push_back(n);
    if (values[j].empty()) throw error(errc::empty_grid, "empty range in search grid");
  }
  if (rule == decoding_rule::p2 && !grid.gammas.empty()) {
    throw error(errc::invalid_argument, "P2 determines gamma from its constraint");
  }

  const auto law = single_letter_law(channel);
  const cdf_settings settings{mode, eps_s};
  const double log_m1 = spec.log_competitors();

  optimization_result best;
  best.rule = rule;
  best.objective = std::numeric_limits<double>::infinity();

  // Exact minimum over all strictly increasing tuples for one gamma, by
  // dynamic programming over the stages: V_1(n) = n and
  // V_{j+1}(n') = min_{n < n'} V_j(n) + (n' - n) F(n). Ties go to the chain
  // with the smaller n_1. Only final instants passing `final_ok` count.
  const int top = values[t - 1].back();
  auto scan = [&](double gamma, auto&& final_ok) {
    std::vector<double> f(top + 1, -1.0);
    auto cdf_at = [&](int n) {
      if (f[n] < 0.0) f[n] = cdf({law, static_cast<double>(n), gamma, mode}, eps_s).p;
      return f[n];
    };
    struct cell {
      double value;
      std::vector<int> chain;
    };
    std::vector<cell> stage;
    for (int n : values[0]) stage.push_back({static_cast<double>(n), {n}});
    for (int j = 1; j < t; ++j) {
      const bool last = j == t - 1;
      std::vector<cell> next;
      for (int n2 : values[j]) {
        if (last && !final_ok(n2)) continue;
        const cell* arg = nullptr;
        double v_best = std::numeric_limits<double>::infinity();
        for (const auto& c : stage) {
          const int n1 = c.chain.back();
          if (n1 >= n2) break;
          const double v = c.value + (n2 - n1) * cdf_at(n1);
          if (v < v_best - 1e-12 ||
              (v <= v_best + 1e-12 && arg && c.chain.front() < arg->chain.front())) {
            v_best = std::min(v, v_best);
            arg = &c;
          }
        }
        if (!arg) continue;
        auto chain = arg->chain;
        chain.push_back(n2);
        next.push_back({v_best, std::move(chain)});
      }
      stage = std::move(next);
    }
    for (const auto& c : stage) {
      if (t == 1 && !final_ok(c.chain.back())) continue;
      const int nt = c.chain.back();
      const int b_nt = best.sched.instants.empty() ? 0 : best.sched.instants.back();
      const bool better =
          c.value < best.objective - 1e-12 ||
          (c.value <= best.objective + 1e-12 &&
           (nt < b_nt || (nt == b_nt && c.chain.front() < best.sched.instants.front())));
      if (better) {
        best.objective = c.value;
        best.sched = {gamma, c.chain};
      }
    }
  };

  if (grid.gammas.empty()) {
    for (int nt : values[t - 1]) {
      double gamma = 0.0;
      try {
        gamma = solve_gamma(channel, rule, nt, log_m1, spec.epsilon, settings);
      } catch (const error& e) {
        if (e.code() != errc::infeasible) throw;
        continue;
      }
      scan(gamma, [nt](int n) { return n == nt; });
    }
  } else {
    for (double gamma : grid.gammas) {
      if (!(gamma > 0.0)) continue;
      scan(gamma, [&](int nt) {
        return constraint_value(channel, rule, nt, gamma, log_m1, settings) <= spec.epsilon;
      });
    }
  }

  if (!std::isfinite(best.objective)) {
    throw error(errc::infeasible, "no feasible schedule on the search grid");
  }
  best.rate_bits = spec.message_bits / best.objective;
  best.constraint_residual = constraint_value(channel, rule, best.sched.final_instant(),
                                              best.sched.gamma, log_m1, settings) -
                             spec.epsilon;
  return best;
}

}  // namespace vlsf
