#include "vlsf/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "union_min.hpp"
#include "vlsf/error.hpp"

namespace vlsf {

namespace {

// Randomness of one trial reduced to what either rule needs.
struct trial_draw {
  int true_first = 0;  // first attempt where the true codeword crosses, t if none
  std::vector<char> true_below;
  std::vector<std::uint64_t> comp_first;  // competitors whose first crossing is attempt j
  std::uint64_t final_level = 0;          // competitors >= true density at n_t
  std::uint64_t final_beat = 0;           // competitors > true density at n_t
  double tie_u = 0.0;
};

int prefix_popcount(const std::uint64_t* w, int n) {
  int c = 0;
  const int full = n / 64;
  for (int i = 0; i < full; ++i) c += std::popcount(w[i]);
  if (const int rem = n % 64) c += std::popcount(w[full] & ((std::uint64_t{1} << rem) - 1));
  return c;
}

class sampler {
 public:
  sampler(const channel_model& channel, const schedule& sched, std::uint64_t competitors)
      : law_(single_letter_law(channel)), sched_(sched), competitors_(competitors) {
    sched_.validate();
    const auto t = sched_.instants.size();
    if (law_.is_lattice()) {
      cells_.resize(t);
      for (std::size_t j = 0; j < t; ++j) {
        cells_[j] = detail::lattice_cell(law_, sched_.instants[j], sched_.gamma);
      }
    }
    words_ = (sched_.final_instant() + 63) / 64;
  }

  int attempts() const { return static_cast<int>(sched_.instants.size()); }
  const schedule& sched() const { return sched_; }

  void draw(block_engine& engine, trial_draw& d) {
    const int t = attempts();
    d.true_below.assign(t, 0);
    d.comp_first.assign(t + 1, 0);
    d.final_level = d.final_beat = 0;
    switch (law_.channel.kind()) {
      case channel_kind::bsc: draw_bsc(engine, d); break;
      case channel_kind::bec: draw_bec(engine, d); break;
      case channel_kind::awgn: draw_awgn(engine, d); break;
    }
    d.true_first = t;
    for (int j = 0; j < t; ++j) {
      if (!d.true_below[j]) {
        d.true_first = j;
        break;
      }
    }
    d.tie_u = std::uniform_real_distribution<double>(0.0, 1.0)(engine);
  }

 private:
  bool crosses(int j, double count) const { return count >= cells_[j]; }

  // Message 1 is the all-zero word, so y equals the noise pattern.
  void draw_bsc(block_engine& engine, trial_draw& d) {
    const int t = attempts();
    const int n_t = sched_.final_instant();
    std::bernoulli_distribution flip(law_.channel.param());
    noise_.assign(words_, 0);
    for (int k = 0; k < n_t; ++k) {
      if (flip(engine)) noise_[k / 64] |= std::uint64_t{1} << (k % 64);
    }
    for (int j = 0; j < t; ++j) {
      const int n = sched_.instants[j];
      d.true_below[j] = !crosses(j, n - prefix_popcount(noise_.data(), n));
    }
    const int true_final = n_t - prefix_popcount(noise_.data(), n_t);

    // Largest disagreement count that still crosses at each instant.
    std::vector<int> max_dis(t);
    for (int j = 0; j < t; ++j) {
      max_dis[j] = static_cast<int>(std::floor(sched_.instants[j] - cells_[j]));
    }
    word_.resize(words_);
    for (std::uint64_t c = 0; c < competitors_; ++c) {
      for (int w = 0; w < words_; ++w) word_[w] = engine() ^ noise_[w];
      int first = t;
      int dis = 0;
      int w = 0;
      for (int j = 0; j < t; ++j) {
        const int n = sched_.instants[j];
        for (; w < n / 64; ++w) dis += std::popcount(word_[w]);
        const int rem = n % 64;
        const int part = rem ? std::popcount(word_[w] & ((std::uint64_t{1} << rem) - 1)) : 0;
        if (first == t && dis + part <= max_dis[j]) first = j;
        if (j + 1 == t) {
          const int agree = n - dis - part;
          d.final_level += agree >= true_final;
          d.final_beat += agree > true_final;
        }
      }
      ++d.comp_first[first];
    }
  }

  // A competitor's density is -inf once it disagrees with y on an unerased
  // symbol. Each unerased symbol agrees with probability e^{-step}, which
  // makes the step of the law an exact log-likelihood ratio, so only the
  // number of agreements before the first disagreement is drawn.
  void draw_bec(block_engine& engine, trial_draw& d) {
    const int t = attempts();
    std::bernoulli_distribution erase(law_.channel.param());
    unerased_.assign(t, 0);
    int u = 0;
    int k = 0;
    for (int j = 0; j < t; ++j) {
      for (; k < sched_.instants[j]; ++k) u += !erase(engine);
      unerased_[j] = u;
      d.true_below[j] = !crosses(j, u);
    }

    std::geometric_distribution<int> agreements(-std::expm1(-law_.lattice->step));
    for (std::uint64_t c = 0; c < competitors_; ++c) {
      const int run = agreements(engine);
      int first = t;
      for (int j = 0; j < t && unerased_[j] <= run; ++j) {
        if (crosses(j, unerased_[j])) {
          first = j;
          break;
        }
      }
      ++d.comp_first[first];
      d.final_level += unerased_[t - 1] <= run;
    }
  }

  // True codeword symbol by symbol. A competitor only enters through
  // |y - xbar|^2 over each segment, which given y is snr times a noncentral
  // chi-square with the segment length as dof and |y_seg|^2 / snr as
  // noncentrality; that is sampled directly.
  void draw_awgn(block_engine& engine, trial_draw& d) {
    const int t = attempts();
    const double snr = law_.channel.param();
    std::normal_distribution<double> normal;
    seg_energy_.assign(t, 0.0);
    double s = 0.0;
    int k = 0;
    for (int j = 0; j < t; ++j) {
      for (; k < sched_.instants[j]; ++k) {
        const double x = std::sqrt(snr) * normal(engine);
        const double noise = normal(engine);
        const double y = x + noise;
        seg_energy_[j] += y * y;
        s += law_.shift + 0.5 * (y * y / (snr + 1.0) - noise * noise);
      }
      d.true_below[j] = s < sched_.gamma;
    }
    const double true_final = s;

    if (competitors_ == 0) return;
    std::vector<std::gamma_distribution<double>> chi2;
    std::vector<double> root(t);
    for (int j = 0; j < t; ++j) {
      const int len = sched_.instants[j] - (j ? sched_.instants[j - 1] : 0);
      chi2.emplace_back(len > 1 ? 0.5 * (len - 1) : 1.0, 2.0);
      root[j] = std::sqrt(seg_energy_[j] / snr);
    }
    for (std::uint64_t c = 0; c < competitors_; ++c) {
      int first = t;
      double y_energy = 0.0;
      double dist = 0.0;
      double comp = 0.0;
      for (int j = 0; j < t; ++j) {
        const int len = sched_.instants[j] - (j ? sched_.instants[j - 1] : 0);
        const double z = root[j] + normal(engine);
        double q = z * z;
        if (len > 1) q += chi2[j](engine);
        dist += snr * q;
        y_energy += seg_energy_[j];
        comp = sched_.instants[j] * law_.shift + 0.5 * (y_energy / (snr + 1.0) - dist);
        if (first == t && comp >= sched_.gamma) first = j;
      }
      ++d.comp_first[first];
      d.final_level += comp >= true_final;
      d.final_beat += comp > true_final;
    }
  }

  info_density_law law_;
  schedule sched_;
  std::uint64_t competitors_;
  std::vector<double> cells_;
  int words_ = 0;
  std::vector<std::uint64_t> noise_, word_;
  std::vector<int> unerased_;
  std::vector<double> seg_energy_;
};

struct decision {
  int attempt;
  trial_outcome outcome;
  bool by_argmax;
};

// Threshold tests at every instant (P1) or all but the last (P2), then the
// P2 argmax with uniform tie-breaking.
decision decide(const trial_draw& d, decoding_rule rule, int t) {
  const int tests = rule == decoding_rule::p1 ? t : t - 1;
  for (int j = 0; j < tests; ++j) {
    const std::uint64_t crossing = d.comp_first[j] + (d.true_first == j ? 1 : 0);
    if (crossing == 0) continue;
    if (crossing == 1 && d.true_first == j) return {j, trial_outcome::correct, false};
    return {j, trial_outcome::false_alarm, false};
  }
  if (rule == decoding_rule::p1) return {t - 1, trial_outcome::final_error, false};
  const std::uint64_t ties = d.final_level - d.final_beat;
  if (d.final_beat > 0 || d.tie_u * static_cast<double>(ties + 1) >= 1.0) {
    return {t - 1, trial_outcome::final_error, true};
  }
  return {t - 1, trial_outcome::correct, true};
}

struct sim_acc {
  std::uint64_t trials = 0;
  std::uint64_t false_alarms = 0;
  std::uint64_t final_errors = 0;
  std::uint64_t correct_argmax = 0;
  std::uint64_t level_sum = 0;
  double tau_sum = 0.0;
  double tau_sq = 0.0;
  std::vector<std::uint64_t> stops, below, correct_at, cross_by;

  void resize(int t) {
    stops.resize(t);
    below.resize(t);
    correct_at.resize(t);
    cross_by.resize(t);
  }
};

std::uint64_t simulated_competitors(std::uint64_t m_sim) {
  if (m_sim < 2) throw error(errc::invalid_argument, "m_sim must be >= 2");
  return std::min<std::uint64_t>(m_sim - 1, kMaxSimulatedCompetitors);
}

}  // namespace

simulation_result simulate(const channel_model& channel, const schedule& sched,
                           std::uint64_t m_sim, decoding_rule rule, const mc_config& cfg) {
  const std::uint64_t m_s = simulated_competitors(m_sim);
  const sampler proto(channel, sched, m_s);
  const int t = proto.attempts();

  auto block = [&](block_engine& engine, std::uint64_t count) {
    sampler s = proto;
    sim_acc acc;
    acc.resize(t);
    trial_draw d;
    for (std::uint64_t i = 0; i < count; ++i) {
      s.draw(engine, d);
      const auto dec = decide(d, rule, t);
      ++acc.trials;
      const double tau = sched.instants[dec.attempt];
      acc.tau_sum += tau;
      acc.tau_sq += tau * tau;
      ++acc.stops[dec.attempt];
      std::uint64_t crossed = 0;
      for (int j = 0; j < t; ++j) {
        acc.below[j] += d.true_below[j];
        crossed += d.comp_first[j];
        acc.cross_by[j] += crossed;
      }
      acc.level_sum += d.final_level;
      switch (dec.outcome) {
        case trial_outcome::false_alarm: ++acc.false_alarms; break;
        case trial_outcome::final_error: ++acc.final_errors; break;
        case trial_outcome::correct:
          if (dec.by_argmax) {
            ++acc.correct_argmax;
          } else {
            ++acc.correct_at[dec.attempt];
          }
          break;
      }
    }
    return acc;
  };
  auto merge = [t](sim_acc& a, const sim_acc& b) {
    a.resize(t);
    a.trials += b.trials;
    a.false_alarms += b.false_alarms;
    a.final_errors += b.final_errors;
    a.correct_argmax += b.correct_argmax;
    a.level_sum += b.level_sum;
    a.tau_sum += b.tau_sum;
    a.tau_sq += b.tau_sq;
    for (int j = 0; j < t; ++j) {
      a.stops[j] += b.stops[j];
      a.below[j] += b.below[j];
      a.correct_at[j] += b.correct_at[j];
      a.cross_by[j] += b.cross_by[j];
    }
  };
  const auto acc = run_blocks<sim_acc>(cfg, block, merge);

  simulation_result r;
  const double n = static_cast<double>(acc.trials);
  r.trials = acc.trials;
  r.competitors_simulated = m_s;
  r.extrapolated = m_s < m_sim - 1;
  r.false_alarm_rate = acc.false_alarms / n;
  r.final_error_rate = acc.final_errors / n;
  double errors = static_cast<double>(acc.false_alarms + acc.final_errors);
  if (r.extrapolated) {
    // Correct trials still fail if an unsimulated competitor would have
    // crossed by the stopping instant (or matched the argmax), estimated per
    // competitor from the pooled simulated ones.
    const double rest = static_cast<double>(m_sim - 1 - m_s);
    const double per = 1.0 / (n * static_cast<double>(m_s));
    for (int j = 0; j < t; ++j) {
      errors += acc.correct_at[j] * std::min(1.0, rest * acc.cross_by[j] * per);
    }
    errors += acc.correct_argmax * std::min(1.0, rest * acc.level_sum * per);
  }
  r.err_rate = std::min(1.0, errors / n);
  r.err_stderr = std::sqrt(r.err_rate * (1.0 - r.err_rate) / n);
  r.mean_tau = acc.tau_sum / n;
  const double var = std::max(0.0, acc.tau_sq / n - r.mean_tau * r.mean_tau);
  r.tau_stderr = std::sqrt(var / n);
  for (int j = 0; j < t; ++j) {
    r.stop_freq.push_back(acc.stops[j] / n);
    const double p = acc.below[j] / n;
    r.below_freq.push_back(p);
    r.below_stderr.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return r;
}

std::vector<trial> simulate_trials(const channel_model& channel, const schedule& sched,
                                   std::uint64_t m_sim, decoding_rule rule, const mc_config& cfg) {
  const sampler proto(channel, sched, simulated_competitors(m_sim));
  const int t = proto.attempts();
  return run_blocks<std::vector<trial>>(
      cfg,
      [&](block_engine& engine, std::uint64_t count) {
        sampler s = proto;
        std::vector<trial> out;
        out.reserve(count);
        trial_draw d;
        for (std::uint64_t i = 0; i < count; ++i) {
          s.draw(engine, d);
          const auto dec = decide(d, rule, t);
          out.push_back({sched.instants[dec.attempt], dec.outcome, dec.attempt + 1});
        }
        return out;
      },
      [](std::vector<trial>& a, const std::vector<trial>& b) { a.insert(a.end(), b.begin(), b.end()); });
}

stopping_result simulate_stopping_only(const channel_model& channel, const schedule& sched,
                                       const mc_config& cfg) {
  sched.validate();
  const auto law = single_letter_law(channel);
  const int t = static_cast<int>(sched.instants.size());

  struct acc_t {
    std::uint64_t trials = 0;
    double tau_sum = 0.0;
    double tau_sq = 0.0;
    std::vector<std::uint64_t> hist, survive, below;
  };

  auto block = [&](block_engine& engine, std::uint64_t count) {
    acc_t acc;
    acc.hist.assign(t, 0);
    acc.survive.assign(t, 0);
    acc.below.assign(t, 0);
    std::normal_distribution<double> normal;
    const double snr = channel.param();
    for (std::uint64_t i = 0; i < count; ++i) {
      int stop = -1;
      double s = 0.0;
      long successes = 0;
      int k = 0;
      for (int j = 0; j < t; ++j) {
        const int n = sched.instants[j];
        double sj;
        if (law.is_lattice()) {
          successes += std::binomial_distribution<int>(n - k, law.lattice->success)(engine);
          k = n;
          sj = n * law.lattice->origin + successes * law.lattice->step;
        } else {
          for (; k < n; ++k) {
            const double x = std::sqrt(snr) * normal(engine);
            const double noise = normal(engine);
            const double y = x + noise;
            s += law.shift + 0.5 * (y * y / (snr + 1.0) - noise * noise);
          }
          sj = s;
        }
        const bool below = law.is_lattice()
                               ? successes < detail::lattice_cell(law, n, sched.gamma)
                               : sj < sched.gamma;
        acc.below[j] += below;
        if (stop < 0 && !below) stop = j;
        if (stop < 0) ++acc.survive[j];
      }
      if (stop < 0) stop = t - 1;
      ++acc.trials;
      ++acc.hist[stop];
      const double tau = sched.instants[stop];
      acc.tau_sum += tau;
      acc.tau_sq += tau * tau;
    }
    return acc;
  };
  auto merge = [t](acc_t& a, const acc_t& b) {
    if (a.hist.empty()) {
      a.hist.assign(t, 0);
      a.survive.assign(t, 0);
      a.below.assign(t, 0);
    }
    a.trials += b.trials;
    a.tau_sum += b.tau_sum;
    a.tau_sq += b.tau_sq;
    for (int j = 0; j < t; ++j) {
      a.hist[j] += b.hist[j];
      a.survive[j] += b.survive[j];
      a.below[j] += b.below[j];
    }
  };
  const auto acc = run_blocks<acc_t>(cfg, block, merge);

  stopping_result r;
  const double n = static_cast<double>(acc.trials);
  r.trials = acc.trials;
  r.histogram = acc.hist;
  r.mean_tau = acc.tau_sum / n;
  r.tau_stderr = std::sqrt(std::max(0.0, acc.tau_sq / n - r.mean_tau * r.mean_tau) / n);
  for (int j = 0; j + 1 < t; ++j) r.survival.push_back(acc.survive[j] / n);
  for (int j = 0; j < t; ++j) {
    const double p = acc.below[j] / n;
    r.below_freq.push_back(p);
    r.below_stderr.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return r;
}

}  // namespace vlsf
