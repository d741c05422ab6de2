#pragma once

#include <cstdint>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/parallel.hpp"
#include "vlsf/schedule.hpp"

namespace vlsf {

enum class trial_outcome { correct, false_alarm, final_error };

struct trial {
  int stopping_time = 0;  // tau*, one of the schedule instants
  trial_outcome outcome = trial_outcome::correct;
  int attempt_index = 0;  // 1-based
};

// Competitors beyond this many are not drawn; their contribution is
// extrapolated from the simulated ones by a union bound.
inline constexpr std::uint64_t kMaxSimulatedCompetitors = (1u << 14) - 1;

struct simulation_result {
  std::uint64_t trials = 0;
  double err_rate = 0.0;
  double err_stderr = 0.0;
  double mean_tau = 0.0;
  double tau_stderr = 0.0;
  double false_alarm_rate = 0.0;  // a competitor crossed at a threshold test
  double final_error_rate = 0.0;  // P1: nobody crossed by n_t; P2: wrong argmax
  std::vector<double> stop_freq;  // fraction of trials stopping at each instant
  // Marginal frequency of S_{n_j} < gamma for the transmitted codeword.
  std::vector<double> below_freq;
  std::vector<double> below_stderr;
  std::uint64_t competitors_simulated = 0;
  bool extrapolated = false;
};

// Random-coding simulation of the sparse VLSF protocol with m_sim codewords.
// Every trial draws the same randomness for both rules, so equal seeds give
// paired P1/P2 comparisons.
simulation_result simulate(const channel_model& channel, const schedule& sched,
                           std::uint64_t m_sim, decoding_rule rule, const mc_config& cfg);

// Per-trial records of the same simulation, in trial order. Competitors
// beyond kMaxSimulatedCompetitors are dropped, not extrapolated.
std::vector<trial> simulate_trials(const channel_model& channel, const schedule& sched,
                                   std::uint64_t m_sim, decoding_rule rule, const mc_config& cfg);

struct stopping_result {
  std::uint64_t trials = 0;
  double mean_tau = 0.0;
  double tau_stderr = 0.0;
  std::vector<std::uint64_t> histogram;  // stops per attempt
  // Frequency of tau > n_j, i.e. S below gamma at n_1..n_j, for j < t.
  std::vector<double> survival;
  std::vector<double> below_freq;  // marginal frequency of S_{n_j} < gamma
  std::vector<double> below_stderr;
};

// Threshold crossings of the transmitted codeword alone, without competitors.
stopping_result simulate_stopping_only(const channel_model& channel, const schedule& sched,
                                       const mc_config& cfg);

}  // namespace vlsf
