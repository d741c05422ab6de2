#pragma once

#include <span>
#include <string>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/saddlepoint.hpp"
#include "vlsf/schedule.hpp"

namespace vlsf {

// How P[S_n < gamma] is evaluated inside objectives and constraints.
struct cdf_settings {
  overshoot_mode mode = overshoot_mode::lower;
  double eps_s = kDefaultEpsS;
  // eps_fb in the P2 constraint; mc_rcu is not accepted here.
  fb_method final_attempt = fb_method::rcu;
};

// exact_lattice for BSC/BEC, lower (no overshoot) for AWGN.
cdf_settings default_cdf_settings(const channel_model& channel);

// n_1 + sum_j (n_{j+1} - n_j) P[S_{n_j} < gamma].
double objective(const channel_model& channel, const schedule& sched,
                 const cdf_settings& settings);

// Same objective over real-valued instants.
double relaxed_objective(const info_density_law& law, std::span<const double> instants,
                         double gamma, const cdf_settings& settings);

// Left-hand side of the rule's error constraint at final instant n_t:
//   P1: P[S_{n_t} < gamma] + (M - 1) e^{-gamma}
//   P2: (M - 1) e^{-gamma} + eps_fb(n_t, M), eps_fb per settings.final_attempt
double constraint_value(const channel_model& channel, decoding_rule rule, double n_t,
                        double gamma, double log_competitors, const cdf_settings& settings);

// Smallest gamma making the P1 constraint hold with equality; throws
// errc::infeasible when no gamma satisfies it at this n_t.
double solve_gamma_p1(const channel_model& channel, double n_t, double log_competitors,
                      double epsilon, const cdf_settings& settings);

// gamma = log(M - 1) - log(epsilon - eps_fb(n_t, M)); throws errc::infeasible
// when eps_fb(n_t, M) >= epsilon.
double solve_gamma_p2(const channel_model& channel, double n_t, double log_competitors,
                      double epsilon, const cdf_settings& settings);

double solve_gamma(const channel_model& channel, decoding_rule rule, double n_t,
                   double log_competitors, double epsilon, const cdf_settings& settings);

struct optimizer_options {
  double eps_s = kDefaultEpsS;
  fb_method final_attempt = fb_method::rcu;
  int starts = 8;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  double armijo = 1e-4;
  int max_moves = 10000;
  int max_blocklength = 8192;  // first probe, doubled up to blocklength_cap
  int blocklength_cap = 1 << 16;
  // Extra integer starting points for the local search, e.g. a shorter
  // schedule embedded into this one.
  std::vector<schedule> warm_starts;
};

struct relaxed_solution {
  std::vector<double> instants;
  double gamma = 0.0;
  double objective = 0.0;
  double gradient_norm = 0.0;  // finite-difference norm in log-gap coordinates
  int iterations = 0;
};

// Continuous relaxation: multi-start gradient descent on
// theta = (log n_1, log(n_2 - n_1), ...), gamma eliminated through the rule's
// binding constraint. Returns the best start.
relaxed_solution solve_relaxation(const channel_model& channel, const code_spec& spec,
                                  decoding_rule rule, const cdf_settings& settings,
                                  const optimizer_options& options);

optimization_result optimize(const channel_model& channel, const code_spec& spec,
                             decoding_rule rule, const optimizer_options& options = {});

// Embeds a t-attempt schedule into t + 1 attempts by inserting n_1 - 1 (or the
// first free instant before n_1). The objective cannot increase.
schedule embed_schedule(const schedule& sched);

// Dense decoding after every symbol, T = {1, ..., N}, under P1 with N chosen
// to minimize the objective.
optimization_result dense_reference(const channel_model& channel, const code_spec& spec,
                                    const cdf_settings& settings, int max_blocklength = 8192);

struct sweep_row {
  channel_model channel;
  code_spec spec;
  decoding_rule rule;
  bool feasible = false;
  optimization_result result;
  std::string message;  // reason when infeasible
};

// Cartesian product channel x spec x rule. Cells of the same channel, bits,
// epsilon and rule are solved in increasing attempts order, each seeded with
// the embedded schedule of the previous one.
std::vector<sweep_row> sweep(const std::vector<channel_model>& channels,
                             const std::vector<code_spec>& specs,
                             const std::vector<decoding_rule>& rules,
                             const optimizer_options& options = {}, unsigned workers = 1);

}  // namespace vlsf
