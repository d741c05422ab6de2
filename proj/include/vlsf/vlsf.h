#ifndef VLSF_H
#define VLSF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VLSF_API __declspec(dllexport)
#else
#define VLSF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vlsf_status {
  VLSF_OK = 0,
  VLSF_E_INVALID_ARGUMENT = 1,
  VLSF_E_OUT_OF_CONVERGENCE_REGION = 2,
  VLSF_E_LATTICE_POINT_OUT_OF_SUPPORT = 3,
  VLSF_E_UNSUPPORTED_LAW = 4,
  VLSF_E_INFEASIBLE = 5,
  VLSF_E_EMPTY_GRID = 6,
  VLSF_E_PARSE = 7,
  VLSF_E_INTERNAL = 99
} vlsf_status;

typedef enum vlsf_channel_kind { VLSF_AWGN = 0, VLSF_BSC = 1, VLSF_BEC = 2 } vlsf_channel_kind;
typedef enum vlsf_overshoot { VLSF_LOWER = 0, VLSF_UPPER = 1, VLSF_EXACT_LATTICE = 2 } vlsf_overshoot;
typedef enum vlsf_rule { VLSF_P1 = 0, VLSF_P2 = 1 } vlsf_rule;
typedef enum vlsf_fb_method {
  VLSF_FB_THRESHOLD_UNION = 0,
  VLSF_FB_DEPENDENCE_TESTING = 1,
  VLSF_FB_RCU = 2,
  VLSF_FB_MC_RCU = 3
} vlsf_fb_method;
typedef enum vlsf_branch {
  VLSF_BRANCH_CONTINUOUS_LR = 0,
  VLSF_BRANCH_DISCRETE_LR = 1,
  VLSF_BRANCH_MEAN_GAUSSIAN = 2,
  VLSF_BRANCH_MEAN_SKEW = 3,
  VLSF_BRANCH_BOUNDARY = 4
} vlsf_branch;
typedef enum vlsf_outcome { VLSF_CORRECT = 0, VLSF_FALSE_ALARM = 1, VLSF_FINAL_ERROR = 2 } vlsf_outcome;

/* Message of the last failed call on this thread; empty after success. */
VLSF_API const char* vlsf_last_error(void);
VLSF_API const char* vlsf_status_name(vlsf_status status);

/* Channels */
typedef struct vlsf_channel vlsf_channel;

/* "awgn:snr=1.0", "bsc:delta=0.11", "bec:delta=0.5" */
VLSF_API vlsf_status vlsf_channel_parse(const char* spec, vlsf_channel** out);
VLSF_API vlsf_status vlsf_channel_create(vlsf_channel_kind kind, double param, vlsf_channel** out);
VLSF_API void vlsf_channel_free(vlsf_channel* channel);
VLSF_API vlsf_channel_kind vlsf_channel_get_kind(const vlsf_channel* channel);
VLSF_API double vlsf_channel_get_param(const vlsf_channel* channel);
/* Canonical spec string; valid until the handle is freed. */
VLSF_API const char* vlsf_channel_name(const vlsf_channel* channel);
VLSF_API double vlsf_channel_capacity(const vlsf_channel* channel);

/* Mean and variance of S_n in nats. */
VLSF_API vlsf_status vlsf_moments(const vlsf_channel* channel, double n, double* mean,
                                  double* variance);

/* CDF of S_n */
typedef struct vlsf_cdf_result {
  double p;
  double saddlepoint;
  double w_hat;
  double u_hat;
  double target;
  double lattice_point; /* NaN unless exact-lattice mode */
  vlsf_branch branch;
  int clamped;
  int degenerate;
} vlsf_cdf_result;

VLSF_API vlsf_status vlsf_cdf(const vlsf_channel* channel, double n, double gamma,
                              vlsf_overshoot mode, double eps_s, vlsf_cdf_result* out);
/* Exact binomial P[S_n < gamma]; BSC and BEC only. */
VLSF_API vlsf_status vlsf_exact_cdf(const vlsf_channel* channel, int n, double gamma, double* p);

typedef struct vlsf_mc_config {
  uint64_t trials;
  uint64_t seed;
  unsigned workers;
} vlsf_mc_config;

/* One Monte Carlo run of S_n scored against `count` thresholds. */
VLSF_API vlsf_status vlsf_mc_cdf(const vlsf_channel* channel, int n, const double* gammas,
                                 size_t count, const vlsf_mc_config* cfg, double* p_hat,
                                 double* std_err);

/* Single-attempt error at blocklength n with 2^bits messages. */
VLSF_API vlsf_status vlsf_eps_fb(const vlsf_channel* channel, double n, double bits,
                                 vlsf_fb_method method, const vlsf_mc_config* cfg, double* value,
                                 double* std_err);

/* Schedules and optimization */
typedef struct vlsf_code_spec {
  double message_bits;
  double epsilon;
  int attempts;
} vlsf_code_spec;

typedef struct vlsf_optimizer_options {
  double eps_s;
  vlsf_fb_method final_attempt;
  int starts;
  int max_iterations;
  int max_blocklength; /* first feasibility probe, doubled up to blocklength_cap */
  int blocklength_cap;
} vlsf_optimizer_options;

VLSF_API void vlsf_optimizer_options_default(vlsf_optimizer_options* out);

typedef struct vlsf_result vlsf_result;

VLSF_API vlsf_status vlsf_optimize(const vlsf_channel* channel, const vlsf_code_spec* spec,
                                   vlsf_rule rule, const vlsf_optimizer_options* options,
                                   vlsf_result** out);
/* Exhaustive search over the default grid, t <= 3. */
VLSF_API vlsf_status vlsf_brute_force(const vlsf_channel* channel, const vlsf_code_spec* spec,
                                      vlsf_rule rule, vlsf_result** out);
/* Dense schedule {1, ..., N} under P1. */
VLSF_API vlsf_status vlsf_dense_reference(const vlsf_channel* channel, const vlsf_code_spec* spec,
                                          vlsf_result** out);
VLSF_API void vlsf_result_free(vlsf_result* result);

VLSF_API double vlsf_result_gamma(const vlsf_result* result);
VLSF_API size_t vlsf_result_attempts(const vlsf_result* result);
/* Copies min(cap, attempts) instants; returns the number of attempts. */
VLSF_API size_t vlsf_result_instants(const vlsf_result* result, int* buf, size_t cap);
VLSF_API double vlsf_result_objective(const vlsf_result* result);
VLSF_API double vlsf_result_rate(const vlsf_result* result);
VLSF_API double vlsf_result_residual(const vlsf_result* result);
VLSF_API vlsf_rule vlsf_result_rule(const vlsf_result* result);
VLSF_API void vlsf_result_diagnostics(const vlsf_result* result, int* iterations, int* restarts,
                                      int* local_search_moves);

/* n_1 + sum_j (n_{j+1} - n_j) P[S_{n_j} < gamma] with the channel's default CDF. */
VLSF_API vlsf_status vlsf_objective(const vlsf_channel* channel, double gamma, const int* instants,
                                    size_t attempts, double* out);

/* Sweeps */
typedef struct vlsf_sweep vlsf_sweep;

VLSF_API vlsf_status vlsf_sweep_run(const vlsf_channel* const* channels, size_t channel_count,
                                    const vlsf_code_spec* specs, size_t spec_count,
                                    const vlsf_rule* rules, size_t rule_count,
                                    const vlsf_optimizer_options* options, unsigned workers,
                                    vlsf_sweep** out);
VLSF_API void vlsf_sweep_free(vlsf_sweep* sweep);
VLSF_API size_t vlsf_sweep_size(const vlsf_sweep* sweep);

typedef struct vlsf_sweep_row {
  vlsf_channel_kind kind;
  double param;
  vlsf_code_spec spec;
  vlsf_rule rule;
  int feasible;
  const char* message;       /* reason when infeasible; owned by the sweep */
  const vlsf_result* result; /* owned by the sweep */
} vlsf_sweep_row;

VLSF_API vlsf_status vlsf_sweep_get(const vlsf_sweep* sweep, size_t index, vlsf_sweep_row* out);

/* Simulation */
typedef struct vlsf_sim_summary {
  uint64_t trials;
  double err_rate;
  double err_stderr;
  double mean_tau;
  double tau_stderr;
  double false_alarm_rate;
  double final_error_rate;
  uint64_t competitors_simulated;
  int extrapolated;
} vlsf_sim_summary;

/* Per-attempt arrays may be NULL; otherwise they hold `attempts` entries. */
VLSF_API vlsf_status vlsf_simulate(const vlsf_channel* channel, double gamma, const int* instants,
                                   size_t attempts, uint64_t m_sim, vlsf_rule rule,
                                   const vlsf_mc_config* cfg, vlsf_sim_summary* out,
                                   double* stop_freq, double* below_freq, double* below_stderr);

typedef struct vlsf_trial {
  int stopping_time;
  vlsf_outcome outcome;
  int attempt_index;
} vlsf_trial;

/* Writes cfg->trials records. */
VLSF_API vlsf_status vlsf_simulate_trials(const vlsf_channel* channel, double gamma,
                                          const int* instants, size_t attempts, uint64_t m_sim,
                                          vlsf_rule rule, const vlsf_mc_config* cfg,
                                          vlsf_trial* out);

typedef struct vlsf_stopping_summary {
  uint64_t trials;
  double mean_tau;
  double tau_stderr;
} vlsf_stopping_summary;

/* histogram and below arrays hold `attempts` entries, survival attempts - 1;
   any may be NULL. */
VLSF_API vlsf_status vlsf_simulate_stopping_only(const vlsf_channel* channel, double gamma,
                                                 const int* instants, size_t attempts,
                                                 const vlsf_mc_config* cfg,
                                                 vlsf_stopping_summary* out, uint64_t* histogram,
                                                 double* survival, double* below_freq,
                                                 double* below_stderr);

#ifdef __cplusplus
}
#endif

#endif
