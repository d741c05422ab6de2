#include "vlsf/vlsf.h"

#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/error.hpp"
#include "vlsf/optimizer.hpp"
#include "vlsf/oracles.hpp"
#include "vlsf/saddlepoint.hpp"
#include "vlsf/simulator.hpp"

struct vlsf_channel {
  vlsf::channel_model model;
  std::string name;
};

struct vlsf_result {
  vlsf::optimization_result value;
};

struct vlsf_sweep {
  std::vector<vlsf::sweep_row> rows;
  std::vector<vlsf_result> results;
};

namespace {

thread_local std::string last_error;

vlsf_status to_status(vlsf::errc code) {
  switch (code) {
    case vlsf::errc::invalid_argument: return VLSF_E_INVALID_ARGUMENT;
    case vlsf::errc::out_of_convergence_region: return VLSF_E_OUT_OF_CONVERGENCE_REGION;
    case vlsf::errc::lattice_point_out_of_support: return VLSF_E_LATTICE_POINT_OUT_OF_SUPPORT;
    case vlsf::errc::unsupported_law: return VLSF_E_UNSUPPORTED_LAW;
    case vlsf::errc::infeasible: return VLSF_E_INFEASIBLE;
    case vlsf::errc::empty_grid: return VLSF_E_EMPTY_GRID;
    case vlsf::errc::parse_error: return VLSF_E_PARSE;
  }
  return VLSF_E_INTERNAL;
}

vlsf_status fail(vlsf_status status, const std::string& what) {
  last_error = what;
  return status;
}

template <class Fn>
vlsf_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return VLSF_OK;
  } catch (const vlsf::error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::invalid_argument& e) {
    return fail(VLSF_E_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(VLSF_E_INTERNAL, e.what());
  } catch (...) {
    return fail(VLSF_E_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw vlsf::error(vlsf::errc::invalid_argument, what);
}

vlsf::code_spec to_spec(const vlsf_code_spec* spec) {
  require(spec != nullptr, "null code spec");
  vlsf::code_spec s{spec->message_bits, spec->epsilon, spec->attempts};
  s.validate();
  return s;
}

vlsf::decoding_rule to_rule(vlsf_rule rule) {
  require(rule == VLSF_P1 || rule == VLSF_P2, "unknown rule");
  return rule == VLSF_P1 ? vlsf::decoding_rule::p1 : vlsf::decoding_rule::p2;
}

vlsf::fb_method to_fb(vlsf_fb_method m) {
  switch (m) {
    case VLSF_FB_THRESHOLD_UNION: return vlsf::fb_method::threshold_union;
    case VLSF_FB_DEPENDENCE_TESTING: return vlsf::fb_method::dependence_testing;
    case VLSF_FB_RCU: return vlsf::fb_method::rcu;
    case VLSF_FB_MC_RCU: return vlsf::fb_method::mc_rcu;
  }
  throw vlsf::error(vlsf::errc::invalid_argument, "unknown final-attempt method");
}

vlsf::overshoot_mode to_mode(vlsf_overshoot m) {
  switch (m) {
    case VLSF_LOWER: return vlsf::overshoot_mode::lower;
    case VLSF_UPPER: return vlsf::overshoot_mode::upper;
    case VLSF_EXACT_LATTICE: return vlsf::overshoot_mode::exact_lattice;
  }
  throw vlsf::error(vlsf::errc::invalid_argument, "unknown overshoot mode");
}

vlsf::optimizer_options to_options(const vlsf_optimizer_options* o) {
  vlsf::optimizer_options opts;
  if (!o) return opts;
  opts.eps_s = o->eps_s;
  opts.final_attempt = to_fb(o->final_attempt);
  opts.starts = o->starts;
  opts.max_iterations = o->max_iterations;
  opts.max_blocklength = o->max_blocklength;
  opts.blocklength_cap = o->blocklength_cap;
  require(opts.starts >= 1 && opts.max_iterations >= 1 && opts.max_blocklength >= 1,
          "optimizer options must be positive");
  require(opts.blocklength_cap >= opts.max_blocklength && opts.blocklength_cap <= vlsf::kExactCdfCap,
          "blocklength cap must lie between max_blocklength and the exact-sum cap");
  return opts;
}

vlsf::mc_config to_mc(const vlsf_mc_config* cfg) {
  require(cfg != nullptr, "null Monte Carlo config");
  require(cfg->trials >= 1, "trials must be >= 1");
  return {cfg->trials, cfg->seed, cfg->workers == 0 ? 1u : cfg->workers};
}

vlsf::schedule to_schedule(double gamma, const int* instants, size_t attempts) {
  require(instants != nullptr && attempts > 0, "empty schedule");
  vlsf::schedule s{gamma, std::vector<int>(instants, instants + attempts)};
  s.validate();
  return s;
}

const vlsf::channel_model& model(const vlsf_channel* c) {
  require(c != nullptr, "null channel");
  return c->model;
}

vlsf_channel* wrap(const vlsf::channel_model& m) { return new vlsf_channel{m, m.to_string()}; }

vlsf_branch to_branch(vlsf::cdf_branch b) {
  switch (b) {
    case vlsf::cdf_branch::continuous_lr: return VLSF_BRANCH_CONTINUOUS_LR;
    case vlsf::cdf_branch::discrete_lr: return VLSF_BRANCH_DISCRETE_LR;
    case vlsf::cdf_branch::mean_gaussian: return VLSF_BRANCH_MEAN_GAUSSIAN;
    case vlsf::cdf_branch::mean_skew_formula: return VLSF_BRANCH_MEAN_SKEW;
    case vlsf::cdf_branch::boundary: return VLSF_BRANCH_BOUNDARY;
  }
  return VLSF_BRANCH_CONTINUOUS_LR;
}

}  // namespace

extern "C" {

const char* vlsf_last_error(void) { return last_error.c_str(); }

const char* vlsf_status_name(vlsf_status status) {
  switch (status) {
    case VLSF_OK: return "ok";
    case VLSF_E_INVALID_ARGUMENT: return "invalid_argument";
    case VLSF_E_OUT_OF_CONVERGENCE_REGION: return "out_of_convergence_region";
    case VLSF_E_LATTICE_POINT_OUT_OF_SUPPORT: return "lattice_point_out_of_support";
    case VLSF_E_UNSUPPORTED_LAW: return "unsupported_law";
    case VLSF_E_INFEASIBLE: return "infeasible";
    case VLSF_E_EMPTY_GRID: return "empty_grid";
    case VLSF_E_PARSE: return "parse_error";
    case VLSF_E_INTERNAL: return "internal";
  }
  return "unknown";
}

vlsf_status vlsf_channel_parse(const char* spec, vlsf_channel** out) {
  return guard([&] {
    require(spec && out, "null argument");
    *out = wrap(vlsf::channel_model::parse(spec));
  });
}

vlsf_status vlsf_channel_create(vlsf_channel_kind kind, double param, vlsf_channel** out) {
  return guard([&] {
    require(out != nullptr, "null argument");
    switch (kind) {
      case VLSF_AWGN: *out = wrap(vlsf::channel_model::awgn(param)); return;
      case VLSF_BSC: *out = wrap(vlsf::channel_model::bsc(param)); return;
      case VLSF_BEC: *out = wrap(vlsf::channel_model::bec(param)); return;
    }
    throw vlsf::error(vlsf::errc::invalid_argument, "unknown channel kind");
  });
}

void vlsf_channel_free(vlsf_channel* channel) { delete channel; }

vlsf_channel_kind vlsf_channel_get_kind(const vlsf_channel* channel) {
  switch (channel->model.kind()) {
    case vlsf::channel_kind::awgn: return VLSF_AWGN;
    case vlsf::channel_kind::bsc: return VLSF_BSC;
    case vlsf::channel_kind::bec: return VLSF_BEC;
  }
  return VLSF_AWGN;
}

double vlsf_channel_get_param(const vlsf_channel* channel) { return channel->model.param(); }

const char* vlsf_channel_name(const vlsf_channel* channel) { return channel->name.c_str(); }

double vlsf_channel_capacity(const vlsf_channel* channel) { return channel->model.capacity_nats(); }

vlsf_status vlsf_moments(const vlsf_channel* channel, double n, double* mean, double* variance) {
  return guard([&] {
    require(mean && variance, "null output");
    require(n > 0.0, "n must be positive");
    const auto m = vlsf::moments(vlsf::single_letter_law(model(channel)), n);
    *mean = m.mean;
    *variance = m.variance;
  });
}

vlsf_status vlsf_cdf(const vlsf_channel* channel, double n, double gamma, vlsf_overshoot mode,
                     double eps_s, vlsf_cdf_result* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto r = vlsf::cdf({vlsf::single_letter_law(model(channel)), n, gamma, to_mode(mode)}, eps_s);
    out->p = r.p;
    out->saddlepoint = r.saddlepoint;
    out->w_hat = r.w_hat;
    out->u_hat = r.u_hat;
    out->target = r.target;
    out->lattice_point = r.lattice_point ? *r.lattice_point : std::numeric_limits<double>::quiet_NaN();
    out->branch = to_branch(r.branch);
    out->clamped = r.clamped;
    out->degenerate = r.degenerate;
  });
}

vlsf_status vlsf_exact_cdf(const vlsf_channel* channel, int n, double gamma, double* p) {
  return guard([&] {
    require(p != nullptr, "null output");
    const auto law = vlsf::single_letter_law(model(channel));
    if (!law.is_lattice()) {
      throw vlsf::error(vlsf::errc::unsupported_law, "exact CDF needs a BSC or BEC channel");
    }
    *p = vlsf::exact_cdf_lattice(law, n, gamma);
  });
}

vlsf_status vlsf_mc_cdf(const vlsf_channel* channel, int n, const double* gammas, size_t count,
                        const vlsf_mc_config* cfg, double* p_hat, double* std_err) {
  return guard([&] {
    require(gammas && p_hat && std_err && count > 0, "null or empty argument");
    const auto est = vlsf::mc_cdf_multi(vlsf::single_letter_law(model(channel)), n,
                                        std::span<const double>(gammas, count), to_mc(cfg));
    for (size_t i = 0; i < count; ++i) {
      p_hat[i] = est[i].p_hat;
      std_err[i] = est[i].std_err;
    }
  });
}

vlsf_status vlsf_eps_fb(const vlsf_channel* channel, double n, double bits, vlsf_fb_method method,
                        const vlsf_mc_config* cfg, double* value, double* std_err) {
  return guard([&] {
    require(value != nullptr, "null output");
    require(bits > 0.0, "bits must be positive");
    vlsf::fb_options opts;
    if (cfg) opts.mc = to_mc(cfg);
    const auto m = model(channel);
    opts.mode = vlsf::default_cdf_settings(m).mode;
    const vlsf::code_spec spec{bits, 0.5, 1};
    const auto est = vlsf::eps_fb(m, n, spec.log_competitors(), to_fb(method), opts);
    *value = est.value;
    if (std_err) *std_err = est.std_err;
  });
}

void vlsf_optimizer_options_default(vlsf_optimizer_options* out) {
  const vlsf::optimizer_options d;
  out->eps_s = d.eps_s;
  out->final_attempt = VLSF_FB_RCU;
  out->starts = d.starts;
  out->max_iterations = d.max_iterations;
  out->max_blocklength = d.max_blocklength;
  out->blocklength_cap = d.blocklength_cap;
}

vlsf_status vlsf_optimize(const vlsf_channel* channel, const vlsf_code_spec* spec, vlsf_rule rule,
                          const vlsf_optimizer_options* options, vlsf_result** out) {
  return guard([&] {
    require(out != nullptr, "null output");
    auto r = vlsf::optimize(model(channel), to_spec(spec), to_rule(rule), to_options(options));
    *out = new vlsf_result{std::move(r)};
  });
}

vlsf_status vlsf_brute_force(const vlsf_channel* channel, const vlsf_code_spec* spec,
                             vlsf_rule rule, vlsf_result** out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto& m = model(channel);
    const auto s = to_spec(spec);
    auto r = vlsf::brute_force_search(m, s, to_rule(rule), vlsf::default_search_grid(m, s),
                                      vlsf::default_cdf_settings(m).mode);
    *out = new vlsf_result{std::move(r)};
  });
}

vlsf_status vlsf_dense_reference(const vlsf_channel* channel, const vlsf_code_spec* spec,
                                 vlsf_result** out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto& m = model(channel);
    auto r = vlsf::dense_reference(m, to_spec(spec), vlsf::default_cdf_settings(m));
    *out = new vlsf_result{std::move(r)};
  });
}

void vlsf_result_free(vlsf_result* result) { delete result; }

double vlsf_result_gamma(const vlsf_result* r) { return r->value.sched.gamma; }
size_t vlsf_result_attempts(const vlsf_result* r) { return r->value.sched.instants.size(); }

size_t vlsf_result_instants(const vlsf_result* r, int* buf, size_t cap) {
  const auto& v = r->value.sched.instants;
  for (size_t i = 0; i < v.size() && i < cap; ++i) buf[i] = v[i];
  return v.size();
}

double vlsf_result_objective(const vlsf_result* r) { return r->value.objective; }
double vlsf_result_rate(const vlsf_result* r) { return r->value.rate_bits; }
double vlsf_result_residual(const vlsf_result* r) { return r->value.constraint_residual; }
vlsf_rule vlsf_result_rule(const vlsf_result* r) {
  return r->value.rule == vlsf::decoding_rule::p1 ? VLSF_P1 : VLSF_P2;
}

void vlsf_result_diagnostics(const vlsf_result* r, int* iterations, int* restarts,
                             int* local_search_moves) {
  const auto& d = r->value.diagnostics;
  if (iterations) *iterations = d.iterations;
  if (restarts) *restarts = d.restarts;
  if (local_search_moves) *local_search_moves = d.local_search_moves;
}

vlsf_status vlsf_objective(const vlsf_channel* channel, double gamma, const int* instants,
                           size_t attempts, double* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto& m = model(channel);
    *out = vlsf::objective(m, to_schedule(gamma, instants, attempts), vlsf::default_cdf_settings(m));
  });
}

vlsf_status vlsf_sweep_run(const vlsf_channel* const* channels, size_t channel_count,
                           const vlsf_code_spec* specs, size_t spec_count, const vlsf_rule* rules,
                           size_t rule_count, const vlsf_optimizer_options* options,
                           unsigned workers, vlsf_sweep** out) {
  return guard([&] {
    require(out != nullptr, "null output");
    require(channels && specs && rules && channel_count && spec_count && rule_count,
            "sweep lists must be nonempty");
    std::vector<vlsf::channel_model> ch;
    for (size_t i = 0; i < channel_count; ++i) ch.push_back(model(channels[i]));
    std::vector<vlsf::code_spec> sp;
    for (size_t i = 0; i < spec_count; ++i) sp.push_back(to_spec(&specs[i]));
    std::vector<vlsf::decoding_rule> ru;
    for (size_t i = 0; i < rule_count; ++i) ru.push_back(to_rule(rules[i]));
    auto sw = std::make_unique<vlsf_sweep>();
    sw->rows = vlsf::sweep(ch, sp, ru, to_options(options), workers == 0 ? 1 : workers);
    for (const auto& row : sw->rows) sw->results.push_back({row.result});
    *out = sw.release();
  });
}

void vlsf_sweep_free(vlsf_sweep* sweep) { delete sweep; }
size_t vlsf_sweep_size(const vlsf_sweep* sweep) { return sweep->rows.size(); }

vlsf_status vlsf_sweep_get(const vlsf_sweep* sweep, size_t index, vlsf_sweep_row* out) {
  return guard([&] {
    require(sweep && out, "null argument");
    require(index < sweep->rows.size(), "row index out of range");
    const auto& row = sweep->rows[index];
    vlsf_channel tmp{row.channel, ""};
    out->kind = vlsf_channel_get_kind(&tmp);
    out->param = row.channel.param();
    out->spec = {row.spec.message_bits, row.spec.epsilon, row.spec.attempts};
    out->rule = row.rule == vlsf::decoding_rule::p1 ? VLSF_P1 : VLSF_P2;
    out->feasible = row.feasible;
    out->message = row.message.c_str();
    out->result = &sweep->results[index];
  });
}

vlsf_status vlsf_simulate(const vlsf_channel* channel, double gamma, const int* instants,
                          size_t attempts, uint64_t m_sim, vlsf_rule rule,
                          const vlsf_mc_config* cfg, vlsf_sim_summary* out, double* stop_freq,
                          double* below_freq, double* below_stderr) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto r = vlsf::simulate(model(channel), to_schedule(gamma, instants, attempts), m_sim,
                                  to_rule(rule), to_mc(cfg));
    *out = {r.trials, r.err_rate, r.err_stderr, r.mean_tau, r.tau_stderr, r.false_alarm_rate,
            r.final_error_rate, r.competitors_simulated, r.extrapolated};
    for (size_t j = 0; j < attempts; ++j) {
      if (stop_freq) stop_freq[j] = r.stop_freq[j];
      if (below_freq) below_freq[j] = r.below_freq[j];
      if (below_stderr) below_stderr[j] = r.below_stderr[j];
    }
  });
}

vlsf_status vlsf_simulate_trials(const vlsf_channel* channel, double gamma, const int* instants,
                                 size_t attempts, uint64_t m_sim, vlsf_rule rule,
                                 const vlsf_mc_config* cfg, vlsf_trial* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto trials = vlsf::simulate_trials(model(channel), to_schedule(gamma, instants, attempts),
                                              m_sim, to_rule(rule), to_mc(cfg));
    for (size_t i = 0; i < trials.size(); ++i) {
      out[i] = {trials[i].stopping_time, static_cast<vlsf_outcome>(trials[i].outcome),
                trials[i].attempt_index};
    }
  });
}

vlsf_status vlsf_simulate_stopping_only(const vlsf_channel* channel, double gamma,
                                        const int* instants, size_t attempts,
                                        const vlsf_mc_config* cfg, vlsf_stopping_summary* out,
                                        uint64_t* histogram, double* survival, double* below_freq,
                                        double* below_stderr) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto r = vlsf::simulate_stopping_only(model(channel),
                                                to_schedule(gamma, instants, attempts), to_mc(cfg));
    *out = {r.trials, r.mean_tau, r.tau_stderr};
    for (size_t j = 0; j < attempts; ++j) {
      if (histogram) histogram[j] = r.histogram[j];
      if (below_freq) below_freq[j] = r.below_freq[j];
      if (below_stderr) below_stderr[j] = r.below_stderr[j];
      if (survival && j + 1 < attempts) survival[j] = r.survival[j];
    }
  });
}

}  // extern "C"
