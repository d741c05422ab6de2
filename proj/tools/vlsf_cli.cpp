// Command-line front end over the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlsf/vlsf.h"

using json = nlohmann::json;

namespace {

enum exit_code {
  kOk = 0,
  kParse = 2,
  kOracle = 3,
  kInfeasible = 4,
  kIo = 5,
  kFailure = 6,
};

struct cli_error : std::runtime_error {
  cli_error(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

[[noreturn]] void raise(int code, const std::string& what) { throw cli_error(code, what); }

// Maps library failures to exit codes: infeasibility is its own path, every
// other status is reported as `fallback`.
void check(vlsf_status s, int fallback) {
  if (s == VLSF_OK) return;
  const std::string msg = std::string(vlsf_status_name(s)) + ": " + vlsf_last_error();
  if (s == VLSF_E_INFEASIBLE) raise(kInfeasible, msg);
  if (s == VLSF_E_PARSE) raise(kParse, msg);
  raise(fallback, msg);
}

struct channel_deleter {
  void operator()(vlsf_channel* c) const { vlsf_channel_free(c); }
};
struct result_deleter {
  void operator()(vlsf_result* r) const { vlsf_result_free(r); }
};
struct sweep_deleter {
  void operator()(vlsf_sweep* s) const { vlsf_sweep_free(s); }
};
using channel_ptr = std::unique_ptr<vlsf_channel, channel_deleter>;
using result_ptr = std::unique_ptr<vlsf_result, result_deleter>;
using sweep_ptr = std::unique_ptr<vlsf_sweep, sweep_deleter>;

channel_ptr parse_channel(const std::string& spec) {
  vlsf_channel* c = nullptr;
  const auto s = vlsf_channel_parse(spec.c_str(), &c);
  if (s != VLSF_OK) raise(kParse, std::string("bad channel '") + spec + "': " + vlsf_last_error());
  return channel_ptr(c);
}

channel_ptr make_channel(vlsf_channel_kind kind, double param) {
  vlsf_channel* c = nullptr;
  if (vlsf_channel_create(kind, param, &c) != VLSF_OK) raise(kParse, vlsf_last_error());
  return channel_ptr(c);
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    raise(kParse, "not a number: '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "a,b,c" or "lo:hi[:step]" (inclusive, step defaults to 1).
std::vector<double> parse_list(const std::string& s) {
  if (s.find(':') == std::string::npos) {
    std::vector<double> out;
    for (const auto& item : split(s, ',')) out.push_back(to_double(item));
    if (out.empty()) raise(kParse, "empty list");
    return out;
  }
  const auto parts = split(s, ':');
  if (parts.size() < 2 || parts.size() > 3) raise(kParse, "range must be lo:hi[:step], got '" + s + "'");
  const double lo = to_double(parts[0]);
  const double hi = to_double(parts[1]);
  const double step = parts.size() == 3 ? to_double(parts[2]) : 1.0;
  if (!(step > 0.0) || hi < lo) raise(kParse, "bad range '" + s + "'");
  std::vector<double> out;
  for (int i = 0; lo + i * step <= hi + 1e-9 * std::max(1.0, std::abs(hi)); ++i) out.push_back(lo + i * step);
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_list(s)) {
    if (v != std::round(v)) raise(kParse, "expected integers in '" + s + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<vlsf_rule> parse_rules(const std::string& s) {
  if (s == "p1") return {VLSF_P1};
  if (s == "p2") return {VLSF_P2};
  if (s == "both") return {VLSF_P1, VLSF_P2};
  raise(kParse, "rule must be p1, p2 or both, got '" + s + "'");
}

const char* rule_name(vlsf_rule r) { return r == VLSF_P1 ? "p1" : "p2"; }

vlsf_fb_method parse_fb(const std::string& s) {
  if (s == "rcu") return VLSF_FB_RCU;
  if (s == "threshold_union") return VLSF_FB_THRESHOLD_UNION;
  if (s == "dependence_testing") return VLSF_FB_DEPENDENCE_TESTING;
  raise(kParse, "final-attempt must be rcu, threshold_union or dependence_testing");
}

const char* branch_name(vlsf_branch b) {
  switch (b) {
    case VLSF_BRANCH_CONTINUOUS_LR: return "continuous_lr";
    case VLSF_BRANCH_DISCRETE_LR: return "discrete_lr";
    case VLSF_BRANCH_MEAN_GAUSSIAN: return "mean_gaussian";
    case VLSF_BRANCH_MEAN_SKEW: return "mean_skew";
    case VLSF_BRANCH_BOUNDARY: return "boundary";
  }
  return "?";
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Results are buffered and written in one piece on success, to a file when a
// path is given and to stdout otherwise.
class output {
 public:
  explicit output(const std::string& path) : path_(path == "-" ? "" : path) {}
  std::ostream& stream() { return buf_; }
  bool to_file() const { return !path_.empty(); }
  void close() {
    if (path_.empty()) {
      std::cout << buf_.str() << std::flush;
      if (!std::cout) raise(kIo, "write to stdout failed");
      return;
    }
    std::ofstream file(path_, std::ios::binary | std::ios::trunc);
    if (!file) raise(kIo, "cannot open '" + path_ + "' for writing");
    file << buf_.str();
    file.flush();
    if (!file) raise(kIo, "write failed for '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ostringstream buf_;
};

struct common_opts {
  std::string out;
  unsigned workers = 1;
  std::uint64_t seed = 1;
  std::uint64_t trials = 100000;
};

void add_common(CLI::App* app, common_opts& c) {
  app->add_option("--out,-o", c.out, "Output path (stdout when omitted or -)");
  app->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "Random seed")->envname("VLSF_SEED");
  app->add_option("--trials", c.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
}

json schedule_json(const vlsf_result* r) {
  std::vector<int> inst(vlsf_result_attempts(r));
  vlsf_result_instants(r, inst.data(), inst.size());
  return {{"gamma", vlsf_result_gamma(r)}, {"instants", inst}};
}

// ---- cdf ----

struct cdf_opts {
  std::string channel;
  std::string n;
  std::string gamma_grid = "auto";
  std::string gamma;
  std::string oracle = "none";
  double eps_s = 0.1;
};

int run_cdf(const cdf_opts& o, const common_opts& c) {
  if (o.channel.empty()) raise(kParse, "--channel is required");
  if (o.n.empty()) raise(kParse, "--n is required");
  if (o.oracle != "exact" && o.oracle != "mc" && o.oracle != "none") {
    raise(kParse, "--oracle must be exact, mc or none");
  }
  const auto ch = parse_channel(o.channel);
  const bool lattice = vlsf_channel_get_kind(ch.get()) != VLSF_AWGN;
  const auto ns = parse_int_list(o.n);

  output out(c.out);
  auto& os = out.stream();
  os << "n,gamma,p_saddle_lower,p_saddle_upper,p_saddle_exactlattice,p_oracle,oracle_stderr,branch\n";
  for (int n : ns) {
    if (n < 1) raise(kParse, "n must be >= 1");
    std::vector<double> gammas;
    if (!o.gamma.empty()) {
      gammas = parse_list(o.gamma);
    } else if (o.gamma_grid == "auto") {
      double mean = 0.0, var = 0.0;
      check(vlsf_moments(ch.get(), n, &mean, &var), kFailure);
      const double sd = std::sqrt(var);
      for (int i = 0; i < 200; ++i) gammas.push_back(mean - 6.0 * sd + 12.0 * sd * i / 199.0);
    } else {
      const auto parts = split(o.gamma_grid, ':');
      if (parts.size() != 3) raise(kParse, "--gamma-grid must be lo:hi:count or auto");
      const double lo = to_double(parts[0]);
      const double hi = to_double(parts[1]);
      const double count = to_double(parts[2]);
      if (count < 1 || count != std::round(count) || hi < lo) raise(kParse, "bad --gamma-grid");
      for (int i = 0; i < count; ++i) gammas.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }

    std::vector<double> p_or(gammas.size(), std::nan("")), se(gammas.size(), std::nan(""));
    if (o.oracle == "exact") {
      for (std::size_t i = 0; i < gammas.size(); ++i) {
        check(vlsf_exact_cdf(ch.get(), n, gammas[i], &p_or[i]), kOracle);
        se[i] = 0.0;
      }
    } else if (o.oracle == "mc") {
      const vlsf_mc_config cfg{c.trials, c.seed, c.workers};
      check(vlsf_mc_cdf(ch.get(), n, gammas.data(), gammas.size(), &cfg, p_or.data(), se.data()),
            kOracle);
    }

    for (std::size_t i = 0; i < gammas.size(); ++i) {
      vlsf_cdf_result lo{}, hi{}, ex{};
      check(vlsf_cdf(ch.get(), n, gammas[i], VLSF_LOWER, o.eps_s, &lo), kFailure);
      check(vlsf_cdf(ch.get(), n, gammas[i], VLSF_UPPER, o.eps_s, &hi), kFailure);
      ex.p = std::nan("");
      if (lattice) check(vlsf_cdf(ch.get(), n, gammas[i], VLSF_EXACT_LATTICE, o.eps_s, &ex), kFailure);
      os << n << ',' << fmt(gammas[i]) << ',' << fmt(lo.p) << ',' << fmt(hi.p) << ',' << fmt(ex.p)
         << ',' << fmt(p_or[i]) << ',' << fmt(se[i]) << ','
         << branch_name(lattice ? ex.branch : lo.branch) << '\n';
    }
  }
  out.close();
  return kOk;
}

// ---- optimize ----

struct optimize_opts {
  std::string channel;
  double bits = 0.0;
  double eps = 1e-3;
  int t = 3;
  std::string rule = "p1";
  bool certify = false;
  std::string final_attempt = "rcu";
  double eps_s = 0.1;
};

vlsf_optimizer_options optimizer_options(const std::string& final_attempt, double eps_s) {
  vlsf_optimizer_options opts;
  vlsf_optimizer_options_default(&opts);
  opts.final_attempt = parse_fb(final_attempt);
  opts.eps_s = eps_s;
  return opts;
}

json result_record(const vlsf_channel* ch, const vlsf_code_spec& spec, vlsf_rule rule,
                   const vlsf_result* r) {
  int iterations = 0, restarts = 0, moves = 0;
  vlsf_result_diagnostics(r, &iterations, &restarts, &moves);
  return {{"channel", vlsf_channel_name(ch)},
          {"bits", spec.message_bits},
          {"eps", spec.epsilon},
          {"t", spec.attempts},
          {"rule", rule_name(rule)},
          {"schedule", schedule_json(r)},
          {"objective", vlsf_result_objective(r)},
          {"rate_bits", vlsf_result_rate(r)},
          {"residual", vlsf_result_residual(r)},
          {"diagnostics",
           {{"iterations", iterations}, {"restarts", restarts}, {"local_search_moves", moves}}}};
}

int run_optimize(const optimize_opts& o, const common_opts& c) {
  if (o.channel.empty()) raise(kParse, "--channel is required");
  if (!(o.bits > 0.0)) raise(kParse, "--bits must be positive");
  const auto ch = parse_channel(o.channel);
  const auto rules = parse_rules(o.rule);
  const auto opts = optimizer_options(o.final_attempt, o.eps_s);
  const vlsf_code_spec spec{o.bits, o.eps, o.t};
  if (o.certify && o.t > 3) raise(kParse, "--certify needs t <= 3");

  json records = json::array();
  std::vector<std::string> summaries;
  for (auto rule : rules) {
    vlsf_result* raw = nullptr;
    check(vlsf_optimize(ch.get(), &spec, rule, &opts, &raw), kFailure);
    result_ptr r(raw);
    json rec = result_record(ch.get(), spec, rule, r.get());
    rec["final_attempt"] = o.final_attempt;
    if (o.certify) {
      vlsf_result* bf_raw = nullptr;
      check(vlsf_brute_force(ch.get(), &spec, rule, &bf_raw), kFailure);
      result_ptr bf(bf_raw);
      std::vector<int> a(o.t), b(o.t);
      vlsf_result_instants(r.get(), a.data(), a.size());
      vlsf_result_instants(bf.get(), b.data(), b.size());
      int diff = 0;
      for (int j = 0; j < o.t; ++j) diff = std::max(diff, std::abs(a[j] - b[j]));
      rec["certify"] = {{"schedule", schedule_json(bf.get())},
                        {"objective", vlsf_result_objective(bf.get())},
                        {"rate_bits", vlsf_result_rate(bf.get())},
                        {"rate_gap", 1.0 - vlsf_result_rate(r.get()) / vlsf_result_rate(bf.get())},
                        {"max_instant_diff", diff}};
    }
    std::ostringstream line;
    line << rule_name(rule) << ' ' << vlsf_channel_name(ch.get()) << " k=" << fmt(o.bits)
         << " eps=" << fmt(o.eps) << " t=" << o.t << ": rate " << fmt(vlsf_result_rate(r.get()))
         << " bits/use, E[tau] <= " << fmt(vlsf_result_objective(r.get())) << ", instants "
         << rec["schedule"]["instants"].dump() << ", gamma "
         << fmt(vlsf_result_gamma(r.get()));
    if (o.certify) line << ", brute-force gap " << fmt(rec["certify"]["rate_gap"].get<double>());
    summaries.push_back(line.str());
    records.push_back(std::move(rec));
  }

  output out(c.out);
  out.stream() << (records.size() == 1 ? records[0] : records).dump(2) << '\n';
  out.close();
  for (const auto& s : summaries) (out.to_file() ? std::cout : std::cerr) << s << '\n';
  return kOk;
}

// ---- sweep ----

struct sweep_opts {
  std::string channel;
  std::string snr;
  std::string delta;
  std::string bits;
  std::string eps = "1e-3";
  std::string t = "3";
  std::string rule = "both";
  bool dense_ref = false;
  std::string final_attempt = "rcu";
  double eps_s = 0.1;
};

constexpr int kCsvInstants = 8;

int run_sweep(const sweep_opts& o, const common_opts& c) {
  if (o.channel.empty()) raise(kParse, "--channel is required");
  if (o.bits.empty()) raise(kParse, "--bits is required");
  std::vector<channel_ptr> channels;
  const auto base = parse_channel(o.channel);
  const auto kind = vlsf_channel_get_kind(base.get());
  if (!o.snr.empty() && !o.delta.empty()) raise(kParse, "give --snr or --delta, not both");
  const std::string& params = kind == VLSF_AWGN ? o.snr : o.delta;
  if ((kind == VLSF_AWGN && !o.delta.empty()) || (kind != VLSF_AWGN && !o.snr.empty())) {
    raise(kParse, "parameter list does not match the channel kind");
  }
  if (params.empty()) {
    channels.push_back(make_channel(kind, vlsf_channel_get_param(base.get())));
  } else {
    for (double p : parse_list(params)) channels.push_back(make_channel(kind, p));
  }

  std::vector<vlsf_code_spec> specs;
  const auto ts = parse_int_list(o.t);
  for (double k : parse_list(o.bits)) {
    for (double e : parse_list(o.eps)) {
      for (int t : ts) {
        if (t < 1 || t > kCsvInstants) raise(kParse, "t must lie in 1..8");
        specs.push_back({k, e, t});
      }
    }
  }
  const auto rules = parse_rules(o.rule);
  const auto opts = optimizer_options(o.final_attempt, o.eps_s);

  std::vector<const vlsf_channel*> raw;
  for (const auto& ch : channels) raw.push_back(ch.get());
  vlsf_sweep* sw_raw = nullptr;
  check(vlsf_sweep_run(raw.data(), raw.size(), specs.data(), specs.size(), rules.data(),
                       rules.size(), &opts, c.workers, &sw_raw),
        kFailure);
  sweep_ptr sw(sw_raw);

  output out(c.out);
  auto& os = out.stream();
  os << "channel,param,bits,eps,t,rule,rate_bits,objective,gamma";
  for (int j = 1; j <= kCsvInstants; ++j) os << ",n" << j;
  os << ",feasible";
  if (o.dense_ref) os << ",dense_rate_bits,dense_objective,dense_n";
  os << '\n';

  std::size_t infeasible = 0;
  const std::size_t rows = vlsf_sweep_size(sw.get());
  for (std::size_t i = 0; i < rows; ++i) {
    vlsf_sweep_row row{};
    check(vlsf_sweep_get(sw.get(), i, &row), kFailure);
    const char* name = row.kind == VLSF_AWGN ? "awgn" : row.kind == VLSF_BSC ? "bsc" : "bec";
    os << name << ',' << fmt(row.param) << ',' << fmt(row.spec.message_bits) << ','
       << fmt(row.spec.epsilon) << ',' << row.spec.attempts << ',' << rule_name(row.rule) << ',';
    if (row.feasible) {
      std::vector<int> inst(kCsvInstants, 0);
      const auto t = vlsf_result_instants(row.result, inst.data(), inst.size());
      os << fmt(vlsf_result_rate(row.result)) << ',' << fmt(vlsf_result_objective(row.result))
         << ',' << fmt(vlsf_result_gamma(row.result));
      for (int j = 0; j < kCsvInstants; ++j) {
        os << ',';
        if (j < static_cast<int>(t)) os << inst[j];
      }
      os << ",1";
    } else {
      ++infeasible;
      os << ",,";
      for (int j = 0; j < kCsvInstants; ++j) os << ',';
      os << ",0";
      std::cerr << "warning: infeasible cell " << name << ' ' << fmt(row.param) << " k="
                << fmt(row.spec.message_bits) << " eps=" << fmt(row.spec.epsilon)
                << " t=" << row.spec.attempts << ' ' << rule_name(row.rule) << ": " << row.message
                << '\n';
    }
    if (o.dense_ref) {
      os << ',';
      auto ch = make_channel(row.kind, row.param);
      vlsf_result* d_raw = nullptr;
      if (vlsf_dense_reference(ch.get(), &row.spec, &d_raw) == VLSF_OK) {
        result_ptr d(d_raw);
        os << fmt(vlsf_result_rate(d.get())) << ',' << fmt(vlsf_result_objective(d.get())) << ','
           << vlsf_result_attempts(d.get());
      } else {
        os << ",,";
      }
    }
    os << '\n';
  }
  out.close();
  if (rows > 0 && infeasible == rows) raise(kInfeasible, "every sweep cell is infeasible");
  return kOk;
}

// ---- simulate ----

struct simulate_opts {
  std::string schedule_path;
  std::string channel;
  std::string rule;
  std::uint64_t msim = 0;
  bool stopping_only = false;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(kIo, "cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    raise(kParse, "'" + path + "' is not valid JSON: " + e.what());
  }
}

int run_simulate(const simulate_opts& o, const common_opts& c) {
  if (o.schedule_path.empty()) raise(kParse, "--schedule is required");
  json doc = load_json(o.schedule_path);
  if (doc.is_array()) {
    if (doc.empty()) raise(kParse, "schedule file holds an empty list");
    doc = doc[0];
  }
  double gamma = 0.0;
  std::vector<int> instants;
  std::string channel = o.channel;
  std::string rule = o.rule;
  std::optional<double> bits, eps;
  try {
    const auto& s = doc.at("schedule");
    gamma = s.at("gamma").get<double>();
    instants = s.at("instants").get<std::vector<int>>();
    if (channel.empty()) channel = doc.at("channel").get<std::string>();
    if (rule.empty()) rule = doc.value("rule", std::string("p1"));
    if (doc.contains("bits")) bits = doc["bits"].get<double>();
    if (doc.contains("eps")) eps = doc["eps"].get<double>();
  } catch (const json::exception& e) {
    raise(kParse, std::string("schedule file: ") + e.what());
  }
  const auto rules = parse_rules(rule);
  if (rules.size() != 1) raise(kParse, "simulate takes a single rule");
  std::uint64_t msim = o.msim;
  if (msim == 0) {
    if (!bits) raise(kParse, "--msim is required when the schedule file has no bits");
    msim = std::uint64_t{1} << std::min(20, static_cast<int>(std::ceil(*bits)));
  }
  if (msim < 2) raise(kParse, "--msim must be >= 2");
  const auto ch = parse_channel(channel);
  const vlsf_mc_config cfg{c.trials, c.seed, c.workers};
  const std::size_t t = instants.size();

  vlsf_sim_summary sum{};
  std::vector<double> stop(t), below(t), below_se(t);
  check(vlsf_simulate(ch.get(), gamma, instants.data(), t, msim, rules[0], &cfg, &sum, stop.data(),
                      below.data(), below_se.data()),
        kFailure);

  double objective = 0.0;
  check(vlsf_objective(ch.get(), gamma, instants.data(), t, &objective), kFailure);
  const auto mode = vlsf_channel_get_kind(ch.get()) == VLSF_AWGN ? VLSF_LOWER : VLSF_EXACT_LATTICE;
  const double log_m1 = std::log(static_cast<double>(msim - 1));
  double final_term = 0.0;
  if (rules[0] == VLSF_P1) {
    vlsf_cdf_result r{};
    check(vlsf_cdf(ch.get(), instants.back(), gamma, mode, 0.1, &r), kFailure);
    final_term = r.p;
  } else {
    check(vlsf_eps_fb(ch.get(), instants.back(), std::log2(static_cast<double>(msim)), VLSF_FB_RCU,
                      nullptr, &final_term, nullptr),
          kFailure);
  }
  const double err_bound = std::min(1.0, std::exp(log_m1 - gamma) + final_term);

  json rec = {{"channel", vlsf_channel_name(ch.get())},
              {"rule", rule_name(rules[0])},
              {"schedule", {{"gamma", gamma}, {"instants", instants}}},
              {"msim", msim},
              {"trials", sum.trials},
              {"seed", c.seed},
              {"competitors_simulated", sum.competitors_simulated},
              {"extrapolated", sum.extrapolated != 0},
              {"empirical",
               {{"err_rate", sum.err_rate},
                {"err_stderr", sum.err_stderr},
                {"mean_tau", sum.mean_tau},
                {"tau_stderr", sum.tau_stderr},
                {"false_alarm_rate", sum.false_alarm_rate},
                {"final_error_rate", sum.final_error_rate},
                {"stop_freq", stop},
                {"below_freq", below},
                {"below_stderr", below_se}}},
              {"bound",
               {{"objective", objective},
                {"error", err_bound},
                {"err_within", sum.err_rate <= err_bound + 3.0 * sum.err_stderr},
                {"tau_within", sum.mean_tau <= objective + 3.0 * sum.tau_stderr}}}};
  if (eps) rec["bound"]["design_eps"] = *eps;

  if (o.stopping_only) {
    vlsf_stopping_summary st{};
    std::vector<std::uint64_t> hist(t);
    std::vector<double> surv(t > 1 ? t - 1 : 0), b2(t), b2_se(t);
    check(vlsf_simulate_stopping_only(ch.get(), gamma, instants.data(), t, &cfg, &st, hist.data(),
                                      surv.data(), b2.data(), b2_se.data()),
          kFailure);
    rec["stopping_only"] = {{"mean_tau", st.mean_tau},
                            {"tau_stderr", st.tau_stderr},
                            {"histogram", hist},
                            {"survival", surv},
                            {"below_freq", b2},
                            {"below_stderr", b2_se}};
  }

  output out(c.out);
  out.stream() << rec.dump(2) << '\n';
  out.close();
  return kOk;
}

// ---- config file ----

// Turns a JSON object into "--key=value" tokens; lists become comma lists.
std::vector<std::string> config_tokens(const json& cfg) {
  if (!cfg.is_object()) raise(kParse, "config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--";
    for (char ch : key) flag += ch == '_' ? '-' : ch;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      tokens.push_back(flag + "=" + joined);
    } else if (value.is_string()) {
      tokens.push_back(flag + "=" + value.get<std::string>());
    } else if (value.is_number()) {
      tokens.push_back(flag + "=" + value.dump());
    } else {
      raise(kParse, "config key '" + key + "' has an unsupported type");
    }
  }
  return tokens;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App app{"Sparse VLSF achievability bounds"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override it");

  common_opts common;

  cdf_opts cdf;
  auto* cdf_cmd = app.add_subcommand("cdf", "Saddlepoint CDF of S_n against an oracle");
  cdf_cmd->add_option("--channel", cdf.channel, "awgn:snr=1, bsc:delta=0.11 or bec:delta=0.5");
  cdf_cmd->add_option("--n", cdf.n, "Blocklength list or range lo:hi[:step]");
  cdf_cmd->add_option("--gamma-grid", cdf.gamma_grid, "lo:hi:count or auto (mean +- 6 sd)");
  cdf_cmd->add_option("--gamma", cdf.gamma, "Explicit threshold list");
  cdf_cmd->add_option("--oracle", cdf.oracle, "exact, mc or none");
  cdf_cmd->add_option("--eps-s", cdf.eps_s, "Near-mean band");
  add_common(cdf_cmd, common);

  optimize_opts opt;
  auto* opt_cmd = app.add_subcommand("optimize", "Optimize one schedule");
  opt_cmd->add_option("--channel", opt.channel);
  opt_cmd->add_option("--bits", opt.bits, "Message bits k");
  opt_cmd->add_option("--eps", opt.eps, "Target error");
  opt_cmd->add_option("--t", opt.t, "Decoding attempts")->check(CLI::PositiveNumber);
  opt_cmd->add_option("--rule", opt.rule, "p1, p2 or both");
  opt_cmd->add_flag("--certify", opt.certify, "Also run the brute-force search (t <= 3)");
  opt_cmd->add_option("--final-attempt", opt.final_attempt, "rcu, threshold_union or dependence_testing");
  opt_cmd->add_option("--eps-s", opt.eps_s);
  add_common(opt_cmd, common);

  sweep_opts sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Optimize a grid of cells into a CSV table");
  sw_cmd->add_option("--channel", sw.channel);
  sw_cmd->add_option("--snr", sw.snr, "AWGN snr list, replaces the channel's");
  sw_cmd->add_option("--delta", sw.delta, "BSC/BEC delta list, replaces the channel's");
  sw_cmd->add_option("--bits", sw.bits);
  sw_cmd->add_option("--eps", sw.eps);
  sw_cmd->add_option("--t", sw.t);
  sw_cmd->add_option("--rule", sw.rule);
  sw_cmd->add_flag("--dense-ref", sw.dense_ref, "Add the dense-schedule reference columns");
  sw_cmd->add_option("--final-attempt", sw.final_attempt);
  sw_cmd->add_option("--eps-s", sw.eps_s);
  add_common(sw_cmd, common);

  simulate_opts sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a schedule with random codebooks");
  sim_cmd->add_option("--schedule", sim.schedule_path, "JSON written by optimize");
  sim_cmd->add_option("--channel", sim.channel, "Overrides the file's channel");
  sim_cmd->add_option("--rule", sim.rule, "Overrides the file's rule");
  sim_cmd->add_option("--msim", sim.msim, "Simulated codebook size");
  sim_cmd->add_flag("--stopping-only", sim.stopping_only, "Also simulate the true codeword alone");
  add_common(sim_cmd, common);

  try {
    // The config file's tokens go right after the subcommand so that later
    // command-line flags take precedence.
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        continue;
      }
      const auto tokens = config_tokens(load_json(path));
      for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "cdf" || args[k] == "optimize" || args[k] == "sweep" || args[k] == "simulate") {
          args.insert(args.begin() + static_cast<std::ptrdiff_t>(k) + 1, tokens.begin(), tokens.end());
          break;
        }
      }
      break;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kParse;
    }

    if (cdf_cmd->parsed()) return run_cdf(cdf, common);
    if (opt_cmd->parsed()) return run_optimize(opt, common);
    if (sw_cmd->parsed()) return run_sweep(sw, common);
    if (sim_cmd->parsed()) return run_simulate(sim, common);
    return kParse;
  } catch (const cli_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
