#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "vlsf/error.hpp"

namespace vlsf {

enum class decoding_rule {
  p1,  // threshold decoding at every instant
  p2,  // threshold decoding, maximal-density decision at the last instant
};

inline const char* to_string(decoding_rule rule) { return rule == decoding_rule::p1 ? "p1" : "p2"; }

// Bound used for the error of a single fixed-length decoding attempt.
enum class fb_method {
  threshold_union,     // min over g of P[S_n < g] + (M - 1) e^{-g}
  dependence_testing,  // E[exp(-(S_n - log((M - 1) / 2))^+)]
  rcu,                 // E[min(1, (M - 1) P[i(Xbar; Y) >= i(X; Y) | X, Y])], deterministic
  mc_rcu,              // Monte Carlo of E[min(1, (M - 1) P[i(Xbar; Y) >= i(X; Y) | X, Y])]
};

inline const char* to_string(fb_method m) {
  switch (m) {
    case fb_method::threshold_union: return "threshold_union";
    case fb_method::dependence_testing: return "dependence_testing";
    case fb_method::rcu: return "rcu";
    case fb_method::mc_rcu: return "mc_rcu";
  }
  return "?";
}

// Problem instance: k = log2 M message bits, target error, number of attempts.
struct code_spec {
  double message_bits;
  double epsilon;
  int attempts;

  void validate() const {
    if (!(message_bits > 0.0) || !std::isfinite(message_bits)) {
      throw error(errc::invalid_argument, "message_bits must be positive");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
      throw error(errc::invalid_argument, "epsilon must lie in (0, 1)");
    }
    if (attempts < 1) throw error(errc::invalid_argument, "attempts must be >= 1");
  }

  // log(M - 1) in nats.
  double log_competitors() const {
    return message_bits * std::numbers::ln2 + std::log(-std::expm1(-message_bits * std::numbers::ln2));
  }
};

struct schedule {
  double gamma = 0.0;  // nats
  std::vector<int> instants;

  int final_instant() const { return instants.back(); }

  void validate() const {
    if (instants.empty()) throw error(errc::invalid_argument, "schedule has no instants");
    if (instants.front() < 1) throw error(errc::invalid_argument, "instants must be positive");
    for (std::size_t j = 1; j < instants.size(); ++j) {
      if (instants[j] <= instants[j - 1]) {
        throw error(errc::invalid_argument, "instants must be strictly increasing");
      }
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw error(errc::invalid_argument, "gamma must be positive");
    }
  }
};

struct search_diagnostics {
  int iterations = 0;
  int restarts = 0;
  int local_search_moves = 0;
};

struct optimization_result {
  schedule sched;
  double objective = 0.0;  // upper bound on E[tau*], channel uses
  double rate_bits = 0.0;  // message_bits / objective
  double constraint_residual = 0.0;  // constraint value - epsilon, <= 0 when feasible
  decoding_rule rule = decoding_rule::p1;
  search_diagnostics diagnostics;
};

}  // namespace vlsf
