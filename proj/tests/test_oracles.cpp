#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/error.hpp"
#include "vlsf/optimizer.hpp"
#include "vlsf/oracles.hpp"
#include "vlsf/saddlepoint.hpp"

using namespace vlsf;

namespace {

const auto awgn1 = single_letter_law(channel_model::awgn(1.0));
const auto bsc11 = single_letter_law(channel_model::bsc(0.11));
const auto bec5 = single_letter_law(channel_model::bec(0.5));

// Binomial tail by direct long-double products, for small n only.
double naive_binomial_cdf(int m, int n, double q) {
  long double sum = 0.0L;
  for (int k = 0; k <= m; ++k) {
    long double c = std::exp(std::lgamma(n + 1.0L) - std::lgamma(k + 1.0L) - std::lgamma(n - k + 1.0L));
    sum += c * std::pow(static_cast<long double>(q), k) * std::pow(1.0L - q, n - k);
  }
  return static_cast<double>(sum);
}

double log2m1(double bits) { return code_spec{bits, 0.5, 1}.log_competitors(); }

}  // namespace

TEST_CASE("frozen exact values") {
  CHECK(exact_cdf_lattice(bec5, 10, 3.5) == doctest::Approx(176.0 / 1024).epsilon(1e-14));
  const double mid = std::log(0.22) + 0.5 * bsc11.lattice->step;
  CHECK(exact_cdf_lattice(bsc11, 1, mid) == doctest::Approx(0.11).epsilon(1e-14));
  const double mu = moments(bsc11, 300).mean;
  const double p = exact_cdf_lattice(bsc11, 300, mu);
  CHECK(p > 0.4);
  CHECK(p < 0.6);
}

TEST_CASE("exact sums against naive products") {
  for (int n : {1, 7, 40, 120}) {
    for (double q : {0.11, 0.5, 0.89}) {
      for (int m = 0; m <= n; m += std::max(1, n / 9)) {
        const double ref = naive_binomial_cdf(m, n, q);
        CAPTURE(n);
        CAPTURE(q);
        CAPTURE(m);
        CHECK(binomial_cdf(m, n, q) == doctest::Approx(ref).epsilon(1e-12));
        CHECK(std::exp(log_binomial_pmf(m, n, q)) ==
              doctest::Approx(naive_binomial_cdf(m, n, q) - (m ? naive_binomial_cdf(m - 1, n, q) : 0.0))
                  .epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("exact lattice cdf errors and edges") {
  CHECK_THROWS_AS(exact_cdf_lattice(awgn1, 10, 1.0), error);
  try {
    exact_cdf_lattice(awgn1, 10, 1.0);
  } catch (const error& e) {
    CHECK(e.code() == errc::unsupported_law);
  }
  CHECK_THROWS_AS(exact_cdf_lattice(bsc11, 0, 1.0), error);
  CHECK_THROWS_AS(exact_cdf_lattice(bsc11, 50, 1.0, 40), error);
  CHECK(exact_cdf_lattice(bsc11, 20, 20 * bsc11.shift) == 0.0);
  CHECK(exact_cdf_lattice(bsc11, 20, 20 * bsc11.shift + 1e-9) ==
        doctest::Approx(std::pow(0.11, 20)).epsilon(1e-12));
  CHECK(exact_cdf_lattice(bsc11, 20, 1e6) == 1.0);
}

TEST_CASE("exact lattice cdf is a step function") {
  for (const auto& law : {bsc11, bec5}) {
    const int n = 30;
    const double step = law.lattice->step;
    for (int b = 0; b < n; ++b) {
      const double k = n * law.shift + b * step;
      const double first = exact_cdf_lattice(law, n, k + 1e-9 * step);
      for (int i = 1; i <= 50; ++i) {
        const double g = k + step * i / 51.0;
        CHECK(exact_cdf_lattice(law, n, g) == first);
      }
      CHECK(exact_cdf_lattice(law, n, k + step + 1e-9 * step) > first);
    }
  }
}

TEST_CASE("Monte Carlo cdf below the support is zero") {
  for (const auto& law : {bsc11, bec5}) {
    const auto e = mc_cdf(law, 20, 20 * law.shift - 1.0, {5000, 3, 1});
    CHECK(e.p_hat == 0.0);
    CHECK(e.std_err == 0.0);
  }
  CHECK(mc_cdf(awgn1, 20, -1e3, {5000, 3, 1}).p_hat == 0.0);
}

TEST_CASE("Monte Carlo cdf is independent of the worker count") {
  const std::vector<double> gammas = {20.0, 30.0, 34.0, 40.0};
  for (const auto& law : {awgn1, bsc11}) {
    const auto one = mc_cdf_multi(law, 100, gammas, {20001, 99, 1});
    for (unsigned w : {2u, 3u, 8u}) {
      const auto many = mc_cdf_multi(law, 100, gammas, {20001, 99, w});
      for (std::size_t j = 0; j < gammas.size(); ++j) {
        CHECK(many[j].p_hat == one[j].p_hat);
        CHECK(many[j].std_err == one[j].std_err);
      }
    }
    const auto again = mc_cdf_multi(law, 100, gammas, {20001, 99, 1});
    for (std::size_t j = 0; j < gammas.size(); ++j) CHECK(again[j].p_hat == one[j].p_hat);
    const auto other = mc_cdf_multi(law, 100, gammas, {20001, 100, 1});
    bool differs = false;
    for (std::size_t j = 0; j < gammas.size(); ++j) differs |= other[j].p_hat != one[j].p_hat;
    CHECK(differs);
  }
}

TEST_CASE("Monte Carlo cdf agrees with the exact and mean-branch values") {
  SUBCASE("bsc against exact sums") {
    const auto m = moments(bsc11, 50);
    const double sd = std::sqrt(m.variance);
    std::vector<double> gammas;
    for (double z : {-3.0, -1.5, -0.2, 0.7, 2.0}) gammas.push_back(m.mean + z * sd);
    const auto est = mc_cdf_multi(bsc11, 50, gammas, {1000000, 5, 1});
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      const double exact = exact_cdf_lattice(bsc11, 50, gammas[j]);
      const double se = std::sqrt(exact * (1 - exact) / 1e6);
      CAPTURE(gammas[j]);
      CHECK(std::abs(est[j].p_hat - exact) <= 4 * se);
    }
  }
  SUBCASE("awgn at the mean") {
    const double mu = moments(awgn1, 100).mean;
    const auto r = cdf({awgn1, 100, mu});
    REQUIRE(r.branch == cdf_branch::mean_skew_formula);
    const auto e = mc_cdf(awgn1, 100, mu, {1000000, 8, 1});
    CHECK(std::abs(e.p_hat - r.p) <= 4 * e.std_err);
  }
}

TEST_CASE("final-attempt error bounds") {
  const auto bsc = channel_model::bsc(0.11);
  SUBCASE("one competitor at long blocklength") {
    for (const auto& ch : {channel_model::awgn(1.0), bsc, channel_model::bec(0.5)}) {
      CHECK(eps_fb(ch, 200, log2m1(1)).value <= 1e-3);
    }
  }
  SUBCASE("one symbol cannot carry a bit") {
    for (const auto& ch : {channel_model::awgn(1.0), bsc, channel_model::bec(0.5)}) {
      REQUIRE(ch.capacity_nats() < std::numbers::ln2);
      for (auto m : {fb_method::threshold_union, fb_method::dependence_testing, fb_method::rcu}) {
        CAPTURE(ch.to_string());
        CAPTURE(to_string(m));
        CHECK(eps_fb(ch, 1, log2m1(1), m).value > 0.1);
      }
    }
  }
  SUBCASE("union bound dominates rcu") {
    const double lm = log2m1(30);
    for (double n : {80.0, 100.0, 130.0}) {
      const auto tu = eps_fb(bsc, n, lm, fb_method::threshold_union);
      fb_options opts;
      opts.mc = {200000, 17, 1};
      const auto mc = eps_fb(bsc, n, lm, fb_method::mc_rcu, opts);
      const auto rcu = eps_fb(bsc, n, lm, fb_method::rcu);
      CAPTURE(n);
      CHECK(tu.value >= mc.value - 4 * mc.std_err);
      CHECK(tu.value >= rcu.value);
      CHECK(std::abs(rcu.value - mc.value) <= 4 * mc.std_err + 1e-12);
    }
  }
  SUBCASE("deterministic rcu tracks Monte Carlo rcu") {
    fb_options opts;
    opts.mc = {100000, 23, 1};
    for (const auto& ch : {channel_model::awgn(1.0), channel_model::bec(0.5)}) {
      const auto mc = eps_fb(ch, 60, log2m1(20), fb_method::mc_rcu, opts);
      const auto rcu = eps_fb(ch, 60, log2m1(20), fb_method::rcu);
      CAPTURE(ch.to_string());
      CHECK(std::abs(rcu.value - mc.value) <= 4 * mc.std_err + 0.02 * mc.value);
    }
  }
  SUBCASE("union bound monotone in n and M") {
    for (const auto& ch : {channel_model::awgn(1.0), bsc}) {
      double prev = 1.0;
      for (double n = 20; n <= 400; n += 20) {
        const double v = eps_fb(ch, n, log2m1(40)).value;
        CHECK(v <= prev + 1e-9);
        prev = v;
      }
      prev = 0.0;
      for (double k = 1; k <= 80; k += 7) {
        const double v = eps_fb(ch, 150, log2m1(k)).value;
        CHECK(v >= prev - 1e-9);
        prev = v;
      }
    }
  }
  SUBCASE("union minimizer") {
    const auto tu = eps_fb(bsc, 120, log2m1(30));
    const auto law = single_letter_law(bsc);
    for (double d : {-0.5, 0.5}) {
      const double g = tu.gamma + d;
      CHECK(tu.value <= cdf_value(law, 120, g) + std::exp(log2m1(30) - g) + 1e-4);
    }
  }
  CHECK_THROWS_AS(eps_fb(bsc, 0.5, 1.0), error);
  CHECK_THROWS_AS(eps_fb(bsc, 10.5, 1.0, fb_method::mc_rcu), error);
}

TEST_CASE("default grids") {
  const code_spec spec{60, 1e-3, 3};
  const auto grid = default_search_grid(channel_model::awgn(1.0), spec);
  REQUIRE(grid.instants.size() == 3);
  CHECK(grid.instants[0].lo >= 1);
  CHECK(grid.instants[0].lo < grid.instants[0].hi);
  const double nominal = spec.log_competitors() - std::log(spec.epsilon);
  const auto m_lo = moments(awgn1, grid.instants[0].lo);
  const auto m_hi = moments(awgn1, grid.instants[0].hi);
  CHECK((m_lo.mean - nominal) / std::sqrt(m_lo.variance) >= -6.0);
  CHECK((m_hi.mean - nominal) / std::sqrt(m_hi.variance) >= 6.0);
  const auto gammas = default_gamma_grid(spec);
  REQUIRE(gammas.size() == 200);
  CHECK(gammas.front() == doctest::Approx(60 * std::numbers::ln2));
  CHECK(gammas.back() == doctest::Approx(60 * std::numbers::ln2 + 20));
  CHECK_THROWS_AS(default_search_grid(channel_model::awgn(1.0), {60, 1e-3, 4}), error);
}

TEST_CASE("brute force matches naive enumeration") {
  const auto ch = channel_model::awgn(1.0);
  const auto settings = default_cdf_settings(ch);
  for (auto rule : {decoding_rule::p1, decoding_rule::p2}) {
    const code_spec spec{20, 1e-2, 3};
    search_grid grid;
    grid.instants = {{30, 70, 4}, {40, 90, 5}, {60, 120, 3}};
    const auto bf = brute_force_search(ch, spec, rule, grid, settings.mode);

    double best = std::numeric_limits<double>::infinity();
    for (int c = 60; c <= 120; c += 3) {
      double gamma = 0.0;
      try {
        gamma = solve_gamma(ch, rule, c, spec.log_competitors(), spec.epsilon, settings);
      } catch (const error&) {
        continue;
      }
      for (int a = 30; a <= 70; a += 4) {
        for (int b = 40; b <= 90; b += 5) {
          if (!(a < b && b < c)) continue;
          best = std::min(best, objective(ch, {gamma, {a, b, c}}, settings));
        }
      }
    }
    CAPTURE(to_string(rule));
    CHECK(bf.objective == doctest::Approx(best).epsilon(1e-12));
    CHECK(objective(ch, bf.sched, settings) == doctest::Approx(bf.objective).epsilon(1e-12));
    CHECK(bf.constraint_residual <= 1e-9);
    CHECK(bf.rate_bits == doctest::Approx(20 / bf.objective));
  }
}

TEST_CASE("brute force with an explicit threshold grid") {
  const auto ch = channel_model::bsc(0.11);
  const auto settings = default_cdf_settings(ch);
  const code_spec spec{20, 1e-2, 2};
  search_grid grid;
  grid.instants = {{20, 80, 1}, {30, 120, 1}};
  grid.gammas = {16.0, 18.0, 20.0, 22.0};
  const auto bf = brute_force_search(ch, spec, decoding_rule::p1, grid, settings.mode);
  double best = std::numeric_limits<double>::infinity();
  for (double g : grid.gammas) {
    for (int b = 30; b <= 120; ++b) {
      if (constraint_value(ch, decoding_rule::p1, b, g, spec.log_competitors(), settings) >
          spec.epsilon) {
        continue;
      }
      for (int a = 20; a < b && a <= 80; ++a) {
        best = std::min(best, objective(ch, {g, {a, b}}, settings));
      }
    }
  }
  CHECK(bf.objective == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("single-attempt brute force is a feasibility scan") {
  const auto ch = channel_model::awgn(1.0);
  const auto settings = default_cdf_settings(ch);
  const code_spec spec{30, 1e-3, 1};
  const double g = 30 * std::numbers::ln2 + 8.0;
  search_grid grid;
  grid.instants = {{1, 600, 1}};
  grid.gammas = {g};
  const auto bf = brute_force_search(ch, spec, decoding_rule::p1, grid, settings.mode);
  int first = 0;
  for (int n = 1; n <= 600 && !first; ++n) {
    if (constraint_value(ch, decoding_rule::p1, n, g, spec.log_competitors(), settings) <=
        spec.epsilon) {
      first = n;
    }
  }
  REQUIRE(first > 0);
  CHECK(bf.sched.instants == std::vector<int>{first});
  CHECK(bf.objective == first);
}

TEST_CASE("brute force never loses to the optimizer on its grid") {
  for (const auto& ch : {channel_model::awgn(1.0), channel_model::bsc(0.11)}) {
    for (auto rule : {decoding_rule::p1, decoding_rule::p2}) {
      const code_spec spec{30, 1e-3, 2};
      const auto opt = optimize(ch, spec, rule);
      const auto bf = brute_force_search(ch, spec, rule, default_search_grid(ch, spec),
                                         default_cdf_settings(ch).mode);
      CAPTURE(ch.to_string());
      CAPTURE(to_string(rule));
      CHECK(bf.objective <= opt.objective + 1e-9);
    }
  }
}

TEST_CASE("brute force errors") {
  const auto ch = channel_model::awgn(1.0);
  const code_spec spec{20, 1e-2, 2};
  search_grid empty;
  empty.instants = {{50, 40, 1}, {60, 80, 1}};
  try {
    brute_force_search(ch, spec, decoding_rule::p1, empty, overshoot_mode::lower);
    FAIL("expected an error");
  } catch (const error& e) {
    CHECK(e.code() == errc::empty_grid);
  }
  search_grid wrong;
  wrong.instants = {{50, 60, 1}};
  CHECK_THROWS_AS(brute_force_search(ch, spec, decoding_rule::p1, wrong, overshoot_mode::lower),
                  error);
  search_grid tiny;
  tiny.instants = {{2, 3, 1}, {4, 5, 1}};
  try {
    brute_force_search(ch, spec, decoding_rule::p2, tiny, overshoot_mode::lower);
    FAIL("expected an error");
  } catch (const error& e) {
    CHECK(e.code() == errc::infeasible);
  }
}
