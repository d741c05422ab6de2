#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "vlsf/channels.hpp"
#include "vlsf/error.hpp"
#include "vlsf/normal.hpp"
#include "vlsf/oracles.hpp"
#include "vlsf/saddlepoint.hpp"

using namespace vlsf;

namespace {

const auto awgn1 = single_letter_law(channel_model::awgn(1.0));
const auto bsc11 = single_letter_law(channel_model::bsc(0.11));
const auto bec5 = single_letter_law(channel_model::bec(0.5));

std::vector<double> gamma_grid(const info_density_law& law, double n, int count = 200) {
  const auto m = moments(law, n);
  const double sd = std::sqrt(m.variance);
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(m.mean - 6 * sd + 12 * sd * i / (count - 1));
  return out;
}

double shifted_target(const info_density_law& law, const cdf_result& r, double n) {
  return r.target - n * law.shift;
}

}  // namespace

TEST_CASE("awgn saddlepoint closed form") {
  const double shift = awgn1.shift;
  CHECK(saddlepoint_awgn(awgn1, 100, 100 * shift) == 0.0);
  const double s = saddlepoint_awgn(awgn1, 100, 5 + 100 * shift);
  CHECK(s == doctest::Approx((-100 + std::sqrt(10000 + 4 * 25 * 2)) / 10).epsilon(1e-12));
  CHECK(std::abs(cgf(awgn1, s, 100).k1 - 5) <= 1e-9 * 5);

  const double neg = saddlepoint_awgn(awgn1, 200, -10 + 200 * shift);
  CHECK(neg < 0.0);
  CHECK(std::abs(cgf(awgn1, neg, 200).k1 + 10) <= 1e-9 * 10);
  CHECK(std::abs(neg) < convergence_radius(awgn1));
  CHECK_THROWS_AS(saddlepoint_awgn(bsc11, 10, 1.0), error);
}

TEST_CASE("awgn saddlepoint residual over a wide range") {
  for (double snr : {0.1, 1.0, 10.0}) {
    const auto law = single_letter_law(channel_model::awgn(snr));
    for (double n : {1.0, 17.0, 300.0}) {
      for (double g : {-50.0, -3.0, -1e-3, 1e-3, 0.7, 20.0, 400.0}) {
        const double s = saddlepoint_awgn(law, n, g + n * law.shift);
        CAPTURE(snr);
        CAPTURE(n);
        CAPTURE(g);
        CHECK(std::abs(s) < convergence_radius(law));
        CHECK(std::abs(cgf(law, s, n).k1 - g) <= 1e-9 * std::max(1.0, std::abs(g)));
      }
    }
  }
}

TEST_CASE("lattice saddlepoint closed form") {
  const auto& lat = *bsc11.lattice;
  SUBCASE("mean point") {
    const double k = 100 * lat.step * lat.success;
    CHECK(std::abs(saddlepoint_lattice(bsc11, 100, k)) <= 1e-12);
  }
  SUBCASE("quarter crossover") {
    const auto law = single_letter_law(channel_model::bsc(0.25));
    CHECK(std::abs(saddlepoint_lattice(law, 4, 3 * std::log(3.0))) <= 1e-12);
    CHECK(cgf(law, 0.0, 4).k1 == doctest::Approx(3 * std::log(3.0)));
  }
  SUBCASE("residual at the lattice point above 40 nats") {
    const double n = 100;
    const double b = std::ceil((40 - n * bsc11.shift) / lat.step);
    const double k = b * lat.step;
    const double s = saddlepoint_lattice(bsc11, n, k);
    CHECK(std::abs(cgf(bsc11, s, n).k1 - k) <= 1e-9 * std::max(1.0, k));
  }
  SUBCASE("outside the support") {
    CHECK_THROWS_AS(saddlepoint_lattice(bsc11, 10, 0.0), error);
    CHECK_THROWS_AS(saddlepoint_lattice(bsc11, 10, 10 * lat.step), error);
    try {
      saddlepoint_lattice(bsc11, 10, -1.0);
    } catch (const error& e) {
      CHECK(e.code() == errc::lattice_point_out_of_support);
    }
    CHECK_THROWS_AS(saddlepoint_lattice(awgn1, 10, 1.0), error);
  }
}

TEST_CASE("query validation") {
  CHECK_THROWS_AS(cdf({awgn1, 0.0, 1.0}), error);
  CHECK_THROWS_AS(cdf({awgn1, 10.0, INFINITY}), error);
  CHECK_THROWS_AS(cdf({awgn1, 10.0, 1.0}, 0.0), error);
  CHECK_THROWS_AS(cdf({awgn1, 10.0, 1.0, overshoot_mode::exact_lattice}), error);
  CHECK_THROWS_AS(cdf({bsc11, 10.5, 1.0, overshoot_mode::exact_lattice}), error);
}

TEST_CASE("mean branches") {
  SUBCASE("awgn exact mean") {
    const auto m = moments(awgn1, 100);
    const auto r = cdf({awgn1, 100, m.mean});
    CHECK(r.branch == cdf_branch::mean_skew_formula);
    const auto k = cgf(awgn1, 0.0, 100);
    const double expect = 0.5 + k.k3 / (6 * std::sqrt(2 * std::numbers::pi) * std::pow(k.k2, 1.5));
    CHECK(r.p == doctest::Approx(expect).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(0.5));
  }
  SUBCASE("lattice exact mean") {
    const auto law = single_letter_law(channel_model::bec(0.5));
    const auto r = cdf({law, 10, 5.0, overshoot_mode::lower});
    CHECK(r.branch == cdf_branch::mean_skew_formula);
    const auto k = cgf(law, 0.0, 10);
    const double expect = 0.5 + (k.k3 / (6 * std::pow(k.k2, 1.5)) - 1 / (2 * std::sqrt(k.k2))) /
                                    std::sqrt(2 * std::numbers::pi);
    CHECK(r.p == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("gaussian band") {
    const auto m = moments(awgn1, 100);
    const double sd = std::sqrt(m.variance);
    CHECK(mean_fallback(awgn1, 100, m.mean) == doctest::Approx(0.5));
    CHECK(mean_fallback(awgn1, 100, m.mean + 0.1 * sd) == doctest::Approx(0.5398).epsilon(1e-4));
    const auto r = cdf({awgn1, 100, m.mean + 0.05 * sd});
    CHECK(r.branch == cdf_branch::mean_gaussian);
    CHECK(std::abs(r.w_hat) <= kDefaultEpsS);
    CHECK(r.p == doctest::Approx(normal_cdf(0.05)));
  }
  SUBCASE("lattice band against exact sums") {
    const auto m = moments(bsc11, 400);
    const double g = m.mean + 0.05 * std::sqrt(m.variance);
    const double fb = mean_fallback(bsc11, 400, g);
    // P[S < k] at the lattice points k below and above g
    const double lo = exact_cdf_lattice(bsc11, 400, g - bsc11.lattice->step);
    const double hi = exact_cdf_lattice(bsc11, 400, g);
    CHECK(fb >= lo - 0.02);
    CHECK(fb <= hi + 0.02);
  }
}

TEST_CASE("bec exact-lattice example") {
  const auto r = cdf({bec5, 10, 3.5, overshoot_mode::exact_lattice});
  REQUIRE(r.lattice_point.has_value());
  CHECK(*r.lattice_point == doctest::Approx(4.0));
  CHECK(r.p == doctest::Approx(176.0 / 1024).epsilon(0.02));
}

TEST_CASE("awgn lower tail against Monte Carlo") {
  const double n = 200;
  const auto m = moments(awgn1, n);
  const double sd = std::sqrt(m.variance);
  double g = m.mean - 3 * sd;
  for (int it = 0; it < 60; ++it) {
    const double p = cdf_value(awgn1, n, g);
    g += (p > 1e-3 ? -1 : 1) * sd * std::pow(0.5, it / 2.0 + 1);
  }
  const double p = cdf_value(awgn1, n, g);
  CHECK(p == doctest::Approx(1e-3).epsilon(0.05));
  const auto mc = mc_cdf(awgn1, static_cast<int>(n), g, {1000000, 11, 1});
  const double se = std::sqrt(p * (1 - p) / 1e6);
  CHECK(std::abs(mc.p_hat - p) <= 3 * se);
}

TEST_CASE("cdf is nondecreasing in gamma") {
  struct item {
    info_density_law law;
    double n;
    overshoot_mode mode;
  };
  const std::vector<item> items = {
      {awgn1, 10, overshoot_mode::lower},
      {awgn1, 200, overshoot_mode::lower},
      {single_letter_law(channel_model::awgn(4.0)), 50, overshoot_mode::lower},
      {bsc11, 50, overshoot_mode::lower},
      {bsc11, 100, overshoot_mode::upper},
      {bsc11, 300, overshoot_mode::exact_lattice},
      {bec5, 50, overshoot_mode::lower},
      {bec5, 100, overshoot_mode::exact_lattice},
  };
  for (const auto& it : items) {
    CAPTURE(it.law.channel.to_string());
    CAPTURE(it.n);
    double prev = 0.0;
    for (double g : gamma_grid(it.law, it.n)) {
      const auto r = cdf({it.law, it.n, g, it.mode});
      CHECK(r.p >= 0.0);
      CHECK(r.p <= 1.0);
      CHECK(r.p >= prev - 1e-9);
      prev = r.p;
    }
  }
}

TEST_CASE("near-mean hand-off is small") {
  const std::vector<std::pair<info_density_law, double>> cases = {
      {awgn1, 10}, {awgn1, 100}, {bsc11, 50}, {bsc11, 400}, {bec5, 100}};
  for (double eps_s : {0.05, 0.1, 0.3}) {
    for (const auto& [law, n] : cases) {
      const auto m = moments(law, n);
      const double sd = std::sqrt(m.variance);
      for (double side : {-1.0, 1.0}) {
        const double edge = m.mean + side * eps_s * sd;
        const double in = cdf_value(law, n, edge - side * 1e-9 * sd, overshoot_mode::lower, eps_s);
        const double out = cdf_value(law, n, edge + side * 1e-9 * sd, overshoot_mode::lower, eps_s);
        CAPTURE(law.channel.to_string());
        CAPTURE(n);
        CAPTURE(eps_s);
        CHECK(std::abs(in - out) <= 0.01);
      }
    }
  }
}

TEST_CASE("saddlepoint residuals") {
  for (const auto& law : {awgn1, bsc11, bec5, single_letter_law(channel_model::bsc(0.3))}) {
    for (double n : {10.0, 60.0, 300.0}) {
      for (double g : gamma_grid(law, n, 60)) {
        for (auto mode : {overshoot_mode::lower, overshoot_mode::upper}) {
          const auto r = cdf({law, n, g, mode});
          if (r.branch != cdf_branch::continuous_lr && r.branch != cdf_branch::discrete_lr) continue;
          const double target = shifted_target(law, r, n);
          CHECK(std::abs(cgf(law, r.saddlepoint, n).k1 - target) <=
                1e-9 * std::max(1.0, std::abs(target)));
        }
      }
    }
  }
}

TEST_CASE("lattice overshoot modes bracket the exact cdf") {
  for (const auto& law : {bsc11, bec5}) {
    for (int n : {50, 100, 300}) {
      const auto& lat = *law.lattice;
      const double lo = n * law.shift;
      const double hi = lo + n * lat.step;
      int violations = 0;
      double worst = 0.0;
      for (int i = 1; i < 400; ++i) {
        const double g = lo + (hi - lo) * i / 400.0;
        const double exact = exact_cdf_lattice(law, n, g);
        const double p_lo = cdf_value(law, n, g, overshoot_mode::lower);
        const double p_hi = cdf_value(law, n, g, overshoot_mode::upper);
        const double miss = std::max(p_lo - exact, exact - p_hi);
        if (miss > 1e-12) {
          ++violations;
          worst = std::max(worst, miss / std::max(exact, 1e-300));
        }
      }
      CAPTURE(law.channel.to_string());
      CAPTURE(n);
      CAPTURE(worst);
      CHECK(violations == 0);
    }
  }
}

TEST_CASE("exact-lattice mode accuracy for short blocks") {
  for (const auto& law : {bsc11, bec5}) {
    for (int n : {20, 30, 40, 50, 60}) {
      const auto& lat = *law.lattice;
      double worst = 0.0;
      for (int b = 1; b <= n; ++b) {
        // gamma halfway below the lattice point b steps up
        const double g = n * law.shift + (b - 0.5) * lat.step;
        const double exact = exact_cdf_lattice(law, n, g);
        if (exact < 1e-8) continue;
        const double p = cdf_value(law, n, g, overshoot_mode::exact_lattice);
        worst = std::max(worst, std::abs(p - exact) / std::max(exact, 1e-12));
      }
      CAPTURE(law.channel.to_string());
      CAPTURE(n);
      CAPTURE(worst);
      CHECK(worst <= 0.05);
    }
  }
}

TEST_CASE("clamping and degenerate flags") {
  SUBCASE("outside the support") {
    const auto below = cdf({bsc11, 20, 20 * bsc11.shift - 1.0});
    CHECK(below.p == 0.0);
    CHECK(below.degenerate);
    CHECK(below.branch == cdf_branch::boundary);
    const auto above = cdf({bsc11, 20, 20 * (bsc11.shift + bsc11.lattice->step) + 1.0});
    CHECK(above.p == 1.0);
    CHECK(above.degenerate);
    const auto edge = cdf({bec5, 10, 10.0});
    CHECK_FALSE(edge.degenerate);
    CHECK(edge.p == doctest::Approx(1.0 - std::pow(0.5, 10)));
  }
  SUBCASE("clamped values land on the unit interval") {
    int clamped = 0;
    for (const auto& law : {bsc11, bec5, single_letter_law(channel_model::bsc(0.01))}) {
      for (int n = 1; n <= 12; ++n) {
        for (double g : gamma_grid(law, n, 400)) {
          for (auto mode : {overshoot_mode::lower, overshoot_mode::upper}) {
            const auto r = cdf({law, static_cast<double>(n), g, mode});
            if (r.clamped) {
              ++clamped;
              CHECK((r.p == 0.0 || r.p == 1.0));
            }
          }
        }
      }
    }
    CHECK(clamped > 0);
  }
}

TEST_CASE("finite differences exist outside the hand-off band") {
  for (const auto& law : {awgn1, bsc11}) {
    const double n = 80;
    const auto m = moments(law, n);
    const double sd = std::sqrt(m.variance);
    for (double z : {-5.0, -2.0, -0.5, 0.5, 2.0}) {
      const double g = m.mean + z * sd;
      const double h = 1e-4;
      const double dg = (cdf_value(law, n, g + h) - cdf_value(law, n, g - h)) / (2 * h);
      const double dn = (cdf_value(law, n + h, g) - cdf_value(law, n - h, g)) / (2 * h);
      CHECK(std::isfinite(dg));
      CHECK(std::isfinite(dn));
      CHECK(dg >= 0.0);
      CHECK(dn <= 0.0);
    }
  }
}

TEST_SUITE_BEGIN("first-order limits");

// Just above a lattice point the upper mode lands on the next lattice point,
// where it equals the exact-lattice value; bracketing then needs the formula
// to never undershoot the exact CDF.
TEST_CASE("overshoot bracketing next to lattice points") {
  for (const auto& law : {bsc11, bec5}) {
    for (int n : {50, 100, 300}) {
      const auto& lat = *law.lattice;
      int probes = 0, violations = 0;
      double worst = 0.0;
      for (int b = 1; b < n; ++b) {
        for (double off : {-1e-3, 1e-3}) {
          const double g = n * law.shift + (b + off) * lat.step;
          const double exact = exact_cdf_lattice(law, n, g);
          if (exact < 1e-8) continue;
          ++probes;
          const double p_lo = cdf_value(law, n, g, overshoot_mode::lower);
          const double p_hi = cdf_value(law, n, g, overshoot_mode::upper);
          const double miss = std::max(p_lo - exact, exact - p_hi);
          if (miss > 1e-12) {
            ++violations;
            worst = std::max(worst, miss / exact);
          }
        }
      }
      CAPTURE(law.channel.to_string());
      CAPTURE(n);
      CAPTURE(probes);
      CAPTURE(worst);
      CHECK(violations == 0);
    }
  }
}

// The first-order lattice formula at ten symbols, where the support edges sit
// about one standard deviation from the mean.
TEST_CASE("lattice formula at ten symbols") {
  const int n = 10;
  for (const auto& law : {bsc11, bec5}) {
    CAPTURE(law.channel.to_string());
    const auto& lat = *law.lattice;
    const double lo = n * law.shift;
    const double hi = lo + n * lat.step;

    int violations = 0;
    for (int i = 1; i < 400; ++i) {
      const double g = lo + (hi - lo) * i / 400.0;
      const double exact = exact_cdf_lattice(law, n, g);
      if (cdf_value(law, n, g, overshoot_mode::lower) > exact + 1e-12) ++violations;
      if (cdf_value(law, n, g, overshoot_mode::upper) < exact - 1e-12) ++violations;
    }
    CHECK(violations == 0);

    double worst = 0.0;
    for (int b = 1; b <= n; ++b) {
      const double g = n * law.shift + (b - 0.5) * lat.step;
      const double exact = exact_cdf_lattice(law, n, g);
      if (exact < 1e-8) continue;
      const double p = cdf_value(law, n, g, overshoot_mode::exact_lattice);
      worst = std::max(worst, std::abs(p - exact) / exact);
    }
    CAPTURE(worst);
    CHECK(worst <= 0.05);

    double prev = 0.0;
    int drops = 0;
    for (double g : gamma_grid(law, n)) {
      const double p = cdf_value(law, n, g, overshoot_mode::lower);
      if (p < prev - 1e-9) ++drops;
      prev = p;
    }
    CHECK(drops == 0);
  }
}

TEST_SUITE_END();
