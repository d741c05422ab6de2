#include "vlsf/channels.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "vlsf/error.hpp"

namespace vlsf {

namespace {

// Relative margin kept inside the AWGN convergence region.
constexpr double kRegionMargin = 1e-9;

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double parse_number(std::string_view text, std::string_view spec) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw error(errc::parse_error, "bad number in channel spec '" + std::string(spec) + "'");
  }
  return value;
}

}  // namespace

channel_model channel_model::awgn(double snr) {
  if (!(snr > 0.0) || !std::isfinite(snr)) {
    throw error(errc::invalid_argument, "AWGN snr must be positive and finite");
  }
  return channel_model(channel_kind::awgn, snr);
}

channel_model channel_model::bsc(double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw error(errc::invalid_argument, "BSC crossover must lie in (0, 1/2)");
  }
  return channel_model(channel_kind::bsc, delta);
}

channel_model channel_model::bec(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw error(errc::invalid_argument, "BEC erasure probability must lie in (0, 1)");
  }
  return channel_model(channel_kind::bec, delta);
}

channel_model channel_model::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw error(errc::parse_error, "channel spec must look like 'awgn:snr=1.0', got '" +
                                       std::string(spec) + "'");
  }
  const auto name = spec.substr(0, colon);
  const auto rest = spec.substr(colon + 1);
  const auto eq = rest.find('=');
  if (eq == std::string_view::npos) {
    throw error(errc::parse_error, "missing '=' in channel spec '" + std::string(spec) + "'");
  }
  const auto key = rest.substr(0, eq);
  const double value = parse_number(rest.substr(eq + 1), spec);

  if (name == "awgn" && key == "snr") return awgn(value);
  if (name == "bsc" && key == "delta") return bsc(value);
  if (name == "bec" && key == "delta") return bec(value);
  throw error(errc::parse_error, "unknown channel spec '" + std::string(spec) + "'");
}

double channel_model::capacity_nats() const {
  const auto law = single_letter_law(*this);
  return moments(law, 1.0).mean;
}

const char* channel_model::param_name() const noexcept {
  return kind_ == channel_kind::awgn ? "snr" : "delta";
}

std::string channel_model::to_string() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind_) {
    case channel_kind::awgn: out << "awgn"; break;
    case channel_kind::bsc: out << "bsc"; break;
    case channel_kind::bec: out << "bec"; break;
  }
  out << ':' << param_name() << '=' << param_;
  return out.str();
}

info_density_law single_letter_law(const channel_model& channel) {
  const double p = channel.param();
  switch (channel.kind()) {
    case channel_kind::awgn:
      return {channel, 0.5 * std::log1p(p), std::nullopt};
    case channel_kind::bsc: {
      // Z = log 2(1-delta) w.p. 1-delta, log 2 delta w.p. delta.
      const double origin = std::log(2.0 * p);
      return {channel, origin, lattice_spec{std::log((1.0 - p) / p), origin, 1.0 - p}};
    }
    case channel_kind::bec:
      // Z = 1 nat w.p. 1-delta, 0 on erasure.
      return {channel, 0.0, lattice_spec{1.0, 0.0, 1.0 - p}};
  }
  throw error(errc::invalid_argument, "unknown channel kind");
}

double convergence_radius(const info_density_law& law) {
  if (law.is_lattice()) return std::numeric_limits<double>::infinity();
  const double snr = law.channel.param();
  return std::sqrt((snr + 1.0) / snr);
}

cumulants cgf(const info_density_law& law, double s, double n) {
  if (!(n > 0.0)) throw error(errc::invalid_argument, "n must be positive");

  if (!law.is_lattice()) {
    const double radius = convergence_radius(law);
    if (!(std::abs(s) < radius * (1.0 - kRegionMargin))) {
      throw error(errc::out_of_convergence_region,
                  "s outside the AWGN CGF convergence region");
    }
    const double snr = law.channel.param();
    const double a = snr / (snr + 1.0);
    const double as2 = a * s * s;
    const double u = 1.0 - as2;
    return {
        -0.5 * n * std::log1p(-as2),
        n * a * s / u,
        n * a * (1.0 + as2) / (u * u),
        2.0 * n * a * a * s * (3.0 + as2) / (u * u * u),
    };
  }

  const auto& lat = *law.lattice;
  if (!std::isfinite(s)) {
    throw error(errc::out_of_convergence_region, "s must be finite");
  }
  const double q = lat.success;
  const double step = lat.step;
  const double t = step * s + std::log(q / (1.0 - q));
  const double pi = sigmoid(t);
  const double var1 = pi * (1.0 - pi);
  return {
      n * (std::log1p(-q) + softplus(t)),
      n * step * pi,
      n * step * step * var1,
      n * step * step * step * var1 * (1.0 - 2.0 * pi),
  };
}

sum_moments moments(const info_density_law& law, double n) {
  const auto k = cgf(law, 0.0, n);
  return {n * law.shift + k.k1, k.k2, k.k3};
}

}  // namespace vlsf
