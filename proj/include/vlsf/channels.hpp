#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace vlsf {

enum class channel_kind { awgn, bsc, bec };

// A memoryless channel together with the input distribution used for random
// coding: Gaussian N(0, snr) for AWGN, uniform Bernoulli(1/2) for BSC/BEC.
class channel_model {
 public:
  static channel_model awgn(double snr);
  static channel_model bsc(double delta);
  static channel_model bec(double delta);

  // Accepts "awgn:snr=1.0", "bsc:delta=0.11", "bec:delta=0.5".
  static channel_model parse(std::string_view spec);

  channel_kind kind() const noexcept { return kind_; }
  double param() const noexcept { return param_; }
  bool is_lattice() const noexcept { return kind_ != channel_kind::awgn; }

  // E[Z] in nats under the random-coding input.
  double capacity_nats() const;

  std::string to_string() const;
  const char* param_name() const noexcept;

  friend bool operator==(const channel_model&, const channel_model&) = default;

 private:
  channel_model(channel_kind kind, double param) : kind_(kind), param_(param) {}

  channel_kind kind_;
  double param_;
};

// Lattice structure of a discrete single-letter density: Z takes the value
// `origin` w.p. 1 - success and `origin + step` w.p. success.
struct lattice_spec {
  double step;
  double origin;
  double success;
};

// Single-letter information density Z together with the per-symbol constant
// `shift` that is subtracted to form the shifted density used by the CGF.
struct info_density_law {
  channel_model channel;
  double shift;
  std::optional<lattice_spec> lattice;

  bool is_lattice() const noexcept { return lattice.has_value(); }
};

// CGF of the shifted n-fold sum and its first three derivatives.
struct cumulants {
  double k0;
  double k1;
  double k2;
  double k3;
};

// Cumulants of the unshifted sum S_n.
struct sum_moments {
  double mean;
  double variance;
  double third_cumulant;
};

info_density_law single_letter_law(const channel_model& channel);

// Open interval of s on which the shifted CGF is finite. Lattice laws are
// entire, so their bound is +infinity.
double convergence_radius(const info_density_law& law);

// K(s) = n K_Z(s) for the shifted density. `n` may be real for the
// continuous relaxation used by the optimizer.
cumulants cgf(const info_density_law& law, double s, double n);

sum_moments moments(const info_density_law& law, double n);

}  // namespace vlsf
