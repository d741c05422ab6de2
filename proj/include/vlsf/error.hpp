#pragma once

#include <stdexcept>
#include <string>

namespace vlsf {

enum class errc {
  invalid_argument = 1,
  out_of_convergence_region,
  lattice_point_out_of_support,
  unsupported_law,
  infeasible,
  empty_grid,
  parse_error,
};

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace vlsf
