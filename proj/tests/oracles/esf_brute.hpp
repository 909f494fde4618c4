#pragma once

// Elementary symmetric functions by summing products over every subset.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::VectorXd esf_brute(const std::vector<double>& v) {
  const std::size_t n = v.size();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) + 1);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double prod = 1.0;
    int size = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) {
        prod *= v[i];
        ++size;
      }
    }
    e(size) += prod;
  }
  return e;
}

}  // namespace oracle
