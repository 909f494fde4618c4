#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

namespace trajphd {

/// A trajectory (t, x^{t}, ..., x^{t+i-1}). Columns of `states` are the
/// states at consecutive time steps. Track stores of tag-based baselines can
/// skip steps; `present` then marks which columns hold an estimate (empty
/// means every column does).
struct Trajectory {
  int birth_time = 1;
  Eigen::MatrixXd states;
  std::vector<bool> present;

  int duration() const { return static_cast<int>(states.cols()); }
  int end_time() const { return birth_time + duration() - 1; }

  bool exists_at(int k) const {
    if (k < birth_time || k > end_time()) return false;
    return present.empty() || present[static_cast<std::size_t>(k - birth_time)];
  }

  auto state_at(int k) const { return states.col(k - birth_time); }

  /// Restriction to steps <= k (empty trajectory if born after k).
  Trajectory truncated_to(int k) const;

  /// Appends a state at step k (k > end_time()), marking skipped steps absent.
  void append(int k, const Eigen::VectorXd& x);
};

using TrajectorySet = std::vector<Trajectory>;

inline Trajectory Trajectory::truncated_to(int k) const {
  Trajectory out;
  out.birth_time = birth_time;
  const int keep = std::max(0, std::min(duration(), k - birth_time + 1));
  out.states = states.leftCols(keep);
  if (!present.empty()) out.present.assign(present.begin(), present.begin() + keep);
  return out;
}

inline void Trajectory::append(int k, const Eigen::VectorXd& x) {
  if (states.cols() == 0) {
    birth_time = k;
    states = x;
    present.clear();
    return;
  }
  const int old = duration();
  const int gap = k - end_time() - 1;
  const int len = k - birth_time + 1;
  states.conservativeResize(x.size(), len);
  states.col(len - 1) = x;
  if (gap > 0 || !present.empty()) {
    if (present.empty()) present.assign(static_cast<std::size_t>(old), true);
    for (int g = 0; g < gap; ++g) {
      states.col(old + g).setZero();
      present.push_back(false);
    }
    present.push_back(true);
  }
}

}  // namespace trajphd
