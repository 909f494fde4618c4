#pragma once

#include <vector>

#include <Eigen/Dense>

namespace trajphd {

/// Minimum-cost assignment for a rectangular cost matrix (Hungarian method
/// with potentials, O(n^2 m)). Every row of the smaller side is assigned;
/// returns, for each row, its column or -1 when the row is left out
/// (only possible with more rows than columns).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Total cost of an assignment returned by solve_assignment.
double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& row_to_col);

}  // namespace trajphd
