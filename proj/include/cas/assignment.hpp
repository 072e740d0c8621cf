#pragma once

#include <Eigen/Core>

#include <vector>

namespace cas {

/// Minimum-cost perfect assignment on a square cost matrix.
/// Returns `col` with row i assigned to column col[i]. Exact, O(n^3).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Like solve_assignment, but among all optimal assignments (within a
/// relative tolerance of 1e-12) returns the lexicographically smallest one,
/// so ties resolve to the lowest column index row by row.
std::vector<int> solve_assignment_lexicographic(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& col);

}  // namespace cas
