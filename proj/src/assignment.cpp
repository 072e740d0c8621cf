#include "cas/assignment.hpp"

#include "cas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cas {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ConfigError("assignment cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();

  // Shortest augmenting path with row/column potentials (1-based sentinels).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) col[static_cast<std::size_t>(match[j] - 1)] = j - 1;
  return col;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& col) {
  double total = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i) total += cost(static_cast<Eigen::Index>(i), col[i]);
  return total;
}

std::vector<int> solve_assignment_lexicographic(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> best = solve_assignment(cost);
  const double optimum = assignment_cost(cost, best);
  const double tol = 1e-12 * std::max(1.0, std::abs(optimum));

  std::vector<int> rows_left(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rows_left[static_cast<std::size_t>(i)] = i;
  std::vector<int> cols_left = rows_left;
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  double fixed = 0.0;

  for (int i = 0; i < n; ++i) {
    rows_left.erase(rows_left.begin());
    bool placed = false;
    for (std::size_t c = 0; c < cols_left.size() && !placed; ++c) {
      const int j = cols_left[c];
      std::vector<int> rest_cols = cols_left;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(c));
      double rest = 0.0;
      if (!rows_left.empty()) {
        Eigen::MatrixXd sub(rows_left.size(), rest_cols.size());
        for (std::size_t r = 0; r < rows_left.size(); ++r)
          for (std::size_t q = 0; q < rest_cols.size(); ++q)
            sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = cost(rows_left[r], rest_cols[q]);
        rest = assignment_cost(sub, solve_assignment(sub));
      }
      if (fixed + cost(i, j) + rest <= optimum + tol) {
        out[static_cast<std::size_t>(i)] = j;
        fixed += cost(i, j);
        cols_left = std::move(rest_cols);
        placed = true;
      }
    }
    if (!placed) return best;  // tolerance mismatch; the plain optimum is still exact
  }
  return out;
}

}  // namespace cas
