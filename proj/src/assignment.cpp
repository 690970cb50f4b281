#include "aerialmpt/assignment.hpp"

#include <limits>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

namespace {

// Requires n <= m. Returns row -> column.
std::vector<int> hungarian(std::span<const double> a, int n, int m, bool transposed) {
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](int i, int j) { return transposed ? a[static_cast<std::size_t>(j) * n + i] : a[static_cast<std::size_t>(i) * m + j]; };
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
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
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

std::vector<int> solve_assignment(std::span<const double> cost, int rows, int cols) {
  if (rows < 0 || cols < 0 || cost.size() != static_cast<std::size_t>(rows) * cols) {
    throw ConfigError("solve_assignment: cost matrix shape mismatch");
  }
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows <= cols) return hungarian(cost, rows, cols, false);
  const auto col_to_row = hungarian(cost, cols, rows, true);
  std::vector<int> out(rows, -1);
  for (int c = 0; c < cols; ++c) {
    if (col_to_row[c] >= 0) out[col_to_row[c]] = c;
  }
  return out;
}

}  // namespace aerialmpt
