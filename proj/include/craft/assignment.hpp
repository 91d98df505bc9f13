#pragma once

// Exact minimum-cost perfect matching on a square cost matrix
// (Kuhn-Munkres with row/column potentials, O(n^3)).

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "craft/error.hpp"

namespace craft {

template <typename Cost>
struct Assignment {
  std::vector<std::size_t> column_of_row;
  Cost total{};
};

/// `cost` is row-major n x n. Returns the optimal row -> column matching.
template <typename Cost>
Assignment<Cost> solve_assignment(std::span<const Cost> cost, std::size_t n) {
  if (cost.size() != n * n) throw InvalidArgument("assignment cost matrix must be n x n");
  Assignment<Cost> result;
  if (n == 0) return result;
  const Cost inf = std::numeric_limits<Cost>::max() / 4;
  // 1-based indexing; index 0 is the virtual free column.
  std::vector<Cost> u(n + 1, Cost{}), v(n + 1, Cost{});
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<Cost> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = row_of_col[j0];
      Cost delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Cost cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  result.column_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.column_of_row[row_of_col[j] - 1] = j - 1;
  // Sum straight from the matrix so the total carries no potential round-off.
  for (std::size_t i = 0; i < n; ++i) result.total += cost[i * n + result.column_of_row[i]];
  return result;
}

}  // namespace craft
