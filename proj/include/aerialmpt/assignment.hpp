#pragma once

#include <span>
#include <vector>

namespace aerialmpt {

/// Minimum-cost rectangular assignment (Hungarian method, shortest augmenting paths).
/// `cost` is row-major rows x cols. Every row is assigned when rows <= cols, every column otherwise.
/// Returns, per row, the assigned column or -1.
std::vector<int> solve_assignment(std::span<const double> cost, int rows, int cols);

}  // namespace aerialmpt
