#pragma once

#include <cstddef>
#include <vector>

namespace memsde {

/// Minimum-cost perfect matching for a dense n×n cost matrix (row-major), by the
/// Hungarian method with potentials in O(n³). Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n);

}  // namespace memsde
