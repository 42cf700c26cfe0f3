#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace cfuse {

struct AssignmentResult {
    std::vector<std::size_t> column_of_row;
    double total_cost = 0.0;
};

/// Min-cost assignment of every row to a distinct column (rows <= cols) by
/// successive shortest augmenting paths with vertex potentials. Each row adds
/// one unit of flow, so this is min-cost flow on the unit-capacity bipartite
/// network. Ties resolve to the lowest column index.
AssignmentResult solve_assignment(Eigen::MatrixXd const& cost);

}  // namespace cfuse
