#pragma once

#include <vector>

#include <Eigen/Core>

namespace eltrack {

using CostMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BipartiteAssignment {
    // row_to_col[r] is the column assigned to row r, or -1 when rows exceed
    // columns and r is left unassigned.
    std::vector<int> row_to_col;
    double total_cost = 0.0;
};

/// Minimum-cost bipartite assignment for a rectangular cost matrix. Every
/// row (or every column, whichever is fewer) is assigned exactly once.
BipartiteAssignment solve_assignment(const CostMatrix& cost);

}  // namespace eltrack
