#include "eltrack/hungarian.hpp"

#include <cmath>
#include <limits>

#include "eltrack/errors.hpp"

namespace eltrack {

namespace {

// Shortest augmenting path with potentials; requires rows <= cols.
std::vector<int> assign_rows(const CostMatrix& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    const double inf = std::numeric_limits<double>::infinity();
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
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

BipartiteAssignment solve_assignment(const CostMatrix& cost) {
    if (cost.rows() == 0 || cost.cols() == 0) {
        throw ValidationError("assignment: empty cost matrix");
    }
    if (!cost.allFinite()) {
        throw ValidationError("assignment: costs must be finite");
    }
    BipartiteAssignment out;
    if (cost.rows() <= cost.cols()) {
        out.row_to_col = assign_rows(cost);
    } else {
        const CostMatrix t = cost.transpose();
        const std::vector<int> col_to_row = assign_rows(t);
        out.row_to_col.assign(static_cast<std::size_t>(cost.rows()), -1);
        for (std::size_t c = 0; c < col_to_row.size(); ++c) {
            out.row_to_col[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
        }
    }
    for (std::size_t r = 0; r < out.row_to_col.size(); ++r) {
        if (out.row_to_col[r] >= 0) out.total_cost += cost(static_cast<Eigen::Index>(r), out.row_to_col[r]);
    }
    return out;
}

}  // namespace eltrack
