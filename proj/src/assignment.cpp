#include "cfuse/assignment.hpp"

#include <limits>
#include <stdexcept>

#include "cfuse/error.hpp"

namespace cfuse {

AssignmentResult solve_assignment(Eigen::MatrixXd const& cost)
{
    auto const n = static_cast<std::size_t>(cost.rows());
    auto const m = static_cast<std::size_t>(cost.cols());
    if (n > m) {
        throw NumericalError("solve_assignment: more rows (" + std::to_string(n)
                             + ") than columns (" + std::to_string(m) + ")");
    }
    if (!cost.allFinite()) {
        throw std::invalid_argument("solve_assignment: non-finite cost");
    }
    AssignmentResult result;
    if (n == 0) {
        return result;
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based arrays; index 0 is the virtual source column.
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(m + 1, 0.0);
    std::vector<std::size_t> row_of_col(m + 1, 0);
    std::vector<std::size_t> way(m + 1, 0);
    std::vector<double> minv(m + 1);
    std::vector<char> used(m + 1);

    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            std::size_t const i0 = row_of_col[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) {
                    continue;
                }
                double const cur = cost(static_cast<Eigen::Index>(i0 - 1),
                                        static_cast<Eigen::Index>(j - 1))
                                   - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
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
            std::size_t const j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    result.column_of_row.assign(n, 0);
    for (std::size_t j = 1; j <= m; ++j) {
        if (row_of_col[j] != 0) {
            result.column_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        result.total_cost += cost(static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(result.column_of_row[i]));
    }
    return result;
}

}  // namespace cfuse
