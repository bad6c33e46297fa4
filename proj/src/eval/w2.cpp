#include "cdpo/eval/w2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdpo/core/error.hpp"

namespace cdpo::eval {

std::vector<int> solve_assignment(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    require(cost.cols() == n, "assignment needs a square cost matrix");
    if (n == 0) return {};
    require(cost.allFinite(), "assignment cost matrix has non-finite entries");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is a virtual start column.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
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
    std::vector<int> assignment(n);
    for (int j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

double assignment_cost(const Matrix& cost, const std::vector<int>& assignment) {
    require(static_cast<int>(assignment.size()) == cost.rows(), "assignment size does not match the cost matrix");
    double total = 0.0;
    for (int i = 0; i < cost.rows(); ++i) total += cost(i, assignment[i]);
    return total;
}

Matrix squared_distance_matrix(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "point sets differ in dimension");
    Matrix c(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.rows(); ++j) c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    return c;
}

double w2_sorted(std::vector<double> a, std::vector<double> b) {
    require(a.size() == b.size(), "W2 needs equal-size samples");
    require(!a.empty(), "W2 needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(total / static_cast<double>(a.size()));
}

double w2_assignment(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "W2 needs equal-size samples");
    require(a.rows() > 0, "W2 needs non-empty samples");
    const Matrix cost = squared_distance_matrix(a, b);
    const std::vector<int> match = solve_assignment(cost);
    std::vector<double> matched(match.size());
    for (std::size_t i = 0; i < match.size(); ++i) matched[i] = cost(static_cast<int>(i), match[i]);
    std::sort(matched.begin(), matched.end());
    double total = 0.0;
    for (double c : matched) total += c;
    return std::sqrt(total / static_cast<double>(a.rows()));
}

double empirical_w2(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "W2 needs equal-size samples");
    require(a.cols() == b.cols(), "point sets differ in dimension");
    require(a.rows() > 0 && a.cols() > 0, "W2 needs non-empty samples");
    require(a.allFinite() && b.allFinite(), "W2 samples contain non-finite values");
    if (a.cols() == 1)
        return w2_sorted(std::vector<double>(a.data(), a.data() + a.rows()),
                         std::vector<double>(b.data(), b.data() + b.rows()));
    return w2_assignment(a, b);
}

}  // namespace cdpo::eval
