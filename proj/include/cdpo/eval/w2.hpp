#pragma once

#include <vector>

#include "cdpo/core/types.hpp"

namespace cdpo::eval {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(n^3)). Returns, for each row, the matched column.
std::vector<int> solve_assignment(const Matrix& cost);

/// Sum of cost(i, assignment[i]) in row order.
double assignment_cost(const Matrix& cost, const std::vector<int>& assignment);

/// Squared-Euclidean cost between the rows of two point sets.
Matrix squared_distance_matrix(const Matrix& a, const Matrix& b);

/// W2 between two equal-size 1-D samples by sorted (quantile) pairing.
double w2_sorted(std::vector<double> a, std::vector<double> b);

/// W2 via exact optimal assignment: sqrt(mean matched squared distance).
double w2_assignment(const Matrix& a, const Matrix& b);

/// Empirical W2 between equal-size point sets (rows are points). Uses the
/// sorted pairing in one dimension and exact assignment otherwise.
/// Throws InvalidArgument on unequal sizes, dimensions or empty sets.
double empirical_w2(const Matrix& a, const Matrix& b);

}  // namespace cdpo::eval
