#pragma once

#include <string>

#include <Eigen/Dense>

namespace cdpo {

using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
/// Row-major so that each row (one sample, one parameter vector) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Family { CNF, CGAN, CVAE, CDM, Tabular };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

}  // namespace cdpo
