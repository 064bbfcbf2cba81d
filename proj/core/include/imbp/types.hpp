#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace imbp {

/// Integer population vector (one count per type).
using IntVec = std::vector<std::int64_t>;
/// Real mass vector (one mass per type).
using RealVec = std::vector<double>;
using Matrix = Eigen::MatrixXd;

}  // namespace imbp
