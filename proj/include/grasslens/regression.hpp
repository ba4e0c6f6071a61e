#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>

namespace grasslens::regression {

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares of quantity on depth. Needs >= 2 points with at
/// least two distinct depths. R^2 is 1 when the quantities are all equal.
ScalingFit scaling_regression(std::span<const std::pair<double, double>> points);

}  // namespace grasslens::regression
