#include "grasslens/regression.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>

namespace grasslens::regression {

ScalingFit scaling_regression(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw ValidationError("scaling regression needs at least 2 points");
    const double n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (sxx == 0.0) throw ValidationError("scaling regression needs at least two distinct depths");
    ScalingFit fit;
    fit.points = points.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& [x, y] : points) {
        const double r = y - (fit.intercept + fit.slope * x);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::min(1.0, 1.0 - ss_res / syy) : 1.0;
    return fit;
}

}  // namespace grasslens::regression
