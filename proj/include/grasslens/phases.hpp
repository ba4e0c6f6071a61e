#pragma once

// Phase boundaries from RSS profiles: Gaussian smoothing, the two-stage
// chord (Kneedle) criterion, cross-resolution consensus and the resulting
// three-phase layer decomposition.

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace grasslens::phases {

/// Truncated (radius ceil(4 sigma)) renormalized Gaussian kernel with
/// half-sample symmetric reflection at the ends. sigma == 0 is the identity.
std::vector<double> gaussian_smooth(std::span<const double> values, double sigma);

/// Normalized kernel weights for offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma);

struct Breakpoints {
    std::size_t b1 = 0;  // profile indices, 1-based, 1 <= b1 < b2 <= L-1
    std::size_t b2 = 0;
    bool degenerate_first = false;   // all chord distances zero in [1, m]
    bool degenerate_second = false;  // all chord distances zero in [m, L-1]
    bool advanced = false;           // both landed on m; b2 moved to m+1
};

/// Profile s_1..s_{L-1}; m = floor(L/2). b1 maximizes the perpendicular
/// distance to the chord (1, s_1)-(m, s_m) over [1, m], b2 the distance to
/// (m, s_m)-(L-1, s_{L-1}) over [m, L-1]. Ties go to the smaller index.
Breakpoints kneedle_breakpoints(std::span<const double> smoothed);

/// Mode of the estimates, or the median when there is no unique mode
/// (for three estimates: when all three are distinct). Lower median for
/// an even count.
std::size_t consensus_value(std::vector<std::size_t> estimates);

struct Consensus {
    std::size_t b1 = 0;
    std::size_t b2 = 0;
    std::map<int, Breakpoints> per_k;  // k percent -> single-resolution estimate
    bool reordered = false;            // consensus b2 <= b1 had to be repaired
};

/// Applies consensus_value independently to b1 and b2 over `regime`.
/// Every resolution in the regime must be present in per_k.
Consensus consensus_breakpoints(const std::map<int, Breakpoints>& per_k, std::span<const int> regime);

struct PhaseDecomposition {
    std::size_t depth = 0;
    std::size_t b1 = 0;
    std::size_t b2 = 0;
    std::array<std::size_t, 3> widths{};  // layers [1, b1], (b1, b2], (b2, L]
    std::array<double, 3> fractions{};
    double depth_b1 = 0.0;  // b1 / L
    double depth_b2 = 0.0;  // b2 / L

    /// 0, 1 or 2 for 1-based layer l.
    int phase_of(std::size_t layer) const;
};

PhaseDecomposition decompose_phases(std::size_t b1, std::size_t b2, std::size_t depth);

}  // namespace grasslens::phases
