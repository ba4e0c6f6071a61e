#include "grasslens/phases.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grasslens::phases {

namespace {

struct ArgMax {
    std::size_t index = 0;
    bool degenerate = false;
};

// Perpendicular distance from (l, s_l) to the line through the chord
// endpoints, maximized over [first, last] (1-based, inclusive).
ArgMax chord_argmax(std::span<const double> s, std::size_t first, std::size_t last) {
    const double xa = static_cast<double>(first);
    const double ya = s[first - 1];
    const double xb = static_cast<double>(last);
    const double yb = s[last - 1];
    const double dx = xb - xa;
    const double dy = yb - ya;
    const double len = std::hypot(dx, dy);

    double scale = 1.0;
    for (std::size_t l = first; l <= last; ++l) scale = std::max(scale, std::abs(s[l - 1]));
    const double tie_tol = 1e-12 * scale;

    ArgMax best{first, true};
    double best_d = -1.0;
    for (std::size_t l = first; l <= last; ++l) {
        const double x = static_cast<double>(l);
        const double dist = len > 0.0 ? std::abs(dx * (ya - s[l - 1]) - (xa - x) * dy) / len : 0.0;
        if (dist > best_d + tie_tol) {
            best_d = dist;
            best.index = l;
        }
    }
    if (best_d <= tie_tol) {
        best.degenerate = true;
        best.index = (first + last) / 2;
    } else {
        best.degenerate = false;
    }
    return best;
}

}  // namespace

Breakpoints kneedle_breakpoints(std::span<const double> s) {
    if (s.size() < 5)
        throw ValidationError("breakpoint detection needs a profile of length >= 5, got " + std::to_string(s.size()));
    for (double v : s)
        if (!std::isfinite(v)) throw ValidationError("profile has non-finite values");
    const std::size_t L = s.size() + 1;
    const std::size_t m = L / 2;
    const auto first = chord_argmax(s, 1, m);
    const auto second = chord_argmax(s, m, L - 1);
    Breakpoints bp;
    bp.b1 = first.index;
    bp.b2 = second.index;
    bp.degenerate_first = first.degenerate;
    bp.degenerate_second = second.degenerate;
    if (bp.b2 <= bp.b1) {
        // the halves share only m, so this means both estimates sit on m
        bp.b2 = bp.b1 + 1;
        bp.advanced = true;
    }
    return bp;
}

std::size_t consensus_value(std::vector<std::size_t> estimates) {
    if (estimates.empty()) throw ValidationError("consensus over zero estimates");
    std::sort(estimates.begin(), estimates.end());
    std::size_t best = estimates.front();
    std::size_t best_count = 0;
    bool unique = false;
    for (std::size_t i = 0; i < estimates.size();) {
        std::size_t j = i;
        while (j < estimates.size() && estimates[j] == estimates[i]) ++j;
        const std::size_t count = j - i;
        if (count > best_count) {
            best = estimates[i];
            best_count = count;
            unique = true;
        } else if (count == best_count) {
            unique = false;
        }
        i = j;
    }
    if (unique && best_count > 1) return best;
    return estimates[(estimates.size() - 1) / 2];
}

Consensus consensus_breakpoints(const std::map<int, Breakpoints>& per_k, std::span<const int> regime) {
    if (regime.empty()) throw ValidationError("consensus regime is empty");
    std::vector<std::size_t> b1s;
    std::vector<std::size_t> b2s;
    Consensus c;
    for (int pct : regime) {
        auto it = per_k.find(pct);
        if (it == per_k.end())
            throw ValidationError("consensus regime needs an estimate at k=" + std::to_string(pct) + "%");
        b1s.push_back(it->second.b1);
        b2s.push_back(it->second.b2);
    }
    c.per_k = per_k;
    c.b1 = consensus_value(b1s);
    c.b2 = consensus_value(b2s);
    if (c.b2 <= c.b1) {
        c.b2 = c.b1 + 1;
        c.reordered = true;
    }
    return c;
}

int PhaseDecomposition::phase_of(std::size_t layer) const {
    if (layer <= b1) return 0;
    if (layer <= b2) return 1;
    return 2;
}

PhaseDecomposition decompose_phases(std::size_t b1, std::size_t b2, std::size_t depth) {
    if (!(b1 >= 1 && b1 < b2 && b2 <= depth - 1))
        throw ValidationError("invalid breakpoints (" + std::to_string(b1) + ", " + std::to_string(b2) +
                              ") for depth " + std::to_string(depth));
    PhaseDecomposition p;
    p.depth = depth;
    p.b1 = b1;
    p.b2 = b2;
    p.widths = {b1, b2 - b1, depth - b2};
    const double L = static_cast<double>(depth);
    for (std::size_t i = 0; i < 3; ++i) p.fractions[i] = static_cast<double>(p.widths[i]) / L;
    p.depth_b1 = static_cast<double>(b1) / L;
    p.depth_b2 = static_cast<double>(b2) / L;
    return p;
}

}  // namespace grasslens::phases
