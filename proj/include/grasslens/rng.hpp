#pragma once

// xoshiro256** seeded through splitmix64. The update equations are written out
// in docs/rng.md so other implementations can reproduce the same streams; the
// std:: distributions are avoided because their output is not portable.

#include <array>
#include <cstdint>

namespace grasslens {

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller; both variates of a pair are used.
    double normal();

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace grasslens
