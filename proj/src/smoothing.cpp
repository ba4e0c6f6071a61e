#include "grasslens/phases.hpp"

#include "grasslens/errors.hpp"

#include <cmath>

namespace grasslens::phases {

namespace {

// scipy's "reflect" boundary: (d c b a | a b c d | d c b a)
std::size_t reflect_index(long i, long n) {
    const long period = 2 * n;
    long j = i % period;
    if (j < 0) j += period;
    if (j >= n) j = period - 1 - j;
    return static_cast<std::size_t>(j);
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("smoothing sigma must be finite and >= 0");
    if (sigma == 0.0) return {1.0};
    const long radius = static_cast<long>(std::ceil(4.0 * sigma));
    std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (long j = -radius; j <= radius; ++j) {
        const double v = std::exp(-0.5 * static_cast<double>(j * j) / (sigma * sigma));
        w[static_cast<std::size_t>(j + radius)] = v;
        total += v;
    }
    for (double& v : w) v /= total;
    return w;
}

std::vector<double> gaussian_smooth(std::span<const double> values, double sigma) {
    if (values.empty()) throw ValidationError("cannot smooth an empty profile");
    const auto w = gaussian_kernel(sigma);
    if (w.size() == 1) return {values.begin(), values.end()};
    const long n = static_cast<long>(values.size());
    const long radius = static_cast<long>(w.size() / 2);
    std::vector<double> out(values.size());
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long j = -radius; j <= radius; ++j)
            acc += w[static_cast<std::size_t>(j + radius)] * values[reflect_index(i + j, n)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

}  // namespace grasslens::phases
