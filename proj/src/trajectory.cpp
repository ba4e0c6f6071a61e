#include "grasslens/trajectory.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grasslens::trajectory {

namespace {

void check_uniform(std::span<const grassmann::ReadoutSubspace> subspaces) {
    if (subspaces.size() < 2) throw ValidationError("similarity needs at least two subspaces");
    const auto d = subspaces.front().d();
    const auto k = subspaces.front().k();
    for (const auto& s : subspaces)
        if (s.d() != d || s.k() != k)
            throw ValidationError("subspaces have mixed dimensions (d, k): expected (" + std::to_string(d) + ", " +
                                  std::to_string(k) + "), found (" + std::to_string(s.d()) + ", " +
                                  std::to_string(s.k()) + ")");
}

}  // namespace

const std::vector<int>& default_k_grid() {
    static const std::vector<int> grid{1, 3, 5, 10, 15, 25, 35, 50};
    return grid;
}

const std::vector<int>& default_consensus() {
    static const std::vector<int> regime{5, 10, 15};
    return regime;
}

std::size_t k_from_percent(int percent, std::size_t d) {
    if (percent <= 0 || percent > 100)
        throw ValidationError("resolution " + std::to_string(percent) + "% outside (0, 100]");
    const double raw = std::round(static_cast<double>(percent) / 100.0 * static_cast<double>(d));
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1.0, raw)), 1, d);
}

RssProfile rss_profile(std::span<const grassmann::ReadoutSubspace> subspaces, int k_percent) {
    check_uniform(subspaces);
    RssProfile p;
    p.k_percent = k_percent;
    p.k = subspaces.front().k();
    p.values.reserve(subspaces.size() - 1);
    for (std::size_t l = 0; l + 1 < subspaces.size(); ++l)
        p.values.push_back(grassmann::rss(subspaces[l].basis, subspaces[l + 1].basis));
    for (const auto& s : subspaces) p.degenerate = p.degenerate || s.degenerate;
    return p;
}

SimilarityMatrix pairwise_matrix(std::span<const grassmann::ReadoutSubspace> subspaces) {
    check_uniform(subspaces);
    const auto L = static_cast<Eigen::Index>(subspaces.size());
    SimilarityMatrix sim;
    sim.k = subspaces.front().k();
    sim.M = Eigen::MatrixXd::Identity(L, L);
    for (Eigen::Index i = 0; i < L; ++i)
        for (Eigen::Index j = i + 1; j < L; ++j) {
            const double v = grassmann::rss(subspaces[static_cast<std::size_t>(i)].basis,
                                            subspaces[static_cast<std::size_t>(j)].basis);
            sim.M(i, j) = v;
            sim.M(j, i) = v;
        }
    return sim;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of an empty set");
    if (q < 0.0 || q > 1.0) throw ValidationError("percentile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double percentile_spread(const std::vector<double>& values) {
    return percentile(values, 0.95) - percentile(values, 0.05);
}

double visibility(const SimilarityMatrix& sim) {
    const auto L = sim.M.rows();
    if (L < 3) throw ValidationError("visibility needs at least 3 layers");
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(L * (L - 1) / 2));
    for (Eigen::Index i = 0; i < L; ++i)
        for (Eigen::Index j = i + 1; j < L; ++j) upper.push_back(sim.M(i, j));
    return std::max(0.0, percentile_spread(upper));
}

EnergyResult spectral_energy(std::span<const Eigen::VectorXd> spectra, std::size_t k) {
    if (spectra.empty()) throw ValidationError("spectral energy needs at least one layer");
    EnergyResult r;
    // Sequential prefix sums of (sigma_i / sigma_1)^2 keep E non-decreasing in k
    // and make a flat spectrum sum to integers. The long double mean is exact
    // when every layer agrees.
    long double total = 0.0L;
    for (std::size_t l = 0; l < spectra.size(); ++l) {
        const auto& s = spectra[l];
        if (k < 1 || k > static_cast<std::size_t>(s.size()))
            throw ValidationError("spectral energy: k=" + std::to_string(k) + " out of range for layer " +
                                  std::to_string(l + 1));
        if ((s.array() < 0.0).any()) throw ValidationError("spectral energy needs non-negative singular values");
        const double top = s.maxCoeff();
        if (top == 0.0) {
            r.zero_layers.push_back(l + 1);
            total += 1.0L;
            continue;
        }
        double head = 0.0;
        double all = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double u = s(i) / top;
            all += u * u;
            if (static_cast<std::size_t>(i) + 1 == k) head = all;
        }
        total += head / all;
    }
    r.energy = std::clamp(static_cast<double>(total / static_cast<long double>(spectra.size())), 0.0, 1.0);
    return r;
}

std::vector<grassmann::LensSvd> decompose_stack(std::span<const Eigen::MatrixXd> stack) {
    std::vector<grassmann::LensSvd> out;
    out.reserve(stack.size());
    for (const auto& A : stack) out.push_back(grassmann::decompose(A));
    return out;
}

std::vector<grassmann::ReadoutSubspace> subspaces_at(std::span<const grassmann::LensSvd> svds, std::size_t k) {
    std::vector<grassmann::ReadoutSubspace> out;
    out.reserve(svds.size());
    for (std::size_t l = 0; l < svds.size(); ++l) out.push_back(grassmann::subspace_from_svd(svds[l], k, l + 1));
    return out;
}

std::vector<ParetoPoint> pareto_frontier(std::span<const grassmann::LensSvd> svds, std::span<const int> k_percents) {
    if (svds.empty()) throw ValidationError("Pareto frontier needs a lens stack");
    const auto d = static_cast<std::size_t>(svds.front().sigma.size());
    std::vector<Eigen::VectorXd> spectra;
    for (const auto& s : svds) spectra.push_back(s.sigma);

    std::vector<ParetoPoint> points;
    for (int pct : k_percents) {
        ParetoPoint p;
        p.k_percent = pct;
        p.k = k_from_percent(pct, d);
        const auto subs = subspaces_at(svds, p.k);
        p.visibility = visibility(pairwise_matrix(subs));
        p.energy = spectral_energy(spectra, p.k).energy;
        for (const auto& s : subs) p.degenerate = p.degenerate || s.degenerate;
        points.push_back(p);
    }
    return points;
}

}  // namespace grasslens::trajectory
