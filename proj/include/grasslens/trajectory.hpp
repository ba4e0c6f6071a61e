#pragma once

// Layer-wise and pairwise readout-subspace similarity, Visibility@k and
// retained spectral energy across resolutions.

#include "grasslens/grassmann.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace grasslens::trajectory {

/// Resolutions as integer percents of d.
const std::vector<int>& default_k_grid();      // {1, 3, 5, 10, 15, 25, 35, 50}
const std::vector<int>& default_consensus();   // {5, 10, 15}

/// max(1, round(percent / 100 * d)), capped at d.
std::size_t k_from_percent(int percent, std::size_t d);

struct RssProfile {
    int k_percent = 0;
    std::size_t k = 0;
    std::vector<double> values;  // s_1 .. s_{L-1}
    bool degenerate = false;     // some layer lacked a spectral gap at k
};

RssProfile rss_profile(std::span<const grassmann::ReadoutSubspace> subspaces, int k_percent = 0);

struct SimilarityMatrix {
    std::size_t k = 0;
    Eigen::MatrixXd M;  // L x L, symmetric, unit diagonal
};

SimilarityMatrix pairwise_matrix(std::span<const grassmann::ReadoutSubspace> subspaces);

/// Linear interpolation between order statistics, inclusive endpoints
/// (position q * (n - 1)).
double percentile(std::vector<double> values, double q);
/// p95 - p5.
double percentile_spread(const std::vector<double>& values);

/// p95 - p5 of the strict upper triangle of M. Needs L >= 3.
double visibility(const SimilarityMatrix& sim);

struct EnergyResult {
    double energy = 0.0;
    std::vector<std::size_t> zero_layers;  // 1-based layers with an all-zero spectrum (counted as 1)
};

EnergyResult spectral_energy(std::span<const Eigen::VectorXd> spectra, std::size_t k);

struct ParetoPoint {
    int k_percent = 0;
    std::size_t k = 0;
    double visibility = 0.0;
    double energy = 0.0;
    bool degenerate = false;
};

std::vector<ParetoPoint> pareto_frontier(std::span<const grassmann::LensSvd> svds, std::span<const int> k_percents);

/// Subspaces of every layer at one resolution, reusing precomputed SVDs.
std::vector<grassmann::ReadoutSubspace> subspaces_at(std::span<const grassmann::LensSvd> svds, std::size_t k);

std::vector<grassmann::LensSvd> decompose_stack(std::span<const Eigen::MatrixXd> stack);

}  // namespace grasslens::trajectory
