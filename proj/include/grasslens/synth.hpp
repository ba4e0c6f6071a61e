#pragma once

// Generators with planted ground truth: lens stacks whose readout subspaces
// follow a prescribed principal-angle schedule, trapezoid RSS profiles,
// activation streams with exact per-token alignment and FFN/MHA ratios, and
// multi-depth suites for the scaling regressions.

#include "grasslens/manifest.hpp"
#include "grasslens/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace grasslens::synth {

/// QR of a Gaussian matrix with the signs of R's diagonal folded into Q.
Eigen::MatrixXd random_orthogonal(Rng& rng, std::size_t d);
Eigen::MatrixXd gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols);

/// sigma_i = top * ratio^(i-1), strictly decreasing for ratio in (0, 1).
std::vector<double> geometric_spectrum(std::size_t d, double top = 2.0, double ratio = 0.92);

struct TrajectorySpec {
    std::size_t d = 64;
    std::size_t depth = 32;
    std::size_t k = 8;
    std::vector<double> angles;    // phi_1 .. phi_{L-1}, radians in [0, pi/2]
    std::vector<double> spectrum;  // sigma_1 .. sigma_d, gap required at k
    std::uint64_t seed = 0;
    std::size_t in_direction = 0;                  // 0-based column, < k
    std::optional<std::size_t> out_direction;      // 0-based column, >= k; default d-1
};

struct PlantedTrajectory {
    TrajectorySpec spec;
    std::vector<Eigen::MatrixXd> lenses;       // A_1 .. A_L
    std::vector<Eigen::MatrixXd> right_bases;  // V_1 .. V_L
    std::vector<double> ground_truth_rss;      // ((k-1) + cos phi_l) / k
};

PlantedTrajectory planted_trajectory(const TrajectorySpec& spec);

struct ProfileSpec {
    std::size_t depth = 32;  // profile length is depth - 1
    std::size_t p = 8;       // plateau start
    std::size_t q = 24;      // plateau end
    double low1 = 0.3;
    double high = 0.9;
    double low2 = 0.4;
    double noise = 0.0;      // uniform in [-noise, noise]
    std::uint64_t seed = 0;
};

/// Rise on [1, p], plateau on [p, q], descent on [q, L-1]. p == q gives a
/// triangle.
std::vector<double> planted_profile(const ProfileSpec& spec);

/// phi_l = acos(c_l) for a schedule of target cosines in [0, 1].
std::vector<double> angles_from_cosines(const std::vector<double>& cosines);

struct StreamSpec {
    std::size_t d = 32;
    std::size_t depth = 12;
    std::size_t tokens = 256;
    std::size_t p = 3;  // phase 1 = layers [1, p]
    std::size_t q = 9;  // phase 2 = (p, q], phase 3 = (q, L]
    std::array<double, 3> cos_levels{0.05, 0.02, 0.30};
    std::array<double, 3> ffn_mha_ratio{3.0, 1.0, 0.5};
    std::array<double, 3> update_scale{0.3, 0.3, 0.3};  // |delta_t| / |h_{l-1,t}|
    std::vector<double> hidden_spectrum;                // shapes h_0; empty means flat
    std::uint64_t seed = 0;

    int phase_of(std::size_t layer) const { return layer <= p ? 0 : (layer <= q ? 1 : 2); }
};

/// One batch; h_l = h_{l-1} + mha_l + ffn_l holds by construction.
io::ActivationBatch planted_stream(const StreamSpec& spec);

/// Breakpoint as a function of depth: "const:N" or "frac:F" (floor(F * L)).
struct DepthRule {
    enum class Kind { Constant, Fraction };
    Kind kind = Kind::Constant;
    double value = 0.0;

    std::size_t at(std::size_t depth) const;
    static DepthRule parse(const std::string& text);
    std::string to_string() const;
};

struct SuiteOptions {
    std::size_t d = 64;
    int k_percent = 10;  // resolution the ground truth is stated at
    double low1 = 0.2;
    double high = 1.0;
    double low2 = 0.3;
    double spectrum_ratio = 0.92;
    std::uint64_t seed = 0;
};

struct SuiteModel {
    std::size_t depth = 0;
    std::size_t b1 = 0;
    std::size_t b2 = 0;
    PlantedTrajectory trajectory;
};

/// One planted trajectory per depth whose cosine schedule is a trapezoid
/// with corners at (b1(L), b2(L)).
std::vector<SuiteModel> planted_scaling_suite(const std::vector<std::size_t>& depths, const DepthRule& b1,
                                              const DepthRule& b2, const SuiteOptions& options = {});

/// Model content ready to be written as a manifest plus tensor files.
struct SyntheticModel {
    std::string model_id;
    std::string family;
    std::vector<Eigen::MatrixXd> lenses;
    std::vector<Eigen::VectorXd> biases;
    std::optional<Eigen::MatrixXd> unembedding;
    io::NormKind norm = io::NormKind::None;
    std::optional<Eigen::VectorXd> gamma;
    std::optional<Eigen::VectorXd> beta;
    double eps = 1e-5;
    std::vector<io::ActivationBatch> batches;
};

/// Zero-mean Gaussian biases of the given scale, one per lens.
std::vector<Eigen::VectorXd> random_biases(Rng& rng, std::size_t depth, std::size_t d, double scale);

/// Writes <dir>/manifest.json and the tensor files; returns the reloaded manifest.
io::ModelManifest write_model(const SyntheticModel& model, const std::filesystem::path& dir);

}  // namespace grasslens::synth
