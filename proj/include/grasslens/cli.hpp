#pragma once

// Command layer behind the `grasslens` executable. Each command reads
// manifests, runs the analysis modules and writes CSV/JSON (and optionally
// SVG) reports into the output directory.

#include "grasslens/grassmann.hpp"
#include "grasslens/manifest.hpp"
#include "grasslens/phases.hpp"
#include "grasslens/synth.hpp"
#include "grasslens/trajectory.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace grasslens::cli {

inline constexpr const char* kCacheEnv = "GRASSLENS_CACHE";

enum class Format { Csv, Json, Svg };

struct RunConfig {
    std::vector<std::filesystem::path> manifests;
    std::vector<int> k_grid = trajectory::default_k_grid();
    std::vector<int> consensus = trajectory::default_consensus();
    double sigma = 2.0;
    std::filesystem::path out = ".";
    std::set<Format> formats{Format::Csv, Format::Json};
    std::uint64_t seed = 0;
    std::size_t batch_size = 1024;           // rows per effective-rank computation
    std::vector<std::size_t> hit_ks{1, 5};
    std::optional<std::pair<std::size_t, std::size_t>> breakpoints;  // overrides detection in `stream`
    std::optional<std::filesystem::path> cache_dir;

    /// consensus within k_grid, sigma >= 0, at least one manifest...
    void validate() const;
    bool wants(Format f) const { return formats.count(f) > 0; }
};

/// "1,3,5" -> {1, 3, 5}; each value must be an integer percent in (0, 100].
std::vector<int> parse_percent_list(const std::string& text);
std::set<Format> parse_formats(const std::string& text);

/// Per-layer subspaces and spectra for one manifest, computed lazily and
/// optionally persisted in a content-addressed cache directory.
class SubspaceStore {
public:
    SubspaceStore(const io::ModelManifest& manifest, std::optional<std::filesystem::path> cache_dir);

    const Eigen::VectorXd& spectrum(std::size_t layer);
    grassmann::ReadoutSubspace subspace(std::size_t layer, std::size_t k);
    std::vector<grassmann::ReadoutSubspace> subspaces(std::size_t k);
    std::vector<Eigen::VectorXd> spectra();

    std::size_t svds_computed() const { return svds_computed_; }
    std::size_t cache_hits() const { return cache_hits_; }

private:
    const grassmann::LensSvd& svd(std::size_t layer);
    const std::string& key(std::size_t layer);

    const io::ModelManifest& manifest_;
    std::optional<std::filesystem::path> cache_dir_;
    std::map<std::size_t, grassmann::LensSvd> svds_;
    std::map<std::size_t, Eigen::VectorXd> spectra_;
    std::map<std::size_t, std::string> keys_;
    std::size_t svds_computed_ = 0;
    std::size_t cache_hits_ = 0;
};

/// Everything `phases` reports for one model; reused by `stream` and `scaling`.
struct PhaseAnalysis {
    std::string model_id;
    std::string family;
    std::size_t depth = 0;
    std::size_t width = 0;
    std::map<int, trajectory::RssProfile> profiles;
    std::map<int, std::vector<double>> smoothed;
    phases::Consensus consensus;
    phases::PhaseDecomposition decomposition;
};

PhaseAnalysis analyze_phases(const io::ModelManifest& manifest, const RunConfig& config, SubspaceStore& store);

void cmd_decompose(const RunConfig& config);
void cmd_rss(const RunConfig& config);
void cmd_phases(const RunConfig& config);
void cmd_pareto(const RunConfig& config);
void cmd_stream(const RunConfig& config);
void cmd_scaling(const RunConfig& config);

struct SynthConfig {
    std::filesystem::path out = "synthetic";
    std::string model_id = "synthetic";
    std::string family = "synthetic";
    std::size_t depth = 16;
    std::size_t width = 64;
    int k_percent = 10;
    std::optional<std::pair<std::size_t, std::size_t>> plateau;  // default: (L/5, L - 1 - L/5)
    std::array<double, 3> levels{0.2, 1.0, 0.3};                 // planted cosine schedule levels
    double noise = 0.0;
    double spectrum_ratio = 0.92;
    std::uint64_t seed = 0;
    // readout head and activation dumps
    std::size_t vocab = 0;  // 0: no head
    std::size_t tokens = 0; // 0: no activations
    std::size_t batches = 1;
    std::array<double, 3> stream_cos{0.05, 0.02, 0.30};
    std::array<double, 3> stream_ratio{3.0, 1.0, 0.5};
    double update_scale = 0.3;
    // depth suite
    std::vector<std::size_t> depths;  // non-empty: one model per depth under out/L<depth>
    std::string b1_rule = "const:4";
    std::string b2_rule = "frac:0.8";
};

/// Returns the manifest paths written.
std::vector<std::filesystem::path> cmd_synth(const SynthConfig& config);

/// Full command-line entry point; returns the process exit status
/// (0 success, 1 validation failure, 2 numerical failure).
int run(int argc, char** argv);

}  // namespace grasslens::cli
