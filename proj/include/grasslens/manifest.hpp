#pragma once

// Model manifest: one JSON document naming every tensor file that belongs to
// a model's lens stack, readout head and activation dumps. Paths inside the
// document are relative to the manifest's directory.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace grasslens::io {

enum class NormKind { LayerNorm, RmsNorm, None };

NormKind parse_norm_kind(const std::string& s);
const char* to_string(NormKind kind);

struct LensEntry {
    std::filesystem::path matrix;  // A_l, d x d
    std::filesystem::path bias;    // b_l, d
};

/// One batch of recorded activations, sharded one file per layer.
struct ActivationBatchPaths {
    std::vector<std::filesystem::path> hidden;  // L+1 entries: h_0 (embedding) .. h_L, each n x d
    std::vector<std::filesystem::path> mha;     // L entries (layers 1..L) or empty
    std::vector<std::filesystem::path> ffn;     // L entries (layers 1..L) or empty
    std::optional<std::filesystem::path> targets;  // n token ids stored as float64
    std::size_t tokens = 0;                     // filled in by validation
};

struct ModelManifest {
    std::filesystem::path source;
    std::string model_id;
    std::string family;
    std::size_t depth = 0;
    std::size_t width = 0;
    std::optional<std::size_t> vocab;

    NormKind norm_kind = NormKind::None;
    double norm_eps = 1e-5;
    std::optional<std::filesystem::path> unembedding;  // |V| x d
    std::optional<std::filesystem::path> gamma;        // d
    std::optional<std::filesystem::path> beta;         // d

    std::vector<LensEntry> lenses;
    std::vector<ActivationBatchPaths> batches;

    /// Non-fatal findings (unknown keys and the like).
    std::vector<std::string> warnings;

    bool has_head() const { return unembedding.has_value(); }
};

/// Parse and eagerly validate: every referenced tensor header is checked
/// against depth, width and vocab before returning.
ModelManifest load_manifest(const std::filesystem::path& path);

/// Write the manifest document; tensor paths are stored relative to the
/// manifest's directory.
void save_manifest(const ModelManifest& manifest, const std::filesystem::path& path);

/// 1-based layer index.
Eigen::MatrixXd load_lens_matrix(const ModelManifest& manifest, std::size_t layer);
Eigen::VectorXd load_lens_bias(const ModelManifest& manifest, std::size_t layer);
std::vector<Eigen::MatrixXd> load_lens_stack(const ModelManifest& manifest);

/// Activations of one batch. hidden[l] is h_l for l = 0..L; mha[l-1], ffn[l-1]
/// hold layer l's sublayer updates.
struct ActivationBatch {
    std::vector<Eigen::MatrixXd> hidden;
    std::vector<Eigen::MatrixXd> mha;
    std::vector<Eigen::MatrixXd> ffn;
    std::optional<std::vector<std::int64_t>> targets;

    std::size_t tokens() const { return hidden.empty() ? 0 : static_cast<std::size_t>(hidden.front().rows()); }
    bool has_updates() const { return !mha.empty(); }
};

ActivationBatch load_activation_batch(const ModelManifest& manifest, std::size_t batch);

/// Largest |h_l - h_{l-1} - mha_l - ffn_l| over all entries of the batch.
double residual_identity_error(const ActivationBatch& batch);

}  // namespace grasslens::io
