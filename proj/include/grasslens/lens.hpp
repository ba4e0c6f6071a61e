#pragma once

// The lens as a predictor: affine correction (I + A) h + b, rank-k
// truncation, normalized unembedding readout, KL truncation gap and Hit@k.

#include "grasslens/manifest.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace grasslens::lens {

struct LensMap {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    std::size_t width() const { return static_cast<std::size_t>(A.rows()); }
    /// LogitLens: A = 0, b = 0.
    static LensMap zero(std::size_t d);
};

struct UnembeddingHead {
    Eigen::MatrixXd W_U;  // |V| x d
    io::NormKind norm = io::NormKind::None;
    std::optional<Eigen::VectorXd> gamma;
    std::optional<Eigen::VectorXd> beta;
    double eps = 1e-5;

    std::size_t vocab() const { return static_cast<std::size_t>(W_U.rows()); }
    std::size_t width() const { return static_cast<std::size_t>(W_U.cols()); }
    /// Throws unless gamma/beta presence matches the norm kind and shapes agree.
    void validate() const;
};

LensMap load_lens(const io::ModelManifest& manifest, std::size_t layer);
UnembeddingHead load_head(const io::ModelManifest& manifest);

Eigen::VectorXd apply_lens(const LensMap& lens, const Eigen::VectorXd& h);

/// U Sigma_k V^T with the bias untouched. k == d returns the lens as is.
LensMap truncate_lens(const LensMap& lens, std::size_t k);

/// Layer/RMS normalization (population variance, eps under the root).
Eigen::VectorXd normalize(const UnembeddingHead& head, const Eigen::VectorXd& h);
Eigen::VectorXd readout_logits(const UnembeddingHead& head, const Eigen::VectorXd& h_tilde);

/// log softmax computed through log-sum-exp.
Eigen::VectorXd log_softmax(const Eigen::VectorXd& z);
/// KL(softmax(p_logits) || softmax(q_logits)), never negative.
double kl_divergence(const Eigen::VectorXd& p_logits, const Eigen::VectorXd& q_logits);

/// Mean KL between full-lens and rank-k-lens readout distributions over the
/// sample (one state per row).
double kl_truncation_gap(const UnembeddingHead& head, const LensMap& lens, std::size_t k,
                         const Eigen::MatrixXd& states);

/// 0-based rank of `target` in the logits; ties go to the lower token id.
std::size_t target_rank(const Eigen::VectorXd& logits, std::int64_t target);

/// Count-based accumulator so batches can be merged.
struct HitCounts {
    std::map<std::size_t, std::size_t> hits;  // cutoff -> tokens with target in top-cutoff
    std::size_t tokens = 0;

    void merge(const HitCounts& other);
};

struct HitReport {
    std::map<std::size_t, double> rate;  // cutoff -> hit rate
    std::size_t tokens = 0;
    double hit1 = 0.0;
    double hit5 = 0.0;
    std::optional<double> ratio_5_1;  // empty when hit@1 == 0

    static HitReport from_counts(const HitCounts& counts);
};

HitCounts hit_counts(const UnembeddingHead& head, const LensMap& lens, const Eigen::MatrixXd& states,
                     std::span<const std::int64_t> targets, std::span<const std::size_t> cutoffs);

HitReport hit_at_k(const UnembeddingHead& head, const LensMap& lens, const Eigen::MatrixXd& states,
                   std::span<const std::int64_t> targets, std::span<const std::size_t> cutoffs);

}  // namespace grasslens::lens
