#pragma once

// Residual-stream diagnostics from activation dumps: hidden-state effective
// rank, update/residual alignment, update rank and norm, FFN/MHA norm ratio,
// and their per-phase means.

#include "grasslens/manifest.hpp"
#include "grasslens/phases.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

namespace grasslens::stream {

/// Effective rank of the singular values of H (rows are tokens).
double hidden_effective_rank(const Eigen::MatrixXd& H);

/// Sum with count so partial results merge associatively.
struct Mean {
    double sum = 0.0;
    std::size_t count = 0;

    void add(double v) {
        sum += v;
        ++count;
    }
    void merge(const Mean& o) {
        sum += o.sum;
        count += o.count;
    }
    std::optional<double> value() const {
        return count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt;
    }
};

struct AlignmentSums {
    Mean abs_cos;
    std::size_t skipped = 0;  // rows with a zero vector on either side
};

AlignmentSums alignment_sums(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& h_prev);
/// Mean over tokens of |<delta_t, h_t>| / (|delta_t| |h_t|).
double update_alignment(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& h_prev);

struct RankNorm {
    double erank = 0.0;
    double mean_norm = 0.0;
};

RankNorm update_rank_norm(const Eigen::MatrixXd& delta);

struct RatioSums {
    Mean ratio;
    std::size_t skipped = 0;  // tokens with |mha_t| < 1e-12
};

RatioSums ffn_mha_sums(const Eigen::MatrixXd& ffn, const Eigen::MatrixXd& mha);
/// Mean over tokens of |ffn_t| / |mha_t|.
double ffn_mha_ratio(const Eigen::MatrixXd& ffn, const Eigen::MatrixXd& mha);

struct LayerMetrics {
    std::optional<double> erank_hidden;
    std::optional<double> mean_abs_cos;
    std::optional<double> erank_update;
    std::optional<double> mean_update_norm;
    std::optional<double> ffn_mha_ratio;  // empty without sublayer updates or when every MHA norm vanished
    std::size_t tokens = 0;
    std::size_t rank_batches = 0;
    std::size_t skipped_alignment = 0;
    std::size_t skipped_ratio = 0;
    std::size_t zero_rank_batches = 0;
};

struct StreamMetricsReport {
    std::size_t batch_size = 1024;  // rows per effective-rank computation
    bool has_sublayer_updates = false;
    std::vector<LayerMetrics> layers;  // index l-1 for layer l
};

/// Streams activation batches layer by layer; merge() combines workers.
class StreamAccumulator {
public:
    StreamAccumulator(std::size_t depth, std::size_t batch_size = 1024);

    void add(const io::ActivationBatch& batch);
    void merge(const StreamAccumulator& other);
    StreamMetricsReport report() const;

private:
    struct Layer {
        Mean erank_hidden;
        Mean abs_cos;
        Mean erank_update;
        Mean update_norm;
        Mean ratio;
        std::size_t tokens = 0;
        std::size_t skipped_alignment = 0;
        std::size_t skipped_ratio = 0;
        std::size_t zero_rank_batches = 0;
        std::size_t rank_batches = 0;
    };

    std::size_t batch_size_;
    bool has_updates_ = false;
    bool saw_batch_ = false;
    std::vector<Layer> layers_;
};

enum class Metric { ErankHidden, MeanAbsCos, ErankUpdate, MeanUpdateNorm, FfnMhaRatio };
inline constexpr std::array<Metric, 5> kAllMetrics{Metric::ErankHidden, Metric::MeanAbsCos, Metric::ErankUpdate,
                                                   Metric::MeanUpdateNorm, Metric::FfnMhaRatio};
const char* to_string(Metric m);
std::optional<double> metric_value(const LayerMetrics& layer, Metric m);

struct PhaseAggregate {
    // [metric][phase]; empty when no layer of that phase had the metric
    std::array<std::array<std::optional<double>, 3>, 5> means{};

    std::optional<double> at(Metric m, int phase) const {
        return means[static_cast<std::size_t>(m)][static_cast<std::size_t>(phase)];
    }
};

PhaseAggregate phase_aggregate(const StreamMetricsReport& report, const phases::PhaseDecomposition& phases);

}  // namespace grasslens::stream
