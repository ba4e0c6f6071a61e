#include "grasslens/stream.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/grassmann.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grasslens::stream {

namespace {

constexpr double kZeroNorm = 1e-12;

void same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError(std::string(what) + ": matrix shapes disagree");
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& M) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
    return svd.singularValues();
}

// Effective rank per chunk of at most batch_size rows; all-zero chunks are
// counted rather than averaged.
void chunked_erank(const Eigen::MatrixXd& M, std::size_t batch_size, Mean& out, std::size_t& zero_chunks,
                   std::size_t& chunks) {
    const auto n = static_cast<std::size_t>(M.rows());
    for (std::size_t start = 0; start < n; start += batch_size) {
        const auto rows = static_cast<Eigen::Index>(std::min(batch_size, n - start));
        const Eigen::MatrixXd block = M.middleRows(static_cast<Eigen::Index>(start), rows);
        ++chunks;
        const Eigen::VectorXd s = singular_values(block);
        if (s.size() == 0 || s.maxCoeff() == 0.0) {
            ++zero_chunks;
            continue;
        }
        out.add(grassmann::effective_rank(s));
    }
}

}  // namespace

double hidden_effective_rank(const Eigen::MatrixXd& H) {
    if (H.rows() == 0) throw ValidationError("effective rank needs at least one row");
    if (!H.allFinite()) throw ValidationError("hidden states have non-finite entries");
    const Eigen::VectorXd s = singular_values(H);
    if (s.size() == 0 || s.maxCoeff() == 0.0) throw ValidationError("effective rank of an all-zero matrix");
    return grassmann::effective_rank(s);
}

AlignmentSums alignment_sums(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& h_prev) {
    same_shape(delta, h_prev, "update alignment");
    AlignmentSums out;
    for (Eigen::Index t = 0; t < delta.rows(); ++t) {
        const double nd = delta.row(t).norm();
        const double nh = h_prev.row(t).norm();
        if (nd < kZeroNorm || nh < kZeroNorm) {
            ++out.skipped;
            continue;
        }
        const double c = std::abs(delta.row(t).dot(h_prev.row(t))) / (nd * nh);
        out.abs_cos.add(std::min(1.0, c));
    }
    return out;
}

double update_alignment(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& h_prev) {
    const auto s = alignment_sums(delta, h_prev);
    if (!s.abs_cos.value()) throw ValidationError("update alignment: every token row is degenerate");
    return *s.abs_cos.value();
}

RankNorm update_rank_norm(const Eigen::MatrixXd& delta) {
    if (delta.rows() == 0) throw ValidationError("update rank needs at least one row");
    RankNorm r;
    r.erank = hidden_effective_rank(delta);
    r.mean_norm = delta.rowwise().norm().mean();
    return r;
}

RatioSums ffn_mha_sums(const Eigen::MatrixXd& ffn, const Eigen::MatrixXd& mha) {
    same_shape(ffn, mha, "FFN/MHA ratio");
    RatioSums out;
    for (Eigen::Index t = 0; t < ffn.rows(); ++t) {
        const double nm = mha.row(t).norm();
        if (nm < kZeroNorm) {
            ++out.skipped;
            continue;
        }
        out.ratio.add(ffn.row(t).norm() / nm);
    }
    return out;
}

double ffn_mha_ratio(const Eigen::MatrixXd& ffn, const Eigen::MatrixXd& mha) {
    const auto s = ffn_mha_sums(ffn, mha);
    if (!s.ratio.value()) throw ValidationError("FFN/MHA ratio: every token has a vanishing MHA update");
    return *s.ratio.value();
}

StreamAccumulator::StreamAccumulator(std::size_t depth, std::size_t batch_size)
    : batch_size_(batch_size), layers_(depth) {
    if (batch_size_ == 0) throw ValidationError("effective-rank batch size must be positive");
}

void StreamAccumulator::add(const io::ActivationBatch& batch) {
    if (batch.hidden.size() != layers_.size() + 1)
        throw ValidationError("activation batch does not cover " + std::to_string(layers_.size()) + " layers");
    if (saw_batch_ && batch.has_updates() != has_updates_)
        throw ValidationError("activation batches disagree on the presence of sublayer updates");
    saw_batch_ = true;
    has_updates_ = batch.has_updates();
    for (std::size_t l = 1; l <= layers_.size(); ++l) {
        Layer& acc = layers_[l - 1];
        const Eigen::MatrixXd& h = batch.hidden[l];
        const Eigen::MatrixXd& prev = batch.hidden[l - 1];
        const Eigen::MatrixXd delta = batch.has_updates() ? Eigen::MatrixXd(batch.mha[l - 1] + batch.ffn[l - 1])
                                                          : Eigen::MatrixXd(h - prev);
        acc.tokens += static_cast<std::size_t>(h.rows());

        std::size_t zero = 0;
        std::size_t chunks = 0;
        chunked_erank(h, batch_size_, acc.erank_hidden, zero, chunks);
        acc.zero_rank_batches += zero;
        acc.rank_batches += chunks;

        const auto al = alignment_sums(delta, prev);
        acc.abs_cos.merge(al.abs_cos);
        acc.skipped_alignment += al.skipped;

        zero = 0;
        chunks = 0;
        chunked_erank(delta, batch_size_, acc.erank_update, zero, chunks);
        acc.zero_rank_batches += zero;
        for (Eigen::Index t = 0; t < delta.rows(); ++t) acc.update_norm.add(delta.row(t).norm());

        if (batch.has_updates()) {
            const auto rs = ffn_mha_sums(batch.ffn[l - 1], batch.mha[l - 1]);
            acc.ratio.merge(rs.ratio);
            acc.skipped_ratio += rs.skipped;
        }
    }
}

void StreamAccumulator::merge(const StreamAccumulator& other) {
    if (other.layers_.size() != layers_.size() || other.batch_size_ != batch_size_)
        throw ValidationError("cannot merge stream accumulators with different depth or batch size");
    if (saw_batch_ && other.saw_batch_ && has_updates_ != other.has_updates_)
        throw ValidationError("cannot merge stream accumulators with and without sublayer updates");
    if (other.saw_batch_) {
        has_updates_ = other.has_updates_;
        saw_batch_ = true;
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& a = layers_[i];
        const Layer& b = other.layers_[i];
        a.erank_hidden.merge(b.erank_hidden);
        a.abs_cos.merge(b.abs_cos);
        a.erank_update.merge(b.erank_update);
        a.update_norm.merge(b.update_norm);
        a.ratio.merge(b.ratio);
        a.tokens += b.tokens;
        a.skipped_alignment += b.skipped_alignment;
        a.skipped_ratio += b.skipped_ratio;
        a.zero_rank_batches += b.zero_rank_batches;
        a.rank_batches += b.rank_batches;
    }
}

StreamMetricsReport StreamAccumulator::report() const {
    StreamMetricsReport r;
    r.batch_size = batch_size_;
    r.has_sublayer_updates = has_updates_;
    for (const Layer& a : layers_) {
        LayerMetrics m;
        m.erank_hidden = a.erank_hidden.value();
        m.mean_abs_cos = a.abs_cos.value();
        m.erank_update = a.erank_update.value();
        m.mean_update_norm = a.update_norm.value();
        m.ffn_mha_ratio = a.ratio.value();
        m.tokens = a.tokens;
        m.rank_batches = a.rank_batches;
        m.skipped_alignment = a.skipped_alignment;
        m.skipped_ratio = a.skipped_ratio;
        m.zero_rank_batches = a.zero_rank_batches;
        r.layers.push_back(m);
    }
    return r;
}

const char* to_string(Metric m) {
    switch (m) {
        case Metric::ErankHidden: return "erank_hidden";
        case Metric::MeanAbsCos: return "mean_abs_cos";
        case Metric::ErankUpdate: return "erank_update";
        case Metric::MeanUpdateNorm: return "mean_update_norm";
        case Metric::FfnMhaRatio: return "ffn_mha_ratio";
    }
    return "?";
}

std::optional<double> metric_value(const LayerMetrics& layer, Metric m) {
    switch (m) {
        case Metric::ErankHidden: return layer.erank_hidden;
        case Metric::MeanAbsCos: return layer.mean_abs_cos;
        case Metric::ErankUpdate: return layer.erank_update;
        case Metric::MeanUpdateNorm: return layer.mean_update_norm;
        case Metric::FfnMhaRatio: return layer.ffn_mha_ratio;
    }
    return std::nullopt;
}

PhaseAggregate phase_aggregate(const StreamMetricsReport& report, const phases::PhaseDecomposition& phases) {
    if (report.layers.size() != phases.depth)
        throw ValidationError("stream report covers " + std::to_string(report.layers.size()) +
                              " layers, decomposition " + std::to_string(phases.depth));
    PhaseAggregate agg;
    for (std::size_t mi = 0; mi < kAllMetrics.size(); ++mi) {
        std::array<Mean, 3> acc{};
        for (std::size_t l = 1; l <= report.layers.size(); ++l)
            if (auto v = metric_value(report.layers[l - 1], kAllMetrics[mi]))
                acc[static_cast<std::size_t>(phases.phase_of(l))].add(*v);
        for (std::size_t p = 0; p < 3; ++p) agg.means[mi][p] = acc[p].value();
    }
    return agg;
}

}  // namespace grasslens::stream
