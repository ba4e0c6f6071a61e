#include "grasslens/lens.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/grassmann.hpp"
#include "grasslens/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grasslens::lens {

LensMap LensMap::zero(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return {Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
}

void UnembeddingHead::validate() const {
    const auto d = W_U.cols();
    const bool wants_gamma = norm != io::NormKind::None;
    const bool wants_beta = norm == io::NormKind::LayerNorm;
    if (wants_gamma != gamma.has_value() || wants_beta != beta.has_value())
        throw ValidationError(std::string("normalization parameters do not match norm kind ") + io::to_string(norm));
    if ((gamma && gamma->size() != d) || (beta && beta->size() != d))
        throw ValidationError("normalization parameters must have length d");
    if (eps < 0.0) throw ValidationError("normalization eps must be non-negative");
}

LensMap load_lens(const io::ModelManifest& m, std::size_t layer) {
    return {io::load_lens_matrix(m, layer), io::load_lens_bias(m, layer)};
}

UnembeddingHead load_head(const io::ModelManifest& m) {
    if (!m.unembedding) throw ValidationError(m.source.string() + ": manifest has no unembedding matrix");
    UnembeddingHead head;
    head.W_U = io::read_tensor(*m.unembedding).to_matrix();
    head.norm = m.norm_kind;
    head.eps = m.norm_eps;
    if (m.gamma) head.gamma = io::read_tensor(*m.gamma).to_vector();
    if (m.beta) head.beta = io::read_tensor(*m.beta).to_vector();
    head.validate();
    return head;
}

Eigen::VectorXd apply_lens(const LensMap& lens, const Eigen::VectorXd& h) {
    if (lens.A.rows() != lens.A.cols() || lens.A.cols() != h.size() || lens.b.size() != h.size())
        throw ValidationError("lens and state dimensions disagree");
    return h + lens.A * h + lens.b;
}

LensMap truncate_lens(const LensMap& lens, std::size_t k) {
    const auto d = static_cast<std::size_t>(lens.A.rows());
    if (k < 1 || k > d)
        throw ValidationError("truncation rank k=" + std::to_string(k) + " out of range [1, " + std::to_string(d) + "]");
    if (k == d) return lens;
    const auto svd = grassmann::decompose(lens.A);
    const auto kk = static_cast<Eigen::Index>(k);
    LensMap out;
    out.A = svd.U.leftCols(kk) * svd.sigma.head(kk).asDiagonal() * svd.V.leftCols(kk).transpose();
    out.b = lens.b;
    return out;
}

Eigen::VectorXd normalize(const UnembeddingHead& head, const Eigen::VectorXd& h) {
    if (h.size() != head.W_U.cols()) throw ValidationError("state width does not match unembedding");
    const double n = static_cast<double>(h.size());
    switch (head.norm) {
        case io::NormKind::None: return h;
        case io::NormKind::LayerNorm: {
            const double mean = h.mean();
            const Eigen::VectorXd centered = h.array() - mean;
            const double var = centered.squaredNorm() / n;
            if (var <= 0.0) throw NumericalError("layernorm of a zero-variance vector");
            Eigen::VectorXd out = centered / std::sqrt(var + head.eps);
            return out.cwiseProduct(*head.gamma) + *head.beta;
        }
        case io::NormKind::RmsNorm: {
            const double ms = h.squaredNorm() / n;
            if (ms + head.eps <= 0.0) throw NumericalError("rmsnorm of a zero vector with eps = 0");
            Eigen::VectorXd out = h / std::sqrt(ms + head.eps);
            return out.cwiseProduct(*head.gamma);
        }
    }
    return h;
}

Eigen::VectorXd readout_logits(const UnembeddingHead& head, const Eigen::VectorXd& h_tilde) {
    return head.W_U * normalize(head, h_tilde);
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
    const double mx = z.maxCoeff();
    // shift first so the subtraction happens at the scale of the differences
    const Eigen::ArrayXd shifted = z.array() - mx;
    return shifted - std::log(shifted.exp().sum());
}

double kl_divergence(const Eigen::VectorXd& p_logits, const Eigen::VectorXd& q_logits) {
    if (p_logits.size() != q_logits.size() || p_logits.size() == 0)
        throw ValidationError("KL needs logit vectors of equal non-zero length");
    const Eigen::VectorXd lp = log_softmax(p_logits);
    const Eigen::VectorXd lq = log_softmax(q_logits);
    const double kl = (lp.array().exp() * (lp - lq).array()).sum();
    return std::max(0.0, kl);
}

double kl_truncation_gap(const UnembeddingHead& head, const LensMap& lens, std::size_t k,
                         const Eigen::MatrixXd& states) {
    if (states.rows() == 0) throw ValidationError("KL truncation gap needs a non-empty sample");
    const LensMap truncated = truncate_lens(lens, k);
    double total = 0.0;
    for (Eigen::Index t = 0; t < states.rows(); ++t) {
        const Eigen::VectorXd h = states.row(t).transpose();
        total += kl_divergence(readout_logits(head, apply_lens(lens, h)), readout_logits(head, apply_lens(truncated, h)));
    }
    return total / static_cast<double>(states.rows());
}

std::size_t target_rank(const Eigen::VectorXd& logits, std::int64_t target) {
    if (target < 0 || target >= logits.size()) throw ValidationError("target id out of vocabulary range");
    const double zt = logits(target);
    std::size_t ahead = 0;
    for (Eigen::Index j = 0; j < logits.size(); ++j)
        if (logits(j) > zt || (logits(j) == zt && j < target)) ++ahead;
    return ahead;
}

void HitCounts::merge(const HitCounts& other) {
    for (const auto& [k, n] : other.hits) hits[k] += n;
    tokens += other.tokens;
}

HitReport HitReport::from_counts(const HitCounts& c) {
    HitReport r;
    r.tokens = c.tokens;
    for (const auto& [k, n] : c.hits)
        r.rate[k] = c.tokens ? static_cast<double>(n) / static_cast<double>(c.tokens) : 0.0;
    if (r.rate.count(1)) r.hit1 = r.rate.at(1);
    if (r.rate.count(5)) r.hit5 = r.rate.at(5);
    if (r.rate.count(1) && r.rate.count(5) && r.hit1 > 0.0) r.ratio_5_1 = r.hit5 / r.hit1;
    return r;
}

HitCounts hit_counts(const UnembeddingHead& head, const LensMap& lens, const Eigen::MatrixXd& states,
                     std::span<const std::int64_t> targets, std::span<const std::size_t> cutoffs) {
    if (targets.size() != static_cast<std::size_t>(states.rows()))
        throw ValidationError("Hit@k needs one target per token");
    HitCounts c;
    for (std::size_t k : cutoffs) {
        if (k < 1) throw ValidationError("Hit@k cutoffs must be >= 1");
        c.hits[k] = 0;
    }
    for (Eigen::Index t = 0; t < states.rows(); ++t) {
        const Eigen::VectorXd z = readout_logits(head, apply_lens(lens, states.row(t).transpose()));
        const std::size_t rank = target_rank(z, targets[static_cast<std::size_t>(t)]);
        for (auto& [k, n] : c.hits)
            if (rank < k) ++n;
    }
    c.tokens = static_cast<std::size_t>(states.rows());
    return c;
}

HitReport hit_at_k(const UnembeddingHead& head, const LensMap& lens, const Eigen::MatrixXd& states,
                   std::span<const std::int64_t> targets, std::span<const std::size_t> cutoffs) {
    return HitReport::from_counts(hit_counts(head, lens, states, targets, cutoffs));
}

}  // namespace grasslens::lens
