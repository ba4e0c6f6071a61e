#pragma once

// Model fixtures shared by the manifest tests and the acceptance run.

#include "grasslens/manifest.hpp"
#include "grasslens/synth.hpp"

#include <vector>

namespace testing {

// depth 4, width 6, vocab 10, one batch of 5 tokens with sublayer updates and targets
inline grasslens::synth::SyntheticModel small_model(std::uint64_t seed) {
    grasslens::Rng rng(seed);
    grasslens::synth::SyntheticModel m;
    m.model_id = "tiny";
    m.family = "toy";
    const int L = 4, d = 6, V = 10, n = 5;
    for (int l = 0; l < L; ++l) m.lenses.push_back(grasslens::synth::gaussian_matrix(rng, d, d));
    m.biases = grasslens::synth::random_biases(rng, L, d, 0.1);
    m.unembedding = grasslens::synth::gaussian_matrix(rng, V, d);
    m.norm = grasslens::io::NormKind::LayerNorm;
    m.gamma = Eigen::VectorXd::Ones(d);
    m.beta = Eigen::VectorXd::Zero(d);
    grasslens::io::ActivationBatch b;
    b.hidden.push_back(grasslens::synth::gaussian_matrix(rng, n, d));
    for (int l = 0; l < L; ++l) {
        b.mha.push_back(grasslens::synth::gaussian_matrix(rng, n, d));
        b.ffn.push_back(grasslens::synth::gaussian_matrix(rng, n, d));
        b.hidden.push_back(b.hidden.back() + b.mha.back() + b.ffn.back());
    }
    b.targets = std::vector<std::int64_t>{0, 3, 9, 2, 2};
    m.batches.push_back(std::move(b));
    return m;
}

/// Grow, shrink, transpose, flatten and add an axis.
inline std::vector<std::vector<std::size_t>> shape_mutations(const std::vector<std::size_t>& s) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t a = 0; a < s.size(); ++a) {
        auto grow = s;
        ++grow[a];
        out.push_back(grow);
        if (s[a] > 1) {
            auto shrink = s;
            --shrink[a];
            out.push_back(shrink);
        }
    }
    if (s.size() == 2 && s[0] != s[1]) out.push_back({s[1], s[0]});
    auto extra = s;
    extra.push_back(1);
    out.push_back(extra);
    if (s.size() > 1) out.push_back({s[0] * s[1]});
    if (s.size() == 1) out.push_back({1, s[0]});
    return out;
}

}  // namespace testing
