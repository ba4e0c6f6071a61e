#include "grasslens/cli.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/lens.hpp"
#include "grasslens/rng.hpp"

#include <algorithm>
#include <cmath>

namespace grasslens::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kBiasScale = 0.01;

// Independent streams for the parts of one model, so that adding a head
// does not change the lenses.
constexpr std::uint64_t kBiasSalt = 0x62696173ULL;
constexpr std::uint64_t kHeadSalt = 0x68656164ULL;
constexpr std::uint64_t kStreamSalt = 0x73747265ULL;

void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0, 1]");
}

synth::SyntheticModel assemble(const SynthConfig& c, std::string model_id, std::size_t depth, std::size_t b1,
                               std::size_t b2, std::vector<Eigen::MatrixXd> lenses, std::uint64_t seed) {
    synth::SyntheticModel m;
    m.model_id = std::move(model_id);
    m.family = c.family;
    m.lenses = std::move(lenses);
    Rng bias_rng(seed ^ kBiasSalt);
    m.biases = synth::random_biases(bias_rng, depth, c.width, kBiasScale);

    std::optional<lens::UnembeddingHead> head;
    if (c.vocab > 0) {
        Rng head_rng(seed ^ kHeadSalt);
        m.unembedding = synth::gaussian_matrix(head_rng, c.vocab, c.width) / std::sqrt(static_cast<double>(c.width));
        m.norm = io::NormKind::LayerNorm;
        m.gamma = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(c.width));
        m.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.width));
        head = lens::UnembeddingHead{*m.unembedding, m.norm, m.gamma, m.beta, m.eps};
    }
    if (c.tokens > 0) {
        for (std::size_t b = 0; b < c.batches; ++b) {
            synth::StreamSpec ss;
            ss.d = c.width;
            ss.depth = depth;
            ss.tokens = c.tokens;
            ss.p = b1;
            ss.q = b2;
            ss.cos_levels = c.stream_cos;
            ss.ffn_mha_ratio = c.stream_ratio;
            ss.update_scale = {c.update_scale, c.update_scale, c.update_scale};
            ss.seed = (seed ^ kStreamSalt) + 7919ULL * b;
            auto batch = synth::planted_stream(ss);
            if (head) {
                // targets: what the head itself predicts from the final state
                std::vector<std::int64_t> t(c.tokens);
                const Eigen::MatrixXd& hL = batch.hidden.back();
                for (std::size_t i = 0; i < c.tokens; ++i) {
                    const Eigen::VectorXd z =
                        lens::readout_logits(*head, lens::normalize(*head, hL.row(static_cast<Eigen::Index>(i)).transpose()));
                    Eigen::Index arg = 0;
                    z.maxCoeff(&arg);
                    t[i] = static_cast<std::int64_t>(arg);
                }
                batch.targets = std::move(t);
            }
            m.batches.push_back(std::move(batch));
        }
    }
    return m;
}

}  // namespace

std::vector<fs::path> cmd_synth(const SynthConfig& c) {
    if (c.width < 2) throw ValidationError("width must be at least 2");
    if (c.k_percent <= 0 || c.k_percent > 100) throw ValidationError("k percent must lie in (0, 100]");
    if (trajectory::k_from_percent(c.k_percent, c.width) >= c.width)
        throw ValidationError("k percent leaves no room for rotation outside the subspace");
    for (double v : c.levels) check_unit(v, "cosine levels");
    for (double v : c.stream_cos) check_unit(v, "stream cosine levels");
    for (double v : c.stream_ratio)
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("stream ratios must be positive");
    if (!(c.update_scale > 0.0) || !std::isfinite(c.update_scale)) throw ValidationError("update scale must be positive");
    if (!(c.noise >= 0.0)) throw ValidationError("noise must be non-negative");
    if (!(c.spectrum_ratio > 0.0 && c.spectrum_ratio < 1.0)) throw ValidationError("spectrum ratio must lie in (0, 1)");
    if (c.tokens > 0 && c.batches == 0) throw ValidationError("batches must be positive");

    // Build everything before touching the filesystem, so a bad option never
    // leaves a half-written model behind.
    std::vector<std::pair<fs::path, synth::SyntheticModel>> models;
    if (c.depths.empty()) {
        if (c.depth < 6) throw ValidationError("depth must be at least 6");
        const std::size_t edge = std::max<std::size_t>(2, c.depth / 5);
        const auto [p, q] = c.plateau.value_or(std::make_pair(edge, c.depth - 1 - edge));
        synth::ProfileSpec ps;
        ps.depth = c.depth;
        ps.p = p;
        ps.q = q;
        ps.low1 = c.levels[0];
        ps.high = c.levels[1];
        ps.low2 = c.levels[2];
        ps.noise = c.noise;
        ps.seed = c.seed;
        synth::TrajectorySpec ts;
        ts.d = c.width;
        ts.depth = c.depth;
        ts.k = trajectory::k_from_percent(c.k_percent, c.width);
        auto cosines = synth::planted_profile(ps);
        for (double& v : cosines) v = std::clamp(v, 0.0, 1.0);  // jitter may leave [0, 1]
        ts.angles = synth::angles_from_cosines(cosines);
        ts.spectrum = synth::geometric_spectrum(c.width, 2.0, c.spectrum_ratio);
        ts.seed = c.seed;
        auto traj = synth::planted_trajectory(ts);
        models.emplace_back(c.out, assemble(c, c.model_id, c.depth, p, q, std::move(traj.lenses), c.seed));
    } else {
        if (c.plateau) throw ValidationError("plateau and depths are mutually exclusive; use the breakpoint rules");
        synth::SuiteOptions o;
        o.d = c.width;
        o.k_percent = c.k_percent;
        o.low1 = c.levels[0];
        o.high = c.levels[1];
        o.low2 = c.levels[2];
        o.spectrum_ratio = c.spectrum_ratio;
        o.seed = c.seed;
        auto suite = synth::planted_scaling_suite(c.depths, synth::DepthRule::parse(c.b1_rule),
                                                  synth::DepthRule::parse(c.b2_rule), o);
        for (std::size_t i = 0; i < suite.size(); ++i) {
            auto& s = suite[i];
            const std::string tag = "L" + std::to_string(s.depth);
            models.emplace_back(c.out / tag, assemble(c, c.model_id + "-" + tag, s.depth, s.b1, s.b2,
                                                      std::move(s.trajectory.lenses), s.trajectory.spec.seed));
        }
    }

    std::vector<fs::path> written;
    for (const auto& [dir, model] : models) {
        synth::write_model(model, dir);
        written.push_back(dir / "manifest.json");
    }
    return written;
}

}  // namespace grasslens::cli
