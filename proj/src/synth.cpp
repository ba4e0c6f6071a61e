#include "grasslens/synth.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/tensor_io.hpp"
#include "grasslens/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace grasslens::synth {

namespace fs = std::filesystem;

Eigen::MatrixXd gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Eigen::MatrixXd G(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    // row-major fill order so the stream is language independent
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = rng.normal();
    return G;
}

Eigen::MatrixXd random_orthogonal(Rng& rng, std::size_t d) {
    const Eigen::MatrixXd G = gaussian_matrix(rng, d, d);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < Q.cols(); ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    return Q;
}

std::vector<double> geometric_spectrum(std::size_t d, double top, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0) || !(top > 0.0))
        throw ValidationError("geometric spectrum needs top > 0 and ratio in (0, 1)");
    std::vector<double> s(d);
    double v = top;
    for (auto& x : s) {
        x = v;
        v *= ratio;
    }
    return s;
}

PlantedTrajectory planted_trajectory(const TrajectorySpec& spec) {
    const std::size_t d = spec.d;
    const std::size_t L = spec.depth;
    const std::size_t k = spec.k;
    if (d < 2 || L < 2) throw ValidationError("planted trajectory needs d >= 2 and depth >= 2");
    if (k < 1 || k >= d)
        throw ValidationError("planted trajectory needs 1 <= k < d (a direction outside the subspace to rotate into)");
    if (spec.angles.size() != L - 1)
        throw ValidationError("angle schedule must have depth - 1 = " + std::to_string(L - 1) + " entries");
    for (double a : spec.angles)
        if (!(a >= 0.0 && a <= std::numbers::pi / 2.0)) throw ValidationError("angles must lie in [0, pi/2]");
    if (spec.spectrum.size() != d) throw ValidationError("spectrum must have d entries");
    for (std::size_t i = 0; i < d; ++i) {
        if (!(spec.spectrum[i] >= 0.0)) throw ValidationError("spectrum must be non-negative");
        if (i && spec.spectrum[i] > spec.spectrum[i - 1]) throw ValidationError("spectrum must be non-increasing");
    }
    if (!(spec.spectrum[k - 1] - spec.spectrum[k] > 1e-12 * std::max(1.0, spec.spectrum[0])))
        throw ValidationError("spectrum has no gap at k=" + std::to_string(k));
    const std::size_t in = spec.in_direction;
    const std::size_t out = spec.out_direction.value_or(d - 1);
    if (in >= k || out < k || out >= d)
        throw ValidationError("rotation plane must pair a direction inside the top-k subspace with one outside");

    Rng rng(spec.seed);
    PlantedTrajectory t;
    t.spec = spec;
    const Eigen::Map<const Eigen::VectorXd> sigma(spec.spectrum.data(), static_cast<Eigen::Index>(d));
    Eigen::MatrixXd V = random_orthogonal(rng, d);
    const auto ci = static_cast<Eigen::Index>(in);
    const auto co = static_cast<Eigen::Index>(out);
    for (std::size_t l = 0; l < L; ++l) {
        if (l > 0) {
            const double phi = spec.angles[l - 1];
            const Eigen::VectorXd vi = V.col(ci);
            const Eigen::VectorXd vo = V.col(co);
            V.col(ci) = std::cos(phi) * vi + std::sin(phi) * vo;
            V.col(co) = -std::sin(phi) * vi + std::cos(phi) * vo;
        }
        const Eigen::MatrixXd U = random_orthogonal(rng, d);
        t.lenses.push_back(U * sigma.asDiagonal() * V.transpose());
        t.right_bases.push_back(V);
    }
    for (double phi : spec.angles)
        t.ground_truth_rss.push_back((static_cast<double>(k - 1) + std::cos(phi)) / static_cast<double>(k));
    return t;
}

std::vector<double> planted_profile(const ProfileSpec& s) {
    const std::size_t L = s.depth;
    if (L < 5 || !(1 < s.p && s.p <= s.q && s.q < L - 1))
        throw ValidationError("planted profile needs 1 < p <= q < L-1 (got p=" + std::to_string(s.p) +
                              ", q=" + std::to_string(s.q) + ", L=" + std::to_string(L) + ")");
    if (!(s.noise >= 0.0)) throw ValidationError("noise amplitude must be >= 0");
    Rng rng(s.seed);
    std::vector<double> v(L - 1);
    for (std::size_t l = 1; l <= L - 1; ++l) {
        double y;
        if (l <= s.p)
            y = std::lerp(s.low1, s.high, static_cast<double>(l - 1) / static_cast<double>(s.p - 1));
        else if (l <= s.q)
            y = s.high;
        else
            y = std::lerp(s.high, s.low2, static_cast<double>(l - s.q) / static_cast<double>(L - 1 - s.q));
        if (s.noise > 0.0) y += rng.uniform(-s.noise, s.noise);
        v[l - 1] = y;
    }
    return v;
}

std::vector<double> angles_from_cosines(const std::vector<double>& cosines) {
    std::vector<double> a;
    a.reserve(cosines.size());
    for (double c : cosines) {
        if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("target cosines must lie in [0, 1]");
        a.push_back(std::acos(c));
    }
    return a;
}

io::ActivationBatch planted_stream(const StreamSpec& s) {
    if (s.d < 2 || s.depth < 3 || s.tokens < 1) throw ValidationError("planted stream needs d >= 2, depth >= 3, n >= 1");
    if (!(1 <= s.p && s.p < s.q && s.q <= s.depth - 1))
        throw ValidationError("planted stream needs 1 <= p < q <= L-1");
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(s.cos_levels[i] >= 0.0 && s.cos_levels[i] <= 1.0))
            throw ValidationError("infeasible target: cosine levels must lie in [0, 1]");
        if (!(s.ffn_mha_ratio[i] > 0.0) || !std::isfinite(s.ffn_mha_ratio[i]))
            throw ValidationError("infeasible target: FFN/MHA ratios must be positive");
        if (!(s.update_scale[i] > 0.0)) throw ValidationError("infeasible target: update scale must be positive");
    }
    if (!s.hidden_spectrum.empty() && s.hidden_spectrum.size() != s.d)
        throw ValidationError("hidden spectrum must have d entries");

    Rng rng(s.seed);
    const auto n = static_cast<Eigen::Index>(s.tokens);
    const auto d = static_cast<Eigen::Index>(s.d);
    Eigen::VectorXd shape = Eigen::VectorXd::Ones(d);
    if (!s.hidden_spectrum.empty())
        shape = Eigen::Map<const Eigen::VectorXd>(s.hidden_spectrum.data(), d);
    const Eigen::MatrixXd W = random_orthogonal(rng, s.d);
    Eigen::MatrixXd H = gaussian_matrix(rng, s.tokens, s.d) * shape.asDiagonal() * W.transpose();

    io::ActivationBatch batch;
    batch.hidden.push_back(H);
    for (std::size_t l = 1; l <= s.depth; ++l) {
        const auto ph = static_cast<std::size_t>(s.phase_of(l));
        const double c = s.cos_levels[ph];
        const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
        const double rho = s.ffn_mha_ratio[ph];
        Eigen::MatrixXd mha(n, d);
        Eigen::MatrixXd ffn(n, d);
        const Eigen::MatrixXd& prev = batch.hidden.back();
        for (Eigen::Index t = 0; t < n; ++t) {
            const Eigen::VectorXd h = prev.row(t).transpose();
            const double hn = h.norm();
            if (hn == 0.0) throw ValidationError("planted stream produced a zero hidden state");
            const Eigen::VectorXd hu = h / hn;
            Eigen::VectorXd r(d);
            for (Eigen::Index j = 0; j < d; ++j) r(j) = rng.normal();
            // two Gram-Schmidt passes keep r orthogonal to h to rounding
            r -= hu.dot(r) * hu;
            r -= hu.dot(r) * hu;
            r.normalize();
            const Eigen::VectorXd delta = s.update_scale[ph] * hn * (c * hu + sn * r);
            mha.row(t) = (delta / (1.0 + rho)).transpose();
            ffn.row(t) = (delta * (rho / (1.0 + rho))).transpose();
        }
        batch.hidden.push_back(prev + mha + ffn);
        batch.mha.push_back(std::move(mha));
        batch.ffn.push_back(std::move(ffn));
    }
    return batch;
}

std::size_t DepthRule::at(std::size_t depth) const {
    if (kind == Kind::Constant) return static_cast<std::size_t>(value);
    return static_cast<std::size_t>(std::floor(value * static_cast<double>(depth)));
}

DepthRule DepthRule::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ValidationError("depth rule '" + text + "' must be const:N or frac:F");
    const std::string head = text.substr(0, colon);
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ValidationError("depth rule '" + text + "' has a malformed number");
    }
    DepthRule r;
    r.value = v;
    if (head == "const") {
        if (v < 1.0 || v != std::floor(v)) throw ValidationError("const rule needs a positive integer");
        r.kind = Kind::Constant;
    } else if (head == "frac") {
        if (!(v > 0.0 && v < 1.0)) throw ValidationError("frac rule needs a value in (0, 1)");
        r.kind = Kind::Fraction;
    } else {
        throw ValidationError("depth rule '" + text + "' must be const:N or frac:F");
    }
    return r;
}

std::string DepthRule::to_string() const {
    std::ostringstream os;
    os << (kind == Kind::Constant ? "const:" : "frac:") << value;
    return os.str();
}

std::vector<SuiteModel> planted_scaling_suite(const std::vector<std::size_t>& depths, const DepthRule& b1_rule,
                                              const DepthRule& b2_rule, const SuiteOptions& o) {
    if (depths.empty()) throw ValidationError("scaling suite needs at least one depth");
    std::vector<SuiteModel> suite;
    for (std::size_t i = 0; i < depths.size(); ++i) {
        const std::size_t L = depths[i];
        const std::size_t b1 = b1_rule.at(L);
        const std::size_t b2 = b2_rule.at(L);
        const std::size_t m = L / 2;
        if (L < 6 || !(1 < b1 && b1 <= m && m <= b2 && b2 < L - 1 && b1 < b2))
            throw ValidationError("invalid rule: breakpoints (" + std::to_string(b1) + ", " + std::to_string(b2) +
                                  ") are not valid for depth " + std::to_string(L) +
                                  " (need 1 < b1 <= L/2 <= b2 < L-1)");
        ProfileSpec ps;
        ps.depth = L;
        ps.p = b1;
        ps.q = b2;
        ps.low1 = o.low1;
        ps.high = o.high;
        ps.low2 = o.low2;
        TrajectorySpec ts;
        ts.d = o.d;
        ts.depth = L;
        ts.k = trajectory::k_from_percent(o.k_percent, o.d);
        ts.angles = angles_from_cosines(planted_profile(ps));
        ts.spectrum = geometric_spectrum(o.d, 2.0, o.spectrum_ratio);
        ts.seed = o.seed + 1000003ULL * (i + 1);
        suite.push_back({L, b1, b2, planted_trajectory(ts)});
    }
    return suite;
}

std::vector<Eigen::VectorXd> random_biases(Rng& rng, std::size_t depth, std::size_t d, double scale) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t l = 0; l < depth; ++l) {
        Eigen::VectorXd b(static_cast<Eigen::Index>(d));
        for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = scale * rng.normal();
        out.push_back(std::move(b));
    }
    return out;
}

io::ModelManifest write_model(const SyntheticModel& model, const fs::path& dir) {
    if (model.lenses.size() != model.biases.size()) throw ValidationError("one bias per lens is required");
    if (model.lenses.empty()) throw ValidationError("model has no lenses");
    fs::create_directories(dir / "lens");
    io::ModelManifest m;
    m.model_id = model.model_id;
    m.family = model.family;
    m.depth = model.lenses.size();
    m.width = static_cast<std::size_t>(model.lenses.front().rows());
    auto name = [](const std::string& stem, std::size_t i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_%03zu.npy", stem.c_str(), i);
        return std::string(buf);
    };
    for (std::size_t l = 0; l < model.lenses.size(); ++l) {
        io::LensEntry e{dir / "lens" / name("A", l + 1), dir / "lens" / name("b", l + 1)};
        io::write_tensor(io::TensorFile::from_matrix(model.lenses[l]), e.matrix);
        io::write_tensor(io::TensorFile::from_vector(model.biases[l]), e.bias);
        m.lenses.push_back(e);
    }
    if (model.unembedding) {
        m.unembedding = dir / "unembedding.npy";
        io::write_tensor(io::TensorFile::from_matrix(*model.unembedding), *m.unembedding);
        m.vocab = static_cast<std::size_t>(model.unembedding->rows());
    }
    m.norm_kind = model.norm;
    m.norm_eps = model.eps;
    if (model.gamma) {
        m.gamma = dir / "norm_gamma.npy";
        io::write_tensor(io::TensorFile::from_vector(*model.gamma), *m.gamma);
    }
    if (model.beta) {
        m.beta = dir / "norm_beta.npy";
        io::write_tensor(io::TensorFile::from_vector(*model.beta), *m.beta);
    }
    for (std::size_t b = 0; b < model.batches.size(); ++b) {
        const auto& batch = model.batches[b];
        const fs::path bdir = dir / ("acts_" + std::to_string(b));
        fs::create_directories(bdir);
        io::ActivationBatchPaths paths;
        for (std::size_t l = 0; l < batch.hidden.size(); ++l) {
            paths.hidden.push_back(bdir / name("hidden", l));
            io::write_tensor(io::TensorFile::from_matrix(batch.hidden[l]), paths.hidden.back());
        }
        for (std::size_t l = 0; l < batch.mha.size(); ++l) {
            paths.mha.push_back(bdir / name("mha", l + 1));
            paths.ffn.push_back(bdir / name("ffn", l + 1));
            io::write_tensor(io::TensorFile::from_matrix(batch.mha[l]), paths.mha.back());
            io::write_tensor(io::TensorFile::from_matrix(batch.ffn[l]), paths.ffn.back());
        }
        if (batch.targets) {
            std::vector<double> ids(batch.targets->begin(), batch.targets->end());
            paths.targets = bdir / "targets.npy";
            const std::size_t n = ids.size();
            io::write_tensor(io::TensorFile({n}, std::move(ids)), *paths.targets);
        }
        m.batches.push_back(std::move(paths));
    }
    const fs::path manifest_path = dir / "manifest.json";
    io::save_manifest(m, manifest_path);
    return io::load_manifest(manifest_path);
}

}  // namespace grasslens::synth
