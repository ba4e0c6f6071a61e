#include "grasslens/manifest.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/tensor_io.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace grasslens::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
    return out + ")";
}

void warn_unknown(const json& obj, const std::set<std::string>& known, const std::string& where,
                  std::vector<std::string>& warnings) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) warnings.push_back("ignoring unknown key '" + it.key() + "' in " + where);
}

std::size_t positive(const json& doc, const char* key, const fs::path& src) {
    if (!doc.contains(key)) throw ValidationError(src.string() + ": missing '" + key + "'");
    const auto& v = doc.at(key);
    if (!v.is_number_integer() || v.get<long long>() <= 0)
        throw ValidationError(src.string() + ": '" + key + "' must be a positive integer");
    return v.get<std::size_t>();
}

std::string text(const json& v, const std::string& what, const fs::path& src) {
    if (!v.is_string()) throw ValidationError(src.string() + ": " + what + " must be a string path");
    return v.get<std::string>();
}

void check_shape(const fs::path& file, const std::vector<std::size_t>& expected, const std::string& what) {
    if (!fs::exists(file)) throw ValidationError(what + ": missing file " + file.string());
    TensorHeader h = read_tensor_header(file);
    if (h.shape != expected)
        throw ValidationError(what + ": shape mismatch in " + file.string() + ": expected " + shape_str(expected) +
                              ", found " + shape_str(h.shape));
}

std::vector<fs::path> path_list(const json& v, const std::string& what, const fs::path& base, const fs::path& src) {
    if (!v.is_array()) throw ValidationError(src.string() + ": " + what + " must be an array of paths");
    std::vector<fs::path> out;
    for (const auto& p : v) out.push_back(base / text(p, what, src));
    return out;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
    auto rel = p.lexically_relative(base);
    return (rel.empty() ? p : rel).generic_string();
}

}  // namespace

NormKind parse_norm_kind(const std::string& s) {
    if (s == "layernorm") return NormKind::LayerNorm;
    if (s == "rmsnorm") return NormKind::RmsNorm;
    if (s == "none") return NormKind::None;
    throw ValidationError("unknown norm kind '" + s + "' (expected layernorm, rmsnorm or none)");
}

const char* to_string(NormKind kind) {
    switch (kind) {
        case NormKind::LayerNorm: return "layernorm";
        case NormKind::RmsNorm: return "rmsnorm";
        case NormKind::None: return "none";
    }
    return "none";
}

ModelManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ValidationError(path.string() + ": manifest must be a JSON object");

    ModelManifest m;
    m.source = path;
    const fs::path base = path.parent_path();
    warn_unknown(doc,
                 {"schema_version", "model_id", "family", "depth", "width", "vocab", "norm", "unembedding", "lenses",
                  "activations"},
                 "manifest", m.warnings);

    m.model_id = doc.value("model_id", path.stem().string());
    m.family = doc.value("family", std::string{});
    m.depth = positive(doc, "depth", path);
    m.width = positive(doc, "width", path);
    if (m.depth < 3)
        throw ValidationError(path.string() + ": depth " + std::to_string(m.depth) +
                              " is too small; at least 3 layers are required");
    if (doc.contains("vocab")) m.vocab = positive(doc, "vocab", path);

    const std::size_t L = m.depth;
    const std::size_t d = m.width;

    if (!doc.contains("lenses") || !doc["lenses"].is_array())
        throw ValidationError(path.string() + ": 'lenses' must be an array");
    const auto& lenses = doc["lenses"];
    if (lenses.size() != L)
        throw ValidationError(path.string() + ": expected " + std::to_string(L) + " lens entries, found " +
                              std::to_string(lenses.size()));
    for (std::size_t l = 0; l < L; ++l) {
        const auto& e = lenses[l];
        const std::string where = "layer " + std::to_string(l + 1);
        if (!e.is_object() || !e.contains("A") || !e.contains("b"))
            throw ValidationError(path.string() + ": " + where + ": lens entry needs 'A' and 'b'");
        warn_unknown(e, {"A", "b"}, where + " lens entry", m.warnings);
        LensEntry entry{base / text(e["A"], where + " A", path), base / text(e["b"], where + " b", path)};
        check_shape(entry.matrix, {d, d}, where + " lens matrix");
        check_shape(entry.bias, {d}, where + " lens bias");
        m.lenses.push_back(std::move(entry));
    }

    if (doc.contains("unembedding")) {
        fs::path wu = base / text(doc["unembedding"], "unembedding", path);
        if (!fs::exists(wu)) throw ValidationError("unembedding: missing file " + wu.string());
        TensorHeader h = read_tensor_header(wu);
        if (h.shape.size() != 2 || h.shape[1] != d || (m.vocab && h.shape[0] != *m.vocab))
            throw ValidationError("unembedding: shape mismatch in " + wu.string() + ": expected (" +
                                  (m.vocab ? std::to_string(*m.vocab) : std::string("V")) + ", " +
                                  std::to_string(d) + "), found " + shape_str(h.shape));
        m.vocab = h.shape[0];
        m.unembedding = wu;
    }

    if (doc.contains("norm")) {
        const auto& n = doc["norm"];
        if (!n.is_object()) throw ValidationError(path.string() + ": 'norm' must be an object");
        warn_unknown(n, {"kind", "eps", "gamma", "beta"}, "norm", m.warnings);
        m.norm_kind = parse_norm_kind(n.value("kind", std::string("none")));
        if (n.contains("eps")) {
            if (!n["eps"].is_number() || n["eps"].get<double>() < 0.0)
                throw ValidationError(path.string() + ": norm eps must be a non-negative number");
            m.norm_eps = n["eps"].get<double>();
        }
        if (n.contains("gamma")) m.gamma = base / text(n["gamma"], "norm gamma", path);
        if (n.contains("beta")) m.beta = base / text(n["beta"], "norm beta", path);
    }
    const bool wants_gamma = m.norm_kind != NormKind::None;
    const bool wants_beta = m.norm_kind == NormKind::LayerNorm;
    if (wants_gamma != m.gamma.has_value())
        throw ValidationError(std::string("norm gamma: ") + (wants_gamma ? "required" : "not allowed") + " for " +
                              to_string(m.norm_kind));
    if (wants_beta != m.beta.has_value())
        throw ValidationError(std::string("norm beta: ") + (wants_beta ? "required" : "not allowed") + " for " +
                              to_string(m.norm_kind));
    if (m.gamma) check_shape(*m.gamma, {d}, "norm gamma");
    if (m.beta) check_shape(*m.beta, {d}, "norm beta");

    if (doc.contains("activations")) {
        const auto& acts = doc["activations"];
        if (!acts.is_array()) throw ValidationError(path.string() + ": 'activations' must be an array");
        for (std::size_t bi = 0; bi < acts.size(); ++bi) {
            const auto& a = acts[bi];
            const std::string where = "activation batch " + std::to_string(bi);
            if (!a.is_object() || !a.contains("hidden"))
                throw ValidationError(path.string() + ": " + where + " needs 'hidden'");
            warn_unknown(a, {"hidden", "mha", "ffn", "targets"}, where, m.warnings);
            ActivationBatchPaths batch;
            batch.hidden = path_list(a["hidden"], where + " hidden", base, path);
            if (batch.hidden.size() != L + 1)
                throw ValidationError(path.string() + ": " + where + ": expected " + std::to_string(L + 1) +
                                      " hidden-state files (h_0..h_L), found " + std::to_string(batch.hidden.size()));
            if (a.contains("mha") != a.contains("ffn"))
                throw ValidationError(path.string() + ": " + where + ": 'mha' and 'ffn' must be given together");
            if (a.contains("mha")) {
                batch.mha = path_list(a["mha"], where + " mha", base, path);
                batch.ffn = path_list(a["ffn"], where + " ffn", base, path);
                if (batch.mha.size() != L || batch.ffn.size() != L)
                    throw ValidationError(path.string() + ": " + where + ": expected " + std::to_string(L) +
                                          " mha and ffn files");
            }
            if (!fs::exists(batch.hidden[0]))
                throw ValidationError(where + " hidden 0: missing file " + batch.hidden[0].string());
            TensorHeader h0 = read_tensor_header(batch.hidden[0]);
            if (h0.shape.size() != 2 || h0.shape[1] != d)
                throw ValidationError(where + " hidden 0: shape mismatch in " + batch.hidden[0].string() +
                                      ": expected (n, " + std::to_string(d) + "), found " + shape_str(h0.shape));
            const std::size_t n = h0.shape[0];
            for (std::size_t l = 1; l <= L; ++l)
                check_shape(batch.hidden[l], {n, d}, where + " hidden layer " + std::to_string(l));
            for (std::size_t l = 0; l < batch.mha.size(); ++l) {
                check_shape(batch.mha[l], {n, d}, where + " mha layer " + std::to_string(l + 1));
                check_shape(batch.ffn[l], {n, d}, where + " ffn layer " + std::to_string(l + 1));
            }
            if (a.contains("targets")) {
                batch.targets = base / text(a["targets"], where + " targets", path);
                check_shape(*batch.targets, {n}, where + " targets");
            }
            batch.tokens = n;
            m.batches.push_back(std::move(batch));
        }
    }
    return m;
}

void save_manifest(const ModelManifest& m, const fs::path& path) {
    const fs::path base = path.parent_path();
    json doc;
    doc["schema_version"] = 1;
    doc["model_id"] = m.model_id;
    if (!m.family.empty()) doc["family"] = m.family;
    doc["depth"] = m.depth;
    doc["width"] = m.width;
    if (m.vocab) doc["vocab"] = *m.vocab;
    json lenses = json::array();
    for (const auto& e : m.lenses) lenses.push_back({{"A", relative_to(e.matrix, base)}, {"b", relative_to(e.bias, base)}});
    doc["lenses"] = lenses;
    if (m.unembedding) doc["unembedding"] = relative_to(*m.unembedding, base);
    if (m.unembedding || m.norm_kind != NormKind::None) {
        json n{{"kind", to_string(m.norm_kind)}, {"eps", m.norm_eps}};
        if (m.gamma) n["gamma"] = relative_to(*m.gamma, base);
        if (m.beta) n["beta"] = relative_to(*m.beta, base);
        doc["norm"] = n;
    }
    if (!m.batches.empty()) {
        json acts = json::array();
        for (const auto& b : m.batches) {
            auto rel = [&](const std::vector<fs::path>& ps) {
                json arr = json::array();
                for (const auto& p : ps) arr.push_back(relative_to(p, base));
                return arr;
            };
            json entry{{"hidden", rel(b.hidden)}};
            if (!b.mha.empty()) {
                entry["mha"] = rel(b.mha);
                entry["ffn"] = rel(b.ffn);
            }
            if (b.targets) entry["targets"] = relative_to(*b.targets, base);
            acts.push_back(entry);
        }
        doc["activations"] = acts;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot write manifest " + path.string());
    out << doc.dump(2) << "\n";
}

Eigen::MatrixXd load_lens_matrix(const ModelManifest& m, std::size_t layer) {
    if (layer < 1 || layer > m.lenses.size()) throw ValidationError("layer index out of range");
    return read_tensor(m.lenses[layer - 1].matrix).to_matrix();
}

Eigen::VectorXd load_lens_bias(const ModelManifest& m, std::size_t layer) {
    if (layer < 1 || layer > m.lenses.size()) throw ValidationError("layer index out of range");
    return read_tensor(m.lenses[layer - 1].bias).to_vector();
}

std::vector<Eigen::MatrixXd> load_lens_stack(const ModelManifest& m) {
    std::vector<Eigen::MatrixXd> stack;
    stack.reserve(m.depth);
    for (std::size_t l = 1; l <= m.depth; ++l) stack.push_back(load_lens_matrix(m, l));
    return stack;
}

ActivationBatch load_activation_batch(const ModelManifest& m, std::size_t batch) {
    if (batch >= m.batches.size()) throw ValidationError("activation batch index out of range");
    const auto& p = m.batches[batch];
    ActivationBatch out;
    for (const auto& f : p.hidden) out.hidden.push_back(read_tensor(f).to_matrix());
    for (const auto& f : p.mha) out.mha.push_back(read_tensor(f).to_matrix());
    for (const auto& f : p.ffn) out.ffn.push_back(read_tensor(f).to_matrix());
    if (p.targets) {
        auto raw = read_tensor(*p.targets).as_doubles();
        std::vector<std::int64_t> ids;
        ids.reserve(raw.size());
        for (double v : raw) {
            if (!(v >= 0.0) || v != std::floor(v) || (m.vocab && v >= static_cast<double>(*m.vocab)))
                throw ValidationError(p.targets->string() + ": target ids must be integers in [0, vocab)");
            ids.push_back(static_cast<std::int64_t>(v));
        }
        out.targets = std::move(ids);
    }
    return out;
}

double residual_identity_error(const ActivationBatch& batch) {
    if (!batch.has_updates()) return 0.0;
    double worst = 0.0;
    for (std::size_t l = 1; l < batch.hidden.size(); ++l) {
        // summed in forward order, so a stream built as (h + mha) + ffn checks out exactly
        const Eigen::MatrixXd r = batch.hidden[l] - ((batch.hidden[l - 1] + batch.mha[l - 1]) + batch.ffn[l - 1]);
        if (r.size()) worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace grasslens::io
