#include "grasslens/cli.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/fitting.hpp"
#include "grasslens/lens.hpp"
#include "grasslens/regression.hpp"
#include "grasslens/stream.hpp"
#include "grasslens/tensor_io.hpp"

#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace grasslens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kResidualTolerance = 1e-6;

std::string pct_tag(int pct) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "k%03d", pct);
    return buf;
}

std::string layer_tag(std::size_t l) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "L%03zu", l);
    return buf;
}

json header(const char* kind, const io::ModelManifest& m) {
    return {{"schema", std::string("grasslens.") + kind}, {"schema_version", report::kSchemaVersion},
            {"model_id", m.model_id}, {"family", m.family}, {"depth", m.depth}, {"width", m.width}};
}

io::ModelManifest load(const fs::path& p) {
    auto m = io::load_manifest(p);
    for (const auto& w : m.warnings) report::warn(p.string() + ": " + w);
    return m;
}

// Output directory per manifest: the configured directory itself for a
// single manifest, one subdirectory per model otherwise.
fs::path model_out(const RunConfig& c, const io::ModelManifest& m) {
    return c.manifests.size() == 1 ? c.out : c.out / m.model_id;
}

json breakpoints_json(const phases::Breakpoints& b) {
    return {{"b1", b.b1}, {"b2", b.b2}, {"degenerate_first", b.degenerate_first},
            {"degenerate_second", b.degenerate_second}, {"advanced", b.advanced}};
}

double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

std::string pareto_svg(const std::vector<trajectory::ParetoPoint>& pts, const std::string& title) {
    const double w = 480, h = 360, pad = 48;
    auto sx = [&](double e) { return pad + e * (w - 2 * pad); };
    auto sy = [&](double v) { return h - pad - v * (h - 2 * pad); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
       << w << " " << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-size=\"12\">retained energy E(k)</text>\n";
    os << "<text x=\"14\" y=\"" << h / 2 << "\" transform=\"rotate(-90 14 " << h / 2
       << ")\" text-anchor=\"middle\" font-size=\"12\">Visibility@k</text>\n";
    std::string path;
    for (const auto& p : pts) {
        const double x = sx(p.energy), y = sy(p.visibility);
        path += (path.empty() ? "M" : " L") + report::number(x) + " " + report::number(y);
        os << "<circle cx=\"" << report::number(x) << "\" cy=\"" << report::number(y)
           << "\" r=\"4\" fill=\"steelblue\"/>\n";
        os << "<text x=\"" << report::number(x + 6) << "\" y=\"" << report::number(y - 6) << "\" font-size=\"10\">"
           << p.k_percent << "%</text>\n";
    }
    if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"steelblue\"/>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace

PhaseAnalysis analyze_phases(const io::ModelManifest& m, const RunConfig& c, SubspaceStore& store) {
    PhaseAnalysis a;
    a.model_id = m.model_id;
    a.family = m.family;
    a.depth = m.depth;
    a.width = m.width;
    std::map<int, phases::Breakpoints> per_k;
    for (int pct : c.k_grid) {
        const std::size_t k = trajectory::k_from_percent(pct, m.width);
        const auto subs = store.subspaces(k);
        auto profile = trajectory::rss_profile(subs, pct);
        auto smooth = phases::gaussian_smooth(profile.values, c.sigma);
        per_k[pct] = phases::kneedle_breakpoints(smooth);
        a.profiles[pct] = std::move(profile);
        a.smoothed[pct] = std::move(smooth);
    }
    a.consensus = phases::consensus_breakpoints(per_k, c.consensus);
    a.decomposition = phases::decompose_phases(a.consensus.b1, a.consensus.b2, m.depth);
    return a;
}

void cmd_decompose(const RunConfig& c) {
    c.validate();
    for (const auto& mp : c.manifests) {
        const auto m = load(mp);
        const fs::path out = model_out(c, m);
        fs::create_directories(out / "subspaces");
        fs::create_directories(out / "spectra");
        SubspaceStore store(m, c.cache_dir);
        json doc = header("decompose", m);
        json entries = json::array();
        json spectra = json::array();
        for (std::size_t l = 1; l <= m.depth; ++l) {
            const std::string sname = "spectra/" + layer_tag(l) + ".npy";
            io::write_tensor(io::TensorFile::from_vector(store.spectrum(l)), out / sname);
            spectra.push_back({{"layer", l}, {"file", sname}});
            for (int pct : c.k_grid) {
                const std::size_t k = trajectory::k_from_percent(pct, m.width);
                const auto s = store.subspace(l, k);
                const std::string name = "subspaces/" + layer_tag(l) + "_" + pct_tag(pct) + ".npy";
                io::write_tensor(io::TensorFile::from_matrix(s.basis), out / name);
                entries.push_back({{"layer", l}, {"k_percent", pct}, {"k", k}, {"file", name},
                                   {"degenerate", s.degenerate}});
            }
        }
        doc["k_grid"] = c.k_grid;
        doc["subspaces"] = entries;
        doc["spectra"] = spectra;
        report::write_json(out / "decompose.json", doc);
    }
}

void cmd_rss(const RunConfig& c) {
    c.validate();
    for (const auto& mp : c.manifests) {
        const auto m = load(mp);
        const fs::path out = model_out(c, m);
        fs::create_directories(out);
        SubspaceStore store(m, c.cache_dir);
        json doc = header("rss", m);
        json res = json::array();
        std::optional<report::CsvWriter> profiles;
        if (c.wants(Format::Csv)) profiles.emplace(out / "rss_profiles.csv", std::vector<std::string>{"k_percent", "k", "layer", "rss"});
        for (int pct : c.k_grid) {
            const std::size_t k = trajectory::k_from_percent(pct, m.width);
            const auto subs = store.subspaces(k);
            const auto prof = trajectory::rss_profile(subs, pct);
            const auto sim = trajectory::pairwise_matrix(subs);
            const double vis = trajectory::visibility(sim);
            if (profiles)
                for (std::size_t l = 0; l < prof.values.size(); ++l) {
                    profiles->cell(pct).cell(k).cell(l + 1).cell(prof.values[l]);
                    profiles->end_row();
                }
            if (c.wants(Format::Csv)) {
                report::CsvWriter pw(out / ("pairwise_" + pct_tag(pct) + ".csv"), {"i", "j", "rss"});
                for (Eigen::Index i = 0; i < sim.M.rows(); ++i)
                    for (Eigen::Index j = 0; j < sim.M.cols(); ++j) {
                        pw.cell(static_cast<std::size_t>(i + 1)).cell(static_cast<std::size_t>(j + 1)).cell(sim.M(i, j));
                        pw.end_row();
                    }
            }
            json matrix = json::array();
            for (Eigen::Index i = 0; i < sim.M.rows(); ++i) {
                std::vector<double> row(sim.M.cols());
                for (Eigen::Index j = 0; j < sim.M.cols(); ++j) row[static_cast<std::size_t>(j)] = sim.M(i, j);
                matrix.push_back(report::array(row));
            }
            res.push_back({{"k_percent", pct}, {"k", k}, {"profile", report::array(prof.values)},
                           {"visibility", report::value(vis)}, {"degenerate", prof.degenerate}, {"pairwise", matrix}});
        }
        if (profiles) profiles->close();
        doc["resolutions"] = res;
        if (c.wants(Format::Json)) report::write_json(out / "rss.json", doc);
    }
}

void cmd_phases(const RunConfig& c) {
    c.validate();
    for (const auto& mp : c.manifests) {
        const auto m = load(mp);
        const fs::path out = model_out(c, m);
        fs::create_directories(out);
        SubspaceStore store(m, c.cache_dir);
        const auto a = analyze_phases(m, c, store);
        const auto& d = a.decomposition;

        json doc = header("phases", m);
        doc["sigma"] = c.sigma;
        doc["k_grid"] = c.k_grid;
        doc["consensus_regime"] = c.consensus;
        doc["breakpoints"] = {{"b1", a.consensus.b1}, {"b2", a.consensus.b2}, {"reordered", a.consensus.reordered},
                              {"depth_b1", d.depth_b1}, {"depth_b2", d.depth_b2}};
        doc["phases"] = {{"widths", d.widths}, {"fractions", {d.fractions[0], d.fractions[1], d.fractions[2]}}};

        json per_k = json::array();
        std::vector<double> out_b1, out_b2, all_b1, all_b2;
        for (const auto& [pct, bp] : a.consensus.per_k) {
            const bool in_regime = std::find(c.consensus.begin(), c.consensus.end(), pct) != c.consensus.end();
            json e = breakpoints_json(bp);
            e["k_percent"] = pct;
            e["k"] = a.profiles.at(pct).k;
            e["in_regime"] = in_regime;
            e["profile"] = report::array(a.profiles.at(pct).values);
            e["smoothed"] = report::array(a.smoothed.at(pct));
            per_k.push_back(e);
            const double L = static_cast<double>(m.depth);
            all_b1.push_back(static_cast<double>(bp.b1) / L);
            all_b2.push_back(static_cast<double>(bp.b2) / L);
            if (!in_regime) {
                out_b1.push_back(static_cast<double>(bp.b1) / L);
                out_b2.push_back(static_cast<double>(bp.b2) / L);
            }
        }
        doc["per_resolution"] = per_k;
        auto max_dev = [](const std::vector<double>& v, double ref) {
            double w = 0.0;
            for (double x : v) w = std::max(w, std::abs(x - ref));
            return w;
        };
        doc["robustness"] = {{"out_of_regime_count", out_b1.size()},
                             {"std_depth_b1_all", population_std(all_b1)},
                             {"std_depth_b2_all", population_std(all_b2)},
                             {"std_depth_b1_out_of_regime", population_std(out_b1)},
                             {"std_depth_b2_out_of_regime", population_std(out_b2)},
                             {"max_abs_dev_depth_b1_out_of_regime", max_dev(out_b1, d.depth_b1)},
                             {"max_abs_dev_depth_b2_out_of_regime", max_dev(out_b2, d.depth_b2)}};

        json fits = json::array();
        std::optional<report::CsvWriter> fcsv;
        if (c.wants(Format::Csv))
            fcsv.emplace(out / "fits.csv", std::vector<std::string>{"k_percent", "family", "r_squared", "converged",
                                                                    "amplitude", "offset", "params", "error"});
        for (const auto& [pct, prof] : a.profiles) {
            json fam = json::array();
            for (const auto& f : fitting::fit_all_families(prof.values)) {
                json params = json::object();
                const auto names = fitting::parameter_names(f.family);
                std::string ptext;
                for (std::size_t i = 0; i < f.params.size(); ++i) {
                    params[names[i]] = report::value(f.params[i]);
                    ptext += (i ? ";" : "") + names[i] + "=" + report::number(f.params[i]);
                }
                fam.push_back({{"family", fitting::to_string(f.family)}, {"r_squared", report::value(f.r_squared)},
                               {"r_squared_defined", f.r_squared.has_value()}, {"converged", f.converged},
                               {"constant_profile", f.constant_profile}, {"amplitude", report::value(f.amplitude)},
                               {"offset", report::value(f.offset)}, {"params", params}, {"error", f.error}});
                if (fcsv) {
                    fcsv->cell(pct).cell(std::string(fitting::to_string(f.family))).cell(f.r_squared).cell(f.converged)
                        .cell(f.amplitude).cell(f.offset).cell(ptext).cell(f.error);
                    fcsv->end_row();
                }
            }
            fits.push_back({{"k_percent", pct}, {"fits", fam}});
        }
        doc["fits"] = fits;

        if (c.wants(Format::Csv)) {
            report::CsvWriter bw(out / "breakpoints.csv",
                                 {"k_percent", "k", "b1", "b2", "in_regime", "degenerate_first", "degenerate_second"});
            for (const auto& [pct, bp] : a.consensus.per_k) {
                const bool in_regime = std::find(c.consensus.begin(), c.consensus.end(), pct) != c.consensus.end();
                bw.cell(pct).cell(a.profiles.at(pct).k).cell(bp.b1).cell(bp.b2).cell(in_regime)
                    .cell(bp.degenerate_first).cell(bp.degenerate_second);
                bw.end_row();
            }
            report::CsvWriter sw(out / "rss_smoothed.csv", {"k_percent", "layer", "rss", "smoothed"});
            for (const auto& [pct, prof] : a.profiles)
                for (std::size_t l = 0; l < prof.values.size(); ++l) {
                    sw.cell(pct).cell(l + 1).cell(prof.values[l]).cell(a.smoothed.at(pct)[l]);
                    sw.end_row();
                }
        }
        if (c.wants(Format::Json)) report::write_json(out / "phases.json", doc);
    }
}

void cmd_pareto(const RunConfig& c) {
    c.validate();
    for (const auto& mp : c.manifests) {
        const auto m = load(mp);
        const fs::path out = model_out(c, m);
        fs::create_directories(out);
        SubspaceStore store(m, c.cache_dir);
        const auto spectra = store.spectra();
        std::vector<trajectory::ParetoPoint> pts;
        json zero_layers = json::array();
        for (int pct : c.k_grid) {
            trajectory::ParetoPoint p;
            p.k_percent = pct;
            p.k = trajectory::k_from_percent(pct, m.width);
            const auto subs = store.subspaces(p.k);
            p.visibility = trajectory::visibility(trajectory::pairwise_matrix(subs));
            const auto e = trajectory::spectral_energy(spectra, p.k);
            p.energy = e.energy;
            if (zero_layers.empty())
                for (auto l : e.zero_layers) zero_layers.push_back(l);
            for (const auto& s : subs) p.degenerate = p.degenerate || s.degenerate;
            pts.push_back(p);
        }
        if (c.wants(Format::Csv)) {
            report::CsvWriter w(out / "pareto.csv", {"k_percent", "k", "visibility", "energy", "degenerate"});
            for (const auto& p : pts) {
                w.cell(p.k_percent).cell(p.k).cell(p.visibility).cell(p.energy).cell(p.degenerate);
                w.end_row();
            }
        }
        if (c.wants(Format::Json)) {
            json doc = header("pareto", m);
            json arr = json::array();
            for (const auto& p : pts)
                arr.push_back({{"k_percent", p.k_percent}, {"k", p.k}, {"visibility", report::value(p.visibility)},
                               {"energy", report::value(p.energy)}, {"degenerate", p.degenerate}});
            doc["points"] = arr;
            doc["zero_spectrum_layers"] = zero_layers;
            report::write_json(out / "pareto.json", doc);
        }
        if (c.wants(Format::Svg)) report::write_text(out / "pareto.svg", pareto_svg(pts, m.model_id));
    }
}

void cmd_stream(const RunConfig& c) {
    c.validate();
    for (const auto& mp : c.manifests) {
        const auto m = load(mp);
        if (m.batches.empty()) throw ValidationError(mp.string() + ": manifest has no activation dumps");
        const fs::path out = model_out(c, m);
        fs::create_directories(out);
        std::vector<std::string> warnings;

        phases::PhaseDecomposition decomposition;
        std::string phase_source;
        if (c.breakpoints) {
            decomposition = phases::decompose_phases(c.breakpoints->first, c.breakpoints->second, m.depth);
            phase_source = "config";
        } else {
            SubspaceStore store(m, c.cache_dir);
            decomposition = analyze_phases(m, c, store).decomposition;
            phase_source = "detected";
        }

        const bool have_targets =
            m.has_head() && std::all_of(m.batches.begin(), m.batches.end(), [](const auto& b) { return b.targets.has_value(); });
        std::optional<lens::UnembeddingHead> head;
        std::vector<lens::LensMap> lenses;
        if (have_targets) {
            head = lens::load_head(m);
            for (std::size_t l = 1; l <= m.depth; ++l) lenses.push_back(lens::load_lens(m, l));
        }
        std::vector<lens::HitCounts> lens_hits(m.depth), logit_hits(m.depth);
        const auto zero = lens::LensMap::zero(m.width);

        stream::StreamAccumulator acc(m.depth, c.batch_size);
        for (std::size_t b = 0; b < m.batches.size(); ++b) {
            const auto batch = io::load_activation_batch(m, b);
            const double err = batch.has_updates() ? io::residual_identity_error(batch) : 0.0;
            if (err > kResidualTolerance) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "batch %zu violates h_l = h_{l-1} + mha_l + ffn_l (max error %.3g)", b, err);
                warnings.emplace_back(buf);
                report::warn(mp.string() + ": " + buf);
            }
            acc.add(batch);
            if (have_targets)
                for (std::size_t l = 1; l <= m.depth; ++l) {
                    lens_hits[l - 1].merge(lens::hit_counts(*head, lenses[l - 1], batch.hidden[l], *batch.targets, c.hit_ks));
                    logit_hits[l - 1].merge(lens::hit_counts(*head, zero, batch.hidden[l], *batch.targets, c.hit_ks));
                }
        }
        const auto rep = acc.report();
        const auto agg = stream::phase_aggregate(rep, decomposition);

        json doc = header("stream", m);
        doc["batch_size"] = rep.batch_size;
        doc["has_sublayer_updates"] = rep.has_sublayer_updates;
        doc["phase_source"] = phase_source;
        doc["breakpoints"] = {{"b1", decomposition.b1}, {"b2", decomposition.b2}};
        json layers = json::array();
        for (std::size_t l = 1; l <= m.depth; ++l) {
            const auto& lm = rep.layers[l - 1];
            json e{{"layer", l}, {"tokens", lm.tokens}, {"rank_batches", lm.rank_batches},
                   {"skipped_alignment", lm.skipped_alignment}, {"skipped_ratio", lm.skipped_ratio},
                   {"zero_rank_batches", lm.zero_rank_batches}, {"phase", decomposition.phase_of(l) + 1}};
            for (auto metric : stream::kAllMetrics) e[stream::to_string(metric)] = report::value(stream::metric_value(lm, metric));
            if (have_targets) {
                auto hits = [&](const lens::HitCounts& hc) {
                    const auto r = lens::HitReport::from_counts(hc);
                    json h = json::object();
                    for (const auto& [k, v] : r.rate) h["hit@" + std::to_string(k)] = v;
                    h["ratio_5_1"] = report::value(r.ratio_5_1);
                    h["ratio_5_1_defined"] = r.ratio_5_1.has_value();
                    return h;
                };
                e["hit_lens"] = hits(lens_hits[l - 1]);
                e["hit_logit_lens"] = hits(logit_hits[l - 1]);
            }
            layers.push_back(e);
        }
        doc["layers"] = layers;
        doc["hit_at_k"] = have_targets ? json("available") : json("unavailable");
        json phase_means = json::object();
        for (auto metric : stream::kAllMetrics) {
            json arr = json::array();
            for (int p = 0; p < 3; ++p) arr.push_back(report::value(agg.at(metric, p)));
            phase_means[stream::to_string(metric)] = arr;
        }
        doc["phase_means"] = phase_means;
        doc["warnings"] = warnings;

        if (c.wants(Format::Csv)) {
            report::CsvWriter w(out / "stream.csv", {"layer", "metric", "value", "defined"});
            for (std::size_t l = 1; l <= m.depth; ++l) {
                const auto& lm = rep.layers[l - 1];
                for (auto metric : stream::kAllMetrics) {
                    const auto v = stream::metric_value(lm, metric);
                    w.cell(l).cell(std::string(stream::to_string(metric))).cell(v).cell(v.has_value());
                    w.end_row();
                }
                if (have_targets) {
                    const auto r = lens::HitReport::from_counts(lens_hits[l - 1]);
                    for (const auto& [k, v] : r.rate) {
                        w.cell(l).cell("hit@" + std::to_string(k)).cell(v).cell(true);
                        w.end_row();
                    }
                }
            }
        }
        if (c.wants(Format::Json)) report::write_json(out / "stream.json", doc);
    }
}

void cmd_scaling(const RunConfig& c) {
    c.validate();
    struct Row {
        std::string model_id;
        std::string family;
        std::size_t depth;
        std::array<double, 4> q;  // b1, b2, phase-2 width, phase-3 width
    };
    static const std::array<const char*, 4> kQuantities{"b1", "b2", "phase2_width", "phase3_width"};
    std::vector<Row> rows;
    for (const auto& mp : c.manifests) {
        const auto m = load(mp);
        SubspaceStore store(m, c.cache_dir);
        const auto a = analyze_phases(m, c, store);
        const auto& d = a.decomposition;
        rows.push_back({m.model_id, m.family.empty() ? std::string("default") : m.family, m.depth,
                        {static_cast<double>(d.b1), static_cast<double>(d.b2), static_cast<double>(d.widths[1]),
                         static_cast<double>(d.widths[2])}});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.family, a.depth, a.model_id) < std::tie(b.family, b.depth, b.model_id);
    });

    std::map<std::string, std::vector<const Row*>> groups;
    for (const auto& r : rows) groups[r.family].push_back(&r);

    struct FitRow {
        std::string quantity, grouping, family, note;
        std::optional<regression::ScalingFit> fit;
    };
    std::vector<FitRow> fits;
    auto regress = [&](const std::vector<const Row*>& members, const std::string& grouping, const std::string& family) {
        for (std::size_t qi = 0; qi < kQuantities.size(); ++qi) {
            FitRow fr{kQuantities[qi], grouping, family, "", std::nullopt};
            std::vector<std::pair<double, double>> pts;
            for (const Row* r : members) pts.emplace_back(static_cast<double>(r->depth), r->q[qi]);
            try {
                fr.fit = regression::scaling_regression(pts);
                if (pts.size() == 2) fr.note = "two points: R^2 = 1 by construction";
            } catch (const ValidationError& e) {
                fr.note = e.what();
            }
            fits.push_back(std::move(fr));
        }
    };
    for (const auto& [fam, members] : groups) regress(members, "per-family", fam);
    if (groups.size() > 1) {
        std::vector<const Row*> all;
        for (const auto& r : rows) all.push_back(&r);
        regress(all, "cross-family", "all");
    }

    fs::create_directories(c.out);
    if (c.wants(Format::Csv)) {
        report::CsvWriter w(c.out / "scaling.csv",
                            {"quantity", "grouping", "family", "slope", "intercept", "r_squared", "points", "note"});
        for (const auto& f : fits) {
            w.cell(f.quantity).cell(f.grouping).cell(f.family);
            if (f.fit) w.cell(f.fit->slope).cell(f.fit->intercept).cell(f.fit->r_squared).cell(f.fit->points);
            else w.cell(std::string()).cell(std::string()).cell(std::string()).cell(std::string());
            w.cell(f.note);
            w.end_row();
        }
        report::CsvWriter mw(c.out / "scaling_models.csv",
                             {"model_id", "family", "depth", "b1", "b2", "phase2_width", "phase3_width"});
        for (const auto& r : rows) {
            mw.cell(r.model_id).cell(r.family).cell(r.depth);
            for (double v : r.q) mw.cell(v);
            mw.end_row();
        }
    }
    if (c.wants(Format::Json)) {
        json doc{{"schema", "grasslens.scaling"}, {"schema_version", report::kSchemaVersion}};
        json models = json::array();
        for (const auto& r : rows) {
            json e{{"model_id", r.model_id}, {"family", r.family}, {"depth", r.depth}};
            for (std::size_t qi = 0; qi < kQuantities.size(); ++qi) e[kQuantities[qi]] = r.q[qi];
            models.push_back(e);
        }
        json fj = json::array();
        for (const auto& f : fits) {
            json e{{"quantity", f.quantity}, {"grouping", f.grouping}, {"family", f.family}, {"note", f.note}};
            if (f.fit) {
                e["slope"] = report::value(f.fit->slope);
                e["intercept"] = report::value(f.fit->intercept);
                e["r_squared"] = report::value(f.fit->r_squared);
                e["points"] = f.fit->points;
            } else {
                e["slope"] = nullptr;
                e["intercept"] = nullptr;
                e["r_squared"] = nullptr;
                e["points"] = 0;
            }
            fj.push_back(e);
        }
        doc["models"] = models;
        doc["fits"] = fj;
        report::write_json(c.out / "scaling.json", doc);
    }
}

}  // namespace grasslens::cli
