#include "grasslens/cli.hpp"

#include "grasslens/errors.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <iostream>

namespace grasslens::cli {

namespace fs = std::filesystem;

namespace {

void error_json(const char* kind, const std::string& message) {
    nlohmann::json e{{"error", {{"kind", kind}, {"message", message}}}};
    std::cerr << e.dump() << "\n";
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& text, const char* flag) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument(text);
        const auto a = std::stoul(text.substr(0, comma));
        const auto b = std::stoul(text.substr(comma + 1));
        return {a, b};
    } catch (const std::exception&) {
        throw ValidationError(std::string(flag) + " expects two integers 'a,b', got '" + text + "'");
    }
}

template <class T>
std::array<double, 3> triple(const std::vector<T>& v, const char* flag) {
    if (v.size() != 3) throw ValidationError(std::string(flag) + " expects three comma-separated values");
    return {static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2])};
}

struct AnalysisFlags {
    std::vector<std::string> manifests;
    std::string k_grid = "1,3,5,10,15,25,35,50";
    std::string consensus = "5,10,15";
    double sigma = 2.0;
    std::string out = ".";
    std::string format = "csv,json";
    std::uint64_t seed = 0;
    std::size_t batch_size = 1024;
    std::vector<std::size_t> hit_ks{1, 5};
    std::string breakpoints;

    RunConfig config() const {
        RunConfig c;
        for (const auto& m : manifests) c.manifests.emplace_back(m);
        c.k_grid = parse_percent_list(k_grid);
        c.consensus = parse_percent_list(consensus);
        c.sigma = sigma;
        c.out = out;
        c.formats = parse_formats(format);
        c.seed = seed;
        c.batch_size = batch_size;
        c.hit_ks = hit_ks;
        if (!breakpoints.empty()) c.breakpoints = parse_pair(breakpoints, "--breakpoints");
        if (const char* env = std::getenv(kCacheEnv); env && *env) c.cache_dir = fs::path(env);
        c.validate();
        return c;
    }
};

void add_common(CLI::App* sub, AnalysisFlags& f) {
    sub->add_option("--manifest", f.manifests, "model manifest (repeatable)")->required();
    sub->add_option("--k-grid", f.k_grid, "readout resolutions, integer percents of the width");
    sub->add_option("--consensus", f.consensus, "resolutions whose breakpoints are combined");
    sub->add_option("--sigma", f.sigma, "Gaussian smoothing width in layers (0 disables)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--format", f.format, "comma-separated from csv,json,svg");
    sub->add_option("--seed", f.seed, "recorded in reports; analyses are deterministic");
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Readout subspace trajectories of tuned lenses and residual stream phase analysis", "grasslens"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "grasslens 1.0");

    AnalysisFlags f;
    auto* decompose = app.add_subcommand("decompose", "per-layer readout subspaces and spectra");
    auto* rss = app.add_subcommand("rss", "consecutive and pairwise subspace similarity");
    auto* phases = app.add_subcommand("phases", "breakpoints, phase widths and profile fits");
    auto* pareto = app.add_subcommand("pareto", "visibility vs retained energy across k");
    auto* stream = app.add_subcommand("stream", "residual-stream metrics aggregated by phase");
    auto* scaling = app.add_subcommand("scaling", "breakpoint scaling across models of different depth");
    for (auto* s : {decompose, rss, phases, pareto, stream, scaling}) add_common(s, f);
    stream->add_option("--batch-size", f.batch_size, "rows per effective-rank computation");
    stream->add_option("--hit-k", f.hit_ks, "Hit@k cutoffs")->delimiter(',');
    stream->add_option("--breakpoints", f.breakpoints, "'b1,b2' instead of detecting them from the lenses");

    SynthConfig sc;
    std::string plateau, out = sc.out.string();
    std::vector<double> levels, stream_cos, stream_ratio;
    auto* synth = app.add_subcommand("synth", "write a synthetic model with planted phase structure");
    synth->add_option("--out", out, "output directory");
    synth->add_option("--model-id", sc.model_id);
    synth->add_option("--family", sc.family);
    synth->add_option("--depth", sc.depth, "number of layers");
    synth->add_option("--width", sc.width, "hidden width d");
    synth->add_option("--k-percent", sc.k_percent, "resolution at which the profile is planted");
    synth->add_option("--plateau", plateau, "'p,q' corners of the planted cosine schedule");
    synth->add_option("--levels", levels, "cosines before, on and after the plateau")->delimiter(',');
    synth->add_option("--noise", sc.noise, "uniform jitter added to the cosine schedule");
    synth->add_option("--spectrum-ratio", sc.spectrum_ratio, "geometric decay of the lens singular values");
    synth->add_option("--seed", sc.seed);
    synth->add_option("--vocab", sc.vocab, "write an unembedding head of this size (0: none)");
    synth->add_option("--tokens", sc.tokens, "tokens per activation dump (0: none)");
    synth->add_option("--batches", sc.batches, "number of activation dumps");
    synth->add_option("--stream-cos", stream_cos, "per-phase |cos(delta, h)|")->delimiter(',');
    synth->add_option("--stream-ratio", stream_ratio, "per-phase FFN/MHA norm ratio")->delimiter(',');
    synth->add_option("--update-scale", sc.update_scale, "|delta| / |h| for every layer");
    synth->add_option("--depths", sc.depths, "write one model per depth under <out>/L<depth>")->delimiter(',');
    synth->add_option("--b1-rule", sc.b1_rule, "first corner as const:N or frac:F");
    synth->add_option("--b2-rule", sc.b2_rule, "second corner as const:N or frac:F");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_json("validation", e.what());
        return 1;
    }

    try {
        if (synth->parsed()) {
            sc.out = out;
            if (!plateau.empty()) sc.plateau = parse_pair(plateau, "--plateau");
            if (!levels.empty()) sc.levels = triple(levels, "--levels");
            if (!stream_cos.empty()) sc.stream_cos = triple(stream_cos, "--stream-cos");
            if (!stream_ratio.empty()) sc.stream_ratio = triple(stream_ratio, "--stream-ratio");
            for (const auto& p : cmd_synth(sc)) std::cout << p.string() << "\n";
            return 0;
        }
        const RunConfig c = f.config();
        if (decompose->parsed()) cmd_decompose(c);
        else if (rss->parsed()) cmd_rss(c);
        else if (phases->parsed()) cmd_phases(c);
        else if (pareto->parsed()) cmd_pareto(c);
        else if (stream->parsed()) cmd_stream(c);
        else if (scaling->parsed()) cmd_scaling(c);
        return 0;
    } catch (const NumericalError& e) {
        error_json("numerical", e.what());
        return 2;
    } catch (const ValidationError& e) {
        error_json("validation", e.what());
        return 1;
    } catch (const fs::filesystem_error& e) {
        error_json("validation", e.what());
        return 1;
    } catch (const std::exception& e) {
        error_json("numerical", e.what());
        return 2;
    }
}

}  // namespace grasslens::cli
