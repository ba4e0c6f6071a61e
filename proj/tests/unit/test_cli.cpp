#include "doctest.h"
#include "testing.hpp"

#include "grasslens/cli.hpp"
#include "grasslens/errors.hpp"
#include "grasslens/tensor_io.hpp"

#include "json.hpp"

#include <cstdlib>
#include <string>

using namespace grasslens;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Toy model with a head, activations and targets.
fs::path make_toy(const fs::path& dir, std::size_t depth = 12, std::size_t vocab = 24, std::size_t tokens = 30) {
    const std::string args = "synth --out " + q(dir) + " --depth " + std::to_string(depth) +
                             " --width 16 --k-percent 10 --vocab " + std::to_string(vocab) + " --tokens " +
                             std::to_string(tokens) + " --batches 2 --seed 5";
    REQUIRE(testing::run_tool(args) == 0);
    return dir / "manifest.json";
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = testing::slurp(e.path());
    return files;
}

json error_of(const fs::path& err) {
    const auto text = testing::slurp(err);
    REQUIRE(text.find("{\"error\"") != std::string::npos);
    return json::parse(text.substr(text.rfind("{\"error\"")));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("argument helpers") {
    CHECK(cli::parse_percent_list("1,3,5") == std::vector<int>{1, 3, 5});
    CHECK_THROWS_AS(cli::parse_percent_list("0,5"), ValidationError);
    CHECK_THROWS_AS(cli::parse_percent_list("5,x"), ValidationError);
    CHECK_THROWS_AS(cli::parse_percent_list("150"), ValidationError);
    CHECK(cli::parse_formats("csv,svg") == std::set<cli::Format>{cli::Format::Csv, cli::Format::Svg});
    CHECK_THROWS_AS(cli::parse_formats("csv,xml"), ValidationError);
    cli::RunConfig c;
    c.manifests = {"m.json"};
    CHECK_NOTHROW(c.validate());
    c.consensus = {5, 7};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.manifests = {"m.json"};
    c.sigma = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("every command is deterministic") {
    testing::TempDir t("cli_det");
    const auto m = make_toy(t / "model");
    for (const std::string cmd : {"decompose", "rss", "phases", "pareto", "stream"}) {
        const std::string common = cmd + " --manifest " + q(m) + " --seed 3 --format csv,json,svg";
        REQUIRE(testing::run_tool(common + " --out " + q(t / ("a_" + cmd))) == 0);
        REQUIRE(testing::run_tool(common + " --out " + q(t / ("b_" + cmd))) == 0);
        const auto a = snapshot(t / ("a_" + cmd)), b = snapshot(t / ("b_" + cmd));
        INFO(cmd);
        CHECK_FALSE(a.empty());
        CHECK(a == b);
    }
    const auto stream = json::parse(testing::slurp(t / "a_stream" / "stream.json"));
    CHECK(stream["hit_at_k"] == "available");
    CHECK(stream["layers"].size() == 12);
    CHECK(stream["schema"] == "grasslens.stream");
    const auto phases = json::parse(testing::slurp(t / "a_phases" / "phases.json"));
    CHECK(phases["depth"] == 12);
    CHECK(phases["breakpoints"]["b1"].get<int>() < phases["breakpoints"]["b2"].get<int>());
    CHECK(fs::exists(t / "a_decompose" / "spectra" / "L001.npy"));
}

TEST_CASE("svg only on request") {
    testing::TempDir t("cli_svg");
    const auto m = make_toy(t / "model", 10, 0, 0);
    REQUIRE(testing::run_tool("pareto --manifest " + q(m) + " --out " + q(t / "plain")) == 0);
    CHECK(fs::exists(t / "plain" / "pareto.csv"));
    CHECK(fs::exists(t / "plain" / "pareto.json"));
    CHECK_FALSE(fs::exists(t / "plain" / "pareto.svg"));
    REQUIRE(testing::run_tool("pareto --manifest " + q(m) + " --format svg --out " + q(t / "svg")) == 0);
    CHECK(fs::exists(t / "svg" / "pareto.svg"));
    CHECK_FALSE(fs::exists(t / "svg" / "pareto.csv"));
    CHECK(testing::slurp(t / "svg" / "pareto.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("exit codes and error reports") {
    testing::TempDir t("cli_err");
    CHECK(testing::run_tool("phases --manifest " + q(t / "missing.json") + " --out " + q(t / "o"), t / "err") == 1);
    const auto e = error_of(t / "err");
    CHECK(e["error"]["kind"] == "validation");
    CHECK(e["error"]["message"].get<std::string>().find("missing.json") != std::string::npos);

    const auto m = make_toy(t / "model", 10, 0, 0);
    CHECK(testing::run_tool("phases --manifest " + q(m) + " --k-grid 0,5") == 1);
    CHECK(testing::run_tool("phases --manifest " + q(m) + " --sigma -1") == 1);
    CHECK(testing::run_tool("phases --manifest " + q(m) + " --consensus 7") == 1);
    CHECK(testing::run_tool("phases --manifest " + q(m) + " --format png", t / "err2") == 1);
    CHECK(error_of(t / "err2")["error"]["kind"] == "validation");
    CHECK(testing::run_tool("phases") == 1);
    CHECK(testing::run_tool("--help") == 0);
    // stream needs activations
    CHECK(testing::run_tool("stream --manifest " + q(m) + " --out " + q(t / "s")) == 1);
}

TEST_CASE("a corrupt tensor is reported by file") {
    testing::TempDir t("cli_corrupt");
    const auto m = make_toy(t / "model", 10, 0, 0);
    const auto victim = t / "model" / "lens" / "A_003.npy";
    auto bytes = testing::slurp(victim);
    testing::spit(victim, bytes.substr(0, bytes.size() - 8));
    CHECK(testing::run_tool("rss --manifest " + q(m) + " --out " + q(t / "o"), t / "err") == 1);
    CHECK(error_of(t / "err")["error"]["message"].get<std::string>().find("A_003.npy") != std::string::npos);
}

TEST_CASE("stream without targets and with a broken residual identity") {
    testing::TempDir t("cli_stream");
    const auto m = make_toy(t / "model", 10, 0, 20);
    REQUIRE(testing::run_tool("stream --manifest " + q(m) + " --breakpoints 3,7 --out " + q(t / "o")) == 0);
    auto doc = json::parse(testing::slurp(t / "o" / "stream.json"));
    CHECK(doc["hit_at_k"] == "unavailable");
    CHECK(doc["phase_source"] == "config");
    CHECK(doc["warnings"].empty());
    CHECK(doc["breakpoints"]["b1"] == 3);

    // shift one MHA update so h_l != h_{l-1} + mha_l + ffn_l
    const auto f = t / "model" / "acts_1" / "mha_004.npy";
    Eigen::MatrixXd shifted = io::read_tensor(f).to_matrix();
    shifted(0, 0) += 0.5;
    io::write_tensor(io::TensorFile::from_matrix(shifted), f);
    REQUIRE(testing::run_tool("stream --manifest " + q(m) + " --breakpoints 3,7 --out " + q(t / "o2"), t / "err") == 0);
    doc = json::parse(testing::slurp(t / "o2" / "stream.json"));
    REQUIRE(doc["warnings"].size() == 1);
    CHECK(doc["warnings"][0].get<std::string>().find("batch 1") != std::string::npos);
    CHECK(testing::slurp(t / "err").find("warning") != std::string::npos);
    CHECK(testing::run_tool("stream --manifest " + q(m) + " --breakpoints 7,3 --out " + q(t / "o3")) == 1);
}

TEST_CASE("infeasible synthetic targets write nothing") {
    testing::TempDir t("cli_synth");
    CHECK(testing::run_tool("synth --out " + q(t / "a") + " --levels 0.2,1.5,0.3", t / "err") == 1);
    CHECK(error_of(t / "err")["error"]["kind"] == "validation");
    CHECK_FALSE(fs::exists(t / "a"));
    CHECK(testing::run_tool("synth --out " + q(t / "b") + " --depth 5") == 1);
    CHECK(testing::run_tool("synth --out " + q(t / "c") + " --plateau 9,3") == 1);
    CHECK(testing::run_tool("synth --out " + q(t / "d") + " --depths 16,24 --b2-rule frac:0.3") == 1);
    CHECK(testing::run_tool("synth --out " + q(t / "e") + " --tokens 10 --stream-cos 0.1,2,0.3") == 1);
    for (const char* d : {"b", "c", "d", "e"}) CHECK_FALSE(fs::exists(t / d));
}

TEST_CASE("suite synthesis and the scaling command") {
    testing::TempDir t("cli_scaling");
    REQUIRE(testing::run_tool("synth --out " + q(t / "suite") + " --width 32 --depths 16,24,32 --seed 2") == 0);
    std::string args = "scaling --out " + q(t / "o");
    for (int L : {16, 24, 32}) {
        CHECK(fs::exists(t / "suite" / ("L" + std::to_string(L)) / "manifest.json"));
        args += " --manifest " + q(t / "suite" / ("L" + std::to_string(L)) / "manifest.json");
    }
    REQUIRE(testing::run_tool(args) == 0);
    const auto doc = json::parse(testing::slurp(t / "o" / "scaling.json"));
    CHECK(doc.dump().find("\"b2\"") != std::string::npos);
    CHECK(fs::exists(t / "o" / "scaling.csv"));
    CHECK(fs::exists(t / "o" / "scaling_models.csv"));
    // one model cannot support a regression; the fit is reported as missing
    REQUIRE(testing::run_tool("scaling --out " + q(t / "o1") + " --manifest " +
                              q(t / "suite" / "L16" / "manifest.json")) == 0);
    const auto one = json::parse(testing::slurp(t / "o1" / "scaling.json"));
    REQUIRE_FALSE(one["fits"].empty());
    CHECK(one["fits"][0]["slope"].is_null());
    CHECK(one["fits"][0]["note"].get<std::string>().find("at least 2") != std::string::npos);
}

TEST_CASE("subspace cache is reused") {
    testing::TempDir t("cli_cache");
    cli::SynthConfig sc;
    sc.out = t / "model";
    sc.depth = 8;
    sc.width = 12;
    const auto paths = cli::cmd_synth(sc);
    REQUIRE(paths.size() == 1);
    const auto m = io::load_manifest(paths[0]);
    cli::SubspaceStore first(m, t / "cache");
    const auto a = first.subspaces(2);
    first.spectra();
    CHECK(first.svds_computed() == 8);
    CHECK(first.cache_hits() == 0);
    cli::SubspaceStore second(m, t / "cache");
    const auto b = second.subspaces(2);
    second.spectra();
    CHECK(second.svds_computed() == 0);
    CHECK(second.cache_hits() == 16);
    for (std::size_t l = 0; l < a.size(); ++l) CHECK(a[l].basis == b[l].basis);

    cli::SubspaceStore none(m, std::nullopt);
    none.subspaces(2);
    CHECK(none.svds_computed() == 8);
    CHECK(none.cache_hits() == 0);
}

TEST_CASE("smallest depth runs end to end") {
    testing::TempDir t("cli_small");
    const auto m = make_toy(t / "model", 6, 8, 10);
    REQUIRE(testing::run_tool("phases --manifest " + q(m) + " --out " + q(t / "p")) == 0);
    const auto doc = json::parse(testing::slurp(t / "p" / "phases.json"));
    const int b1 = doc["breakpoints"]["b1"], b2 = doc["breakpoints"]["b2"];
    CHECK(b1 >= 1);
    CHECK(b1 < b2);
    CHECK(b2 <= 5);
    REQUIRE(testing::run_tool("stream --manifest " + q(m) + " --out " + q(t / "s")) == 0);
}

}  // TEST_SUITE
