#include "doctest.h"
#include "testing.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/grassmann.hpp"
#include "grasslens/synth.hpp"
#include "grasslens/tensor_io.hpp"

#include <cmath>

using namespace grasslens;
using namespace grasslens::synth;
namespace fs = std::filesystem;

namespace {

TrajectorySpec small_spec() {
    TrajectorySpec t;
    t.d = 8;
    t.depth = 5;
    t.k = 3;
    t.angles = {0.1, 0.2, 0.3, 0.4};
    t.spectrum = geometric_spectrum(8);
    t.seed = 3;
    return t;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("random orthogonal matrices") {
    Rng rng(1);
    for (std::size_t d : {1, 2, 5, 33}) {
        const auto Q = random_orthogonal(rng, d);
        CHECK((Q.transpose() * Q - Eigen::MatrixXd::Identity(static_cast<int>(d), static_cast<int>(d)))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
    Rng a(4), b(4);
    CHECK(random_orthogonal(a, 6) == random_orthogonal(b, 6));
}

TEST_CASE("geometric spectrum") {
    const auto s = geometric_spectrum(4, 2.0, 0.5);
    CHECK(s == std::vector<double>{2.0, 1.0, 0.5, 0.25});
    CHECK_THROWS_AS(geometric_spectrum(4, 2.0, 1.0), ValidationError);
    CHECK_THROWS_AS(geometric_spectrum(4, 0.0, 0.5), ValidationError);
}

TEST_CASE("planted trajectory structure") {
    const auto t = planted_trajectory(small_spec());
    REQUIRE(t.lenses.size() == 5);
    for (std::size_t l = 0; l < 5; ++l) {
        const auto s = grassmann::extract_subspace(t.lenses[l], 3);
        CHECK(grassmann::max_principal_angle(s.basis, t.right_bases[l].leftCols(3)) < 1e-8);
    }
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(t.ground_truth_rss[l] == doctest::Approx((2 + std::cos(0.1 * (l + 1))) / 3).epsilon(1e-15));
        const double r = grassmann::rss(t.right_bases[l].leftCols(3), t.right_bases[l + 1].leftCols(3));
        CHECK(std::abs(r - t.ground_truth_rss[l]) < 1e-12);
    }
}

TEST_CASE("planted trajectory validation") {
    auto t = small_spec();
    t.k = 8;
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    t.angles.pop_back();
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    t.angles[0] = 2.0;
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    t.spectrum = std::vector<double>(8, 1.0);
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    std::swap(t.spectrum[0], t.spectrum[1]);
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    t.out_direction = 2;
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    t.in_direction = 3;
    CHECK_THROWS_AS(planted_trajectory(t), ValidationError);
    t = small_spec();
    t.in_direction = 1;
    t.out_direction = 4;
    CHECK_NOTHROW(planted_trajectory(t));
}

TEST_CASE("planted profile corners") {
    ProfileSpec ps;
    ps.depth = 12;
    ps.p = 3;
    ps.q = 8;
    const auto v = planted_profile(ps);
    REQUIRE(v.size() == 11);
    CHECK(v[0] == 0.3);
    CHECK(v[2] == 0.9);
    CHECK(v[7] == 0.9);
    CHECK(v[10] == 0.4);
    CHECK(v[1] == doctest::Approx(0.6).epsilon(1e-15));
    ps.p = ps.q = 5;
    CHECK(planted_profile(ps)[4] == 0.9);
    ps.p = 1;
    CHECK_THROWS_AS(planted_profile(ps), ValidationError);
    ps.p = 3;
    ps.q = 11;
    CHECK_THROWS_AS(planted_profile(ps), ValidationError);
    ps.q = 8;
    ps.noise = 0.05;
    ps.seed = 8;
    const auto n = planted_profile(ps);
    for (std::size_t i = 0; i < n.size(); ++i) CHECK(std::abs(n[i] - v[i]) <= 0.05);
    CHECK(n == planted_profile(ps));
    CHECK_THROWS_AS(angles_from_cosines({0.5, 1.1}), ValidationError);
    CHECK(angles_from_cosines({1.0, 0.0}) == std::vector<double>{0.0, std::acos(0.0)});
}

TEST_CASE("depth rules") {
    CHECK(DepthRule::parse("const:4").at(100) == 4);
    CHECK(DepthRule::parse("frac:0.8").at(24) == 19);
    CHECK(DepthRule::parse("frac:0.8").at(48) == 38);
    CHECK(DepthRule::parse("frac:0.8").to_string() == "frac:0.8");
    for (const char* bad : {"const", "const:0", "const:2.5", "frac:1.5", "frac:x", "linear:0.3", "frac:0.5junk"})
        CHECK_THROWS_AS(DepthRule::parse(bad), ValidationError);
}

TEST_CASE("scaling suite") {
    SuiteOptions o;
    o.d = 20;
    const auto suite = planted_scaling_suite({16, 24}, DepthRule::parse("const:4"), DepthRule::parse("frac:0.8"), o);
    REQUIRE(suite.size() == 2);
    CHECK(suite[0].b1 == 4);
    CHECK(suite[0].b2 == 12);
    CHECK(suite[1].b2 == 19);
    CHECK(suite[1].trajectory.lenses.size() == 24);
    CHECK(suite[0].trajectory.spec.k == 2);
    // b2 drops below L/2 at this depth
    CHECK_THROWS_WITH_AS(planted_scaling_suite({16}, DepthRule::parse("const:4"), DepthRule::parse("frac:0.3"), o),
                         doctest::Contains("invalid rule"), ValidationError);
    CHECK_THROWS_AS(planted_scaling_suite({}, DepthRule::parse("const:4"), DepthRule::parse("frac:0.8"), o),
                    ValidationError);
}

TEST_CASE("written models reload and are reproducible") {
    testing::TempDir a("synth_a"), b("synth_b");
    auto build = [] {
        SyntheticModel m;
        m.model_id = "toy";
        m.family = "toy";
        const auto t = planted_trajectory(small_spec());
        m.lenses = t.lenses;
        Rng rng(5);
        m.biases = random_biases(rng, 5, 8, 0.01);
        StreamSpec s;
        s.d = 8;
        s.depth = 5;
        s.tokens = 6;
        s.p = 1;
        s.q = 3;
        m.batches.push_back(planted_stream(s));
        m.batches.back().targets = std::vector<std::int64_t>{0, 1, 2, 3, 4, 5};
        m.unembedding = Eigen::MatrixXd::Identity(10, 8);
        return m;
    };
    const auto ma = write_model(build(), a.path());
    write_model(build(), b.path());
    CHECK(ma.depth == 5);
    CHECK(ma.width == 8);
    CHECK(*ma.vocab == 10);
    CHECK(ma.batches.size() == 1);
    CHECK(ma.batches[0].tokens == 6);
    for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a.path());
        INFO(rel.string());
        CHECK(testing::slurp(entry.path()) == testing::slurp(b.path() / rel));
    }
    const auto batch = io::load_activation_batch(ma, 0);
    CHECK(*batch.targets == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5});

    SyntheticModel broken = build();
    broken.biases.pop_back();
    CHECK_THROWS_AS(write_model(broken, a.path() / "x"), ValidationError);
}

}  // TEST_SUITE
