#include "doctest.h"
#include "testing.hpp"

#include "grasslens/errors.hpp"
#include "grasslens/lens.hpp"
#include "grasslens/synth.hpp"

#include <cmath>

using namespace grasslens;
using namespace grasslens::lens;

namespace {

UnembeddingHead plain_head(const Eigen::MatrixXd& W) { return UnembeddingHead{W, io::NormKind::None, {}, {}, 1e-5}; }

UnembeddingHead layernorm_head(Rng& rng, int V, int d) {
    UnembeddingHead h;
    h.W_U = synth::gaussian_matrix(rng, V, d);
    h.norm = io::NormKind::LayerNorm;
    h.gamma = Eigen::VectorXd::Constant(d, 1.0) + 0.1 * synth::gaussian_matrix(rng, d, 1).col(0);
    h.beta = 0.1 * synth::gaussian_matrix(rng, d, 1).col(0);
    h.eps = 1e-5;
    return h;
}

LensMap random_lens(Rng& rng, int d, double scale = 0.5) {
    Rng brng(rng.next());
    return {scale * synth::gaussian_matrix(rng, d, d), synth::random_biases(brng, 1, d, 0.1)[0]};
}

}  // namespace

TEST_SUITE("lens") {

TEST_CASE("apply examples") {
    Eigen::Vector2d h(1, 2);
    CHECK(apply_lens(LensMap::zero(2), h) == h);
    CHECK(apply_lens({Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()}, h) == Eigen::Vector2d(2, 4));
    Eigen::Matrix2d A;
    A << 0, 1, 0, 0;
    CHECK(apply_lens({A, Eigen::Vector2d(1, 0)}, Eigen::Vector2d(1, 1)) == Eigen::Vector2d(3, 1));
    CHECK_THROWS_AS(apply_lens(LensMap::zero(3), h), ValidationError);
}

TEST_CASE("truncation") {
    LensMap diag{Eigen::Vector3d(3, 2, 1).asDiagonal(), Eigen::Vector3d(1, 2, 3)};
    const auto t1 = truncate_lens(diag, 1);
    CHECK((t1.A - Eigen::Matrix3d(Eigen::Vector3d(3, 0, 0).asDiagonal())).norm() < 1e-14);
    CHECK(t1.b == diag.b);
    CHECK((truncate_lens(diag, 3).A - diag.A).norm() < 1e-10);
    CHECK_THROWS_AS(truncate_lens(diag, 0), ValidationError);
    CHECK_THROWS_AS(truncate_lens(diag, 4), ValidationError);

    Rng rng(3);
    const Eigen::VectorXd u1 = synth::gaussian_matrix(rng, 6, 1).col(0), v1 = synth::gaussian_matrix(rng, 6, 1).col(0);
    const Eigen::VectorXd u2 = synth::gaussian_matrix(rng, 6, 1).col(0), v2 = synth::gaussian_matrix(rng, 6, 1).col(0);
    const LensMap r2{u1 * v1.transpose() + u2 * v2.transpose(), Eigen::VectorXd::Zero(6)};
    CHECK((truncate_lens(r2, 2).A - r2.A).norm() < 1e-9);

    for (int trial = 0; trial < 20; ++trial) {
        const auto lens = random_lens(rng, 7);
        const Eigen::VectorXd s = lens.A.jacobiSvd().singularValues();
        for (int k = 1; k <= 7; ++k) {
            const double tail = s.tail(7 - k).squaredNorm();
            REQUIRE(std::abs((lens.A - truncate_lens(lens, k).A).squaredNorm() - tail) < 1e-9);
            REQUIRE((truncate_lens(lens, k).A - testing::truncate_ref(lens.A, k)).norm() < 1e-9);
        }
    }
}

TEST_CASE("normalization conventions") {
    UnembeddingHead ln{Eigen::Matrix2d::Identity(), io::NormKind::LayerNorm, Eigen::Vector2d::Ones(),
                       Eigen::Vector2d::Zero(), 1e-5};
    const Eigen::VectorXd n = normalize(ln, Eigen::Vector2d(1, -1));
    CHECK(n(0) == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-15));
    CHECK(n(1) == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-15));
    CHECK_THROWS_AS(normalize(ln, Eigen::Vector2d(2, 2)), NumericalError);

    UnembeddingHead rms{Eigen::Matrix2d::Identity(), io::NormKind::RmsNorm, Eigen::Vector2d::Ones(), {}, 1e-5};
    const Eigen::VectorXd r = normalize(rms, Eigen::Vector2d(3, 4));
    CHECK(r(0) == doctest::Approx(3 / std::sqrt(12.5 + 1e-5)).epsilon(1e-15));
    CHECK(r(1) == doctest::Approx(4 / std::sqrt(12.5 + 1e-5)).epsilon(1e-15));
    rms.eps = 0.0;
    CHECK_THROWS_AS(normalize(rms, Eigen::Vector2d(0, 0)), NumericalError);

    const auto none = plain_head(Eigen::Matrix2d::Identity());
    CHECK(readout_logits(none, Eigen::Vector2d(0.5, -3)) == Eigen::Vector2d(0.5, -3));
    CHECK_THROWS_AS(normalize(none, Eigen::Vector3d(1, 2, 3)), ValidationError);

    Rng rng(4);
    const auto head = layernorm_head(rng, 5, 9);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd h = synth::gaussian_matrix(rng, 9, 1).col(0);
        REQUIRE((normalize(head, h) - testing::layernorm_ref(h, *head.gamma, *head.beta, head.eps)).norm() < 1e-13);
    }
}

TEST_CASE("head validation") {
    UnembeddingHead h{Eigen::MatrixXd::Ones(4, 3), io::NormKind::LayerNorm, Eigen::VectorXd::Ones(3), {}, 1e-5};
    CHECK_THROWS_AS(h.validate(), ValidationError);
    h.beta = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(h.validate(), ValidationError);
    h.beta = Eigen::VectorXd::Zero(3);
    CHECK_NOTHROW(h.validate());
    h.eps = -1;
    CHECK_THROWS_AS(h.validate(), ValidationError);
    UnembeddingHead n{Eigen::MatrixXd::Ones(4, 3), io::NormKind::None, Eigen::VectorXd::Ones(3), {}, 1e-5};
    CHECK_THROWS_AS(n.validate(), ValidationError);
}

TEST_CASE("softmax and KL numerics") {
    const Eigen::Vector3d z(1000, 1001, 999);
    const Eigen::VectorXd ls = log_softmax(z);
    CHECK(ls.allFinite());
    CHECK(ls.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(kl_divergence(z, z) == 0.0);
    CHECK(kl_divergence(z, Eigen::Vector3d(-1000, 0, 1000)) > 0);
    CHECK(std::isfinite(kl_divergence(z, Eigen::Vector3d(-1000, 0, 1000))));
    CHECK_THROWS_AS(kl_divergence(z, Eigen::Vector2d(1, 2)), ValidationError);

    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd p = 3 * synth::gaussian_matrix(rng, 16, 1).col(0);
        const Eigen::VectorXd q = 3 * synth::gaussian_matrix(rng, 16, 1).col(0);
        REQUIRE(std::abs(kl_divergence(p, q) - testing::kl_ref(p, q)) < 1e-12);
        REQUIRE(kl_divergence(p, q) >= 0.0);
    }
}

TEST_CASE("KL truncation gap against brute force") {
    Rng rng(77);
    const int d = 8, V = 16;
    for (int trial = 0; trial < 5; ++trial) {
        const auto head = layernorm_head(rng, V, d);
        const auto lens = random_lens(rng, d);
        const Eigen::MatrixXd states = synth::gaussian_matrix(rng, 12, d);
        for (int k = 1; k <= d; ++k) {
            const Eigen::MatrixXd Ak = testing::truncate_ref(lens.A, k);
            double ref = 0;
            for (int t = 0; t < states.rows(); ++t) {
                const Eigen::VectorXd h = states.row(t).transpose();
                const Eigen::VectorXd full = h + lens.A * h + lens.b, trunc = h + Ak * h + lens.b;
                const Eigen::VectorXd zf = head.W_U * testing::layernorm_ref(full, *head.gamma, *head.beta, head.eps);
                const Eigen::VectorXd zt = head.W_U * testing::layernorm_ref(trunc, *head.gamma, *head.beta, head.eps);
                ref += testing::kl_ref(zf, zt);
            }
            ref /= static_cast<double>(states.rows());
            REQUIRE(std::abs(kl_truncation_gap(head, lens, static_cast<std::size_t>(k), states) - ref) < 1e-10);
        }
        CHECK(kl_truncation_gap(head, lens, d, states) < 1e-12);
    }
}

TEST_CASE("KL gap vanishes for k at or above the lens rank") {
    Rng rng(9);
    const int d = 10, r = 3;
    const auto head = layernorm_head(rng, 20, d);
    const LensMap lens{synth::gaussian_matrix(rng, d, r) * synth::gaussian_matrix(rng, r, d), Eigen::VectorXd::Zero(d)};
    const Eigen::MatrixXd states = synth::gaussian_matrix(rng, 30, d);
    for (int k = r; k <= d; ++k) REQUIRE(kl_truncation_gap(head, lens, static_cast<std::size_t>(k), states) < 1e-10);
    CHECK(kl_truncation_gap(head, lens, 1, states) > 1e-6);
    CHECK_THROWS_AS(kl_truncation_gap(head, lens, 2, Eigen::MatrixXd(0, d)), ValidationError);
}

TEST_CASE("target rank ties go to the lower id") {
    const Eigen::Vector4d z(1, 3, 3, 0);
    CHECK(target_rank(z, 1) == 0);
    CHECK(target_rank(z, 2) == 1);
    CHECK(target_rank(z, 0) == 2);
    CHECK(target_rank(z, 3) == 3);
    CHECK_THROWS_AS(target_rank(z, 4), ValidationError);
    CHECK_THROWS_AS(target_rank(z, -1), ValidationError);
}

TEST_CASE("Hit@k examples") {
    // identity unembedding, zero lens: logits are the states themselves
    const auto head = plain_head(Eigen::MatrixXd::Identity(6, 6));
    Eigen::MatrixXd states(3, 6);
    states << 9, 1, 2, 3, 4, 5,  //
        0, 9, 1, 2, 3, 4,        //
        5, 4, 9, 3, 2, 1;
    const std::vector<std::int64_t> argmax{0, 1, 2};
    const std::vector<std::size_t> cut{1, 5};
    const auto all = hit_at_k(head, LensMap::zero(6), states, argmax, cut);
    CHECK(all.hit1 == 1.0);
    CHECK(all.hit5 == 1.0);
    CHECK(all.ratio_5_1 == std::optional<double>(1.0));

    const std::vector<std::int64_t> third{4, 4, 1};  // rank 3 (0-based 2) in every row
    const auto r3 = hit_at_k(head, LensMap::zero(6), states, third, cut);
    CHECK(r3.hit1 == 0.0);
    CHECK(r3.hit5 == 1.0);
    CHECK_FALSE(r3.ratio_5_1.has_value());
    CHECK(r3.tokens == 3);

    CHECK_THROWS_AS(hit_at_k(head, LensMap::zero(6), states, std::vector<std::int64_t>{0}, cut), ValidationError);
    CHECK_THROWS_AS(hit_at_k(head, LensMap::zero(6), states, argmax, std::vector<std::size_t>{0}), ValidationError);
}

TEST_CASE("Hit@k is monotone and counts merge") {
    Rng rng(12);
    const int d = 8, V = 30;
    const auto head = layernorm_head(rng, V, d);
    const auto lens = random_lens(rng, d);
    const Eigen::MatrixXd states = synth::gaussian_matrix(rng, 40, d);
    std::vector<std::int64_t> targets(40);
    for (auto& t : targets) t = static_cast<std::int64_t>(rng.next() % V);
    std::vector<std::size_t> cuts;
    for (std::size_t k = 1; k <= V; ++k) cuts.push_back(k);
    const auto rep = hit_at_k(head, lens, states, targets, cuts);
    for (std::size_t k = 2; k <= V; ++k) REQUIRE(rep.rate.at(k) >= rep.rate.at(k - 1));
    CHECK(rep.rate.at(V) == 1.0);

    auto a = hit_counts(head, lens, states.topRows(25), std::span(targets).first(25), cuts);
    const auto b = hit_counts(head, lens, states.bottomRows(15), std::span(targets).last(15), cuts);
    a.merge(b);
    const auto merged = HitReport::from_counts(a);
    CHECK(merged.tokens == 40);
    for (std::size_t k = 1; k <= V; ++k) REQUIRE(merged.rate.at(k) == rep.rate.at(k));
}

TEST_CASE("zero lens equals the LogitLens readout") {
    Rng rng(13);
    const auto head = layernorm_head(rng, 12, 6);
    const Eigen::MatrixXd states = synth::gaussian_matrix(rng, 20, 6);
    std::vector<std::int64_t> targets(20);
    for (int t = 0; t < 20; ++t) {
        Eigen::Index arg;
        (head.W_U * testing::layernorm_ref(states.row(t).transpose(), *head.gamma, *head.beta, head.eps)).maxCoeff(&arg);
        targets[static_cast<std::size_t>(t)] = arg;
    }
    const auto rep = hit_at_k(head, LensMap::zero(6), states, targets, std::vector<std::size_t>{1});
    CHECK(rep.hit1 == 1.0);
}

}  // TEST_SUITE
