#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <splatedit/attention_control.hpp>

#include "test_util.hpp"

using namespace splatedit;

namespace {

Eigen::MatrixXd row_stochastic(std::uint64_t seed, int rows, int cols) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        double sum = 0;
        for (int j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform(0.05, 1.0);
            sum += m(i, j);
        }
        m.row(i) /= sum;
    }
    return m;
}

TokenAlignment alignment_from(std::vector<std::optional<int>> v) {
    TokenAlignment ct;
    ct.target_to_source = std::move(v);
    return ct;
}

}  // namespace

TEST_CASE("align_tokens: identical prompts give the identity mapping") {
    const PromptEmbedding p = embed_prompt("a teddy bear");
    const TokenAlignment ct = align_tokens(p, p);
    REQUIRE(ct.target_count() == 3);
    for (int j = 0; j < 3; ++j) {
        REQUIRE(ct.target_to_source[j].has_value());
        CHECK(*ct.target_to_source[j] == j);
    }
}

TEST_CASE("align_tokens: greedy matcher consumes source tokens left to right") {
    const PromptEmbedding p = embed_prompt("a teddy bear");
    const PromptEmbedding p_star = embed_prompt("a teddy bear wearing a tutu");
    const TokenAlignment ct = align_tokens(p, p_star);
    REQUIRE(ct.target_count() == 6);
    CHECK(*ct.target_to_source[0] == 0);
    CHECK(*ct.target_to_source[1] == 1);
    CHECK(*ct.target_to_source[2] == 2);
    CHECK(!ct.target_to_source[3].has_value());  // wearing
    CHECK(!ct.target_to_source[4].has_value());  // second "a": source "a" already consumed
    CHECK(!ct.target_to_source[5].has_value());  // tutu
}

TEST_CASE("align_tokens: disjoint prompts map everything to None") {
    const TokenAlignment ct = align_tokens(embed_prompt("red cube"), embed_prompt("blue sphere"));
    for (const auto& m : ct.target_to_source) CHECK(!m.has_value());
}

TEST_CASE("inject_cross: inactive timestep returns the target map unchanged") {
    const Eigen::MatrixXd w_src = row_stochastic(1, 3, 2);
    const Eigen::MatrixXd w_tgt = row_stochastic(2, 3, 2);
    const auto ct = alignment_from({0, 1});
    const Eigen::MatrixXd out = inject_cross(w_src, w_tgt, 5.0, 10.0, ct);
    CHECK(out == w_tgt);
}

TEST_CASE("inject_cross: full identity alignment returns the renormalized source map") {
    const Eigen::MatrixXd w_src = row_stochastic(3, 3, 2);
    const Eigen::MatrixXd w_tgt = row_stochastic(4, 3, 2);
    const auto ct = alignment_from({0, 1});
    const Eigen::MatrixXd out = inject_cross(w_src, w_tgt, 10.0, 5.0, ct);
    Eigen::MatrixXd expected = w_src;
    for (int i = 0; i < 3; ++i) expected.row(i) /= expected.row(i).sum();
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("inject_cross: hand-built 3x2 mixed case") {
    // CT = {0 -> 0, 1 -> None}: column 0 from source, column 1 from target,
    // rows renormalized.
    Eigen::MatrixXd w_src(3, 2), w_tgt(3, 2);
    w_src << 0.9, 0.1, 0.6, 0.4, 0.2, 0.8;
    w_tgt << 0.5, 0.5, 0.3, 0.7, 0.1, 0.9;
    const auto ct = alignment_from({0, std::nullopt});
    const Eigen::MatrixXd out = inject_cross(w_src, w_tgt, 3.0, 1.0, ct);

    Eigen::MatrixXd expected(3, 2);
    for (int i = 0; i < 3; ++i) {
        const double a = w_src(i, 0), b = w_tgt(i, 1);
        expected(i, 0) = a / (a + b);
        expected(i, 1) = b / (a + b);
    }
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-15);
    for (int i = 0; i < 3; ++i) CHECK(out.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inject_cross: injecting a map into itself is bitwise neutral") {
    const Eigen::MatrixXd w = row_stochastic(5, 4, 3);
    const auto ct = alignment_from({0, 1, 2});
    const Eigen::MatrixXd out = inject_cross(w, w, 9.0, 0.0, ct);
    CHECK(out == w);
}

TEST_CASE("inject_cross: dimension mismatches are rejected") {
    const Eigen::MatrixXd w_src = row_stochastic(1, 3, 2);
    const Eigen::MatrixXd w_tgt = row_stochastic(2, 4, 2);
    CHECK_THROWS_AS(inject_cross(w_src, w_tgt, 1.0, 0.0, alignment_from({0, 1})), DataError);
    const Eigen::MatrixXd w_tgt2 = row_stochastic(2, 3, 2);
    CHECK_THROWS_AS(inject_cross(w_src, w_tgt2, 1.0, 0.0, alignment_from({0})), DataError);
    CHECK_THROWS_AS(inject_cross(w_src, w_tgt2, 1.0, 0.0, alignment_from({0, 5})), DataError);
}

TEST_CASE("inject_self: timestep cases and boundary") {
    const Eigen::MatrixXd w_src = row_stochastic(6, 4, 4);
    const Eigen::MatrixXd w_tgt = row_stochastic(7, 4, 4);
    CHECK(inject_self(w_src, w_tgt, 2.0, 5.0) == w_tgt);
    CHECK(inject_self(w_src, w_tgt, 7.0, 5.0) == w_src);
    CHECK(inject_self(w_src, w_tgt, 1.0, 0.0) == w_src);  // tau = 0: always source for t >= 1
    CHECK(inject_self(w_src, w_src, 9.0, 0.0) == w_src);  // identity injection is bitwise neutral
}

TEST_CASE("inject_self rejects shape mismatch") {
    CHECK_THROWS_AS(inject_self(row_stochastic(1, 3, 3), row_stochastic(2, 4, 4), 1.0, 0.0), DataError);
}

TEST_CASE("outputs of both injectors are row-stochastic on random maps") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const int rows = rng.uniform_int(2, 8);
        const int cols = rng.uniform_int(2, 5);
        const Eigen::MatrixXd w_src = row_stochastic(100 + trial, rows, cols);
        const Eigen::MatrixXd w_tgt = row_stochastic(200 + trial, rows, cols);
        std::vector<std::optional<int>> m;
        for (int j = 0; j < cols; ++j) {
            if (rng.uniform() < 0.4)
                m.push_back(std::nullopt);
            else
                m.push_back(rng.uniform_int(0, cols - 1));
        }
        const Eigen::MatrixXd out = inject_cross(w_src, w_tgt, 5.0, 0.0, alignment_from(m));
        for (int i = 0; i < rows; ++i) CHECK(out.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
        const Eigen::MatrixXd w_src_sq = row_stochastic(300 + trial, rows, rows);
        const Eigen::MatrixXd w_tgt_sq = row_stochastic(400 + trial, rows, rows);
        const Eigen::MatrixXd outs = inject_self(w_src_sq, w_tgt_sq, 5.0, rng.uniform(0, 10));
        for (int i = 0; i < rows; ++i) CHECK(outs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

namespace {

struct DualBranchFixture {
    DenoiserConfig cfg;
    Denoiser den;
    NoiseSchedule sched;
    PromptEmbedding p, p_star;
    TensorGrid<double> z0;
    NoiseTrajectory traj;

    DualBranchFixture(const std::string& source, const std::string& edit)
        : cfg([] {
              DenoiserConfig c;
              c.base_channels = 8;
              c.seed = 5;
              return c;
          }()),
          den(cfg),
          sched(make_schedule(8, 1e-3, 0.02)),
          p(embed_prompt(source, cfg.text_dim)),
          p_star(embed_prompt(edit, cfg.text_dim)),
          z0(testing::random_latent(3, 2, 12, 16)) {
        const EpsFn eps = [this](const TensorGrid<double>& z, int t) { return den.predict(z, t, p).eps; };
        traj = forward_invert(z0, sched, 17, eps);
    }
};

}  // namespace

TEST_CASE("dual branch: identical prompts with full injection keep branches bit-equal") {
    DualBranchFixture fx("a red cube", "a red cube");
    DualBranchConfig db;
    db.tau_cross = 0.0;
    db.tau_self = 0.0;
    TensorGrid<double> zs = fx.traj.latents[8], ze = zs;
    for (int t = 8; t >= 1; --t) {
        const auto step = dual_branch_step(fx.den, fx.sched, zs, ze, t, fx.p, fx.p_star,
                                           align_tokens(fx.p, fx.p_star), fx.traj.noise_maps[t], db);
        CHECK(bit_equal(step.source_next, step.edit_next));
        zs = step.source_next;
        ze = step.edit_next;
    }
    CHECK(linf_diff(ze, fx.z0) <= 1e-5);
}

TEST_CASE("dual branch: never injecting equals plain sampling with the edit prompt") {
    DualBranchFixture fx("a red cube", "a blue cone");
    DualBranchConfig db;
    db.tau_cross = 9.0;  // above T: injection never active
    db.tau_self = 9.0;
    const TokenAlignment ct = align_tokens(fx.p, fx.p_star);
    TensorGrid<double> zs = fx.traj.latents[8], ze = zs;
    const EpsFn edit_eps = [&](const TensorGrid<double>& z, int t) {
        return fx.den.predict(z, t, fx.p_star).eps;
    };
    TensorGrid<double> ze_plain = fx.traj.latents[8];
    for (int t = 8; t >= 1; --t) {
        const auto step =
            dual_branch_step(fx.den, fx.sched, zs, ze, t, fx.p, fx.p_star, ct, fx.traj.noise_maps[t], db);
        ze_plain = sample_step(ze_plain, t, fx.sched, edit_eps, &fx.traj.noise_maps[t]);
        CHECK(bit_equal(step.edit_next, ze_plain));
        zs = step.source_next;
        ze = step.edit_next;
    }
}

TEST_CASE("dual branch: mid-tau configuration matches a manual hook composition oracle") {
    DualBranchFixture fx("a red cube", "a tall blue cone");
    const TokenAlignment ct = align_tokens(fx.p, fx.p_star);
    DualBranchConfig db;
    db.tau_cross = 4.0;
    db.tau_self = 6.0;
    const int t = 5;  // cross active (t >= 4), self inactive (t < 6)
    const TensorGrid<double> zs = fx.traj.latents[t];
    TensorGrid<double> ze = fx.traj.latents[t];
    ze.data += 0.05;  // branches differ

    const auto step = dual_branch_step(fx.den, fx.sched, zs, ze, t, fx.p, fx.p_star, ct,
                                       fx.traj.noise_maps[t], db);

    // oracle: record source maps, then manually compose the injected maps
    const auto src = fx.den.predict(zs, t, fx.p);
    DenoiserHooks manual;
    manual.attention_tap = [&](int layer, AttentionKind kind, const Eigen::MatrixXd& computed) {
        if (kind == AttentionKind::Cross)
            return inject_cross(src.record.cross.at({layer, t}), computed, t, db.tau_cross, ct);
        return inject_self(src.record.self.at({layer, t}), computed, t, db.tau_self);
    };
    const auto manual_edit = fx.den.predict(ze, t, fx.p_star, manual);
    TensorGrid<double> expected = eps_to_mu(ze, manual_edit.eps, t, fx.sched);
    expected.data += fx.sched.sigma[t] * fx.traj.noise_maps[t].data;
    CHECK(bit_equal(step.edit_next, expected));

    // self maps must be the edit branch's own (inactive), cross maps injected
    for (const auto& [key, map] : step.edit_record.self)
        CHECK((map - manual_edit.record.self.at(key)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dual branch: tau_cross near T with equal prompts converges to the source output") {
    DualBranchFixture fx("a red cube", "a red cube");
    DualBranchConfig db;
    db.tau_cross = 8.0;  // inject only at t = T
    db.tau_self = 8.0;
    TensorGrid<double> zs = fx.traj.latents[8], ze = zs;
    for (int t = 8; t >= 1; --t) {
        const auto step = dual_branch_step(fx.den, fx.sched, zs, ze, t, fx.p, fx.p_star,
                                           align_tokens(fx.p, fx.p_star), fx.traj.noise_maps[t], db);
        zs = step.source_next;
        ze = step.edit_next;
    }
    CHECK(linf_diff(ze, zs) <= 1e-6);
}
