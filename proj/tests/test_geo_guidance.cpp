#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <splatedit/geo_guidance.hpp>

#include "test_util.hpp"

using namespace splatedit;

namespace {

DenoiserConfig small_config() {
    DenoiserConfig cfg;
    cfg.base_channels = 8;
    cfg.seed = 13;
    return cfg;
}

RelevanceMask ones_relevance(int views, int h, int w) {
    RelevanceMask r(views, 1, h, w);
    r.data.setOnes();
    return r;
}

}  // namespace

TEST_CASE("relevance: identical prompts give the zero mask") {
    const Denoiser den(small_config());
    const PromptEmbedding p = embed_prompt("a wooden chair");
    const TensorGrid<double> z = testing::random_latent(1, 2, 12, 16);
    const RelevanceMask r = relevance_mask(den, z, 3, p, p);
    CHECK(r.data.abs().maxCoeff() == 0.0);
}

TEST_CASE("relevance normalization: two-point and three-point cases") {
    TensorGrid<double> d(1, 1, 1, 2);
    d.data(0, 0) = 0.0;
    d.data(1, 0) = 2.0;
    const RelevanceMask r2 = normalize_relevance(d);
    CHECK(r2.data(0, 0) == 0.0);
    CHECK(r2.data(1, 0) == 1.0);

    TensorGrid<double> d3(1, 1, 1, 3);
    d3.data(0, 0) = 1.0;
    d3.data(1, 0) = 2.0;
    d3.data(2, 0) = 3.0;
    const RelevanceMask r3 = normalize_relevance(d3);
    CHECK(r3.data(0, 0) == 0.0);
    CHECK(r3.data(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r3.data(2, 0) == 1.0);
}

TEST_CASE("relevance is in [0,1] and symmetric under joint sign flips") {
    const Denoiser den(small_config());
    const PromptEmbedding p = embed_prompt("a wooden chair");
    const PromptEmbedding p_star = embed_prompt("a golden chair");
    const TensorGrid<double> z = testing::random_latent(2, 2, 12, 16);
    const RelevanceMask r = relevance_mask(den, z, 5, p, p_star);
    CHECK(r.data.minCoeff() >= 0.0);
    CHECK(r.data.maxCoeff() <= 1.0);
    CHECK(r.data.maxCoeff() == 1.0);  // min-max normalization attains both ends

    // |.| symmetry at the definition level: flipping both eps signs leaves D unchanged
    const TensorGrid<double> eps_a = den.predict(z, 5, p).eps;
    const TensorGrid<double> eps_b = den.predict(z, 5, p_star).eps;
    TensorGrid<double> d_pos(z.views, 1, z.rows, z.cols), d_neg(z.views, 1, z.rows, z.cols);
    for (int v = 0; v < z.views; ++v)
        for (int c = 0; c < z.channels; ++c) {
            d_pos.plane(v, 0) += (eps_b.plane(v, c) - eps_a.plane(v, c)).abs();
            d_neg.plane(v, 0) += ((-eps_b.plane(v, c)) - (-eps_a.plane(v, c))).abs();
        }
    CHECK(bit_equal(d_pos, d_neg));
}

TEST_CASE("geo_loss: single-cell trivial evaluations") {
    const LatentCodec codec(CodecKind::Identity, 0);
    TensorGrid<double> x0(1, 12, 1, 1);
    // opacity 0, scale (1,1,1) via the identity codec channels
    for (int c : {channel::kScaleX, channel::kScaleY, channel::kScaleZ}) x0.plane(0, c).setConstant(1.0);
    const RelevanceMask r = ones_relevance(1, 1, 1);

    GeoGuidanceParams prm;
    prm.lambda_opacity = 1.0;
    prm.gamma_opacity = 1.0;
    prm.lambda_sigma = 0.0;
    // smooth clamp of 0 gives w ln 2, not exactly 0; the loss reflects that
    const double o0 = LatentCodec::smooth_clamp01(0.0);
    CHECK(geo_loss(codec, x0, r, prm) == doctest::Approx(std::exp(-o0)).epsilon(1e-9));
    CHECK(geo_loss(codec, x0, r, prm) == doctest::Approx(1.0).epsilon(2e-3));  // exp(0) up to the clamp width

    prm.lambda_sigma = 1.0;
    prm.gamma_sigma = 1.0;
    CHECK(geo_loss(codec, x0, r, prm) ==
          doctest::Approx(std::exp(-o0) + std::exp(-3.0)).epsilon(1e-6));

    const RelevanceMask zero(1, 1, 1, 1);
    CHECK(geo_loss(codec, x0, zero, prm) == 0.0);
}

TEST_CASE("geo_loss is nonnegative and decreasing in opacity and trace") {
    const LatentCodec codec(CodecKind::Identity, 0);
    GeoGuidanceParams prm;
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        // draws stay inside the smooth clamps' responsive range; in the
        // saturated tails the derivative underflows and the loss plateaus
        TensorGrid<double> x0(1, 12, 2, 2);
        for (int p = 0; p < x0.plane_count(); ++p)
            for (int i = 0; i < x0.plane_size(); ++i) x0.data(i, p) = rng.uniform(0.05, 0.75);
        RelevanceMask r(1, 1, 2, 2);
        for (int i = 0; i < 4; ++i) r.data(i, 0) = rng.uniform(0.1, 1.0);

        const double base = geo_loss(codec, x0, r, prm);
        CHECK(base >= 0.0);

        TensorGrid<double> more_opaque = x0;
        const int cell = rng.uniform_int(0, 3);
        more_opaque.plane(0, channel::kOpacity)[cell] += 0.2;
        CHECK(geo_loss(codec, more_opaque, r, prm) < base);

        TensorGrid<double> larger = x0;
        larger.plane(0, channel::kScaleX)[cell] += 0.2;
        CHECK(geo_loss(codec, larger, r, prm) < base);
    }
}

TEST_CASE("truncated guidance gradient matches finite differences of the truncated objective") {
    for (CodecKind kind : {CodecKind::Identity, CodecKind::Orthogonal}) {
        const LatentCodec codec(kind, 3);
        Rng rng(31);
        for (int trial = 0; trial < 5; ++trial) {
            const TensorGrid<double> z = testing::random_latent(50 + trial, 1, 12, 4);
            const TensorGrid<double> eps = testing::random_latent(90 + trial, 1, 12, 4);
            const double alpha_bar = rng.uniform(0.3, 0.99);
            RelevanceMask r(1, 1, 4, 4);
            for (int i = 0; i < r.plane_size(); ++i) r.data(i, 0) = rng.uniform(0.0, 1.0);
            GeoGuidanceParams prm;
            prm.gamma_opacity = rng.uniform(1.0, 6.0);
            prm.gamma_sigma = rng.uniform(0.5, 2.0);

            const TensorGrid<double> grad = geo_loss_grad(codec, z, eps, alpha_bar, r, prm);
            const double h = 1e-4;
            double worst = 0.0;
            Rng pick(7);
            for (int probe = 0; probe < 20; ++probe) {
                const int p = pick.uniform_int(0, z.plane_count() - 1);
                const int i = pick.uniform_int(0, z.plane_size() - 1);
                TensorGrid<double> zp = z, zm = z;
                zp.data(i, p) += h;
                zm.data(i, p) -= h;
                const double lp = geo_loss(codec, x0_estimate(zp, eps, alpha_bar), r, prm);
                const double lm = geo_loss(codec, x0_estimate(zm, eps, alpha_bar), r, prm);
                const double fd = (lp - lm) / (2 * h);
                const double denom = std::max({std::abs(fd), std::abs(grad.data(i, p)), 1e-8});
                worst = std::max(worst, std::abs(fd - grad.data(i, p)) / denom);
            }
            CHECK(worst < 1e-3);
        }
    }
}

TEST_CASE("full-backprop gradient matches finite differences through the denoiser") {
    const LatentCodec codec(CodecKind::Identity, 0);
    const Denoiser den(small_config());
    const PromptEmbedding p = embed_prompt("a stone arch");
    const TensorGrid<double> z = testing::random_latent(77, 1, 12, 16);
    const int t = 4;
    const double alpha_bar = 0.8;
    RelevanceMask r(1, 1, 16, 16);
    Rng rng(12);
    for (int i = 0; i < r.plane_size(); ++i) r.data(i, 0) = rng.uniform(0.0, 1.0);
    GeoGuidanceParams prm;

    const Denoiser::Forward fwd = den.forward(z, t, p);
    const TensorGrid<double> grad = geo_loss_grad_full(codec, den, fwd, alpha_bar, r, prm);

    auto loss_at = [&](const TensorGrid<double>& zq) {
        const TensorGrid<double> eps = den.predict(zq, t, p).eps;
        return geo_loss(codec, x0_estimate(zq, eps, alpha_bar), r, prm);
    };
    const double h = 1e-5;
    Rng pick(3);
    for (int probe = 0; probe < 8; ++probe) {
        const int pl = pick.uniform_int(0, z.plane_count() - 1);
        const int i = pick.uniform_int(0, z.plane_size() - 1);
        TensorGrid<double> zp = z, zm = z;
        zp.data(i, pl) += h;
        zm.data(i, pl) -= h;
        const double fd = (loss_at(zp) - loss_at(zm)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad.data(i, pl)), 1e-8});
        CHECK(std::abs(fd - grad.data(i, pl)) / denom < 1e-3);
    }
}

TEST_CASE("guided_step: zero scale and zero gradient are no-ops") {
    const TensorGrid<double> blended = testing::random_latent(5, 1, 3, 4);
    const TensorGrid<double> grad = testing::random_latent(6, 1, 3, 4);
    CHECK(bit_equal(guided_step(blended, grad, 0.0), blended));
    const TensorGrid<double> zero = TensorGrid<double>::zeros_like(grad);
    CHECK(bit_equal(guided_step(blended, zero, 0.5), blended));
}

TEST_CASE("guided_step: masked gradient leaves cells outside the mask bit-exact") {
    const TensorGrid<double> blended = testing::random_latent(7, 1, 3, 4);
    const TensorGrid<double> grad = testing::random_latent(8, 1, 3, 4);
    EditMask m(1, 1, 4, 4);
    m.plane(0, 0)[6] = 1.0;
    const TensorGrid<double> out = guided_step(blended, grad, 0.3, &m);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 16; ++i) {
            if (i == 6)
                CHECK(out.plane(0, c)[i] == blended.plane(0, c)[i] - 0.3 * grad.plane(0, c)[i]);
            else
                CHECK(out.plane(0, c)[i] == blended.plane(0, c)[i]);
        }
}

TEST_CASE("guided_step: non-finite gradient aborts") {
    const TensorGrid<double> blended = testing::random_latent(9, 1, 2, 4);
    TensorGrid<double> grad = testing::random_latent(10, 1, 2, 4);
    grad.data(3, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(guided_step(blended, grad, 0.1), NumericalError);
}
