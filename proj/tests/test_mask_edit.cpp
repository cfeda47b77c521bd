#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <splatedit/mask_edit.hpp>

#include "test_util.hpp"

using namespace splatedit;

namespace {

AttentionRecord record_with_columns(const Eigen::VectorXd& column, int tokens, int steps) {
    AttentionRecord rec;
    const int n = static_cast<int>(column.size());
    for (int t = 1; t <= steps; ++t) {
        Eigen::MatrixXd map = Eigen::MatrixXd::Constant(n, tokens, 1.0 / tokens);
        map.col(0) = column;
        rec.cross[{0, t}] = map;
    }
    return rec;
}

}  // namespace

TEST_CASE("attention_mask: uniform attention degenerates to the all-zero mask") {
    const int positions = 2 * 4 * 4;
    const AttentionRecord rec = record_with_columns(Eigen::VectorXd::Constant(positions, 0.5), 2, 3);
    const EditMask mask = attention_mask(rec, 0, 0.5, 2, 4, 4, 8, 8);
    CHECK(mask.data.abs().maxCoeff() == 0.0);
}

TEST_CASE("attention_mask: one-hot column selects exactly that cell") {
    const int positions = 1 * 4 * 4;
    Eigen::VectorXd col = Eigen::VectorXd::Zero(positions);
    col[1 * 4 + 2] = 1.0;  // attention cell (y=1, x=2)
    const AttentionRecord rec = record_with_columns(col, 3, 5);
    const EditMask mask = attention_mask(rec, 0, 0.5, 1, 4, 4, 8, 8);
    // nearest-neighbor lift doubles the cell to a 2x2 block
    double sum = 0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const double m = mask.plane(0, 0)[y * 8 + x];
            sum += m;
            const bool inside = (y / 2 == 1 && x / 2 == 2);
            CHECK(m == (inside ? 1.0 : 0.0));
        }
    CHECK(sum == 4.0);
}

TEST_CASE("attention_mask: zero threshold marks everything when attention is non-degenerate") {
    const int positions = 1 * 4 * 4;
    Eigen::VectorXd col = Eigen::VectorXd::LinSpaced(positions, 0.0, 1.0);
    const AttentionRecord rec = record_with_columns(col, 2, 2);
    const EditMask mask = attention_mask(rec, 0, 0.0, 1, 4, 4, 8, 8);
    CHECK(mask.data.minCoeff() == 1.0);
}

TEST_CASE("attention_mask: invariant under positive affine rescaling of the column") {
    const int positions = 1 * 4 * 4;
    Eigen::VectorXd col(positions);
    Rng rng(8);
    for (int i = 0; i < positions; ++i) col[i] = rng.uniform();
    const EditMask a = attention_mask(record_with_columns(col, 2, 3), 0, 0.5, 1, 4, 4, 8, 8);
    const Eigen::VectorXd scaled = 3.7 * col.array() + 0.21;
    const EditMask b = attention_mask(record_with_columns(scaled, 2, 3), 0, 0.5, 1, 4, 4, 8, 8);
    CHECK(bit_equal(a, b));
}

TEST_CASE("attention_mask: missing token index throws") {
    const AttentionRecord rec = record_with_columns(Eigen::VectorXd::Ones(16), 2, 1);
    CHECK_THROWS_AS(attention_mask(rec, 5, 0.5, 1, 4, 4, 8, 8), DataError);
}

TEST_CASE("lift_view_masks: all-white and all-black masks") {
    const std::vector<GrayImage> white(3, GrayImage::Ones(16, 16));
    CHECK(lift_view_masks(white, 8, 8).data.minCoeff() == 1.0);
    const std::vector<GrayImage> black(3, GrayImage::Zero(16, 16));
    CHECK(lift_view_masks(black, 8, 8).data.maxCoeff() == 0.0);
}

TEST_CASE("lift_view_masks: centered 8x8 square at matching resolution maps pixel-exactly") {
    GrayImage img = GrayImage::Zero(16, 16);
    img.block(4, 4, 8, 8).setOnes();
    const EditMask mask = lift_view_masks({img}, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const bool inside = y >= 4 && y < 12 && x >= 4 && x < 12;
            CHECK(mask.plane(0, 0)[y * 16 + x] == (inside ? 1.0 : 0.0));
        }
}

TEST_CASE("lift_view_masks: any covered pixel in the footprint marks the cell") {
    GrayImage img = GrayImage::Zero(16, 16);
    img(5, 9) = 1.0;  // single pixel
    const EditMask mask = lift_view_masks({img}, 8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(mask.plane(0, 0)[y * 8 + x] == ((y == 2 && x == 4) ? 1.0 : 0.0));
}

TEST_CASE("lift_view_masks: threshold is 128/255") {
    GrayImage img = GrayImage::Zero(4, 4);
    img(0, 0) = 128.0 / 255.0;
    img(1, 1) = 127.0 / 255.0;
    const EditMask mask = lift_view_masks({img}, 4, 4);
    CHECK(mask.plane(0, 0)[0] == 1.0);
    CHECK(mask.plane(0, 0)[1 * 4 + 1] == 0.0);
}

TEST_CASE("union_masks: identity, absorbing element, commutativity") {
    Rng rng(3);
    EditMask a(2, 1, 4, 4), b(2, 1, 4, 4), zeros(2, 1, 4, 4), ones(2, 1, 4, 4);
    ones.data.setOnes();
    for (int i = 0; i < a.plane_size(); ++i)
        for (int p = 0; p < a.plane_count(); ++p) {
            a.data(i, p) = rng.uniform() < 0.5 ? 1.0 : 0.0;
            b.data(i, p) = rng.uniform() < 0.5 ? 1.0 : 0.0;
        }
    CHECK(bit_equal(union_masks(a, zeros), a));
    CHECK(bit_equal(union_masks(a, ones), ones));
    CHECK(bit_equal(union_masks(a, b), union_masks(b, a)));
}

TEST_CASE("blend_latents: binary masks select bit-exactly") {
    const TensorGrid<double> z = testing::random_latent(1, 2, 3, 4);
    const TensorGrid<double> z_edit = testing::random_latent(2, 2, 3, 4);
    EditMask zeros(2, 1, 4, 4), ones(2, 1, 4, 4);
    ones.data.setOnes();
    CHECK(bit_equal(blend_latents(z, z_edit, zeros), z));
    CHECK(bit_equal(blend_latents(z, z_edit, ones), z_edit));
}

TEST_CASE("blend_latents: componentwise selection on a two-cell mask") {
    TensorGrid<double> z(1, 1, 1, 2), z_edit(1, 1, 1, 2);
    z.data(0, 0) = 10.0;
    z.data(1, 0) = 20.0;
    z_edit.data(0, 0) = -1.0;
    z_edit.data(1, 0) = -2.0;
    EditMask m(1, 1, 1, 2);
    m.data(0, 0) = 1.0;
    m.data(1, 0) = 0.0;
    const TensorGrid<double> out = blend_latents(z, z_edit, m);
    CHECK(out.data(0, 0) == -1.0);
    CHECK(out.data(1, 0) == 20.0);
}

TEST_CASE("blend_latents: idempotent and confined to the mask") {
    const TensorGrid<double> z = testing::random_latent(4, 2, 3, 4);
    const TensorGrid<double> z_edit = testing::random_latent(5, 2, 3, 4);
    EditMask m(2, 1, 4, 4);
    Rng rng(6);
    for (int p = 0; p < m.plane_count(); ++p)
        for (int i = 0; i < m.plane_size(); ++i) m.data(i, p) = rng.uniform() < 0.3 ? 1.0 : 0.0;
    const TensorGrid<double> once = blend_latents(z, z_edit, m);
    const TensorGrid<double> twice = blend_latents(z, blend_latents(z, z_edit, m), m);
    CHECK(bit_equal(once, twice));

    // cells outside the mask equal the source exactly
    for (int v = 0; v < 2; ++v)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i)
                if (m.plane(v, 0)[i] == 0.0) CHECK(once.plane(v, c)[i] == z.plane(v, c)[i]);
}

TEST_CASE("blend_latents: enlarging the mask never changes cells outside the enlargement") {
    const TensorGrid<double> z = testing::random_latent(7, 1, 2, 4);
    const TensorGrid<double> z_edit = testing::random_latent(8, 1, 2, 4);
    EditMask small(1, 1, 4, 4), large(1, 1, 4, 4);
    small.plane(0, 0)[5] = 1.0;
    large.plane(0, 0)[5] = 1.0;
    large.plane(0, 0)[9] = 1.0;
    const TensorGrid<double> a = blend_latents(z, z_edit, small);
    const TensorGrid<double> b = blend_latents(z, z_edit, large);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 16; ++i)
            if (i != 9) CHECK(a.plane(0, c)[i] == b.plane(0, c)[i]);
}

TEST_CASE("mask_view_to_image: nearest-neighbor upsample") {
    EditMask m(1, 1, 2, 2);
    m.plane(0, 0)[0] = 1.0;  // top-left cell
    const GrayImage img = mask_view_to_image(m, 0, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(img(y, x) == ((y < 2 && x < 2) ? 1.0 : 0.0));
}
