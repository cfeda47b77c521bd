#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <splatedit/freq_anneal.hpp>

#include <complex>

#include "test_util.hpp"

using namespace splatedit;

namespace {

// independent O(N^4) DFT oracle
Eigen::MatrixXcd naive_dft2(const Eigen::MatrixXd& plane) {
    const int h = static_cast<int>(plane.rows()), w = static_cast<int>(plane.cols());
    Eigen::MatrixXcd out(h, w);
    const double tau = 2.0 * 3.14159265358979323846;
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
            std::complex<double> acc(0, 0);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double angle = -tau * (static_cast<double>(ky) * y / h + static_cast<double>(kx) * x / w);
                    acc += plane(y, x) * std::complex<double>(std::cos(angle), std::sin(angle));
                }
            out(ky, kx) = acc;
        }
    return out;
}

double normalized_radius(int ky, int kx, int h, int w) {
    const int fy = ky <= h / 2 ? ky : ky - h;
    const int fx = kx <= w / 2 ? kx : kx - w;
    const double ry = std::abs(fy) / (h / 2.0);
    const double rx = std::abs(fx) / (w / 2.0);
    return std::sqrt(rx * rx + ry * ry) / std::sqrt(2.0);
}

Eigen::MatrixXd to_plane(const TensorGrid<double>& t, int v, int c) {
    Eigen::MatrixXd m(t.rows, t.cols);
    for (int y = 0; y < t.rows; ++y)
        for (int x = 0; x < t.cols; ++x) m(y, x) = t.at(v, c, y, x);
    return m;
}

}  // namespace

TEST_CASE("modulation_mask: neutral scales give beta = 1 everywhere") {
    AnnealParams prm{1.0, 1.0, 5.0, 0.25};
    const Eigen::ArrayXXd beta = modulation_mask(8, 8, 9, prm);
    CHECK((beta == 1.0).all());
}

TEST_CASE("modulation_mask: saturated cases") {
    AnnealParams low{2.0, 1.1, 5.0, 1.0};
    const Eigen::ArrayXXd beta_low = modulation_mask(8, 8, 9, low);  // t > tau, r_thresh = 1
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            // the Nyquist corner has r = 1 exactly and stays in the high band
            if (normalized_radius(y, x, 8, 8) < 1.0)
                CHECK(beta_low(y, x) == 2.0);
            else
                CHECK(beta_low(y, x) == 1.0);
        }

    AnnealParams high{1.2, 3.0, 5.0, 0.0};
    const Eigen::ArrayXXd beta_high = modulation_mask(8, 8, 2, high);  // t <= tau, r_thresh = 0
    CHECK((beta_high == 3.0).all());
}

TEST_CASE("modulation_mask: DC sits at radius 0, boundary goes to the high band") {
    AnnealParams prm{2.0, 3.0, 5.0, 0.5};
    const Eigen::ArrayXXd early = modulation_mask(8, 8, 9, prm);
    CHECK(early(0, 0) == 2.0);  // DC in the low band during early denoising
    // r exactly at the threshold: high band, so untouched in the early case
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (normalized_radius(y, x, 8, 8) == 0.5) CHECK(early(y, x) == 1.0);
}

TEST_CASE("modulate_skip: neutral beta is an identity within 1e-6") {
    AnnealParams prm{1.0, 1.0, 5.0, 0.25};
    const TensorGrid<double> h = testing::random_latent(3, 2, 4, 8);
    const TensorGrid<double> out = modulate_skip(h, 9, prm);
    CHECK(linf_diff(out, h) < 1e-6);
}

TEST_CASE("modulate_skip: constant input is pure DC and scales by s_l early") {
    AnnealParams prm{2.0, 1.1, 5.0, 0.25};
    TensorGrid<double> h(1, 1, 8, 8);
    h.data.setConstant(0.7);
    const TensorGrid<double> out = modulate_skip(h, 9, prm);  // t > tau
    for (int i = 0; i < out.plane_size(); ++i)
        CHECK(out.plane(0, 0)[i] == doctest::Approx(1.4).epsilon(1e-9));
}

TEST_CASE("modulate_skip: band energies scale by s_l^2 / s_h^2 (Parseval oracle)") {
    const TensorGrid<double> h = testing::random_latent(13, 1, 1, 8);
    const Eigen::MatrixXd plane = to_plane(h, 0, 0);

    auto band_energies = [&](const Eigen::MatrixXd& p, double r_thresh) {
        const Eigen::MatrixXcd spec = naive_dft2(p);
        double low = 0, high = 0;
        for (int ky = 0; ky < 8; ++ky)
            for (int kx = 0; kx < 8; ++kx) {
                const double e = std::norm(spec(ky, kx));
                (normalized_radius(ky, kx, 8, 8) < r_thresh ? low : high) += e;
            }
        return std::pair<double, double>{low, high};
    };

    AnnealParams early{1.7, 1.3, 5.0, 0.4};
    const auto [low0, high0] = band_energies(plane, early.radius_threshold);

    // early denoising: low band scaled by s_l, high band untouched
    const TensorGrid<double> out_early = modulate_skip(h, 9, early);
    const auto [low1, high1] = band_energies(to_plane(out_early, 0, 0), early.radius_threshold);
    CHECK(std::abs(low1 - early.scale_low * early.scale_low * low0) / low0 < 1e-5);
    CHECK(std::abs(high1 - high0) / high0 < 1e-5);

    // late denoising: high band scaled by s_h, low band untouched
    const TensorGrid<double> out_late = modulate_skip(h, 2, early);
    const auto [low2, high2] = band_energies(to_plane(out_late, 0, 0), early.radius_threshold);
    CHECK(std::abs(high2 - early.scale_high * early.scale_high * high0) / high0 < 1e-5);
    CHECK(std::abs(low2 - low0) / low0 < 1e-5);
}

TEST_CASE("modulate_skip: linear in its input") {
    AnnealParams prm{1.5, 0.7, 5.0, 0.3};
    const TensorGrid<double> h = testing::random_latent(21, 2, 3, 8);
    TensorGrid<double> scaled = h;
    scaled.data *= 3.25;
    const TensorGrid<double> a = modulate_skip(scaled, 9, prm);
    TensorGrid<double> b = modulate_skip(h, 9, prm);
    b.data *= 3.25;
    CHECK(linf_diff(a, b) < 1e-9);
}

TEST_CASE("modulate_skip: total spectral energy follows sum beta^2 E(r)") {
    AnnealParams prm{1.4, 0.8, 5.0, 0.5};
    const TensorGrid<double> h = testing::random_latent(34, 1, 1, 8);
    const Eigen::MatrixXd plane = to_plane(h, 0, 0);
    const Eigen::MatrixXcd spec = naive_dft2(plane);
    const Eigen::ArrayXXd beta = modulation_mask(8, 8, 9, prm);
    double expected = 0;
    for (int ky = 0; ky < 8; ++ky)
        for (int kx = 0; kx < 8; ++kx) expected += beta(ky, kx) * beta(ky, kx) * std::norm(spec(ky, kx));
    const Eigen::MatrixXcd out_spec = naive_dft2(to_plane(modulate_skip(h, 9, prm), 0, 0));
    double actual = 0;
    for (int ky = 0; ky < 8; ++ky)
        for (int kx = 0; kx < 8; ++kx) actual += std::norm(out_spec(ky, kx));
    CHECK(std::abs(actual - expected) / expected < 1e-5);
}

TEST_CASE("modulate_skip: real output for real input, self-adjoint operator") {
    AnnealParams prm{1.6, 0.9, 5.0, 0.35};
    const TensorGrid<double> a = testing::random_latent(55, 1, 2, 8);
    const TensorGrid<double> b = testing::random_latent(56, 1, 2, 8);
    // <Ma, b> == <a, Mb>
    const double lhs = (modulate_skip(a, 9, prm).data * b.data).sum();
    const double rhs = (a.data * modulate_skip(b, 9, prm).data).sum();
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("modulation_mask handles 1x1 dims") {
    AnnealParams prm{2.0, 3.0, 5.0, 0.5};
    const Eigen::ArrayXXd beta = modulation_mask(1, 1, 9, prm);
    CHECK(beta(0, 0) == 2.0);  // single DC bin, r = 0
}
