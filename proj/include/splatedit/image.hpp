#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "splatedit/errors.hpp"

namespace splatedit {

/// RGB image, values in [0,1], one Eigen array per channel (H x W).
struct Image {
    using Channel = Eigen::ArrayXXd;
    Channel r, g, b;

    Image() = default;
    Image(int height, int width)
        : r(Channel::Zero(height, width)), g(Channel::Zero(height, width)), b(Channel::Zero(height, width)) {}

    int height() const { return static_cast<int>(r.rows()); }
    int width() const { return static_cast<int>(r.cols()); }
    bool same_shape(const Image& o) const { return r.rows() == o.r.rows() && r.cols() == o.r.cols(); }

    Image& clamp01() {
        r = r.min(1.0).max(0.0);
        g = g.min(1.0).max(0.0);
        b = b.min(1.0).max(0.0);
        return *this;
    }
};

/// Grayscale mask image, values in [0,1].
using GrayImage = Eigen::ArrayXXd;

/// 8-bit PNG I/O. Writes RGB; reads any PNG, converting to the requested
/// form (16-bit depth is narrowed, palette/gray expanded).
void write_png(const std::string& path, const Image& img);
void write_png_gray(const std::string& path, const GrayImage& img);
Image read_png(const std::string& path);
GrayImage read_png_gray(const std::string& path);

inline double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DataError("mse: image dimension mismatch");
    const double n = 3.0 * a.height() * a.width();
    return ((a.r - b.r).square().sum() + (a.g - b.g).square().sum() + (a.b - b.b).square().sum()) / n;
}

/// -10 log10(MSE) on the [0,1] scale, capped at +99 dB for identical images.
inline double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return 99.0;
    return std::min(99.0, -10.0 * std::log10(m));
}

}  // namespace splatedit
