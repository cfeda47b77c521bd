#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "splatedit/camera.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

/// Channel layout of a splat grid cell. The order is normative for the
/// container file format.
namespace channel {
inline constexpr int kRed = 0;
inline constexpr int kGreen = 1;
inline constexpr int kBlue = 2;
inline constexpr int kDepth = 3;
inline constexpr int kScaleX = 4;
inline constexpr int kScaleY = 5;
inline constexpr int kScaleZ = 6;
inline constexpr int kQuatW = 7;
inline constexpr int kQuatX = 8;
inline constexpr int kQuatY = 9;
inline constexpr int kQuatZ = 10;
inline constexpr int kOpacity = 11;
inline constexpr int kCount = 12;
}  // namespace channel

/// One cell's attributes, unpacked.
template <class Scalar>
struct GaussianAttributes {
    Eigen::Matrix<Scalar, 3, 1> rgb;
    Scalar depth = 0;
    Eigen::Matrix<Scalar, 3, 1> scale;
    Eigen::Matrix<Scalar, 4, 1> rotation;  // (w, x, y, z), unit
    Scalar opacity = 0;
};

/// Pixel-aligned multi-view grid of Gaussians plus the camera rig that
/// anchors each cell in space. Immutable by convention once built; nothing
/// here mutates shared state, so grids can be shared read-only across
/// workers.
template <class Scalar>
struct SplatGridT {
    TensorGrid<Scalar> attributes;  // C = channel::kCount
    CameraRig rig;

    SplatGridT() = default;
    SplatGridT(int views, int h, int w) : attributes(views, channel::kCount, h, w) {}

    int view_count() const { return attributes.views; }
    int height() const { return attributes.rows; }
    int width() const { return attributes.cols; }

    GaussianAttributes<Scalar> cell(int v, int y, int x) const {
        GaussianAttributes<Scalar> g;
        const auto& a = attributes;
        g.rgb << a.at(v, channel::kRed, y, x), a.at(v, channel::kGreen, y, x), a.at(v, channel::kBlue, y, x);
        g.depth = a.at(v, channel::kDepth, y, x);
        g.scale << a.at(v, channel::kScaleX, y, x), a.at(v, channel::kScaleY, y, x), a.at(v, channel::kScaleZ, y, x);
        g.rotation << a.at(v, channel::kQuatW, y, x), a.at(v, channel::kQuatX, y, x), a.at(v, channel::kQuatY, y, x),
            a.at(v, channel::kQuatZ, y, x);
        g.opacity = a.at(v, channel::kOpacity, y, x);
        return g;
    }

    void set_cell(int v, int y, int x, const GaussianAttributes<Scalar>& g) {
        auto& a = attributes;
        a.at(v, channel::kRed, y, x) = g.rgb[0];
        a.at(v, channel::kGreen, y, x) = g.rgb[1];
        a.at(v, channel::kBlue, y, x) = g.rgb[2];
        a.at(v, channel::kDepth, y, x) = g.depth;
        a.at(v, channel::kScaleX, y, x) = g.scale[0];
        a.at(v, channel::kScaleY, y, x) = g.scale[1];
        a.at(v, channel::kScaleZ, y, x) = g.scale[2];
        a.at(v, channel::kQuatW, y, x) = g.rotation[0];
        a.at(v, channel::kQuatX, y, x) = g.rotation[1];
        a.at(v, channel::kQuatY, y, x) = g.rotation[2];
        a.at(v, channel::kQuatZ, y, x) = g.rotation[3];
        a.at(v, channel::kOpacity, y, x) = g.opacity;
    }
};

using SplatGrid = SplatGridT<double>;

struct Violation {
    int view = 0, y = 0, x = 0;
    std::string what;
};

using ValidationReport = std::vector<Violation>;

/// Total function: returns one entry per violated invariant, empty iff the
/// grid is valid. Tolerances: quaternion norm 1e-6, rotations orthonormal
/// 1e-6.
template <class Scalar>
ValidationReport validate_grid(const SplatGridT<Scalar>& grid) {
    ValidationReport report;
    const auto& a = grid.attributes;
    if (a.channels != channel::kCount) {
        report.push_back({-1, -1, -1, "attribute tensor must have 12 channels"});
        return report;
    }
    if (grid.rig.view_count() != grid.view_count())
        report.push_back({-1, -1, -1, "camera rig view count does not match grid"});
    if (grid.rig.view_count() < 1) report.push_back({-1, -1, -1, "camera rig must have at least one view"});
    for (int v = 0; v < grid.rig.view_count(); ++v) {
        if (grid.rig.poses[v].rotation_orthonormality_error() > 1e-6)
            report.push_back({v, -1, -1, "extrinsic rotation not orthonormal"});
    }
    for (int v = 0; v < grid.view_count(); ++v) {
        for (int y = 0; y < grid.height(); ++y) {
            for (int x = 0; x < grid.width(); ++x) {
                const auto g = grid.cell(v, y, x);
                if (!g.rgb.allFinite() || !g.scale.allFinite() || !g.rotation.allFinite() ||
                    !std::isfinite(static_cast<double>(g.depth)) || !std::isfinite(static_cast<double>(g.opacity))) {
                    report.push_back({v, y, x, "non-finite attribute"});
                    continue;
                }
                if (g.opacity < Scalar(0) || g.opacity > Scalar(1))
                    report.push_back({v, y, x, "opacity outside [0,1]"});
                if (g.depth < Scalar(0)) report.push_back({v, y, x, "negative depth"});
                if (!(g.scale.array() > Scalar(0)).all()) report.push_back({v, y, x, "non-positive scale"});
                const double norm_err = std::abs(static_cast<double>(g.rotation.norm()) - 1.0);
                if (norm_err > 1e-6) report.push_back({v, y, x, "quaternion norm deviates from 1"});
            }
        }
    }
    return report;
}

/// World-space location of the cell's Gaussian: the camera ray through pixel
/// (x+0.5, y+0.5) scaled so the camera-frame z equals the stored depth
/// (z-depth convention).
template <class Scalar>
Eigen::Vector3d unproject(const SplatGridT<Scalar>& grid, int view, int y, int x) {
    if (view < 0 || view >= grid.view_count() || y < 0 || y >= grid.height() || x < 0 || x >= grid.width())
        throw DataError("unproject: pixel index out of bounds");
    const Intrinsics& K = grid.rig.intrinsics[view];
    const double depth = static_cast<double>(grid.attributes.at(view, channel::kDepth, y, x));
    const double u = x + 0.5, v = y + 0.5;
    const Eigen::Vector3d x_cam(depth * (u - K.cx) / K.fx, depth * (v - K.cy) / K.fy, depth);
    return grid.rig.poses[view].to_world(x_cam);
}

template <class Scalar>
Eigen::Matrix<Scalar, 3, 3> quaternion_to_rotation(const Eigen::Matrix<Scalar, 4, 1>& q_in) {
    Eigen::Matrix<Scalar, 4, 1> q = q_in;
    const Scalar n = q.norm();
    if (n > Scalar(0)) q /= n;
    const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix<Scalar, 3, 3> R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

/// World covariance Sigma = R diag(s^2) R^T of one cell. The quaternion is
/// interpreted in world frame.
template <class Scalar>
Eigen::Matrix<Scalar, 3, 3> covariance_matrix(const GaussianAttributes<Scalar>& g) {
    const auto R = quaternion_to_rotation<Scalar>(g.rotation);
    return R * g.scale.array().square().matrix().asDiagonal() * R.transpose();
}

/// Tr(Sigma) = s_x^2 + s_y^2 + s_z^2; rotation drops out of the trace.
template <class Scalar>
Scalar covariance_trace(const GaussianAttributes<Scalar>& g) {
    return g.scale.array().square().sum();
}

}  // namespace splatedit
