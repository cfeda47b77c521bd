#pragma once

#include <Eigen/Dense>
#include <vector>

#include "splatedit/errors.hpp"

namespace splatedit {

/// Pinhole intrinsics for one view. (width, height) is the pixel grid the
/// parameters were stated for; scaled_to() rescales them for other render
/// resolutions.
struct Intrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    Intrinsics scaled_to(int new_width, int new_height) const {
        const double sx = static_cast<double>(new_width) / width;
        const double sy = static_cast<double>(new_height) / height;
        return {fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
    }
};

/// Camera-to-world pose: x_world = rotation * x_cam + center.
struct CameraPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();

    Eigen::Vector3d to_world(const Eigen::Vector3d& x_cam) const { return rotation * x_cam + center; }
    Eigen::Vector3d to_camera(const Eigen::Vector3d& x_world) const {
        return rotation.transpose() * (x_world - center);
    }

    double rotation_orthonormality_error() const {
        return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    }

    /// Camera at `eye`, optical axis (+z in camera frame) towards `target`.
    static CameraPose looking_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                                 const Eigen::Vector3d& up = Eigen::Vector3d(0, 1, 0)) {
        Eigen::Vector3d fwd = (target - eye).normalized();
        Eigen::Vector3d right = fwd.cross(up).normalized();
        Eigen::Vector3d down = fwd.cross(right);  // +y points down the image
        CameraPose pose;
        pose.rotation.col(0) = right;
        pose.rotation.col(1) = down;
        pose.rotation.col(2) = fwd;
        pose.center = eye;
        return pose;
    }
};

struct CameraRig {
    std::vector<Intrinsics> intrinsics;
    std::vector<CameraPose> poses;

    int view_count() const { return static_cast<int>(poses.size()); }

    void require_view(int v) const {
        if (v < 0 || v >= view_count()) throw DataError("camera rig: view index out of range");
    }
};

/// V cameras on a horizontal ring of the given radius, all aimed at the
/// origin. The demo assets and tests use this layout.
inline CameraRig make_ring_rig(int views, int width, int height, double radius, double focal) {
    CameraRig rig;
    for (int v = 0; v < views; ++v) {
        const double a = 2.0 * 3.14159265358979323846 * v / views;
        const Eigen::Vector3d eye(radius * std::sin(a), 0.0, -radius * std::cos(a));
        rig.poses.push_back(CameraPose::looking_at(eye, Eigen::Vector3d::Zero()));
        rig.intrinsics.push_back({focal, focal, 0.5 * width, 0.5 * height, width, height});
    }
    return rig;
}

}  // namespace splatedit
