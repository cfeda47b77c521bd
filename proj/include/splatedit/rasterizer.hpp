#pragma once

#include <Eigen/Dense>
#include <vector>

#include "splatedit/image.hpp"
#include "splatedit/splat_grid.hpp"

namespace splatedit {

struct RenderedView {
    Image rgb;
    GrayImage alpha;
    int view_index = 0;
};

struct RenderOptions {
    Eigen::Vector3d background{0, 0, 0};
    double alpha_clamp = 0.999;          // per-splat alpha cap
    double cutoff_sigmas = 3.0;          // Gaussian footprint truncation
    double near_clip = 1e-6;
    double transmittance_floor = 1e-4;   // front-to-back early out
};

/// One Gaussian in world space, ready for projection.
struct WorldSplat {
    Eigen::Vector3d position;
    Eigen::Matrix3d covariance;
    Eigen::Vector3d rgb;
    double opacity = 0;
    int source_index = 0;  // linear (view, y, x) index in the source grid
};

/// Every cell of the grid as a world splat (zero-opacity cells dropped).
std::vector<WorldSplat> collect_splats(const SplatGrid& grid);

/// Software rasterization: perspective projection of each Gaussian with a
/// local affine (Jacobian) covariance projection, canonical depth sort
/// (ties by source index), front-to-back alpha compositing. Deterministic;
/// pixel rows render independently.
RenderedView rasterize_splats(const std::vector<WorldSplat>& splats, const Intrinsics& intr,
                              const CameraPose& pose, const RenderOptions& opts = {}, int view_index = 0);

/// Renders `view` of the rig at the given resolution (intrinsics rescaled
/// from their native size).
RenderedView rasterize(const SplatGrid& grid, const CameraRig& rig, int view, int width, int height,
                       const RenderOptions& opts = {});
RenderedView rasterize(const SplatGrid& grid, int view, int width, int height,
                       const RenderOptions& opts = {});

/// Per-splat pullback of a pixel-space gradient through the compositing
/// chain, for rgb and opacity (the analytic parameters of the optimizer).
struct SplatGradients {
    Eigen::MatrixX3d rgb;      // one row per splat in the input list
    Eigen::VectorXd opacity;
};
SplatGradients rasterize_backward(const std::vector<WorldSplat>& splats, const Intrinsics& intr,
                                  const CameraPose& pose, const Image& grad_pixels,
                                  const RenderOptions& opts = {});

}  // namespace splatedit
