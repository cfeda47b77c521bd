#include "splatedit/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "splatedit/parallel.hpp"

namespace splatedit {

namespace {

struct ProjectedSplat {
    double u = 0, v = 0, z = 0;
    Eigen::Matrix2d inv_cov;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bbox
    Eigen::Vector3d rgb;
    double opacity = 0;
    int list_index = 0;
};

std::vector<ProjectedSplat> project_and_sort(const std::vector<WorldSplat>& splats, const Intrinsics& intr,
                                             const CameraPose& pose, const RenderOptions& opts,
                                             int width, int height) {
    std::vector<ProjectedSplat> out;
    out.reserve(splats.size());
    for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
        const WorldSplat& s = splats[i];
        const Eigen::Vector3d xc = pose.to_camera(s.position);
        if (!(xc[2] > opts.near_clip)) continue;
        const double z = xc[2];
        ProjectedSplat p;
        p.u = intr.fx * xc[0] / z + intr.cx;
        p.v = intr.fy * xc[1] / z + intr.cy;
        p.z = z;
        Eigen::Matrix<double, 2, 3> J;
        J << intr.fx / z, 0, -intr.fx * xc[0] / (z * z),  //
            0, intr.fy / z, -intr.fy * xc[1] / (z * z);
        const Eigen::Matrix3d cov_cam = pose.rotation.transpose() * s.covariance * pose.rotation;
        const Eigen::Matrix2d cov2d = J * cov_cam * J.transpose();
        const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
        if (!(det > 1e-300) || !std::isfinite(det)) continue;
        p.inv_cov << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;
        const double ru = opts.cutoff_sigmas * std::sqrt(std::max(0.0, cov2d(0, 0)));
        const double rv = opts.cutoff_sigmas * std::sqrt(std::max(0.0, cov2d(1, 1)));
        p.x0 = std::max(0, static_cast<int>(std::floor(p.u - ru - 0.5)));
        p.x1 = std::min(width - 1, static_cast<int>(std::ceil(p.u + ru - 0.5)));
        p.y0 = std::max(0, static_cast<int>(std::floor(p.v - rv - 0.5)));
        p.y1 = std::min(height - 1, static_cast<int>(std::ceil(p.v + rv - 0.5)));
        if (p.x0 > p.x1 || p.y0 > p.y1) continue;
        p.rgb = s.rgb;
        p.opacity = s.opacity;
        p.list_index = i;
        out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [&splats](const ProjectedSplat& a, const ProjectedSplat& b) {
        if (a.z != b.z) return a.z < b.z;
        return splats[a.list_index].source_index < splats[b.list_index].source_index;
    });
    return out;
}

double splat_alpha(const ProjectedSplat& p, double px, double py, const RenderOptions& opts,
                   bool* clamped = nullptr) {
    const double du = px - p.u, dv = py - p.v;
    const double q = du * (p.inv_cov(0, 0) * du + p.inv_cov(0, 1) * dv) +
                     dv * (p.inv_cov(1, 0) * du + p.inv_cov(1, 1) * dv);
    if (q > opts.cutoff_sigmas * opts.cutoff_sigmas || q < 0.0) return 0.0;
    const double g = std::exp(-0.5 * q);
    const double raw = p.opacity * g;
    if (clamped) *clamped = raw > opts.alpha_clamp;
    return std::min(raw, opts.alpha_clamp);
}

}  // namespace

std::vector<WorldSplat> collect_splats(const SplatGrid& grid) {
    std::vector<WorldSplat> splats;
    splats.reserve(static_cast<std::size_t>(grid.view_count()) * grid.height() * grid.width());
    for (int v = 0; v < grid.view_count(); ++v)
        for (int y = 0; y < grid.height(); ++y)
            for (int x = 0; x < grid.width(); ++x) {
                const auto g = grid.cell(v, y, x);
                if (!(g.opacity > 0.0)) continue;
                WorldSplat s;
                s.position = unproject(grid, v, y, x);
                s.covariance = covariance_matrix(g);
                s.rgb = g.rgb;
                s.opacity = g.opacity;
                s.source_index = (v * grid.height() + y) * grid.width() + x;
                splats.push_back(s);
            }
    return splats;
}

RenderedView rasterize_splats(const std::vector<WorldSplat>& splats, const Intrinsics& intr,
                              const CameraPose& pose, const RenderOptions& opts, int view_index) {
    const int width = intr.width, height = intr.height;
    if (width < 1 || height < 1) throw DataError("rasterize: bad resolution");
    const auto projected = project_and_sort(splats, intr, pose, opts, width, height);

    RenderedView out;
    out.view_index = view_index;
    out.rgb = Image(height, width);
    out.alpha = GrayImage::Zero(height, width);

    parallel_for(height, [&](int y) {
        const double py = y + 0.5;
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5;
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            double transmittance = 1.0;
            for (const ProjectedSplat& p : projected) {
                if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                const double alpha = splat_alpha(p, px, py, opts);
                if (alpha <= 0.0) continue;
                color += transmittance * alpha * p.rgb;
                transmittance *= 1.0 - alpha;
                if (transmittance < opts.transmittance_floor) break;
            }
            color += transmittance * opts.background;
            out.rgb.r(y, x) = color[0];
            out.rgb.g(y, x) = color[1];
            out.rgb.b(y, x) = color[2];
            out.alpha(y, x) = 1.0 - transmittance;
        }
    });
    return out;
}

RenderedView rasterize(const SplatGrid& grid, const CameraRig& rig, int view, int width, int height,
                       const RenderOptions& opts) {
    rig.require_view(view);
    const Intrinsics intr = rig.intrinsics[view].scaled_to(width, height);
    return rasterize_splats(collect_splats(grid), intr, rig.poses[view], opts, view);
}

RenderedView rasterize(const SplatGrid& grid, int view, int width, int height, const RenderOptions& opts) {
    return rasterize(grid, grid.rig, view, width, height, opts);
}

SplatGradients rasterize_backward(const std::vector<WorldSplat>& splats, const Intrinsics& intr,
                                  const CameraPose& pose, const Image& grad_pixels,
                                  const RenderOptions& opts) {
    const int width = intr.width, height = intr.height;
    if (grad_pixels.height() != height || grad_pixels.width() != width)
        throw DataError("rasterize_backward: gradient image resolution mismatch");
    const auto projected = project_and_sort(splats, intr, pose, opts, width, height);
    const int n = static_cast<int>(splats.size());

    // Per-row accumulators merged in fixed order keep the result independent
    // of the thread count.
    std::vector<Eigen::MatrixX3d> row_rgb(height);
    std::vector<Eigen::VectorXd> row_opacity(height);

    parallel_for(height, [&](int y) {
        Eigen::MatrixX3d g_rgb = Eigen::MatrixX3d::Zero(n, 3);
        Eigen::VectorXd g_opacity = Eigen::VectorXd::Zero(n);
        const double py = y + 0.5;
        struct Contribution {
            int list_index;
            double alpha, transmittance, gaussian;
            bool clamped;
            Eigen::Vector3d rgb;
        };
        std::vector<Contribution> contribs;
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5;
            contribs.clear();
            double transmittance = 1.0;
            for (const ProjectedSplat& p : projected) {
                if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                bool clamped = false;
                const double alpha = splat_alpha(p, px, py, opts, &clamped);
                if (alpha <= 0.0) continue;
                const double q_gauss = p.opacity > 0 ? alpha / p.opacity : 0.0;  // exp(-q/2) when unclamped
                contribs.push_back({p.list_index, alpha, transmittance, q_gauss, clamped, p.rgb});
                transmittance *= 1.0 - alpha;
                if (transmittance < opts.transmittance_floor) break;
            }
            const Eigen::Vector3d gpix(grad_pixels.r(y, x), grad_pixels.g(y, x), grad_pixels.b(y, x));
            Eigen::Vector3d suffix = transmittance * opts.background;
            for (int i = static_cast<int>(contribs.size()) - 1; i >= 0; --i) {
                const Contribution& c = contribs[i];
                g_rgb.row(c.list_index) += (gpix * (c.transmittance * c.alpha)).transpose();
                const Eigen::Vector3d dC_dalpha =
                    c.transmittance * c.rgb - suffix / (1.0 - c.alpha);
                if (!c.clamped) g_opacity[c.list_index] += gpix.dot(dC_dalpha) * c.gaussian;
                suffix += c.transmittance * c.alpha * c.rgb;
            }
        }
        row_rgb[y] = std::move(g_rgb);
        row_opacity[y] = std::move(g_opacity);
    });

    SplatGradients grads;
    grads.rgb = Eigen::MatrixX3d::Zero(n, 3);
    grads.opacity = Eigen::VectorXd::Zero(n);
    for (int y = 0; y < height; ++y) {
        grads.rgb += row_rgb[y];
        grads.opacity += row_opacity[y];
    }
    return grads;
}

}  // namespace splatedit
