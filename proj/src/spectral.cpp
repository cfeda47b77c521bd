#include "splatedit/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace splatedit {

Eigen::VectorXd averaged_cross_column(const AttentionRecord& records, int token_index) {
    if (records.cross.empty()) throw DataError("averaged_cross_column: no cross maps recorded");
    Eigen::VectorXd avg;
    int count = 0;
    for (const auto& [key, map] : records.cross) {
        if (token_index < 0 || token_index >= map.cols())
            throw DataError("averaged_cross_column: token index out of range");
        if (avg.size() == 0) avg = Eigen::VectorXd::Zero(map.rows());
        if (map.rows() != avg.size()) throw DataError("averaged_cross_column: inconsistent map sizes");
        avg += map.col(token_index);
        ++count;
    }
    return avg / count;
}

TensorGrid<double> token_heat_field(const AttentionRecord& records, int token_index, int views,
                                    int attn_h, int attn_w, int grid_h, int grid_w) {
    const Eigen::VectorXd avg = averaged_cross_column(records, token_index);
    if (avg.size() != views * attn_h * attn_w)
        throw DataError("token_heat_field: map rows do not match attention grid");
    const double lo = avg.minCoeff(), hi = avg.maxCoeff();
    TensorGrid<double> heat(views, 1, grid_h, grid_w);
    for (int v = 0; v < views; ++v)
        for (int y = 0; y < grid_h; ++y)
            for (int x = 0; x < grid_w; ++x) {
                const int ay = std::min(attn_h - 1, y * attn_h / grid_h);
                const int ax = std::min(attn_w - 1, x * attn_w / grid_w);
                const double raw = avg[v * attn_h * attn_w + ay * attn_w + ax];
                heat.plane(v, 0)[y * grid_w + x] = hi - lo < 1e-300 ? 0.5 : (raw - lo) / (hi - lo);
            }
    return heat;
}

Eigen::Vector3d heat_color(double value) {
    const double v = std::clamp(value, 0.0, 1.0);
    // dark blue -> magenta -> yellow
    if (v < 0.5) {
        const double u = 2.0 * v;
        return {u, 0.1 * u, 0.6 + 0.4 * (1.0 - u)};
    }
    const double u = 2.0 * (v - 0.5);
    return {1.0, 0.1 + 0.9 * u, (1.0 - u) * 0.6};
}

std::vector<RenderedView> token_heatmap(const AttentionRecord& records, int token_index,
                                        const SplatGrid& grid, int resolution) {
    const int attn_h = grid.height() / 2, attn_w = grid.width() / 2;
    const TensorGrid<double> heat = token_heat_field(records, token_index, grid.view_count(), attn_h,
                                                     attn_w, grid.height(), grid.width());
    SplatGrid colored = grid;
    for (int v = 0; v < grid.view_count(); ++v)
        for (int y = 0; y < grid.height(); ++y)
            for (int x = 0; x < grid.width(); ++x) {
                const Eigen::Vector3d c = heat_color(heat.plane(v, 0)[y * grid.width() + x]);
                colored.attributes.at(v, channel::kRed, y, x) = c[0];
                colored.attributes.at(v, channel::kGreen, y, x) = c[1];
                colored.attributes.at(v, channel::kBlue, y, x) = c[2];
            }
    std::vector<RenderedView> out;
    for (int v = 0; v < grid.view_count(); ++v)
        out.push_back(rasterize(colored, v, resolution, resolution));
    return out;
}

Eigen::MatrixXd averaged_self_map(const AttentionRecord& records) {
    if (records.self.empty()) throw DataError("averaged_self_map: no self maps recorded");
    Eigen::MatrixXd avg;
    int count = 0;
    for (const auto& [key, map] : records.self) {
        if (avg.size() == 0) avg = Eigen::MatrixXd::Zero(map.rows(), map.cols());
        if (map.rows() != avg.rows() || map.cols() != avg.cols())
            throw DataError("averaged_self_map: inconsistent map sizes");
        avg += map;
        ++count;
    }
    return avg / count;
}

EigenColorResult laplacian_eigencolors(const Eigen::MatrixXd& self_map, int k, bool drop_trivial) {
    if (self_map.rows() != self_map.cols()) throw DataError("laplacian_eigencolors: map must be square");
    const int n = static_cast<int>(self_map.rows());
    if (k < 1) throw ConfigError("laplacian_eigencolors: k must be >= 1");

    const Eigen::MatrixXd adj = 0.5 * (self_map + self_map.transpose());
    Eigen::VectorXd degree = adj.rowwise().sum();

    EigenColorResult result;
    Eigen::VectorXd dinv_sqrt(n);
    for (int i = 0; i < n; ++i) {
        if (degree[i] < 1e-12) {
            result.isolated.push_back(i);
            dinv_sqrt[i] = 0.0;  // the node's Laplacian row collapses to the identity row
        } else {
            dinv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
        }
    }

    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) -
                          dinv_sqrt.asDiagonal() * adj * dinv_sqrt.asDiagonal();
    lap = 0.5 * (lap + lap.transpose());  // keep it exactly symmetric

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success) throw NumericalError("laplacian_eigencolors: eigensolver failed");
    result.eigenvalues = solver.eigenvalues();

    const int first = drop_trivial ? 1 : 0;
    if (first + k > n)
        throw DataError("laplacian_eigencolors: graph too small for the requested eigenvector count");
    result.eigenvectors = solver.eigenvectors().middleCols(first, k);

    result.colors = Eigen::MatrixXd::Constant(n, k, 0.5);
    for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd& vec = result.eigenvectors.col(j);
        const double lo = vec.minCoeff(), hi = vec.maxCoeff();
        if (hi - lo < 1e-300) continue;
        for (int i = 0; i < n; ++i) result.colors(i, j) = (vec[i] - lo) / (hi - lo);
    }
    for (int i : result.isolated) result.colors.row(i).setConstant(0.5);
    return result;
}

std::vector<RenderedView> eigencolor_views(const EigenColorResult& colors, const SplatGrid& grid,
                                           int attn_h, int attn_w, int resolution) {
    if (colors.colors.rows() != grid.view_count() * attn_h * attn_w)
        throw DataError("eigencolor_views: color count does not match attention grid");
    SplatGrid colored = grid;
    for (int v = 0; v < grid.view_count(); ++v)
        for (int y = 0; y < grid.height(); ++y)
            for (int x = 0; x < grid.width(); ++x) {
                const int ay = std::min(attn_h - 1, y * attn_h / grid.height());
                const int ax = std::min(attn_w - 1, x * attn_w / grid.width());
                const int node = v * attn_h * attn_w + ay * attn_w + ax;
                for (int ch = 0; ch < 3; ++ch)
                    colored.attributes.at(v, channel::kRed + ch, y, x) =
                        ch < colors.colors.cols() ? colors.colors(node, ch) : 0.5;
            }
    std::vector<RenderedView> out;
    for (int v = 0; v < grid.view_count(); ++v)
        out.push_back(rasterize(colored, v, resolution, resolution));
    return out;
}

}  // namespace splatedit
