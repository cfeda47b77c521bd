#pragma once

#include <Eigen/Dense>
#include <vector>

#include "splatedit/grid_io.hpp"
#include "splatedit/rasterizer.hpp"
#include "splatedit/splat_grid.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

/// Token's cross-attention column averaged over every recorded
/// (layer, timestep); one entry per attention position in (view, y, x)
/// order.
Eigen::VectorXd averaged_cross_column(const AttentionRecord& records, int token_index);

/// Min-max normalized heat per Gaussian, lifted to grid resolution by
/// nearest neighbor. V x 1 x H x W.
TensorGrid<double> token_heat_field(const AttentionRecord& records, int token_index, int views,
                                    int attn_h, int attn_w, int grid_h, int grid_w);

/// Simple blue-to-red heat ramp for a value in [0,1].
Eigen::Vector3d heat_color(double value);

/// Renders the grid with each Gaussian's color replaced by its heat color,
/// one render per view.
std::vector<RenderedView> token_heatmap(const AttentionRecord& records, int token_index,
                                        const SplatGrid& grid, int resolution);

struct EigenColorResult {
    Eigen::MatrixXd colors;       // N x 3, each channel min-max mapped to [0,1]
    Eigen::VectorXd eigenvalues;  // full ascending spectrum of the Laplacian
    Eigen::MatrixXd eigenvectors; // the k vectors used for the channels
    std::vector<int> isolated;    // zero-degree nodes, colored neutral 0.5
};

/// Normalized Laplacian of the symmetrized self-attention graph,
/// A = (W + W^T)/2, L = I - D^{-1/2} A D^{-1/2}; the k smallest-eigenvalue
/// eigenvectors become color channels. With drop_trivial (default) the
/// first eigenvector is skipped.
EigenColorResult laplacian_eigencolors(const Eigen::MatrixXd& self_map, int k = 3,
                                       bool drop_trivial = true);

/// Self maps averaged over all recorded (layer, timestep).
Eigen::MatrixXd averaged_self_map(const AttentionRecord& records);

/// Renders the grid colored by eigencolors lifted from attention to grid
/// resolution.
std::vector<RenderedView> eigencolor_views(const EigenColorResult& colors, const SplatGrid& grid,
                                           int attn_h, int attn_w, int resolution);

}  // namespace splatedit
