#pragma once

#include <functional>
#include <string>
#include <vector>

#include "splatedit/image.hpp"
#include "splatedit/rasterizer.hpp"
#include "splatedit/splat_grid.hpp"

namespace splatedit {

/// Named image -> image transform. `noise_strength` is forwarded so a
/// diffusion-style enhancer can be attached through the same interface; the
/// built-ins ignore it.
struct EnhancerPlugin {
    std::string name;
    std::function<Image(const Image&, double noise_strength)> apply;
};

EnhancerPlugin identity_enhancer();
EnhancerPlugin unsharp_enhancer(double amount = 0.8, double sigma = 1.0);

/// Subprocess contract: `command <input.png> <output.png>`, exit code 0 on
/// success, output dimensions equal input dimensions.
EnhancerPlugin command_enhancer(const std::string& command);

/// Resolves "identity", "unsharp" or "cmd:<command line>".
EnhancerPlugin make_enhancer(const std::string& spec);

/// Per-pixel convex blend: mask .* enhanced + (1 - mask) .* source.
Image blend_images(const Image& enhanced, const Image& source, const GrayImage& mask);

struct ReoptimizeOptions {
    int iterations = 200;
    double learning_rate = 0.05;
    bool optimize_scale = false;      // finite-difference scale gradients
    double scale_learning_rate = 0.01;
    double fd_step = 1e-3;
    RenderOptions render;
};

struct ReoptimizeResult {
    SplatGrid grid;
    std::vector<double> loss_trace;
};

/// Gradient descent on rgb and opacity (optionally scale) minimizing the
/// mean squared render-vs-target error across views. Parameters are clamped
/// back to their valid ranges after each step. Aborts with NumericalError
/// after 10 consecutive loss increases.
ReoptimizeResult reoptimize_splats(const SplatGrid& grid, const std::vector<Image>& targets,
                                   const ReoptimizeOptions& opts = {});

struct EnhanceResult {
    SplatGrid grid;
    /// PSNR of each round's output renders against the pre-loop renders.
    std::vector<double> psnr_trace;
};

/// Iterative dataset update: render every view, enhance, blend through the
/// per-view masks, re-optimize; repeated `rounds` times.
EnhanceResult enhance_loop(const SplatGrid& grid, const std::vector<GrayImage>& view_masks,
                           const EnhancerPlugin& plugin, int rounds, int resolution,
                           const ReoptimizeOptions& opts = {}, double noise_strength = 0.0);

}  // namespace splatedit
