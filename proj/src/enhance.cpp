#include "splatedit/enhance.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "splatedit/parallel.hpp"

namespace splatedit {

namespace {

GrayImage gaussian_blur(const GrayImage& in, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    Eigen::VectorXd kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel /= kernel.sum();

    const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
    GrayImage tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * in(y, std::clamp(x + i, 0, w - 1));
            tmp(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp(std::clamp(y + i, 0, h - 1), x);
            out(y, x) = acc;
        }
    return out;
}

}  // namespace

EnhancerPlugin identity_enhancer() {
    return {"identity", [](const Image& img, double) { return img; }};
}

EnhancerPlugin unsharp_enhancer(double amount, double sigma) {
    return {"unsharp", [amount, sigma](const Image& img, double) {
                Image out = img;
                out.r = img.r + amount * (img.r - gaussian_blur(img.r, sigma));
                out.g = img.g + amount * (img.g - gaussian_blur(img.g, sigma));
                out.b = img.b + amount * (img.b - gaussian_blur(img.b, sigma));
                return out.clamp01();
            }};
}

EnhancerPlugin command_enhancer(const std::string& command) {
    return {"cmd:" + command, [command](const Image& img, double) {
                namespace fs = std::filesystem;
                const fs::path dir = fs::temp_directory_path();
                const auto tag = std::to_string(
                    std::hash<std::string>{}(command) ^ static_cast<std::size_t>(std::rand()));
                const fs::path in_path = dir / ("splatedit_enh_in_" + tag + ".png");
                const fs::path out_path = dir / ("splatedit_enh_out_" + tag + ".png");
                write_png(in_path.string(), img);
                const std::string full = command + " " + in_path.string() + " " + out_path.string();
                const int rc = std::system(full.c_str());
                if (rc != 0) {
                    std::error_code ec;
                    fs::remove(in_path, ec);
                    throw DataError("enhancer command failed (exit " + std::to_string(rc) + "): " + command);
                }
                Image out = read_png(out_path.string());
                std::error_code ec;
                fs::remove(in_path, ec);
                fs::remove(out_path, ec);
                if (!out.same_shape(img)) throw DataError("enhancer command changed image dimensions");
                return out;
            }};
}

EnhancerPlugin make_enhancer(const std::string& spec) {
    if (spec == "identity") return identity_enhancer();
    if (spec == "unsharp") return unsharp_enhancer();
    if (spec.rfind("cmd:", 0) == 0) return command_enhancer(spec.substr(4));
    throw ConfigError("unknown enhancer: " + spec + " (expected identity | unsharp | cmd:<command>)");
}

Image blend_images(const Image& enhanced, const Image& source, const GrayImage& mask) {
    if (!enhanced.same_shape(source)) throw DataError("blend_images: image dimension mismatch");
    if (mask.rows() != source.r.rows() || mask.cols() != source.r.cols())
        throw DataError("blend_images: mask dimension mismatch");
    Image out = source;
    out.r = mask * enhanced.r + (1.0 - mask) * source.r;
    out.g = mask * enhanced.g + (1.0 - mask) * source.g;
    out.b = mask * enhanced.b + (1.0 - mask) * source.b;
    return out;
}

namespace {

double render_loss(const SplatGrid& grid, const std::vector<Image>& targets, int resolution,
                   const RenderOptions& ropts, std::vector<RenderedView>* renders = nullptr) {
    double loss = 0.0;
    for (int v = 0; v < grid.view_count(); ++v) {
        RenderedView rv = rasterize(grid, v, resolution, resolution, ropts);
        loss += mse(rv.rgb, targets[v]);
        if (renders) renders->push_back(std::move(rv));
    }
    return loss / grid.view_count();
}

}  // namespace

ReoptimizeResult reoptimize_splats(const SplatGrid& grid, const std::vector<Image>& targets,
                                   const ReoptimizeOptions& opts) {
    if (static_cast<int>(targets.size()) != grid.view_count())
        throw DataError("reoptimize_splats: one target image per view required");
    const int res = targets[0].height();
    for (const Image& t : targets)
        if (t.height() != res || t.width() != res)
            throw DataError("reoptimize_splats: targets must share a square resolution");

    ReoptimizeResult result;
    result.grid = grid;
    if (opts.iterations == 0) return result;

    const int n_pixels = 3 * res * res;
    int rising = 0;
    double prev_loss = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.iterations; ++iter) {
        std::vector<WorldSplat> splats = collect_splats(result.grid);
        Eigen::MatrixX3d g_rgb = Eigen::MatrixX3d::Zero(splats.size(), 3);
        Eigen::VectorXd g_opacity = Eigen::VectorXd::Zero(splats.size());
        double loss = 0.0;
        for (int v = 0; v < result.grid.view_count(); ++v) {
            const Intrinsics intr = result.grid.rig.intrinsics[v].scaled_to(res, res);
            const CameraPose& pose = result.grid.rig.poses[v];
            const RenderedView rv = rasterize_splats(splats, intr, pose, opts.render, v);
            loss += mse(rv.rgb, targets[v]);
            Image grad(res, res);
            const double scale = 2.0 / (n_pixels * result.grid.view_count());
            grad.r = scale * (rv.rgb.r - targets[v].r);
            grad.g = scale * (rv.rgb.g - targets[v].g);
            grad.b = scale * (rv.rgb.b - targets[v].b);
            const SplatGradients sg = rasterize_backward(splats, intr, pose, grad, opts.render);
            g_rgb += sg.rgb;
            g_opacity += sg.opacity;
        }
        loss /= result.grid.view_count();
        result.loss_trace.push_back(loss);

        rising = loss > prev_loss ? rising + 1 : 0;
        if (rising >= 10)
            throw NumericalError("reoptimize_splats: loss increased 10 consecutive iterations (diverging)");
        prev_loss = loss;

        // finite-difference scale gradients, only when asked (slow)
        Eigen::MatrixX3d g_scale;
        if (opts.optimize_scale) {
            g_scale = Eigen::MatrixX3d::Zero(splats.size(), 3);
            for (std::size_t i = 0; i < splats.size(); ++i) {
                const int idx = splats[i].source_index;
                const int v = idx / (result.grid.height() * result.grid.width());
                const int y = (idx / result.grid.width()) % result.grid.height();
                const int x = idx % result.grid.width();
                for (int k = 0; k < 3; ++k) {
                    SplatGrid plus = result.grid, minus = result.grid;
                    plus.attributes.at(v, channel::kScaleX + k, y, x) += opts.fd_step;
                    minus.attributes.at(v, channel::kScaleX + k, y, x) =
                        std::max(1e-6, minus.attributes.at(v, channel::kScaleX + k, y, x) - opts.fd_step);
                    const double lp = render_loss(plus, targets, res, opts.render);
                    const double lm = render_loss(minus, targets, res, opts.render);
                    g_scale(i, k) = (lp - lm) / (2.0 * opts.fd_step);
                }
            }
        }

        for (std::size_t i = 0; i < splats.size(); ++i) {
            const int idx = splats[i].source_index;
            const int v = idx / (result.grid.height() * result.grid.width());
            const int y = (idx / result.grid.width()) % result.grid.height();
            const int x = idx % result.grid.width();
            auto& attrs = result.grid.attributes;
            attrs.at(v, channel::kRed, y, x) =
                std::clamp(attrs.at(v, channel::kRed, y, x) - opts.learning_rate * g_rgb(i, 0), 0.0, 1.0);
            attrs.at(v, channel::kGreen, y, x) =
                std::clamp(attrs.at(v, channel::kGreen, y, x) - opts.learning_rate * g_rgb(i, 1), 0.0, 1.0);
            attrs.at(v, channel::kBlue, y, x) =
                std::clamp(attrs.at(v, channel::kBlue, y, x) - opts.learning_rate * g_rgb(i, 2), 0.0, 1.0);
            attrs.at(v, channel::kOpacity, y, x) = std::clamp(
                attrs.at(v, channel::kOpacity, y, x) - opts.learning_rate * g_opacity[i], 0.0, 1.0);
            if (opts.optimize_scale)
                for (int k = 0; k < 3; ++k)
                    attrs.at(v, channel::kScaleX + k, y, x) = std::max(
                        1e-6, attrs.at(v, channel::kScaleX + k, y, x) -
                                  opts.scale_learning_rate * g_scale(i, k));
        }
    }
    return result;
}

EnhanceResult enhance_loop(const SplatGrid& grid, const std::vector<GrayImage>& view_masks,
                           const EnhancerPlugin& plugin, int rounds, int resolution,
                           const ReoptimizeOptions& opts, double noise_strength) {
    if (!plugin.apply) throw ConfigError("enhance_loop: plugin has no transform");
    if (static_cast<int>(view_masks.size()) != grid.view_count())
        throw DataError("enhance_loop: one mask per view required");

    EnhanceResult result;
    result.grid = grid;

    std::vector<Image> reference;
    for (int v = 0; v < grid.view_count(); ++v)
        reference.push_back(rasterize(grid, v, resolution, resolution, opts.render).rgb);

    for (int round = 0; round < rounds; ++round) {
        std::vector<Image> sources(grid.view_count());
        parallel_for(grid.view_count(), [&](int v) {
            sources[v] = rasterize(result.grid, v, resolution, resolution, opts.render).rgb;
        });
        std::vector<Image> blended(grid.view_count());
        parallel_for(grid.view_count(), [&](int v) {
            GrayImage mask = view_masks[v];
            if (mask.rows() != resolution || mask.cols() != resolution) {
                GrayImage resized(resolution, resolution);
                for (int y = 0; y < resolution; ++y)
                    for (int x = 0; x < resolution; ++x)
                        resized(y, x) = mask(std::min<Eigen::Index>(mask.rows() - 1, y * mask.rows() / resolution),
                                             std::min<Eigen::Index>(mask.cols() - 1, x * mask.cols() / resolution));
                mask = std::move(resized);
            }
            const Image enhanced = plugin.apply(sources[v], noise_strength);
            if (!enhanced.same_shape(sources[v]))
                throw DataError("enhance_loop: plugin changed image dimensions");
            blended[v] = blend_images(enhanced, sources[v], mask);
        });

        ReoptimizeResult reopt = reoptimize_splats(result.grid, blended, opts);
        result.grid = std::move(reopt.grid);

        double round_psnr = 0.0;
        for (int v = 0; v < grid.view_count(); ++v)
            round_psnr += psnr(rasterize(result.grid, v, resolution, resolution, opts.render).rgb,
                               reference[v]);
        result.psnr_trace.push_back(round_psnr / grid.view_count());
    }
    return result;
}

}  // namespace splatedit
