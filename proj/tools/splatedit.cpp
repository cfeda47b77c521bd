// Command-line front door: every workflow emits files or renders.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <splatedit/demo_asset.hpp>
#include <splatedit/grid_io.hpp>
#include <splatedit/parallel.hpp>
#include <splatedit/pipeline.hpp>
#include <splatedit/spectral.hpp>

namespace fs = std::filesystem;
using namespace splatedit;

namespace {

Image contact_sheet(const std::vector<RenderedView>& views) {
    const int h = views[0].rgb.height(), w = views[0].rgb.width();
    Image sheet(h, w * static_cast<int>(views.size()));
    for (std::size_t v = 0; v < views.size(); ++v) {
        sheet.r.block(0, v * w, h, w) = views[v].rgb.r;
        sheet.g.block(0, v * w, h, w) = views[v].rgb.g;
        sheet.b.block(0, v * w, h, w) = views[v].rgb.b;
    }
    return sheet;
}

void write_views(const std::vector<RenderedView>& views, const std::string& out_dir,
                 const std::string& prefix) {
    fs::create_directories(out_dir);
    for (const RenderedView& rv : views)
        write_png((fs::path(out_dir) / (prefix + std::to_string(rv.view_index) + ".png")).string(),
                  rv.rgb);
    write_png((fs::path(out_dir) / (prefix + "sheet.png")).string(), contact_sheet(views));
}

int run(int argc, char** argv) {
    CLI::App app{"splatedit - latent-space editing engine for multi-view Gaussian splat grids"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (default: SPLATEDIT_THREADS or hardware)");

    // demo
    auto* demo = app.add_subcommand("demo", "write the bundled synthetic demo asset");
    std::string demo_out = "demo.splatgrid";
    int demo_views = 4, demo_size = 16;
    demo->add_option("out", demo_out, "output asset path");
    demo->add_option("--views", demo_views, "camera count");
    demo->add_option("--size", demo_size, "grid resolution");

    // validate
    auto* validate = app.add_subcommand("validate", "check a splat grid against its invariants");
    std::string validate_asset;
    validate->add_option("asset", validate_asset, "asset file")->required();

    // invert
    auto* invert = app.add_subcommand("invert", "recover the noise trajectory of an asset");
    std::string invert_asset, invert_prompt, invert_out = "asset.noistraj";
    int invert_steps = 50;
    double invert_beta_start = 1e-4, invert_beta_end = 0.02;
    std::uint64_t invert_seed = 1234, invert_denoiser_seed = 11, invert_codec_seed = 7;
    std::string invert_codec = "identity";
    invert->add_option("asset", invert_asset, "asset file")->required();
    invert->add_option("--prompt", invert_prompt, "source prompt")->required();
    invert->add_option("--out", invert_out, "trajectory output path");
    invert->add_option("--timesteps", invert_steps, "denoising steps");
    invert->add_option("--beta-start", invert_beta_start, "schedule start");
    invert->add_option("--beta-end", invert_beta_end, "schedule end");
    invert->add_option("--seed", invert_seed, "noise seed");
    invert->add_option("--denoiser-seed", invert_denoiser_seed, "backbone weight seed");
    invert->add_option("--codec", invert_codec, "identity | orthogonal");
    invert->add_option("--codec-seed", invert_codec_seed, "codec seed");

    // edit
    auto* edit = app.add_subcommand("edit", "run a full edit from a config file");
    std::string edit_asset, edit_config, edit_out = "edited.splatgrid";
    std::string edit_trajectory;
    edit->add_option("asset", edit_asset, "asset file")->required();
    edit->add_option("--config", edit_config, "edit config file")->required();
    edit->add_option("--out", edit_out, "edited asset output path");
    edit->add_option("--trajectory", edit_trajectory, "reuse a persisted trajectory");

    // render
    auto* render = app.add_subcommand("render", "rasterize views to PNG plus a contact sheet");
    std::string render_asset, render_views = "all", render_out = "renders";
    int render_res = 128;
    std::vector<double> render_bg = {0, 0, 0};
    std::string render_ply;
    render->add_option("asset", render_asset, "asset file")->required();
    render->add_option("--views", render_views, "'all' or one view index");
    render->add_option("--res", render_res, "output resolution");
    render->add_option("--out", render_out, "output directory");
    render->add_option("--background", render_bg, "background color r g b")->expected(3);
    render->add_option("--ply", render_ply, "also export the Gaussians as a PLY point cloud");

    // enhance
    auto* enhance_cmd = app.add_subcommand("enhance", "iterative dataset update enhancement");
    std::string enh_asset, enh_masks, enh_plugin = "identity", enh_out = "enhanced.splatgrid";
    int enh_rounds = 2, enh_res = 64, enh_iters = 200;
    double enh_lr = 0.05, enh_noise = 0.0;
    enhance_cmd->add_option("asset", enh_asset, "asset file")->required();
    enhance_cmd->add_option("--masks", enh_masks, "directory of mask_view{i}.png (omit for all-ones)");
    enhance_cmd->add_option("--plugin", enh_plugin, "identity | unsharp | cmd:<command>");
    enhance_cmd->add_option("--rounds", enh_rounds, "update rounds");
    enhance_cmd->add_option("--res", enh_res, "render resolution");
    enhance_cmd->add_option("--iterations", enh_iters, "optimizer iterations per round");
    enhance_cmd->add_option("--lr", enh_lr, "optimizer learning rate");
    enhance_cmd->add_option("--noise", enh_noise, "noise strength forwarded to the plugin");
    enhance_cmd->add_option("--out", enh_out, "output asset path");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "attention-structure analysis");
    analyze->require_subcommand(1);
    auto* attn = analyze->add_subcommand("attention", "per-token attention heat over the splats");
    std::string attn_record, attn_token, attn_asset, attn_out = "analysis";
    int attn_res = 128;
    attn->add_option("record", attn_record, "attention record file")->required();
    attn->add_option("--token", attn_token, "token string")->required();
    attn->add_option("--asset", attn_asset, "asset to render the heat onto");
    attn->add_option("--out", attn_out, "output directory");
    attn->add_option("--res", attn_res, "render resolution");

    auto* lap = analyze->add_subcommand("laplacian", "eigenvector coloring of the self-attention graph");
    std::string lap_record, lap_asset, lap_out = "analysis", lap_csv;
    int lap_k = 3, lap_res = 128;
    bool lap_keep_trivial = false;
    lap->add_option("record", lap_record, "attention record file")->required();
    lap->add_option("--k", lap_k, "eigenvector count");
    lap->add_option("--asset", lap_asset, "asset to render the colors onto");
    lap->add_option("--out", lap_out, "output directory");
    lap->add_option("--res", lap_res, "render resolution");
    lap->add_option("--eigenvalues-csv", lap_csv, "write the spectrum as CSV");
    lap->add_flag("--keep-trivial", lap_keep_trivial, "keep the first eigenvector");

    // export
    auto* export_cmd = app.add_subcommand("export", "export an asset for external viewers");
    std::string export_asset, export_ply_path = "asset.ply";
    export_cmd->add_option("asset", export_asset, "asset file")->required();
    export_cmd->add_option("--ply", export_ply_path, "PLY output path");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) thread_cap() = threads;

    if (*demo) {
        save_grid(demo_out, make_demo_asset(demo_views, demo_size));
        std::cout << "wrote " << demo_out << " (" << demo_views << " views, " << demo_size << "x"
                  << demo_size << ")\n";
        return 0;
    }

    if (*validate) {
        const SplatGrid grid = load_grid(validate_asset);
        const ValidationReport report = validate_grid(grid);
        if (report.empty()) {
            std::cout << "valid: " << grid.view_count() << " views, " << grid.height() << "x"
                      << grid.width() << "\n";
            return 0;
        }
        for (const Violation& v : report)
            std::cerr << "violation: view " << v.view << " cell (" << v.y << "," << v.x << "): " << v.what
                      << "\n";
        throw DataError(std::to_string(report.size()) + " invariant violation(s)");
    }

    if (*invert) {
        const SplatGrid grid = load_grid(invert_asset);
        if (invert_codec != "identity" && invert_codec != "orthogonal")
            throw ConfigError("codec must be identity | orthogonal");
        const LatentCodec codec(invert_codec == "orthogonal" ? CodecKind::Orthogonal : CodecKind::Identity,
                                invert_codec_seed);
        DenoiserConfig dcfg;
        dcfg.seed = invert_denoiser_seed;
        const Denoiser denoiser(dcfg);
        const PromptEmbedding p = embed_prompt(invert_prompt, dcfg.text_dim, dcfg.seed, dcfg.max_tokens);
        const NoiseSchedule sched = make_schedule(invert_steps, invert_beta_start, invert_beta_end);
        const EpsFn eps = [&](const TensorGrid<double>& z, int t) { return denoiser.predict(z, t, p).eps; };
        const NoiseTrajectory traj = forward_invert(codec.encode(grid).values, sched, invert_seed, eps);
        save_trajectory(invert_out, traj);
        const TensorGrid<double> replayed = replay_trajectory(traj, sched, eps);
        std::cout << "wrote " << invert_out << " (T=" << invert_steps << ", replay error "
                  << linf_diff(replayed, codec.encode(grid).values) << ")\n";
        return 0;
    }

    if (*edit) {
        const SplatGrid asset = load_grid(edit_asset);
        const EditConfig config = EditConfig::load(edit_config);
        EditResult result;
        if (!edit_trajectory.empty()) {
            const NoiseTrajectory traj = load_trajectory(edit_trajectory);
            result = run_edit(asset, config, &traj);
        } else {
            result = run_edit(asset, config);
        }
        save_grid(edit_out, result.grid);
        std::cout << result.report.to_text();
        std::cout << "wrote " << edit_out << "\n";
        return 0;
    }

    if (*render) {
        const SplatGrid grid = load_grid(render_asset);
        RenderOptions opts;
        opts.background << render_bg[0], render_bg[1], render_bg[2];
        std::vector<RenderedView> views;
        if (render_views == "all") {
            views.resize(grid.view_count());
            parallel_for(grid.view_count(),
                         [&](int v) { views[v] = rasterize(grid, v, render_res, render_res, opts); });
        } else {
            views.push_back(rasterize(grid, std::stoi(render_views), render_res, render_res, opts));
        }
        write_views(views, render_out, "view");
        if (!render_ply.empty()) export_ply(render_ply, grid);
        std::cout << "wrote " << views.size() << " view(s) to " << render_out << "\n";
        return 0;
    }

    if (*enhance_cmd) {
        const SplatGrid grid = load_grid(enh_asset);
        std::vector<GrayImage> masks;
        for (int v = 0; v < grid.view_count(); ++v) {
            if (enh_masks.empty()) {
                masks.push_back(GrayImage::Ones(enh_res, enh_res));
            } else {
                const fs::path path = fs::path(enh_masks) / ("mask_view" + std::to_string(v) + ".png");
                if (!fs::exists(path)) throw DataError("mask image missing: " + path.string());
                masks.push_back(read_png_gray(path.string()));
            }
        }
        ReoptimizeOptions opts;
        opts.iterations = enh_iters;
        opts.learning_rate = enh_lr;
        const EnhanceResult result =
            enhance_loop(grid, masks, make_enhancer(enh_plugin), enh_rounds, enh_res, opts, enh_noise);
        save_grid(enh_out, result.grid);
        for (std::size_t i = 0; i < result.psnr_trace.size(); ++i)
            std::cout << "round " << i + 1 << ": psnr vs input renders " << result.psnr_trace[i]
                      << " dB\n";
        std::cout << "wrote " << enh_out << "\n";
        return 0;
    }

    if (*attn) {
        const AttentionRecord record = load_attention_record(attn_record);
        int token = -1;
        for (std::size_t i = 0; i < record.tokens.size(); ++i)
            if (record.tokens[i] == attn_token) token = static_cast<int>(i);
        if (token < 0) throw DataError("token '" + attn_token + "' not present in the record");
        if (attn_asset.empty()) {
            const Eigen::VectorXd avg = averaged_cross_column(record, token);
            fs::create_directories(attn_out);
            std::ofstream os(fs::path(attn_out) / "token_heat.csv");
            os << "position,attention\n";
            for (Eigen::Index i = 0; i < avg.size(); ++i) os << i << "," << avg[i] << "\n";
            std::cout << "wrote token_heat.csv (no asset given, values only)\n";
            return 0;
        }
        const SplatGrid grid = load_grid(attn_asset);
        write_views(token_heatmap(record, token, grid, attn_res), attn_out, "heat_view");
        std::cout << "wrote heat renders to " << attn_out << "\n";
        return 0;
    }

    if (*lap) {
        const AttentionRecord record = load_attention_record(lap_record);
        const EigenColorResult colors =
            laplacian_eigencolors(averaged_self_map(record), lap_k, !lap_keep_trivial);
        if (!lap_csv.empty()) {
            std::ofstream os(lap_csv);
            os << "index,eigenvalue\n";
            for (Eigen::Index i = 0; i < colors.eigenvalues.size(); ++i)
                os << i << "," << colors.eigenvalues[i] << "\n";
        }
        if (!lap_asset.empty()) {
            const SplatGrid grid = load_grid(lap_asset);
            write_views(eigencolor_views(colors, grid, grid.height() / 2, grid.width() / 2, lap_res),
                        lap_out, "eigen_view");
        }
        std::cout << "smallest eigenvalues:";
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(5, colors.eigenvalues.size()); ++i)
            std::cout << " " << colors.eigenvalues[i];
        std::cout << "\n";
        return 0;
    }

    if (*export_cmd) {
        export_ply(export_ply_path, load_grid(export_asset));
        std::cout << "wrote " << export_ply_path << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
