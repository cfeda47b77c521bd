#include "splatedit/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace splatedit {

namespace {

const std::vector<std::string> kKnownKeys = {
    "timesteps", "beta_start", "beta_end", "seed",
    "codec", "codec_seed",
    "denoiser_seed", "base_channels", "text_dim",
    "source_prompt", "edit_prompt", "region_token",
    "tau_cross", "tau_self", "inject_cross_layers", "inject_self_layers",
    "mask_source", "mask_threshold", "mask_dir",
    "lambda_opacity", "lambda_sigma", "gamma_opacity", "gamma_sigma",
    "guidance_scale", "guidance_full_backprop",
    "anneal_scale_low", "anneal_scale_high", "anneal_tau", "anneal_radius",
    "anneal_scale_low_per_layer",
    "enhance", "enhance_rounds", "enhance_iterations", "enhance_lr",
    "enhance_plugin", "enhance_noise", "render_resolution",
    "trajectory_file", "metrics_file", "attention_record_file", "report_file",
};

MaskSource parse_mask_source(const std::string& s) {
    if (s == "none") return MaskSource::None;
    if (s == "attention") return MaskSource::Attention;
    if (s == "files") return MaskSource::Files;
    if (s == "union") return MaskSource::Union;
    if (s == "user") return MaskSource::User;
    throw ConfigError("config: mask_source must be none|attention|files|union|user, got '" + s + "'");
}

CodecKind parse_codec(const std::string& s) {
    if (s == "identity") return CodecKind::Identity;
    if (s == "orthogonal") return CodecKind::Orthogonal;
    throw ConfigError("config: codec must be identity|orthogonal, got '" + s + "'");
}

}  // namespace

EditConfig EditConfig::load(const std::string& path) {
    return from_key_values(KeyValueFile::parse_file(path));
}

EditConfig EditConfig::from_key_values(const KeyValueFile& kv) {
    kv.validate_keys(kKnownKeys);
    EditConfig c;
    c.timesteps = kv.get_int("timesteps", c.timesteps);
    c.beta_start = kv.get_double("beta_start", c.beta_start);
    c.beta_end = kv.get_double("beta_end", c.beta_end);
    c.seed = kv.get_u64("seed", c.seed);

    c.codec = parse_codec(kv.get_string("codec", "identity"));
    c.codec_seed = kv.get_u64("codec_seed", c.codec_seed);

    c.denoiser.seed = kv.get_u64("denoiser_seed", c.denoiser.seed);
    c.denoiser.base_channels = kv.get_int("base_channels", c.denoiser.base_channels);
    c.denoiser.text_dim = kv.get_int("text_dim", c.denoiser.text_dim);

    c.source_prompt = kv.require_string("source_prompt");
    c.edit_prompt = kv.get_string("edit_prompt", c.source_prompt);
    c.region_token = kv.get_string("region_token", "");

    c.tau_cross = kv.get_double("tau_cross", c.tau_cross);
    c.tau_self = kv.get_double("tau_self", c.tau_self);
    c.cross_layers = kv.get_int_list("inject_cross_layers", c.cross_layers);
    c.self_layers = kv.get_int_list("inject_self_layers", c.self_layers);

    c.mask_source = parse_mask_source(kv.get_string("mask_source", "none"));
    c.mask_threshold = kv.get_double("mask_threshold", c.mask_threshold);
    c.mask_dir = kv.get_string("mask_dir", "");

    c.guidance.lambda_opacity = kv.get_double("lambda_opacity", c.guidance.lambda_opacity);
    c.guidance.lambda_sigma = kv.get_double("lambda_sigma", c.guidance.lambda_sigma);
    c.guidance.gamma_opacity = kv.get_double("gamma_opacity", c.guidance.gamma_opacity);
    c.guidance.gamma_sigma = kv.get_double("gamma_sigma", c.guidance.gamma_sigma);
    c.guidance.scale = kv.get_double("guidance_scale", 0.0);
    c.guidance.full_backprop = kv.get_bool("guidance_full_backprop", false);

    c.anneal.scale_low = kv.get_double("anneal_scale_low", c.anneal.scale_low);
    c.anneal.scale_high = kv.get_double("anneal_scale_high", c.anneal.scale_high);
    c.anneal.tau = kv.get_double("anneal_tau", c.anneal.tau);
    c.anneal.radius_threshold = kv.get_double("anneal_radius", c.anneal.radius_threshold);
    c.anneal_scale_low_per_layer = kv.get_double_list("anneal_scale_low_per_layer", {});

    c.enhance = kv.get_bool("enhance", c.enhance);
    c.enhance_rounds = kv.get_int("enhance_rounds", c.enhance_rounds);
    c.reoptimize.iterations = kv.get_int("enhance_iterations", c.reoptimize.iterations);
    c.reoptimize.learning_rate = kv.get_double("enhance_lr", c.reoptimize.learning_rate);
    c.enhance_plugin = kv.get_string("enhance_plugin", c.enhance_plugin);
    c.enhance_noise = kv.get_double("enhance_noise", c.enhance_noise);
    c.render_resolution = kv.get_int("render_resolution", c.render_resolution);

    c.trajectory_file = kv.get_string("trajectory_file", "");
    c.metrics_file = kv.get_string("metrics_file", "");
    c.attention_record_file = kv.get_string("attention_record_file", "");
    c.report_file = kv.get_string("report_file", "");

    c.validate();
    return c;
}

double EditConfig::resolved_tau_cross() const { return tau_cross < 0 ? 0.4 * timesteps : tau_cross; }
double EditConfig::resolved_tau_self() const { return tau_self < 0 ? 0.6 * timesteps : tau_self; }
double EditConfig::resolved_anneal_tau() const { return anneal.tau < 0 ? 0.5 * timesteps : anneal.tau; }

void EditConfig::validate() const {
    if (timesteps < 1) throw ConfigError("config: timesteps must be >= 1");
    for (double tau : {resolved_tau_cross(), resolved_tau_self(), resolved_anneal_tau()})
        if (tau < 0.0 || tau > static_cast<double>(timesteps))
            throw ConfigError("config: tau values must lie in [0, timesteps]");
    if (anneal.scale_low <= 0 || anneal.scale_high <= 0)
        throw ConfigError("config: annealing scales must be positive");
    if (anneal.radius_threshold < 0 || anneal.radius_threshold > 1)
        throw ConfigError("config: anneal_radius must lie in [0, 1]");
    if (guidance.lambda_opacity < 0 || guidance.lambda_sigma < 0 || guidance.gamma_opacity < 0 ||
        guidance.gamma_sigma < 0 || guidance.scale < 0)
        throw ConfigError("config: guidance parameters must be non-negative");
    if (mask_source == MaskSource::Files || mask_source == MaskSource::Union ||
        mask_source == MaskSource::User) {
        if (mask_dir.empty()) throw ConfigError("config: mask_dir required for file-based mask sources");
    }
    if ((mask_source == MaskSource::Attention || mask_source == MaskSource::Union) && region_token.empty())
        throw ConfigError("config: region_token required for attention-derived masks");
    if (enhance && enhance_rounds < 0) throw ConfigError("config: enhance_rounds must be >= 0");
    if (render_resolution < 1) throw ConfigError("config: render_resolution must be >= 1");
}

std::string EditReport::to_text() const {
    std::ostringstream os;
    os.precision(12);
    os << "edit-report\n";
    os << "seed = " << seed << "\n";
    os << "codec_seed = " << codec_seed << "\n";
    os << "denoiser_seed = " << denoiser_seed << "\n";
    os << "timesteps = " << timesteps << "\n";
    os << "mask_fraction = " << mask_fraction << "\n";
    for (const StepMetrics& s : steps)
        os << "step t=" << s.t << " geo_loss=" << s.geo_loss << " relevance_mean=" << s.relevance_mean
           << "\n";
    for (std::size_t i = 0; i < enhance_psnr.size(); ++i)
        os << "enhance round=" << i + 1 << " psnr=" << enhance_psnr[i] << "\n";
    return os.str();
}

namespace {

std::vector<GrayImage> load_mask_images(const std::string& dir, int views) {
    std::vector<GrayImage> masks;
    for (int v = 0; v < views; ++v) {
        const std::string path = (std::filesystem::path(dir) / ("mask_view" + std::to_string(v) + ".png")).string();
        if (!std::filesystem::exists(path)) throw DataError("mask image missing: " + path);
        masks.push_back(read_png_gray(path));
    }
    return masks;
}

// Wraps module failures with the step index per the pipeline error contract.
template <class Fn>
auto at_step(int t, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError("step t=" + std::to_string(t) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError("step t=" + std::to_string(t) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("step t=" + std::to_string(t) + ": " + e.what());
    }
}

}  // namespace

EditResult run_edit(const SplatGrid& asset, const EditConfig& config,
                    const NoiseTrajectory* preloaded_trajectory) {
    config.validate();
    {
        const ValidationReport violations = validate_grid(asset);
        if (!violations.empty())
            throw DataError("run_edit: input asset invalid: " + violations.front().what + " (view " +
                            std::to_string(violations.front().view) + ", y " +
                            std::to_string(violations.front().y) + ", x " +
                            std::to_string(violations.front().x) + ")");
    }

    const int T = config.timesteps;
    const NoiseSchedule sched = make_schedule(T, config.beta_start, config.beta_end);
    const LatentCodec codec(config.codec, config.codec_seed);
    const Denoiser denoiser(config.denoiser);
    const PromptEmbedding p = embed_prompt(config.source_prompt, config.denoiser.text_dim,
                                           config.denoiser.seed, config.denoiser.max_tokens);
    const PromptEmbedding p_star = embed_prompt(config.edit_prompt, config.denoiser.text_dim,
                                                config.denoiser.seed, config.denoiser.max_tokens);
    const TokenAlignment ct = align_tokens(p, p_star);

    const EpsFn source_eps = [&](const TensorGrid<double>& z, int t) {
        return denoiser.predict(z, t, p).eps;
    };

    const LatentTensor z0 = codec.encode(asset);

    EditResult result;
    if (preloaded_trajectory != nullptr) {
        if (preloaded_trajectory->timesteps != T ||
            !preloaded_trajectory->latents[T].same_shape(z0.values))
            throw DataError("run_edit: preloaded trajectory does not match the asset/config");
        result.trajectory = *preloaded_trajectory;
    } else {
        result.trajectory = forward_invert(z0.values, sched, config.seed, source_eps);
    }

    // per-layer annealing parameters; neutral scales leave features untouched
    const double anneal_tau = config.resolved_anneal_tau();
    auto anneal_params_for = [&](int level) {
        AnnealParams ap = config.anneal;
        ap.tau = anneal_tau;
        if (level < static_cast<int>(config.anneal_scale_low_per_layer.size()))
            ap.scale_low = config.anneal_scale_low_per_layer[level];
        return ap;
    };
    const bool anneal_active = [&] {
        for (int level = 0; level < 2; ++level) {
            const AnnealParams ap = anneal_params_for(level);
            if (ap.scale_low != 1.0 || ap.scale_high != 1.0) return true;
        }
        return false;
    }();

    DualBranchConfig db;
    db.tau_cross = config.resolved_tau_cross();
    db.tau_self = config.resolved_tau_self();
    db.cross_layers = config.cross_layers;
    db.self_layers = config.self_layers;
    int current_t = T;  // captured by the skip tap so modulation follows the step
    if (anneal_active)
        db.edit_skip_tap = [&anneal_params_for, &current_t](int level, const TensorGrid<double>& h) {
            return modulate_skip(h, current_t, anneal_params_for(level));
        };
    const DenoiserHooks backward_hooks{nullptr, db.edit_skip_tap};

    // editing region
    std::optional<EditMask> mask;
    if (config.mask_source == MaskSource::Files || config.mask_source == MaskSource::User) {
        const auto images = load_mask_images(config.mask_dir, asset.view_count());
        mask = lift_view_masks(images, asset.height(), asset.width());
    } else if (config.mask_source == MaskSource::Attention || config.mask_source == MaskSource::Union) {
        const int token = p_star.find_token(config.region_token);
        if (token < 0) throw ConfigError("run_edit: region_token '" + config.region_token +
                                         "' not present in the edit prompt");
        // preliminary injection-only pass to average attention over all steps
        AttentionRecord collected;
        TensorGrid<double> zs = result.trajectory.latents[T];
        TensorGrid<double> ze = zs;
        for (int t = T; t >= 1; --t) {
            current_t = t;
            DualBranchResult step = at_step(t, [&] {
                return dual_branch_step(denoiser, sched, zs, ze, t, p, p_star, ct,
                                        result.trajectory.noise_maps[t], db);
            });
            for (auto& [key, m] : step.edit_record.cross) collected.cross[key] = std::move(m);
            for (auto& [key, m] : step.edit_record.self) collected.self[key] = std::move(m);
            zs = std::move(step.source_next);
            ze = std::move(step.edit_next);
        }
        EditMask attn_mask =
            attention_mask(collected, token, config.mask_threshold, asset.view_count(),
                           asset.height() / 2, asset.width() / 2, asset.height(), asset.width());
        if (config.mask_source == MaskSource::Union) {
            const auto images = load_mask_images(config.mask_dir, asset.view_count());
            mask = union_masks(attn_mask, lift_view_masks(images, asset.height(), asset.width()));
        } else {
            mask = std::move(attn_mask);
        }
    }

    result.report.seed = config.seed;
    result.report.codec_seed = config.codec_seed;
    result.report.denoiser_seed = config.denoiser.seed;
    result.report.timesteps = T;
    if (mask) result.report.mask_fraction = mask->data.mean();

    std::ofstream metrics;
    if (!config.metrics_file.empty()) {
        metrics.open(config.metrics_file);
        if (!metrics) throw DataError("cannot open metrics file: " + config.metrics_file);
        metrics << "step,t,geo_loss,relevance_mean\n";
        metrics.precision(12);
    }

    // main dual-branch loop
    TensorGrid<double> z_source = result.trajectory.latents[T];
    TensorGrid<double> z_edit = z_source;
    for (int t = T; t >= 1; --t) {
        current_t = t;
        DualBranchResult step = at_step(t, [&] {
            return dual_branch_step(denoiser, sched, z_source, z_edit, t, p, p_star, ct,
                                    result.trajectory.noise_maps[t], db);
        });
        for (auto& [key, m] : step.source_record.cross) result.source_record.cross[key] = std::move(m);
        for (auto& [key, m] : step.source_record.self) result.source_record.self[key] = std::move(m);
        for (auto& [key, m] : step.edit_record.cross) result.edit_record.cross[key] = std::move(m);
        for (auto& [key, m] : step.edit_record.self) result.edit_record.self[key] = std::move(m);

        TensorGrid<double> blended =
            mask ? blend_latents(step.source_next, step.edit_next, *mask) : step.edit_next;

        StepMetrics sm;
        sm.t = t;
        if (config.guidance.scale > 0.0) {
            at_step(t, [&] {
                const RelevanceMask relevance = relevance_mask(denoiser, z_edit, t, p, p_star);
                sm.relevance_mean = relevance.data.mean();
                const TensorGrid<double> x0 =
                    x0_estimate(z_edit, step.edit_forward.eps, sched.alpha_bar[t]);
                sm.geo_loss = geo_loss(codec, x0, relevance, config.guidance);
                const TensorGrid<double> grad =
                    config.guidance.full_backprop
                        ? geo_loss_grad_full(codec, denoiser, step.edit_forward, sched.alpha_bar[t],
                                             relevance, config.guidance, backward_hooks)
                        : geo_loss_grad(codec, z_edit, step.edit_forward.eps, sched.alpha_bar[t],
                                        relevance, config.guidance);
                blended = guided_step(blended, grad, config.guidance.scale, mask ? &*mask : nullptr);
                return 0;
            });
        }
        result.report.steps.push_back(sm);
        if (metrics.is_open())
            metrics << result.report.steps.size() << "," << t << "," << sm.geo_loss << ","
                    << sm.relevance_mean << "\n";

        z_source = std::move(step.source_next);
        z_edit = std::move(blended);
    }

    result.source_record.tokens = p.tokens;
    result.edit_record.tokens = p_star.tokens;
    result.mask = mask;
    result.final_latent = z_edit;
    result.source_final_latent = z_source;
    result.grid = codec.decode({z_edit, Provenance::Edited}, asset.rig);

    if (config.enhance && config.enhance_rounds > 0) {
        std::vector<GrayImage> view_masks;
        for (int v = 0; v < asset.view_count(); ++v) {
            if (mask)
                view_masks.push_back(
                    mask_view_to_image(*mask, v, config.render_resolution, config.render_resolution));
            else
                view_masks.push_back(GrayImage::Ones(config.render_resolution, config.render_resolution));
        }
        const EnhanceResult enhanced =
            enhance_loop(result.grid, view_masks, make_enhancer(config.enhance_plugin),
                         config.enhance_rounds, config.render_resolution, config.reoptimize,
                         config.enhance_noise);
        result.grid = enhanced.grid;
        result.report.enhance_psnr = enhanced.psnr_trace;
    }

    if (!config.trajectory_file.empty()) save_trajectory(config.trajectory_file, result.trajectory);
    if (!config.attention_record_file.empty())
        save_attention_record(config.attention_record_file, result.source_record);
    if (!config.report_file.empty()) {
        std::ofstream rf(config.report_file);
        if (!rf) throw DataError("cannot open report file: " + config.report_file);
        rf << result.report.to_text();
    }
    return result;
}

}  // namespace splatedit
