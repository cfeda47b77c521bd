#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatedit/attention_control.hpp"
#include "splatedit/config.hpp"
#include "splatedit/denoiser.hpp"
#include "splatedit/diffusion.hpp"
#include "splatedit/enhance.hpp"
#include "splatedit/freq_anneal.hpp"
#include "splatedit/geo_guidance.hpp"
#include "splatedit/latent_codec.hpp"
#include "splatedit/mask_edit.hpp"
#include "splatedit/splat_grid.hpp"

namespace splatedit {

enum class MaskSource { None, Attention, Files, Union, User };

/// Everything one edit needs. Negative tau values mean "use the default
/// fraction of T" (0.4 T cross, 0.6 T self, 0.5 T annealing).
struct EditConfig {
    // schedule
    int timesteps = 50;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::uint64_t seed = 1234;

    // codec
    CodecKind codec = CodecKind::Identity;
    std::uint64_t codec_seed = 7;

    // denoiser
    DenoiserConfig denoiser;

    // prompts
    std::string source_prompt;
    std::string edit_prompt;
    std::string region_token;  // r*, required for attention-derived masks

    // injection
    double tau_cross = -1.0;
    double tau_self = -1.0;
    std::vector<int> cross_layers = {0, 1};
    std::vector<int> self_layers = {0, 1};

    // mask
    MaskSource mask_source = MaskSource::None;
    double mask_threshold = 0.5;
    std::string mask_dir;

    // guidance
    GeoGuidanceParams guidance;

    // frequency annealing (neutral scales by default)
    AnnealParams anneal{1.0, 1.0, -1.0, 0.25};
    std::vector<double> anneal_scale_low_per_layer;  // optional per-layer override

    // enhancement
    bool enhance = false;
    int enhance_rounds = 2;
    std::string enhance_plugin = "identity";
    double enhance_noise = 0.0;
    int render_resolution = 64;
    ReoptimizeOptions reoptimize;

    // optional outputs
    std::string trajectory_file;
    std::string metrics_file;
    std::string attention_record_file;
    std::string report_file;

    /// Loads and validates a key-value config file.
    static EditConfig load(const std::string& path);
    static EditConfig from_key_values(const KeyValueFile& kv);

    /// tau defaults resolved against T; throws ConfigError when out of range.
    double resolved_tau_cross() const;
    double resolved_tau_self() const;
    double resolved_anneal_tau() const;
    void validate() const;
};

struct StepMetrics {
    int t = 0;
    double geo_loss = 0.0;
    double relevance_mean = 0.0;
};

struct EditReport {
    std::uint64_t seed = 0, codec_seed = 0, denoiser_seed = 0;
    int timesteps = 0;
    double mask_fraction = -1.0;  // -1 when no mask is active
    std::vector<StepMetrics> steps;
    std::vector<double> enhance_psnr;
    std::string to_text() const;
};

struct EditResult {
    SplatGrid grid;
    EditReport report;
    NoiseTrajectory trajectory;
    AttentionRecord source_record;
    AttentionRecord edit_record;
    std::optional<EditMask> mask;
    TensorGrid<double> final_latent;         // edit branch z_0
    TensorGrid<double> source_final_latent;  // source branch z_0 (exact replay)
};

/// Full edit: invert (or reuse a persisted trajectory), dual-branch denoise
/// with attention injection and frequency annealing, per-step masked
/// blending and geometry guidance, decode, optional enhancement. The
/// attention-derived mask comes from a preliminary injection-only pass so
/// the blended run uses one fixed region.
EditResult run_edit(const SplatGrid& asset, const EditConfig& config,
                    const NoiseTrajectory* preloaded_trajectory = nullptr);

}  // namespace splatedit
