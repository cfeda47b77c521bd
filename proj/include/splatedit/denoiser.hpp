#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "splatedit/grid_io.hpp"
#include "splatedit/prompt.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

/// Architecture and weight seed for the reference denoiser. Latent height
/// and width must be divisible by 4; attention runs jointly over all views
/// at half resolution.
struct DenoiserConfig {
    int latent_channels = 12;
    int base_channels = 16;  // feature width F; attention blocks run at 2F
    int text_dim = 32;
    int time_dim = 8;
    int max_tokens = 16;
    std::uint64_t seed = 11;
};

struct ConvParam {
    Eigen::MatrixXd w;  // out_ch x (in_ch * k * k)
    Eigen::VectorXd b;
    int in_ch = 0, out_ch = 0, k = 3;
};

struct AttnParam {
    Eigen::MatrixXd wq_self, wk_self, wv_self, wo_self;   // C x C
    Eigen::MatrixXd wq_cross, wo_cross;                   // C x C
    Eigen::MatrixXd wk_cross, wv_cross;                   // text_dim x C
};

struct DenoiserWeights {
    ConvParam stem, enc1, enc2, mid, up2, up1, dec1, head;
    AttnParam attn0, attn1;
    Eigen::MatrixXd time_w;  // F x time_dim
    Eigen::VectorXd time_b;  // F
};

/// Per-call taps. `attention_tap` sees each computed map and may return a
/// replacement of identical dimensions (empty return keeps the computed
/// map). `skip_tap` transforms skip features before they rejoin the decoder;
/// it must be linear and self-adjoint, because the backward pass reuses it
/// on gradients (the radial spectral modulation used here is).
struct DenoiserHooks {
    std::function<Eigen::MatrixXd(int layer, AttentionKind kind, const Eigen::MatrixXd& computed)> attention_tap;
    std::function<TensorGrid<double>(int level, const TensorGrid<double>& features)> skip_tap;
};

/// Toy text-conditioned denoiser over multi-view splat latents: a 2-level
/// convolutional encoder/decoder with skip connections and, at half
/// resolution, two blocks of joint (all views at once) self-attention plus
/// cross-attention against the prompt tokens. Weights are seeded random and
/// stay frozen unless train_step is called. Epsilon-prediction contract.
class Denoiser {
public:
    explicit Denoiser(const DenoiserConfig& config);

    /// All-zero weights (so eps == 0); test helper.
    static Denoiser zeros(const DenoiserConfig& config);

    const DenoiserConfig& config() const { return config_; }
    const DenoiserWeights& weights() const { return weights_; }

    struct AttnCache {
        Eigen::MatrixXd input;  // flattened features, one row per (view, y, x)
        Eigen::MatrixXd q_self, k_self, v_self, map_self;
        Eigen::MatrixXd after_self;
        Eigen::MatrixXd q_cross, k_cross, v_cross, map_cross;
        Eigen::MatrixXd output;
        bool self_replaced = false, cross_replaced = false;
    };

    /// Forward activations kept for the backward pass.
    struct Forward {
        int t = 0;
        TensorGrid<double> input;
        Eigen::MatrixXd text;
        Eigen::VectorXd time_feat;
        TensorGrid<double> stem_pre, a1;
        TensorGrid<double> enc1_pre, e1;
        TensorGrid<double> p1, enc2_pre, e2;
        AttnCache attn0;
        TensorGrid<double> t0;
        TensorGrid<double> p2, mid_pre, m;
        TensorGrid<double> u2, s2m, up2_pre, f2;
        AttnCache attn1;
        TensorGrid<double> t1, u1, c1, s1m, d1_pre, d1;
        TensorGrid<double> dec1_pre, d2;
        TensorGrid<double> eps;
        AttentionRecord record;               // maps as used (post-tap), keyed (layer, t)
        std::vector<TensorGrid<double>> skips;  // raw skip features {level 0, level 1}
    };

    Forward forward(const TensorGrid<double>& z, int t, const PromptEmbedding& prompt,
                    const DenoiserHooks& hooks = {}) const;

    struct Result {
        TensorGrid<double> eps;
        AttentionRecord record;
        std::vector<TensorGrid<double>> skips;
    };

    /// eps prediction plus the recorded attention maps and skip features.
    Result predict(const TensorGrid<double>& z, int t, const PromptEmbedding& prompt,
                   const DenoiserHooks& hooks = {}) const;

    /// Pullback of `grad_eps` through the cached forward pass to the input
    /// latent. Replaced attention maps are treated as constants. Pass the
    /// same hooks that produced `fwd` so skip gradients are transformed
    /// consistently.
    TensorGrid<double> input_gradient(const Forward& fwd, const TensorGrid<double>& grad_eps,
                                      const DenoiserHooks& hooks = {}) const;

    struct TrainSample {
        TensorGrid<double> z;
        int t = 1;
        PromptEmbedding prompt;
        TensorGrid<double> target;
    };

    /// One SGD step on mean squared eps error over the batch; returns the
    /// pre-step loss.
    double train_step(const std::vector<TrainSample>& batch, double learning_rate);

    int attention_positions(int views, int h, int w) const { return views * (h / 2) * (w / 2); }

private:
    struct WeightGrads;
    void backward(const Forward& fwd, const TensorGrid<double>& grad_eps, const DenoiserHooks& hooks,
                  TensorGrid<double>* grad_input, WeightGrads* grads) const;

    DenoiserConfig config_;
    DenoiserWeights weights_;
};

}  // namespace splatedit
