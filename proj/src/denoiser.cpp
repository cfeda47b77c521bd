#include "splatedit/denoiser.hpp"

#include <cmath>

#include "splatedit/errors.hpp"

namespace splatedit {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

double silu(double x) {
    const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return x * s;
}

double silu_derivative(double x) {
    const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return s * (1.0 + x * (1.0 - s));
}

TensorGrid<double> apply_silu(const TensorGrid<double>& in) {
    TensorGrid<double> out = in;
    out.data = out.data.unaryExpr([](double x) { return silu(x); });
    return out;
}

TensorGrid<double> silu_backward(const TensorGrid<double>& pre, const TensorGrid<double>& grad) {
    TensorGrid<double> out = grad;
    out.data *= pre.data.unaryExpr([](double x) { return silu_derivative(x); });
    return out;
}

/// One row per (view, y, x) position, one column per (channel, ky, kx) tap;
/// zero padding keeps spatial dims.
Matrix im2col(const TensorGrid<double>& in, int k) {
    const int pad = k / 2;
    const int P = in.views * in.rows * in.cols;
    Matrix patches = Matrix::Zero(P, in.channels * k * k);
    for (int v = 0; v < in.views; ++v)
        for (int y = 0; y < in.rows; ++y)
            for (int x = 0; x < in.cols; ++x) {
                const int row = v * in.rows * in.cols + y * in.cols + x;
                for (int c = 0; c < in.channels; ++c) {
                    const auto plane = in.plane(v, c);
                    for (int dy = 0; dy < k; ++dy) {
                        const int yy = y + dy - pad;
                        if (yy < 0 || yy >= in.rows) continue;
                        for (int dx = 0; dx < k; ++dx) {
                            const int xx = x + dx - pad;
                            if (xx < 0 || xx >= in.cols) continue;
                            patches(row, (c * k + dy) * k + dx) = plane[yy * in.cols + xx];
                        }
                    }
                }
            }
    return patches;
}

TensorGrid<double> col2im_add(const Matrix& grad_patches, int k, int views, int channels, int rows, int cols) {
    const int pad = k / 2;
    TensorGrid<double> grad(views, channels, rows, cols);
    for (int v = 0; v < views; ++v)
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < cols; ++x) {
                const int row = v * rows * cols + y * cols + x;
                for (int c = 0; c < channels; ++c) {
                    auto plane = grad.plane(v, c);
                    for (int dy = 0; dy < k; ++dy) {
                        const int yy = y + dy - pad;
                        if (yy < 0 || yy >= rows) continue;
                        for (int dx = 0; dx < k; ++dx) {
                            const int xx = x + dx - pad;
                            if (xx < 0 || xx >= cols) continue;
                            plane[yy * cols + xx] += grad_patches(row, (c * k + dy) * k + dx);
                        }
                    }
                }
            }
    return grad;
}

Matrix flatten_positions(const TensorGrid<double>& t) {
    const int hw = t.rows * t.cols;
    Matrix out(t.views * hw, t.channels);
    for (int v = 0; v < t.views; ++v)
        for (int c = 0; c < t.channels; ++c) out.block(v * hw, c, hw, 1) = t.plane(v, c).matrix();
    return out;
}

TensorGrid<double> unflatten_positions(const Matrix& m, int views, int rows, int cols) {
    const int hw = rows * cols;
    TensorGrid<double> out(views, static_cast<int>(m.cols()), rows, cols);
    for (int v = 0; v < views; ++v)
        for (int c = 0; c < out.channels; ++c) out.plane(v, c) = m.block(v * hw, c, hw, 1).array();
    return out;
}

TensorGrid<double> conv_forward(const TensorGrid<double>& in, const ConvParam& p) {
    if (in.channels != p.in_ch) throw DataError("conv: channel mismatch");
    const Matrix patches = im2col(in, p.k);
    Matrix out_flat = patches * p.w.transpose();
    out_flat.rowwise() += p.b.transpose();
    return unflatten_positions(out_flat, in.views, in.rows, in.cols);
}

// Returns grad wrt conv input; accumulates weight grads when asked.
TensorGrid<double> conv_backward(const TensorGrid<double>& in, const ConvParam& p,
                                 const TensorGrid<double>& grad_out, ConvParam* grads) {
    const Matrix grad_flat = flatten_positions(grad_out);
    const Matrix patches = im2col(in, p.k);
    if (grads != nullptr) {
        grads->w += grad_flat.transpose() * patches;
        grads->b += grad_flat.colwise().sum().transpose();
    }
    const Matrix grad_patches = grad_flat * p.w;
    return col2im_add(grad_patches, p.k, in.views, in.channels, in.rows, in.cols);
}

TensorGrid<double> avgpool2(const TensorGrid<double>& in) {
    TensorGrid<double> out(in.views, in.channels, in.rows / 2, in.cols / 2);
    for (int v = 0; v < in.views; ++v)
        for (int c = 0; c < in.channels; ++c) {
            const auto src = in.plane(v, c);
            auto dst = out.plane(v, c);
            for (int y = 0; y < out.rows; ++y)
                for (int x = 0; x < out.cols; ++x)
                    dst[y * out.cols + x] = 0.25 * (src[(2 * y) * in.cols + 2 * x] +
                                                    src[(2 * y) * in.cols + 2 * x + 1] +
                                                    src[(2 * y + 1) * in.cols + 2 * x] +
                                                    src[(2 * y + 1) * in.cols + 2 * x + 1]);
        }
    return out;
}

TensorGrid<double> avgpool2_backward(const TensorGrid<double>& grad_out, int rows, int cols) {
    TensorGrid<double> grad(grad_out.views, grad_out.channels, rows, cols);
    for (int v = 0; v < grad.views; ++v)
        for (int c = 0; c < grad.channels; ++c) {
            const auto src = grad_out.plane(v, c);
            auto dst = grad.plane(v, c);
            for (int y = 0; y < grad_out.rows; ++y)
                for (int x = 0; x < grad_out.cols; ++x) {
                    const double g = 0.25 * src[y * grad_out.cols + x];
                    dst[(2 * y) * cols + 2 * x] = g;
                    dst[(2 * y) * cols + 2 * x + 1] = g;
                    dst[(2 * y + 1) * cols + 2 * x] = g;
                    dst[(2 * y + 1) * cols + 2 * x + 1] = g;
                }
        }
    return grad;
}

TensorGrid<double> upsample2(const TensorGrid<double>& in) {
    TensorGrid<double> out(in.views, in.channels, in.rows * 2, in.cols * 2);
    for (int v = 0; v < in.views; ++v)
        for (int c = 0; c < in.channels; ++c) {
            const auto src = in.plane(v, c);
            auto dst = out.plane(v, c);
            for (int y = 0; y < out.rows; ++y)
                for (int x = 0; x < out.cols; ++x) dst[y * out.cols + x] = src[(y / 2) * in.cols + x / 2];
        }
    return out;
}

TensorGrid<double> upsample2_backward(const TensorGrid<double>& grad_out) {
    TensorGrid<double> grad(grad_out.views, grad_out.channels, grad_out.rows / 2, grad_out.cols / 2);
    for (int v = 0; v < grad.views; ++v)
        for (int c = 0; c < grad.channels; ++c) {
            const auto src = grad_out.plane(v, c);
            auto dst = grad.plane(v, c);
            for (int y = 0; y < grad_out.rows; ++y)
                for (int x = 0; x < grad_out.cols; ++x)
                    dst[(y / 2) * grad.cols + x / 2] += src[y * grad_out.cols + x];
        }
    return grad;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Vector row = logits.row(i).transpose();
        const double m = row.maxCoeff();
        Vector e = (row.array() - m).exp().matrix();
        out.row(i) = (e / e.sum()).transpose();
    }
    return out;
}

// dL/dlogits given dL/dsoftmax, row-wise.
Matrix softmax_rows_backward(const Matrix& softmax, const Matrix& grad) {
    Matrix out(softmax.rows(), softmax.cols());
    for (Eigen::Index i = 0; i < softmax.rows(); ++i) {
        const double dot = softmax.row(i).dot(grad.row(i));
        out.row(i) = (grad.row(i).array() - dot) * softmax.row(i).array();
    }
    return out;
}

Matrix init_matrix(Rng& rng, int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

ConvParam init_conv(Rng& rng, int in_ch, int out_ch, int k, double gain) {
    ConvParam p;
    p.in_ch = in_ch;
    p.out_ch = out_ch;
    p.k = k;
    p.w = init_matrix(rng, out_ch, in_ch * k * k, gain / std::sqrt(static_cast<double>(in_ch * k * k)));
    p.b = Vector::Zero(out_ch);
    return p;
}

AttnParam init_attn(Rng& rng, int ch, int text_dim) {
    AttnParam a;
    const double sc = 1.0 / std::sqrt(static_cast<double>(ch));
    const double st = 1.0 / std::sqrt(static_cast<double>(text_dim));
    a.wq_self = init_matrix(rng, ch, ch, sc);
    a.wk_self = init_matrix(rng, ch, ch, sc);
    a.wv_self = init_matrix(rng, ch, ch, sc);
    a.wo_self = init_matrix(rng, ch, ch, 0.5 * sc);
    a.wq_cross = init_matrix(rng, ch, ch, sc);
    a.wk_cross = init_matrix(rng, text_dim, ch, st);
    a.wv_cross = init_matrix(rng, text_dim, ch, st);
    a.wo_cross = init_matrix(rng, ch, ch, 0.5 * sc);
    return a;
}

Vector time_features(int t, int dim) {
    Vector f(dim);
    const int half = dim / 2;
    for (int j = 0; j < half; ++j) {
        const double angle = static_cast<double>(t) * std::pow(100.0, -static_cast<double>(j) / half);
        f[2 * j] = std::sin(angle);
        f[2 * j + 1] = std::cos(angle);
    }
    return f;
}

void visit_params(DenoiserWeights& w, const std::function<void(Matrix&)>& fm,
                  const std::function<void(Vector&)>& fv) {
    for (ConvParam* c : {&w.stem, &w.enc1, &w.enc2, &w.mid, &w.up2, &w.up1, &w.dec1, &w.head}) {
        fm(c->w);
        fv(c->b);
    }
    for (AttnParam* a : {&w.attn0, &w.attn1})
        for (Matrix* m : {&a->wq_self, &a->wk_self, &a->wv_self, &a->wo_self, &a->wq_cross, &a->wk_cross,
                          &a->wv_cross, &a->wo_cross})
            fm(*m);
    fm(w.time_w);
    fv(w.time_b);
}

}  // namespace

struct Denoiser::WeightGrads {
    DenoiserWeights g;
};

Denoiser::Denoiser(const DenoiserConfig& config) : config_(config) {
    if (config.time_dim % 2 != 0) throw ConfigError("denoiser: time_dim must be even");
    const int F = config.base_channels;
    const int C = 2 * F;
    Rng rng(config.seed);
    weights_.stem = init_conv(rng, config.latent_channels, F, 3, 1.0);
    weights_.time_w = init_matrix(rng, F, config.time_dim, 0.1 / std::sqrt(static_cast<double>(config.time_dim)));
    weights_.time_b = Vector::Zero(F);
    weights_.enc1 = init_conv(rng, F, F, 3, 1.0);
    weights_.enc2 = init_conv(rng, F, C, 3, 1.0);
    weights_.attn0 = init_attn(rng, C, config.text_dim);
    weights_.mid = init_conv(rng, C, C, 3, 1.0);
    weights_.up2 = init_conv(rng, C, C, 3, 1.0);
    weights_.attn1 = init_attn(rng, C, config.text_dim);
    weights_.up1 = init_conv(rng, C, F, 3, 1.0);
    weights_.dec1 = init_conv(rng, F, F, 3, 1.0);
    weights_.head = init_conv(rng, F, config.latent_channels, 1, 0.5);
}

Denoiser Denoiser::zeros(const DenoiserConfig& config) {
    Denoiser d(config);
    visit_params(d.weights_, [](Matrix& m) { m.setZero(); }, [](Vector& v) { v.setZero(); });
    return d;
}

namespace {

struct TapResult {
    Matrix map;
    bool replaced = false;
};

TapResult apply_tap(const DenoiserHooks& hooks, int layer, AttentionKind kind, const Matrix& computed) {
    if (!hooks.attention_tap) return {computed, false};
    Matrix injected = hooks.attention_tap(layer, kind, computed);
    if (injected.size() == 0) return {computed, false};
    if (injected.rows() != computed.rows() || injected.cols() != computed.cols())
        throw DataError("attention tap: injected map dimensions do not match the recorded map");
    const bool replaced = !(injected.array() == computed.array()).all();
    return {std::move(injected), replaced};
}

}  // namespace

Denoiser::Forward Denoiser::forward(const TensorGrid<double>& z, int t, const PromptEmbedding& prompt,
                                    const DenoiserHooks& hooks) const {
    if (z.channels != config_.latent_channels) throw DataError("denoiser: latent channel mismatch");
    if (z.rows % 4 != 0 || z.cols % 4 != 0) throw DataError("denoiser: latent dims must be divisible by 4");
    if (prompt.dim() != config_.text_dim) throw DataError("denoiser: prompt embedding dim mismatch");
    if (prompt.token_count() > config_.max_tokens) throw DataError("denoiser: too many prompt tokens");

    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(2 * config_.base_channels));

    Forward f;
    f.t = t;
    f.input = z;
    f.text = prompt.embeddings;
    f.time_feat = time_features(t, config_.time_dim);
    f.record.tokens = prompt.tokens;

    // encoder
    f.stem_pre = conv_forward(z, weights_.stem);
    const Vector tb = weights_.time_w * f.time_feat + weights_.time_b;
    for (int v = 0; v < z.views; ++v)
        for (int c = 0; c < weights_.stem.out_ch; ++c) f.stem_pre.plane(v, c) += tb[c];
    f.a1 = apply_silu(f.stem_pre);
    f.enc1_pre = conv_forward(f.a1, weights_.enc1);
    f.e1 = apply_silu(f.enc1_pre);
    f.p1 = avgpool2(f.e1);
    f.enc2_pre = conv_forward(f.p1, weights_.enc2);
    f.e2 = apply_silu(f.enc2_pre);

    auto run_attention = [&](const TensorGrid<double>& features, const AttnParam& w, int layer,
                             AttnCache& cache) -> TensorGrid<double> {
        cache.input = flatten_positions(features);
        cache.q_self = cache.input * w.wq_self;
        cache.k_self = cache.input * w.wk_self;
        cache.v_self = cache.input * w.wv_self;
        Matrix logits = cache.q_self * cache.k_self.transpose() * inv_sqrt_c;
        const Matrix computed_self = softmax_rows(logits);
        TapResult self_tap = apply_tap(hooks, layer, AttentionKind::Self, computed_self);
        cache.map_self = std::move(self_tap.map);
        cache.self_replaced = self_tap.replaced;
        f.record.self[{layer, t}] = cache.map_self;
        cache.after_self = cache.input + cache.map_self * cache.v_self * w.wo_self;

        cache.q_cross = cache.after_self * w.wq_cross;
        cache.k_cross = f.text * w.wk_cross;
        cache.v_cross = f.text * w.wv_cross;
        Matrix logits_c = cache.q_cross * cache.k_cross.transpose() * inv_sqrt_c;
        const Matrix computed_cross = softmax_rows(logits_c);
        TapResult cross_tap = apply_tap(hooks, layer, AttentionKind::Cross, computed_cross);
        cache.map_cross = std::move(cross_tap.map);
        cache.cross_replaced = cross_tap.replaced;
        f.record.cross[{layer, t}] = cache.map_cross;
        cache.output = cache.after_self + cache.map_cross * cache.v_cross * w.wo_cross;
        return unflatten_positions(cache.output, features.views, features.rows, features.cols);
    };

    f.t0 = run_attention(f.e2, weights_.attn0, 0, f.attn0);
    f.skips = {f.e1, f.t0};

    // bottleneck
    f.p2 = avgpool2(f.t0);
    f.mid_pre = conv_forward(f.p2, weights_.mid);
    f.m = apply_silu(f.mid_pre);

    // decoder
    f.u2 = upsample2(f.m);
    f.s2m = hooks.skip_tap ? hooks.skip_tap(1, f.t0) : f.t0;
    f.s2m.require_same_shape(f.t0, "skip tap level 1");
    TensorGrid<double> sum2 = f.u2;
    sum2.data += f.s2m.data;
    f.up2_pre = conv_forward(sum2, weights_.up2);
    f.f2 = apply_silu(f.up2_pre);
    f.t1 = run_attention(f.f2, weights_.attn1, 1, f.attn1);

    f.u1 = upsample2(f.t1);
    f.c1 = conv_forward(f.u1, weights_.up1);
    f.s1m = hooks.skip_tap ? hooks.skip_tap(0, f.e1) : f.e1;
    f.s1m.require_same_shape(f.e1, "skip tap level 0");
    f.d1_pre = f.c1;
    f.d1_pre.data += f.s1m.data;
    f.d1 = apply_silu(f.d1_pre);
    f.dec1_pre = conv_forward(f.d1, weights_.dec1);
    f.d2 = apply_silu(f.dec1_pre);
    f.eps = conv_forward(f.d2, weights_.head);
    if (!f.eps.all_finite()) throw NumericalError("denoiser: non-finite eps prediction");
    return f;
}

Denoiser::Result Denoiser::predict(const TensorGrid<double>& z, int t, const PromptEmbedding& prompt,
                                   const DenoiserHooks& hooks) const {
    Forward f = forward(z, t, prompt, hooks);
    return {std::move(f.eps), std::move(f.record), std::move(f.skips)};
}

void Denoiser::backward(const Forward& f, const TensorGrid<double>& grad_eps, const DenoiserHooks& hooks,
                        TensorGrid<double>* grad_input, WeightGrads* grads) const {
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(2 * config_.base_channels));
    auto conv_grads = [&](ConvParam DenoiserWeights::* member) -> ConvParam* {
        return grads ? &(grads->g.*member) : nullptr;
    };

    // head and dec1
    TensorGrid<double> g_d2 = conv_backward(f.d2, weights_.head, grad_eps, conv_grads(&DenoiserWeights::head));
    TensorGrid<double> g_dec1pre = silu_backward(f.dec1_pre, g_d2);
    TensorGrid<double> g_d1 = conv_backward(f.d1, weights_.dec1, g_dec1pre, conv_grads(&DenoiserWeights::dec1));
    TensorGrid<double> g_d1pre = silu_backward(f.d1_pre, g_d1);

    // skip level 0 (transform is linear self-adjoint, reuse it on the gradient)
    TensorGrid<double> g_e1_skip = hooks.skip_tap ? hooks.skip_tap(0, g_d1pre) : g_d1pre;
    TensorGrid<double> g_u1 = conv_backward(f.u1, weights_.up1, g_d1pre, conv_grads(&DenoiserWeights::up1));
    TensorGrid<double> g_t1 = upsample2_backward(g_u1);

    auto attention_backward = [&](const AttnCache& cache, const AttnParam& w, AttnParam* wg,
                                  const Matrix& g_out) -> Matrix {
        // cross sub-block
        Matrix g_m1 = g_out;
        const Matrix yv_cross = cache.map_cross * cache.v_cross;
        if (wg) wg->wo_cross += yv_cross.transpose() * g_out;
        const Matrix g_yv_cross = g_out * w.wo_cross.transpose();
        const Matrix g_map_cross = g_yv_cross * cache.v_cross.transpose();
        const Matrix g_v_cross = cache.map_cross.transpose() * g_yv_cross;
        if (wg) wg->wv_cross += f.text.transpose() * g_v_cross;
        if (!cache.cross_replaced) {
            const Matrix g_logits = softmax_rows_backward(cache.map_cross, g_map_cross);
            const Matrix g_q = g_logits * cache.k_cross * inv_sqrt_c;
            const Matrix g_k = g_logits.transpose() * cache.q_cross * inv_sqrt_c;
            if (wg) {
                wg->wk_cross += f.text.transpose() * g_k;
                wg->wq_cross += cache.after_self.transpose() * g_q;
            }
            g_m1 += g_q * w.wq_cross.transpose();
        }

        // self sub-block
        Matrix g_in = g_m1;
        const Matrix yv_self = cache.map_self * cache.v_self;
        if (wg) wg->wo_self += yv_self.transpose() * g_m1;
        const Matrix g_yv_self = g_m1 * w.wo_self.transpose();
        const Matrix g_map_self = g_yv_self * cache.v_self.transpose();
        const Matrix g_v_self = cache.map_self.transpose() * g_yv_self;
        if (wg) wg->wv_self += cache.input.transpose() * g_v_self;
        g_in += g_v_self * w.wv_self.transpose();
        if (!cache.self_replaced) {
            const Matrix g_logits = softmax_rows_backward(cache.map_self, g_map_self);
            const Matrix g_q = g_logits * cache.k_self * inv_sqrt_c;
            const Matrix g_k = g_logits.transpose() * cache.q_self * inv_sqrt_c;
            if (wg) {
                wg->wq_self += cache.input.transpose() * g_q;
                wg->wk_self += cache.input.transpose() * g_k;
            }
            g_in += g_q * w.wq_self.transpose() + g_k * w.wk_self.transpose();
        }
        return g_in;
    };

    const Matrix g_f2_flat =
        attention_backward(f.attn1, weights_.attn1, grads ? &grads->g.attn1 : nullptr, flatten_positions(g_t1));
    TensorGrid<double> g_f2 = unflatten_positions(g_f2_flat, f.f2.views, f.f2.rows, f.f2.cols);
    TensorGrid<double> g_up2pre = silu_backward(f.up2_pre, g_f2);
    TensorGrid<double> sum2 = f.u2;
    sum2.data += f.s2m.data;
    TensorGrid<double> g_sum2 = conv_backward(sum2, weights_.up2, g_up2pre, conv_grads(&DenoiserWeights::up2));

    TensorGrid<double> g_t0_skip = hooks.skip_tap ? hooks.skip_tap(1, g_sum2) : g_sum2;
    TensorGrid<double> g_m = upsample2_backward(g_sum2);
    TensorGrid<double> g_midpre = silu_backward(f.mid_pre, g_m);
    TensorGrid<double> g_p2 = conv_backward(f.p2, weights_.mid, g_midpre, conv_grads(&DenoiserWeights::mid));
    TensorGrid<double> g_t0 = avgpool2_backward(g_p2, f.t0.rows, f.t0.cols);
    g_t0.data += g_t0_skip.data;

    const Matrix g_e2_flat =
        attention_backward(f.attn0, weights_.attn0, grads ? &grads->g.attn0 : nullptr, flatten_positions(g_t0));
    TensorGrid<double> g_e2 = unflatten_positions(g_e2_flat, f.e2.views, f.e2.rows, f.e2.cols);
    TensorGrid<double> g_enc2pre = silu_backward(f.enc2_pre, g_e2);
    TensorGrid<double> g_p1 = conv_backward(f.p1, weights_.enc2, g_enc2pre, conv_grads(&DenoiserWeights::enc2));
    TensorGrid<double> g_e1 = avgpool2_backward(g_p1, f.e1.rows, f.e1.cols);
    g_e1.data += g_e1_skip.data;

    TensorGrid<double> g_enc1pre = silu_backward(f.enc1_pre, g_e1);
    TensorGrid<double> g_a1 = conv_backward(f.a1, weights_.enc1, g_enc1pre, conv_grads(&DenoiserWeights::enc1));
    TensorGrid<double> g_stempre = silu_backward(f.stem_pre, g_a1);

    if (grads) {
        Vector g_tb = Vector::Zero(weights_.stem.out_ch);
        for (int v = 0; v < g_stempre.views; ++v)
            for (int c = 0; c < g_stempre.channels; ++c) g_tb[c] += g_stempre.plane(v, c).sum();
        grads->g.time_w += g_tb * f.time_feat.transpose();
        grads->g.time_b += g_tb;
    }
    TensorGrid<double> g_input =
        conv_backward(f.input, weights_.stem, g_stempre, conv_grads(&DenoiserWeights::stem));
    if (grad_input) *grad_input = std::move(g_input);
}

TensorGrid<double> Denoiser::input_gradient(const Forward& fwd, const TensorGrid<double>& grad_eps,
                                            const DenoiserHooks& hooks) const {
    fwd.eps.require_same_shape(grad_eps, "input_gradient");
    TensorGrid<double> grad;
    backward(fwd, grad_eps, hooks, &grad, nullptr);
    return grad;
}

double Denoiser::train_step(const std::vector<TrainSample>& batch, double learning_rate) {
    if (batch.empty()) throw DataError("train_step: empty batch");
    WeightGrads grads;
    grads.g = weights_;
    visit_params(grads.g, [](Matrix& m) { m.setZero(); }, [](Vector& v) { v.setZero(); });

    double loss = 0.0;
    for (const TrainSample& sample : batch) {
        Forward fwd = forward(sample.z, sample.t, sample.prompt);
        fwd.eps.require_same_shape(sample.target, "train_step target");
        const double n = static_cast<double>(fwd.eps.size());
        TensorGrid<double> g_eps = TensorGrid<double>::zeros_like(fwd.eps);
        g_eps.data = 2.0 * (fwd.eps.data - sample.target.data) / (n * batch.size());
        loss += (fwd.eps.data - sample.target.data).square().sum() / (n * batch.size());
        backward(fwd, g_eps, {}, nullptr, &grads);
    }

    // SGD
    std::vector<Matrix*> wm, gm;
    std::vector<Vector*> wv, gv;
    visit_params(weights_, [&](Matrix& m) { wm.push_back(&m); }, [&](Vector& v) { wv.push_back(&v); });
    visit_params(grads.g, [&](Matrix& m) { gm.push_back(&m); }, [&](Vector& v) { gv.push_back(&v); });
    for (std::size_t i = 0; i < wm.size(); ++i) *wm[i] -= learning_rate * *gm[i];
    for (std::size_t i = 0; i < wv.size(); ++i) *wv[i] -= learning_rate * *gv[i];
    return loss;
}

}  // namespace splatedit
