#include "splatedit/geo_guidance.hpp"

#include <cmath>

namespace splatedit {

RelevanceMask normalize_relevance(const TensorGrid<double>& d) {
    RelevanceMask r = d;
    const double lo = d.data.minCoeff();
    const double hi = d.data.maxCoeff();
    if (hi - lo < 1e-12) {
        r.data.setZero();
        return r;
    }
    r.data = (d.data - lo) / (hi - lo);
    return r;
}

RelevanceMask relevance_mask(const Denoiser& denoiser, const TensorGrid<double>& z_t, int t,
                             const PromptEmbedding& p, const PromptEmbedding& p_star) {
    const TensorGrid<double> eps_src = denoiser.predict(z_t, t, p).eps;
    const TensorGrid<double> eps_edit = denoiser.predict(z_t, t, p_star).eps;

    TensorGrid<double> d(z_t.views, 1, z_t.rows, z_t.cols);
    for (int v = 0; v < z_t.views; ++v) {
        auto acc = d.plane(v, 0);
        for (int c = 0; c < z_t.channels; ++c)
            acc += (eps_edit.plane(v, c) - eps_src.plane(v, c)).abs();
    }
    return normalize_relevance(d);
}

TensorGrid<double> x0_estimate(const TensorGrid<double>& z_t, const TensorGrid<double>& eps,
                               double alpha_bar_t) {
    z_t.require_same_shape(eps, "x0_estimate");
    TensorGrid<double> x0 = TensorGrid<double>::zeros_like(z_t);
    x0.data = (z_t.data - std::sqrt(1.0 - alpha_bar_t) * eps.data) / std::sqrt(alpha_bar_t);
    return x0;
}

double geo_loss(const LatentCodec& codec, const TensorGrid<double>& x0, const RelevanceMask& relevance,
                const GeoGuidanceParams& params) {
    const GeometryFields geo = codec.decode_geometry({x0, Provenance::Edited});
    double loss = 0.0;
    loss += params.lambda_opacity *
            (relevance.data * (-params.gamma_opacity * geo.opacity.data).exp()).sum();
    loss += params.lambda_sigma * (relevance.data * (-params.gamma_sigma * geo.trace.data).exp()).sum();
    return loss;
}

TensorGrid<double> geo_loss_grad_x0(const LatentCodec& codec, const TensorGrid<double>& x0,
                                    const RelevanceMask& relevance, const GeoGuidanceParams& params) {
    const LatentTensor latent{x0, Provenance::Edited};
    const GeometryFields geo = codec.decode_geometry(latent);
    TensorGrid<double> grad_opacity = TensorGrid<double>::zeros_like(geo.opacity);
    TensorGrid<double> grad_trace = TensorGrid<double>::zeros_like(geo.trace);
    grad_opacity.data = -params.lambda_opacity * params.gamma_opacity * relevance.data *
                        (-params.gamma_opacity * geo.opacity.data).exp();
    grad_trace.data = -params.lambda_sigma * params.gamma_sigma * relevance.data *
                      (-params.gamma_sigma * geo.trace.data).exp();
    return codec.decode_geometry_vjp(latent, grad_opacity, grad_trace);
}

TensorGrid<double> geo_loss_grad(const LatentCodec& codec, const TensorGrid<double>& z_t,
                                 const TensorGrid<double>& eps, double alpha_bar_t,
                                 const RelevanceMask& relevance, const GeoGuidanceParams& params) {
    const TensorGrid<double> x0 = x0_estimate(z_t, eps, alpha_bar_t);
    TensorGrid<double> grad = geo_loss_grad_x0(codec, x0, relevance, params);
    grad.data /= std::sqrt(alpha_bar_t);  // d x0 / d z_t with eps frozen
    return grad;
}

TensorGrid<double> geo_loss_grad_full(const LatentCodec& codec, const Denoiser& denoiser,
                                      const Denoiser::Forward& fwd, double alpha_bar_t,
                                      const RelevanceMask& relevance, const GeoGuidanceParams& params,
                                      const DenoiserHooks& hooks) {
    const TensorGrid<double> x0 = x0_estimate(fwd.input, fwd.eps, alpha_bar_t);
    const TensorGrid<double> grad_x0 = geo_loss_grad_x0(codec, x0, relevance, params);

    // x0 = (z - sqrt(1-ab) eps(z)) / sqrt(ab)
    TensorGrid<double> grad_eps = TensorGrid<double>::zeros_like(grad_x0);
    grad_eps.data = grad_x0.data * (-std::sqrt(1.0 - alpha_bar_t) / std::sqrt(alpha_bar_t));
    TensorGrid<double> grad = denoiser.input_gradient(fwd, grad_eps, hooks);
    grad.data += grad_x0.data / std::sqrt(alpha_bar_t);
    return grad;
}

TensorGrid<double> guided_step(const TensorGrid<double>& blended, const TensorGrid<double>& grad,
                               double scale, const EditMask* mask) {
    blended.require_same_shape(grad, "guided_step");
    if (!grad.all_finite()) throw NumericalError("guided_step: non-finite guidance gradient");
    TensorGrid<double> out = blended;
    if (scale == 0.0) return out;
    if (mask == nullptr) {
        out.data -= scale * grad.data;
        return out;
    }
    if (mask->views != grad.views || mask->rows != grad.rows || mask->cols != grad.cols)
        throw DataError("guided_step: mask shape mismatch");
    for (int v = 0; v < grad.views; ++v) {
        const auto m = mask->plane(v, 0);
        for (int c = 0; c < grad.channels; ++c) out.plane(v, c) -= scale * (m * grad.plane(v, c));
    }
    return out;
}

}  // namespace splatedit
