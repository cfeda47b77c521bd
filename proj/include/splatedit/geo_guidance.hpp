#pragma once

#include "splatedit/denoiser.hpp"
#include "splatedit/latent_codec.hpp"
#include "splatedit/mask_edit.hpp"

namespace splatedit {

/// Per-Gaussian relevance weights in [0,1], V x 1 x H x W.
using RelevanceMask = TensorGrid<double>;

struct GeoGuidanceParams {
    double lambda_opacity = 1.0;
    double lambda_sigma = 1.0;
    double gamma_opacity = 5.0;
    double gamma_sigma = 1.0;
    double scale = 0.1;  // guidance scale s
    /// Default differentiates through the x0 estimate and decode only,
    /// treating the eps prediction as constant; the full mode also
    /// backpropagates through the denoiser.
    bool full_backprop = false;
};

/// Editing signal per Gaussian cell: the channel-summed L1 gap between the
/// edit- and source-conditioned eps predictions at the same latent,
/// min-max normalized globally. Identical predictions give the zero mask.
/// Predictions run hook-free.
RelevanceMask relevance_mask(const Denoiser& denoiser, const TensorGrid<double>& z_t, int t,
                             const PromptEmbedding& p, const PromptEmbedding& p_star);

/// Min-max normalization used by relevance_mask, exposed for tests.
RelevanceMask normalize_relevance(const TensorGrid<double>& d);

/// Denoised-latent estimate x0 = (z_t - sqrt(1 - alpha_bar) eps) / sqrt(alpha_bar).
TensorGrid<double> x0_estimate(const TensorGrid<double>& z_t, const TensorGrid<double>& eps,
                               double alpha_bar_t);

/// L_geo = lambda_o sum_i R_i exp(-gamma_o o_i) + lambda_S sum_i R_i exp(-gamma_S Tr_i),
/// with (o, Tr) from the codec's smooth geometry decode of x0.
double geo_loss(const LatentCodec& codec, const TensorGrid<double>& x0, const RelevanceMask& relevance,
                const GeoGuidanceParams& params);

/// d L_geo / d z_t with the eps prediction held constant (the default
/// guidance gradient).
TensorGrid<double> geo_loss_grad(const LatentCodec& codec, const TensorGrid<double>& z_t,
                                 const TensorGrid<double>& eps, double alpha_bar_t,
                                 const RelevanceMask& relevance, const GeoGuidanceParams& params);

/// Full-backprop variant: also pulls the x0 gradient back through the cached
/// denoiser forward pass (same hooks as the forward).
TensorGrid<double> geo_loss_grad_full(const LatentCodec& codec, const Denoiser& denoiser,
                                      const Denoiser::Forward& fwd, double alpha_bar_t,
                                      const RelevanceMask& relevance, const GeoGuidanceParams& params,
                                      const DenoiserHooks& hooks = {});

/// Pullback of L_geo through decode_geometry to the x0 estimate.
TensorGrid<double> geo_loss_grad_x0(const LatentCodec& codec, const TensorGrid<double>& x0,
                                    const RelevanceMask& relevance, const GeoGuidanceParams& params);

/// z_{t-1} = blended - s * grad, the gradient confined to the mask when one
/// is active. Throws NumericalError on a non-finite gradient.
TensorGrid<double> guided_step(const TensorGrid<double>& blended, const TensorGrid<double>& grad,
                               double scale, const EditMask* mask = nullptr);

}  // namespace splatedit
