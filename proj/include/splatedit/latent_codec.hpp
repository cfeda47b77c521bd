#pragma once

#include <Eigen/Dense>

#include "splatedit/splat_grid.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

enum class Provenance { Source, Edited };

/// Multi-view latent the diffusion process operates on. With the codecs
/// provided here the latent keeps the splat grid's 12 channels and spatial
/// resolution (stand-in values; a compressive VAE is out of scope).
struct LatentTensor {
    TensorGrid<double> values;
    Provenance provenance = Provenance::Source;
};

/// Per-Gaussian geometry decoded from a latent: opacity and Tr(Sigma),
/// each V x 1 x H x W.
struct GeometryFields {
    TensorGrid<double> opacity;
    TensorGrid<double> trace;
};

enum class CodecKind { Identity, Orthogonal };

/// Encoder/decoder pair between splat grids and latents.
///
/// `Identity` keeps channels as-is. `Orthogonal` mixes the 12 attribute
/// channels per cell through a seeded orthogonal matrix, so encode/decode
/// exercise a nontrivial linear path while staying exactly invertible.
///
/// decode() hard-clamps so the result always satisfies the splat grid
/// invariants. decode_geometry() replaces the hard clamps with smooth
/// squashing (scaled softplus, sharpness kSmoothWidth) so the guidance
/// gradient exists everywhere; inside the valid range the two paths agree
/// to ~1e-9.
class LatentCodec {
public:
    /// Transition width of the smooth clamps. smooth_clamp01(0) =
    /// kSmoothWidth * ln 2 up to an e^{-1/w} correction.
    static constexpr double kSmoothWidth = 0.002;

    LatentCodec(CodecKind kind, std::uint64_t seed);

    CodecKind kind() const { return kind_; }

    LatentTensor encode(const SplatGrid& grid) const;
    SplatGrid decode(const LatentTensor& latent, const CameraRig& rig) const;

    GeometryFields decode_geometry(const LatentTensor& latent) const;

    /// Adjoint of decode_geometry: pulls (d/d opacity, d/d trace) fields back
    /// to a latent-shaped gradient.
    TensorGrid<double> decode_geometry_vjp(const LatentTensor& latent, const TensorGrid<double>& grad_opacity,
                                           const TensorGrid<double>& grad_trace) const;

    /// Smooth positive map used for scale channels: w*log(1+exp(x/w)).
    static double smooth_positive(double x);
    static double smooth_positive_derivative(double x);
    /// Smooth clamp to [0,1] used for the opacity channel.
    static double smooth_clamp01(double x);
    static double smooth_clamp01_derivative(double x);

private:
    TensorGrid<double> mix_channels(const TensorGrid<double>& in, const Eigen::Matrix<double, 12, 12>& m) const;

    CodecKind kind_;
    Eigen::Matrix<double, 12, 12> mix_;  // latent = mix * attributes per cell
};

}  // namespace splatedit
