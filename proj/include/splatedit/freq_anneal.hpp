#pragma once

#include <Eigen/Core>

#include "splatedit/tensor.hpp"

namespace splatedit {

/// Spectral modulation parameters. Early denoising (t > tau) scales the low
/// band (r < radius_threshold) by scale_low; late denoising (t <= tau)
/// scales the high band (r >= radius_threshold) by scale_high; everything
/// else passes through. Radius is normalized so the Nyquist corner sits at
/// r = 1; the band boundary itself belongs to the high band.
struct AnnealParams {
    double scale_low = 1.2;
    double scale_high = 1.1;
    double tau = 0.0;                 // timestep pivot
    double radius_threshold = 0.25;   // normalized frequency radius in [0,1]
};

/// Per-frequency scale field beta in unshifted FFT index order (DC at
/// (0,0)). Depends only on |r|, so modulation preserves conjugate symmetry.
Eigen::ArrayXXd modulation_mask(int h, int w, int t, const AnnealParams& params);

/// FFT -> multiply by beta -> IFFT, per (view, channel) plane. Output is
/// real; the sub-1e-6 imaginary residue of the roundtrip is discarded. The
/// operator is linear and self-adjoint (beta is radially symmetric), which
/// the denoiser backward pass relies on.
TensorGrid<double> modulate_skip(const TensorGrid<double>& features, int t, const AnnealParams& params);

}  // namespace splatedit
