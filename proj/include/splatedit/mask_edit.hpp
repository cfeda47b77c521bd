#pragma once

#include <vector>

#include "splatedit/grid_io.hpp"
#include "splatedit/image.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

/// Binary editing region over V x H_lat x W_lat (stored as a one-channel
/// tensor with values in {0,1}).
using EditMask = TensorGrid<double>;

inline EditMask ones_mask(int views, int h, int w) {
    EditMask m(views, 1, h, w);
    m.data.setOnes();
    return m;
}

/// Averages the token's cross-attention column over every recorded
/// (layer, timestep), min-max normalizes, binarizes at `threshold` and lifts
/// the result from attention resolution to latent resolution by nearest
/// neighbor. A degenerate min-max (flat attention) yields the all-zero mask.
/// Attention rows are ordered (view, y, x), matching the denoiser.
EditMask attention_mask(const AttentionRecord& records, int token_index, double threshold, int views,
                        int attn_h, int attn_w, int latent_h, int latent_w);

/// Pixel-aligned lift of per-view grayscale masks: a latent cell is covered
/// when any pixel in its footprint is >= 0.5 (nearest pixel when upsampling).
EditMask lift_view_masks(const std::vector<GrayImage>& view_masks, int latent_h, int latent_w);

/// Element-wise max.
EditMask union_masks(const EditMask& a, const EditMask& b);

/// Eq-style latent blend: out = (1 - M) .* z + M .* z_edit, the mask
/// broadcast over channels. Binary masks select bit-exactly.
TensorGrid<double> blend_latents(const TensorGrid<double>& z, const TensorGrid<double>& z_edit,
                                 const EditMask& mask);

/// Nearest-neighbor resample of one view's mask plane to an image, for the
/// enhancement loop.
GrayImage mask_view_to_image(const EditMask& mask, int view, int height, int width);

}  // namespace splatedit
