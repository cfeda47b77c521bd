#include "splatedit/mask_edit.hpp"

#include <algorithm>

namespace splatedit {

EditMask attention_mask(const AttentionRecord& records, int token_index, double threshold, int views,
                        int attn_h, int attn_w, int latent_h, int latent_w) {
    if (records.cross.empty()) throw DataError("attention_mask: no cross-attention maps recorded");
    const int positions = views * attn_h * attn_w;

    Eigen::VectorXd avg = Eigen::VectorXd::Zero(positions);
    int count = 0;
    for (const auto& [key, map] : records.cross) {
        if (map.rows() != positions) throw DataError("attention_mask: map rows do not match grid positions");
        if (token_index < 0 || token_index >= map.cols())
            throw DataError("attention_mask: token index not present in the cross maps");
        avg += map.col(token_index);
        ++count;
    }
    avg /= count;

    const double lo = avg.minCoeff();
    const double hi = avg.maxCoeff();
    EditMask mask(views, 1, latent_h, latent_w);
    if (hi - lo < 1e-12) return mask;  // flat attention: prefer "no edit region"

    for (int v = 0; v < views; ++v)
        for (int y = 0; y < latent_h; ++y)
            for (int x = 0; x < latent_w; ++x) {
                const int ay = std::min(attn_h - 1, y * attn_h / latent_h);
                const int ax = std::min(attn_w - 1, x * attn_w / latent_w);
                const double value = (avg[v * attn_h * attn_w + ay * attn_w + ax] - lo) / (hi - lo);
                mask.plane(v, 0)[y * latent_w + x] = value >= threshold ? 1.0 : 0.0;
            }
    return mask;
}

EditMask lift_view_masks(const std::vector<GrayImage>& view_masks, int latent_h, int latent_w) {
    if (view_masks.empty()) throw DataError("lift_view_masks: no mask images");
    const int views = static_cast<int>(view_masks.size());
    EditMask mask(views, 1, latent_h, latent_w);
    for (int v = 0; v < views; ++v) {
        const GrayImage& img = view_masks[v];
        const int ih = static_cast<int>(img.rows()), iw = static_cast<int>(img.cols());
        if (ih < 1 || iw < 1) throw DataError("lift_view_masks: empty mask image");
        for (int y = 0; y < latent_h; ++y)
            for (int x = 0; x < latent_w; ++x) {
                const int y0 = y * ih / latent_h;
                const int y1 = std::max(y0 + 1, (y + 1) * ih / latent_h);
                const int x0 = x * iw / latent_w;
                const int x1 = std::max(x0 + 1, (x + 1) * iw / latent_w);
                bool covered = false;
                for (int yy = y0; yy < y1 && !covered; ++yy)
                    for (int xx = x0; xx < x1 && !covered; ++xx)
                        covered = img(yy, xx) >= 0.5;
                mask.plane(v, 0)[y * latent_w + x] = covered ? 1.0 : 0.0;
            }
    }
    return mask;
}

EditMask union_masks(const EditMask& a, const EditMask& b) {
    a.require_same_shape(b, "union_masks");
    EditMask out = a;
    out.data = a.data.max(b.data);
    return out;
}

TensorGrid<double> blend_latents(const TensorGrid<double>& z, const TensorGrid<double>& z_edit,
                                 const EditMask& mask) {
    z.require_same_shape(z_edit, "blend_latents");
    if (mask.views != z.views || mask.rows != z.rows || mask.cols != z.cols || mask.channels != 1)
        throw DataError("blend_latents: mask shape mismatch");
    TensorGrid<double> out = TensorGrid<double>::zeros_like(z);
    for (int v = 0; v < z.views; ++v) {
        const auto m = mask.plane(v, 0);
        for (int c = 0; c < z.channels; ++c)
            out.plane(v, c) = (1.0 - m) * z.plane(v, c) + m * z_edit.plane(v, c);
    }
    return out;
}

GrayImage mask_view_to_image(const EditMask& mask, int view, int height, int width) {
    if (view < 0 || view >= mask.views) throw DataError("mask_view_to_image: view out of range");
    GrayImage img(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int my = std::min(mask.rows - 1, y * mask.rows / height);
            const int mx = std::min(mask.cols - 1, x * mask.cols / width);
            img(y, x) = mask.plane(view, 0)[my * mask.cols + mx];
        }
    return img;
}

}  // namespace splatedit
