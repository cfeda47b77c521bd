#include "splatedit/latent_codec.hpp"

#include <cmath>

namespace splatedit {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

Eigen::Matrix<double, 12, 12> seeded_orthogonal(std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(12, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) m(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    // canonical sign: positive diagonal of R
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < 12; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace

double LatentCodec::smooth_positive(double x) {
    const double w = kSmoothWidth;
    const double u = x / w;
    if (u > 40.0) return x;
    if (u < -40.0) return w * std::exp(u);
    return w * std::log1p(std::exp(u));
}

double LatentCodec::smooth_positive_derivative(double x) { return sigmoid(x / kSmoothWidth); }

double LatentCodec::smooth_clamp01(double x) { return smooth_positive(x) - smooth_positive(x - 1.0); }

double LatentCodec::smooth_clamp01_derivative(double x) {
    return smooth_positive_derivative(x) - smooth_positive_derivative(x - 1.0);
}

LatentCodec::LatentCodec(CodecKind kind, std::uint64_t seed) : kind_(kind) {
    mix_ = kind == CodecKind::Identity ? Eigen::Matrix<double, 12, 12>::Identity() : seeded_orthogonal(seed);
}

TensorGrid<double> LatentCodec::mix_channels(const TensorGrid<double>& in,
                                             const Eigen::Matrix<double, 12, 12>& m) const {
    TensorGrid<double> out = TensorGrid<double>::zeros_like(in);
    for (int v = 0; v < in.views; ++v) {
        // plane columns for one view form an (H*W) x 12 block; channel mixing
        // is a right-multiplication by m^T.
        out.data.middleCols(v * 12, 12).matrix() = in.data.middleCols(v * 12, 12).matrix() * m.transpose();
    }
    return out;
}

LatentTensor LatentCodec::encode(const SplatGrid& grid) const {
    if (grid.attributes.channels != channel::kCount) throw DataError("encode: grid must have 12 channels");
    LatentTensor latent;
    latent.values = kind_ == CodecKind::Identity ? grid.attributes : mix_channels(grid.attributes, mix_);
    latent.provenance = Provenance::Source;
    return latent;
}

SplatGrid LatentCodec::decode(const LatentTensor& latent, const CameraRig& rig) const {
    const TensorGrid<double>& z = latent.values;
    if (z.channels != channel::kCount) throw DataError("decode: latent must have 12 channels");
    SplatGrid grid(z.views, z.rows, z.cols);
    grid.attributes = kind_ == CodecKind::Identity ? z : mix_channels(z, mix_.transpose());
    grid.rig = rig;

    constexpr double kMinScale = 1e-9;
    for (int v = 0; v < z.views; ++v) {
        for (int c : {channel::kRed, channel::kGreen, channel::kBlue, channel::kOpacity})
            grid.attributes.plane(v, c) = grid.attributes.plane(v, c).min(1.0).max(0.0);
        grid.attributes.plane(v, channel::kDepth) = grid.attributes.plane(v, channel::kDepth).max(0.0);
        for (int c : {channel::kScaleX, channel::kScaleY, channel::kScaleZ})
            grid.attributes.plane(v, c) = grid.attributes.plane(v, c).max(kMinScale);
        for (int i = 0; i < z.plane_size(); ++i) {
            Eigen::Vector4d q(grid.attributes.plane(v, channel::kQuatW)[i],
                              grid.attributes.plane(v, channel::kQuatX)[i],
                              grid.attributes.plane(v, channel::kQuatY)[i],
                              grid.attributes.plane(v, channel::kQuatZ)[i]);
            const double n = q.norm();
            q = n > 1e-12 ? Eigen::Vector4d(q / n) : Eigen::Vector4d(1, 0, 0, 0);
            grid.attributes.plane(v, channel::kQuatW)[i] = q[0];
            grid.attributes.plane(v, channel::kQuatX)[i] = q[1];
            grid.attributes.plane(v, channel::kQuatY)[i] = q[2];
            grid.attributes.plane(v, channel::kQuatZ)[i] = q[3];
        }
    }
    return grid;
}

GeometryFields LatentCodec::decode_geometry(const LatentTensor& latent) const {
    const TensorGrid<double>& z = latent.values;
    if (z.channels != channel::kCount) throw DataError("decode_geometry: latent must have 12 channels");
    const TensorGrid<double> attrs = kind_ == CodecKind::Identity ? z : mix_channels(z, mix_.transpose());

    GeometryFields out{TensorGrid<double>(z.views, 1, z.rows, z.cols),
                       TensorGrid<double>(z.views, 1, z.rows, z.cols)};
    for (int v = 0; v < z.views; ++v) {
        for (int i = 0; i < z.plane_size(); ++i) {
            out.opacity.plane(v, 0)[i] = smooth_clamp01(attrs.plane(v, channel::kOpacity)[i]);
            double tr = 0;
            for (int c : {channel::kScaleX, channel::kScaleY, channel::kScaleZ}) {
                const double s = smooth_positive(attrs.plane(v, c)[i]);
                tr += s * s;
            }
            out.trace.plane(v, 0)[i] = tr;
        }
    }
    return out;
}

TensorGrid<double> LatentCodec::decode_geometry_vjp(const LatentTensor& latent,
                                                    const TensorGrid<double>& grad_opacity,
                                                    const TensorGrid<double>& grad_trace) const {
    const TensorGrid<double>& z = latent.values;
    const TensorGrid<double> attrs = kind_ == CodecKind::Identity ? z : mix_channels(z, mix_.transpose());

    TensorGrid<double> grad_attrs = TensorGrid<double>::zeros_like(z);
    for (int v = 0; v < z.views; ++v) {
        for (int i = 0; i < z.plane_size(); ++i) {
            grad_attrs.plane(v, channel::kOpacity)[i] =
                grad_opacity.plane(v, 0)[i] * smooth_clamp01_derivative(attrs.plane(v, channel::kOpacity)[i]);
            for (int c : {channel::kScaleX, channel::kScaleY, channel::kScaleZ}) {
                const double x = attrs.plane(v, c)[i];
                grad_attrs.plane(v, c)[i] =
                    grad_trace.plane(v, 0)[i] * 2.0 * smooth_positive(x) * smooth_positive_derivative(x);
            }
        }
    }
    // attrs = mix^T * latent per cell, so the pullback is mix * grad_attrs.
    return kind_ == CodecKind::Identity ? grad_attrs : mix_channels(grad_attrs, mix_);
}

}  // namespace splatedit
