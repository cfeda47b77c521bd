#pragma once

#include <Eigen/Core>

#include "splatedit/errors.hpp"
#include "splatedit/rng.hpp"

namespace splatedit {

/// Dense V x C x H x W tensor over multi-view planes.
///
/// Storage is a single (H*W) x (V*C) Eigen array: one column per
/// (view, channel) plane, entries within a plane ordered row-major
/// (index y*W + x). Elementwise work across the whole tensor is a single
/// array expression; per-plane work is a contiguous column.
template <class Scalar>
struct TensorGrid {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Plane = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    int views = 0;
    int channels = 0;
    int rows = 0;  // H
    int cols = 0;  // W

    Array data;

    TensorGrid() = default;
    TensorGrid(int v, int c, int h, int w)
        : views(v), channels(c), rows(h), cols(w), data(Array::Zero(h * w, v * c)) {}

    int plane_size() const { return rows * cols; }
    int plane_count() const { return views * channels; }
    std::int64_t size() const { return static_cast<std::int64_t>(plane_size()) * plane_count(); }

    bool same_shape(const TensorGrid& o) const {
        return views == o.views && channels == o.channels && rows == o.rows && cols == o.cols;
    }

    auto plane(int v, int c) { return data.col(v * channels + c); }
    auto plane(int v, int c) const { return data.col(v * channels + c); }

    Scalar& at(int v, int c, int y, int x) { return data(y * cols + x, v * channels + c); }
    Scalar at(int v, int c, int y, int x) const { return data(y * cols + x, v * channels + c); }

    bool all_finite() const { return data.isFinite().all(); }

    void require_same_shape(const TensorGrid& o, const char* what) const {
        if (!same_shape(o)) throw DataError(std::string(what) + ": tensor shape mismatch");
    }

    static TensorGrid zeros_like(const TensorGrid& o) {
        return TensorGrid(o.views, o.channels, o.rows, o.cols);
    }

    template <class S2>
    TensorGrid<S2> cast() const {
        TensorGrid<S2> out(views, channels, rows, cols);
        out.data = data.template cast<S2>();
        return out;
    }
};

template <class Scalar>
TensorGrid<Scalar> random_normal_like(const TensorGrid<Scalar>& shape, Rng& rng) {
    TensorGrid<Scalar> out = TensorGrid<Scalar>::zeros_like(shape);
    for (int p = 0; p < out.plane_count(); ++p)
        for (int i = 0; i < out.plane_size(); ++i)
            out.data(i, p) = static_cast<Scalar>(rng.normal());
    return out;
}

template <class Scalar>
Scalar linf_diff(const TensorGrid<Scalar>& a, const TensorGrid<Scalar>& b) {
    a.require_same_shape(b, "linf_diff");
    if (a.size() == 0) return Scalar(0);
    return (a.data - b.data).abs().maxCoeff();
}

template <class Scalar>
bool bit_equal(const TensorGrid<Scalar>& a, const TensorGrid<Scalar>& b) {
    return a.same_shape(b) && (a.data == b.data).all();
}

}  // namespace splatedit
