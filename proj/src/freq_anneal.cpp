#include "splatedit/freq_anneal.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

#include "splatedit/errors.hpp"

namespace splatedit {

Eigen::ArrayXXd modulation_mask(int h, int w, int t, const AnnealParams& params) {
    if (h < 1 || w < 1) throw DataError("modulation_mask: dims must be >= 1");
    Eigen::ArrayXXd beta(h, w);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int iy = 0; iy < h; ++iy) {
        const int fy = iy <= h / 2 ? iy : iy - h;
        const double ry = h > 1 ? std::abs(fy) / (h / 2.0) : 0.0;
        for (int ix = 0; ix < w; ++ix) {
            const int fx = ix <= w / 2 ? ix : ix - w;
            const double rx = w > 1 ? std::abs(fx) / (w / 2.0) : 0.0;
            const double r = std::sqrt(rx * rx + ry * ry) * inv_sqrt2;
            double b = 1.0;
            if (t > params.tau && r < params.radius_threshold)
                b = params.scale_low;
            else if (t <= params.tau && r >= params.radius_threshold)
                b = params.scale_high;
            beta(iy, ix) = b;
        }
    }
    return beta;
}

namespace {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

ComplexMatrix fft2(const Eigen::MatrixXd& plane, bool inverse) {
    Eigen::FFT<double> fft;
    const int h = static_cast<int>(plane.rows()), w = static_cast<int>(plane.cols());
    ComplexMatrix tmp(h, w);
    std::vector<Complex> in(w), out(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) in[x] = Complex(plane(y, x), 0.0);
        inverse ? fft.inv(out, in) : fft.fwd(out, in);
        for (int x = 0; x < w; ++x) tmp(y, x) = out[x];
    }
    ComplexMatrix res(h, w);
    std::vector<Complex> cin(h), cout(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) cin[y] = tmp(y, x);
        inverse ? fft.inv(cout, cin) : fft.fwd(cout, cin);
        for (int y = 0; y < h; ++y) res(y, x) = cout[y];
    }
    return res;
}

ComplexMatrix fft2_complex(const ComplexMatrix& plane, bool inverse) {
    Eigen::FFT<double> fft;
    const int h = static_cast<int>(plane.rows()), w = static_cast<int>(plane.cols());
    ComplexMatrix tmp(h, w);
    std::vector<Complex> in(w), out(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) in[x] = plane(y, x);
        inverse ? fft.inv(out, in) : fft.fwd(out, in);
        for (int x = 0; x < w; ++x) tmp(y, x) = out[x];
    }
    ComplexMatrix res(h, w);
    std::vector<Complex> cin(h), cout(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) cin[y] = tmp(y, x);
        inverse ? fft.inv(cout, cin) : fft.fwd(cout, cin);
        for (int y = 0; y < h; ++y) res(y, x) = cout[y];
    }
    return res;
}

}  // namespace

TensorGrid<double> modulate_skip(const TensorGrid<double>& features, int t, const AnnealParams& params) {
    const Eigen::ArrayXXd beta = modulation_mask(features.rows, features.cols, t, params);
    TensorGrid<double> out = TensorGrid<double>::zeros_like(features);
    const double magnitude = std::max(1.0, features.data.abs().maxCoeff());
    for (int v = 0; v < features.views; ++v)
        for (int c = 0; c < features.channels; ++c) {
            Eigen::MatrixXd plane(features.rows, features.cols);
            for (int y = 0; y < features.rows; ++y)
                for (int x = 0; x < features.cols; ++x) plane(y, x) = features.at(v, c, y, x);
            ComplexMatrix spectrum = fft2(plane, false);
            spectrum.array() *= beta.cast<Complex>();
            const ComplexMatrix back = fft2_complex(spectrum, true);
            for (int y = 0; y < features.rows; ++y)
                for (int x = 0; x < features.cols; ++x) {
                    if (std::abs(back(y, x).imag()) > 1e-6 * magnitude)
                        throw NumericalError("modulate_skip: imaginary residue above tolerance");
                    out.at(v, c, y, x) = back(y, x).real();
                }
        }
    return out;
}

}  // namespace splatedit
