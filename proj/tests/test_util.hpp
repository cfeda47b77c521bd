#pragma once

#include <splatedit/demo_asset.hpp>
#include <splatedit/rng.hpp>
#include <splatedit/splat_grid.hpp>
#include <splatedit/tensor.hpp>

namespace splatedit::testing {

/// Valid grid with interior-valued attributes (away from clamp boundaries)
/// over a ring rig.
inline SplatGrid random_valid_grid(std::uint64_t seed, int views = 4, int size = 16) {
    Rng rng(seed);
    SplatGrid grid(views, size, size);
    grid.rig = make_ring_rig(views, size, size, 2.5, static_cast<double>(size));
    for (int v = 0; v < views; ++v)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                GaussianAttributes<double> g;
                g.rgb << rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9);
                g.depth = rng.uniform(1.5, 3.5);
                g.scale << rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3);
                Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
                while (q.norm() < 1e-6) q << rng.normal(), rng.normal(), rng.normal(), rng.normal();
                g.rotation = q / q.norm();
                g.opacity = rng.uniform(0.2, 0.8);
                grid.set_cell(v, y, x, g);
            }
    return grid;
}

inline TensorGrid<double> random_latent(std::uint64_t seed, int views = 4, int channels = 12,
                                        int size = 16) {
    Rng rng(seed);
    TensorGrid<double> z(views, channels, size, size);
    for (int p = 0; p < z.plane_count(); ++p)
        for (int i = 0; i < z.plane_size(); ++i) z.data(i, p) = rng.normal();
    return z;
}

}  // namespace splatedit::testing
