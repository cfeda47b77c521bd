#include "splatedit/demo_asset.hpp"

#include <cmath>

namespace splatedit {

SplatGrid make_demo_asset(int views, int size) {
    if (views < 1 || size < 4) throw DataError("make_demo_asset: need views >= 1 and size >= 4");
    const double cam_radius = 2.5;
    const double sphere_radius = 1.0;
    const double focal = static_cast<double>(size);

    SplatGrid grid(views, size, size);
    grid.rig = make_ring_rig(views, size, size, cam_radius, focal);

    for (int v = 0; v < views; ++v) {
        const CameraPose& pose = grid.rig.poses[v];
        const Intrinsics& intr = grid.rig.intrinsics[v];
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                // camera-frame ray with unit z, so the ray parameter is z-depth
                const Eigen::Vector3d dir_cam((x + 0.5 - intr.cx) / intr.fx, (y + 0.5 - intr.cy) / intr.fy,
                                              1.0);
                const Eigen::Vector3d dir_world = pose.rotation * dir_cam;
                const double a = dir_world.squaredNorm();
                const double b = 2.0 * dir_world.dot(pose.center);
                const double c = pose.center.squaredNorm() - sphere_radius * sphere_radius;
                const double disc = b * b - 4.0 * a * c;

                GaussianAttributes<double> g;
                g.rotation << 1, 0, 0, 0;
                g.scale.setConstant(0.10);
                if (disc >= 0.0) {
                    const double depth = (-b - std::sqrt(disc)) / (2.0 * a);
                    if (depth > 0.0) {
                        const Eigen::Vector3d hit = pose.center + depth * dir_world;
                        g.depth = depth;
                        g.opacity = 0.95;
                        g.rgb << (hit.x() > 0 ? 0.85 : 0.15), (hit.y() > 0 ? 0.85 : 0.15),
                            (hit.z() > 0 ? 0.85 : 0.15);
                        grid.set_cell(v, y, x, g);
                        continue;
                    }
                }
                // miss: transparent filler at the camera ring distance
                g.depth = cam_radius;
                g.opacity = 0.0;
                g.rgb.setConstant(0.0);
                g.scale.setConstant(0.05);
                grid.set_cell(v, y, x, g);
            }
        }
    }
    return grid;
}

}  // namespace splatedit
