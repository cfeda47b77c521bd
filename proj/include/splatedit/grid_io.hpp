#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "splatedit/splat_grid.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

/// Container file: "SPLATGRD" magic, version, V/H/W, then per view twelve
/// row-major float32 channel planes in the normative channel order.
/// Little-endian. Camera rig goes to a plain-text sidecar at
/// `path + ".cameras"`.
void save_grid(const std::string& path, const SplatGrid& grid);

/// Loads grid + sidecar. Quaternions with norm deviating from 1 by more than
/// 1e-3 are renormalized with a warning on stderr; smaller deviations are
/// kept bit-exact as stored.
SplatGrid load_grid(const std::string& path);

/// All Gaussians in the splat-viewer PLY layout (x/y/z, normals, f_dc,
/// logit opacity, log scales, quaternion).
void export_ply(const std::string& path, const SplatGrid& grid);

/// Per-timestep latents and recovered noise maps; float64 so that a
/// persisted trajectory replays bit-for-bit.
struct NoiseTrajectory {
    int timesteps = 0;
    std::uint64_t seed = 0;
    std::vector<TensorGrid<double>> latents;     // z_1..z_T at [1..T]; [0] unused
    std::vector<TensorGrid<double>> noise_maps;  // eta_1..eta_T at [1..T]; [0] unused
};

/// "NOISTRAJ" container.
void save_trajectory(const std::string& path, const NoiseTrajectory& traj);
NoiseTrajectory load_trajectory(const std::string& path);

enum class AttentionKind { Cross = 0, Self = 1 };

/// Cross/self maps per (layer, timestep), plus the edit-prompt token strings
/// they were recorded against.
struct AttentionRecord {
    using Key = std::pair<int, int>;  // (layer, timestep)
    std::map<Key, Eigen::MatrixXd> cross;
    std::map<Key, Eigen::MatrixXd> self;
    std::vector<std::string> tokens;
};

/// "ATTNRECD" container.
void save_attention_record(const std::string& path, const AttentionRecord& rec);
AttentionRecord load_attention_record(const std::string& path);

}  // namespace splatedit
