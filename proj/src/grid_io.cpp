#include "splatedit/grid_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace splatedit {

namespace {

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw DataError(std::string("truncated file while reading ") + what);
}

void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { write_bytes(os, &v, 8); }

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v;
    read_bytes(is, &v, 4, what);
    return v;
}

std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v;
    read_bytes(is, &v, 8, what);
    return v;
}

void expect_magic(std::istream& is, const char magic[8], const std::string& path) {
    char buf[8];
    read_bytes(is, buf, 8, "magic");
    if (std::memcmp(buf, magic, 8) != 0)
        throw DataError(path + ": bad magic, expected " + std::string(magic, 8));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    return is;
}

void write_plane_f32(std::ostream& os, const TensorGrid<double>& t, int v, int c) {
    std::vector<float> buf(t.plane_size());
    for (int i = 0; i < t.plane_size(); ++i) buf[i] = static_cast<float>(t.plane(v, c)[i]);
    write_bytes(os, buf.data(), buf.size() * sizeof(float));
}

void read_plane_f32(std::istream& is, TensorGrid<double>& t, int v, int c) {
    std::vector<float> buf(t.plane_size());
    read_bytes(is, buf.data(), buf.size() * sizeof(float), "channel plane");
    for (int i = 0; i < t.plane_size(); ++i) t.plane(v, c)[i] = buf[i];
}

void write_tensor_f64(std::ostream& os, const TensorGrid<double>& t) {
    for (int v = 0; v < t.views; ++v)
        for (int c = 0; c < t.channels; ++c) {
            const auto col = t.plane(v, c);
            write_bytes(os, col.data(), static_cast<std::size_t>(t.plane_size()) * sizeof(double));
        }
}

void read_tensor_f64(std::istream& is, TensorGrid<double>& t) {
    std::vector<double> buf(t.plane_size());
    for (int v = 0; v < t.views; ++v)
        for (int c = 0; c < t.channels; ++c) {
            read_bytes(is, buf.data(), buf.size() * sizeof(double), "tensor plane");
            for (int i = 0; i < t.plane_size(); ++i) t.plane(v, c)[i] = buf[i];
        }
}

void save_rig_sidecar(const std::string& path, const CameraRig& rig) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.precision(17);
    os << "splatgrid-cameras 1\n";
    os << "views " << rig.view_count() << "\n";
    for (int v = 0; v < rig.view_count(); ++v) {
        const Intrinsics& K = rig.intrinsics[v];
        const CameraPose& P = rig.poses[v];
        os << "view " << v << "\n";
        os << "intrinsics " << K.fx << " " << K.fy << " " << K.cx << " " << K.cy << " " << K.width
           << " " << K.height << "\n";
        os << "rotation";
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) os << " " << P.rotation(i, j);
        os << "\ncenter " << P.center[0] << " " << P.center[1] << " " << P.center[2] << "\n";
    }
}

CameraRig load_rig_sidecar(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open camera sidecar: " + path);
    std::string tag;
    int version = 0;
    is >> tag >> version;
    if (tag != "splatgrid-cameras" || version != 1)
        throw DataError(path + ": not a camera sidecar");
    int views = 0;
    is >> tag >> views;
    if (tag != "views" || views < 1) throw DataError(path + ": bad view count");
    CameraRig rig;
    for (int v = 0; v < views; ++v) {
        int idx = -1;
        Intrinsics K;
        CameraPose P;
        is >> tag >> idx;
        if (tag != "view" || idx != v) throw DataError(path + ": bad view record");
        is >> tag >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height;
        if (tag != "intrinsics") throw DataError(path + ": expected intrinsics");
        is >> tag;
        if (tag != "rotation") throw DataError(path + ": expected rotation");
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) is >> P.rotation(i, j);
        is >> tag >> P.center[0] >> P.center[1] >> P.center[2];
        if (tag != "center" || !is) throw DataError(path + ": expected center");
        rig.intrinsics.push_back(K);
        rig.poses.push_back(P);
    }
    return rig;
}

constexpr char kGridMagic[8] = {'S', 'P', 'L', 'A', 'T', 'G', 'R', 'D'};
constexpr char kTrajMagic[8] = {'N', 'O', 'I', 'S', 'T', 'R', 'A', 'J'};
constexpr char kAttnMagic[8] = {'A', 'T', 'T', 'N', 'R', 'E', 'C', 'D'};

}  // namespace

void save_grid(const std::string& path, const SplatGrid& grid) {
    auto os = open_out(path);
    write_bytes(os, kGridMagic, 8);
    write_u32(os, 1);
    write_u32(os, static_cast<std::uint32_t>(grid.view_count()));
    write_u32(os, static_cast<std::uint32_t>(grid.height()));
    write_u32(os, static_cast<std::uint32_t>(grid.width()));
    for (int v = 0; v < grid.view_count(); ++v)
        for (int c = 0; c < channel::kCount; ++c) write_plane_f32(os, grid.attributes, v, c);
    if (!os) throw DataError("write failed: " + path);
    save_rig_sidecar(path + ".cameras", grid.rig);
}

SplatGrid load_grid(const std::string& path) {
    auto is = open_in(path);
    expect_magic(is, kGridMagic, path);
    const std::uint32_t version = read_u32(is, "version");
    if (version != 1) throw DataError(path + ": unsupported version");
    const int V = static_cast<int>(read_u32(is, "views"));
    const int H = static_cast<int>(read_u32(is, "height"));
    const int W = static_cast<int>(read_u32(is, "width"));
    if (V < 1 || H < 1 || W < 1 || V > 1024 || H > 16384 || W > 16384)
        throw DataError(path + ": implausible dimensions");
    SplatGrid grid(V, H, W);
    for (int v = 0; v < V; ++v)
        for (int c = 0; c < channel::kCount; ++c) read_plane_f32(is, grid.attributes, v, c);
    grid.rig = load_rig_sidecar(path + ".cameras");
    if (grid.rig.view_count() != V) throw DataError(path + ": camera sidecar view count mismatch");

    int renormalized = 0;
    for (int v = 0; v < V; ++v)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                auto g = grid.cell(v, y, x);
                const double n = g.rotation.norm();
                if (std::abs(n - 1.0) > 1e-3) {
                    g.rotation = n > 0 ? Eigen::Vector4d(g.rotation / n)
                                       : Eigen::Vector4d(1, 0, 0, 0);
                    grid.set_cell(v, y, x, g);
                    ++renormalized;
                }
            }
    if (renormalized > 0)
        std::cerr << "warning: " << path << ": renormalized " << renormalized
                  << " quaternion(s) deviating by more than 1e-3\n";
    return grid;
}

void export_ply(const std::string& path, const SplatGrid& grid) {
    auto os = open_out(path);
    const int count = grid.view_count() * grid.height() * grid.width();
    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << count << "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                             "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                             "rot_2", "rot_3"})
        os << "property float " << name << "\n";
    os << "end_header\n";

    // Splat-viewer conventions: SH DC coefficients, logit opacity, log scale.
    const double kShC0 = 0.28209479177387814;
    auto logit = [](double p) {
        const double c = std::min(1.0 - 1e-6, std::max(1e-6, p));
        return std::log(c / (1.0 - c));
    };
    for (int v = 0; v < grid.view_count(); ++v)
        for (int y = 0; y < grid.height(); ++y)
            for (int x = 0; x < grid.width(); ++x) {
                const auto g = grid.cell(v, y, x);
                const Eigen::Vector3d p = unproject(grid, v, y, x);
                float rec[17];
                rec[0] = static_cast<float>(p[0]);
                rec[1] = static_cast<float>(p[1]);
                rec[2] = static_cast<float>(p[2]);
                rec[3] = rec[4] = rec[5] = 0.0f;
                for (int k = 0; k < 3; ++k) rec[6 + k] = static_cast<float>((g.rgb[k] - 0.5) / kShC0);
                rec[9] = static_cast<float>(logit(g.opacity));
                for (int k = 0; k < 3; ++k)
                    rec[10 + k] = static_cast<float>(std::log(std::max(1e-12, static_cast<double>(g.scale[k]))));
                for (int k = 0; k < 4; ++k) rec[13 + k] = static_cast<float>(g.rotation[k]);
                write_bytes(os, rec, sizeof(rec));
            }
    if (!os) throw DataError("write failed: " + path);
}

void save_trajectory(const std::string& path, const NoiseTrajectory& traj) {
    if (traj.timesteps < 1 || static_cast<int>(traj.latents.size()) != traj.timesteps + 1 ||
        static_cast<int>(traj.noise_maps.size()) != traj.timesteps + 1)
        throw DataError("save_trajectory: inconsistent trajectory");
    auto os = open_out(path);
    write_bytes(os, kTrajMagic, 8);
    write_u32(os, 1);
    const auto& z1 = traj.latents[1];
    write_u32(os, static_cast<std::uint32_t>(traj.timesteps));
    write_u32(os, static_cast<std::uint32_t>(z1.views));
    write_u32(os, static_cast<std::uint32_t>(z1.channels));
    write_u32(os, static_cast<std::uint32_t>(z1.rows));
    write_u32(os, static_cast<std::uint32_t>(z1.cols));
    write_u64(os, traj.seed);
    for (int t = 1; t <= traj.timesteps; ++t) write_tensor_f64(os, traj.latents[t]);
    for (int t = 1; t <= traj.timesteps; ++t) write_tensor_f64(os, traj.noise_maps[t]);
    if (!os) throw DataError("write failed: " + path);
}

NoiseTrajectory load_trajectory(const std::string& path) {
    auto is = open_in(path);
    expect_magic(is, kTrajMagic, path);
    if (read_u32(is, "version") != 1) throw DataError(path + ": unsupported version");
    NoiseTrajectory traj;
    traj.timesteps = static_cast<int>(read_u32(is, "timesteps"));
    const int V = static_cast<int>(read_u32(is, "views"));
    const int C = static_cast<int>(read_u32(is, "channels"));
    const int H = static_cast<int>(read_u32(is, "rows"));
    const int W = static_cast<int>(read_u32(is, "cols"));
    if (traj.timesteps < 1 || traj.timesteps > 100000) throw DataError(path + ": implausible timesteps");
    traj.seed = read_u64(is, "seed");
    traj.latents.assign(traj.timesteps + 1, TensorGrid<double>(V, C, H, W));
    traj.noise_maps.assign(traj.timesteps + 1, TensorGrid<double>(V, C, H, W));
    for (int t = 1; t <= traj.timesteps; ++t) read_tensor_f64(is, traj.latents[t]);
    for (int t = 1; t <= traj.timesteps; ++t) read_tensor_f64(is, traj.noise_maps[t]);
    return traj;
}

void save_attention_record(const std::string& path, const AttentionRecord& rec) {
    auto os = open_out(path);
    write_bytes(os, kAttnMagic, 8);
    write_u32(os, 1);
    write_u32(os, static_cast<std::uint32_t>(rec.tokens.size()));
    for (const auto& tok : rec.tokens) {
        write_u32(os, static_cast<std::uint32_t>(tok.size()));
        write_bytes(os, tok.data(), tok.size());
    }
    const auto write_maps = [&os](const std::map<AttentionRecord::Key, Eigen::MatrixXd>& maps,
                                  std::uint32_t kind) {
        write_u32(os, static_cast<std::uint32_t>(maps.size()));
        for (const auto& [key, m] : maps) {
            write_u32(os, kind);
            write_u32(os, static_cast<std::uint32_t>(key.first));
            write_u32(os, static_cast<std::uint32_t>(key.second));
            write_u32(os, static_cast<std::uint32_t>(m.rows()));
            write_u32(os, static_cast<std::uint32_t>(m.cols()));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    const double v = m(i, j);
                    write_bytes(os, &v, 8);
                }
        }
    };
    write_maps(rec.cross, 0);
    write_maps(rec.self, 1);
    if (!os) throw DataError("write failed: " + path);
}

AttentionRecord load_attention_record(const std::string& path) {
    auto is = open_in(path);
    expect_magic(is, kAttnMagic, path);
    if (read_u32(is, "version") != 1) throw DataError(path + ": unsupported version");
    AttentionRecord rec;
    const std::uint32_t n_tokens = read_u32(is, "token count");
    for (std::uint32_t i = 0; i < n_tokens; ++i) {
        const std::uint32_t len = read_u32(is, "token length");
        std::string tok(len, '\0');
        read_bytes(is, tok.data(), len, "token");
        rec.tokens.push_back(std::move(tok));
    }
    for (int group = 0; group < 2; ++group) {
        const std::uint32_t n = read_u32(is, "map count");
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::uint32_t kind = read_u32(is, "kind");
            const int layer = static_cast<int>(read_u32(is, "layer"));
            const int t = static_cast<int>(read_u32(is, "timestep"));
            const int rows = static_cast<int>(read_u32(is, "rows"));
            const int cols = static_cast<int>(read_u32(is, "cols"));
            if (rows < 0 || cols < 0 || rows > 1 << 20 || cols > 1 << 20)
                throw DataError(path + ": implausible map dimensions");
            Eigen::MatrixXd m(rows, cols);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) read_bytes(is, &m(r, c), 8, "map entry");
            auto& target = kind == 0 ? rec.cross : rec.self;
            target[{layer, t}] = std::move(m);
        }
    }
    return rec;
}

}  // namespace splatedit
