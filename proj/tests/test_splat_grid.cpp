#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <splatedit/grid_io.hpp>
#include <splatedit/splat_grid.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"

using namespace splatedit;

namespace {

SplatGrid small_uniform_grid(int views = 2, int size = 4) {
    SplatGrid grid(views, size, size);
    grid.rig = make_ring_rig(views, size, size, 2.5, size);
    for (int v = 0; v < views; ++v)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                GaussianAttributes<double> g;
                g.rgb << 0.5, 0.5, 0.5;
                g.depth = 2.0;
                g.scale << 0.1, 0.1, 0.1;
                g.rotation << 1, 0, 0, 0;
                g.opacity = 0.5;
                grid.set_cell(v, y, x, g);
            }
    return grid;
}

}  // namespace

TEST_CASE("validate: uniform grid with identity quaternions is clean") {
    const SplatGrid grid = small_uniform_grid();
    CHECK(validate_grid(grid).empty());
}

TEST_CASE("validate: single out-of-range opacity is reported at its cell") {
    SplatGrid grid = small_uniform_grid();
    grid.attributes.at(1, channel::kOpacity, 2, 3) = 1.5;
    const ValidationReport report = validate_grid(grid);
    REQUIRE(report.size() == 1);
    CHECK(report[0].view == 1);
    CHECK(report[0].y == 2);
    CHECK(report[0].x == 3);
    CHECK(report[0].what.find("opacity") != std::string::npos);
}

TEST_CASE("validate: unnormalized quaternion is flagged") {
    SplatGrid grid = small_uniform_grid();
    grid.attributes.at(0, channel::kQuatX, 0, 0) = 1.0;  // (1,1,0,0), norm sqrt(2)
    const ValidationReport report = validate_grid(grid);
    REQUIRE(report.size() == 1);
    CHECK(report[0].what.find("quaternion") != std::string::npos);
}

TEST_CASE("unproject: principal-point pixel lies on the optical axis") {
    SplatGrid grid(1, 4, 4);
    grid.rig.poses.push_back(CameraPose{});  // identity rotation, center at origin
    grid.rig.intrinsics.push_back({4.0, 4.0, 1.5, 2.5, 4, 4});  // principal point at pixel (1,2) center
    grid.attributes.at(0, channel::kDepth, 2, 1) = 3.0;
    const Eigen::Vector3d x = unproject(grid, 0, 2, 1);
    CHECK(x.isApprox(Eigen::Vector3d(0, 0, 3), 1e-12));
}

TEST_CASE("unproject: zero depth lands on the camera center") {
    SplatGrid grid = small_uniform_grid();
    grid.attributes.at(0, channel::kDepth, 1, 1) = 0.0;
    const Eigen::Vector3d x = unproject(grid, 0, 1, 1);
    CHECK(x.isApprox(grid.rig.poses[0].center, 1e-12));
}

TEST_CASE("unproject: matches a brute-force pinhole matrix oracle") {
    const SplatGrid grid = testing::random_valid_grid(99, 3, 8);
    for (int v = 0; v < grid.view_count(); ++v) {
        const Intrinsics& K = grid.rig.intrinsics[v];
        Eigen::Matrix3d kmat;
        kmat << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
        const Eigen::Matrix3d kinv = kmat.inverse();
        for (int y = 0; y < grid.height(); ++y)
            for (int x = 0; x < grid.width(); ++x) {
                const double d = grid.attributes.at(v, channel::kDepth, y, x);
                const Eigen::Vector3d ray = kinv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
                const Eigen::Vector3d expected =
                    grid.rig.poses[v].rotation * (d * ray) + grid.rig.poses[v].center;
                CHECK((unproject(grid, v, y, x) - expected).norm() < 1e-9);
            }
    }
}

TEST_CASE("unproject: two depths along one pixel are collinear with the camera center") {
    SplatGrid grid = testing::random_valid_grid(4, 2, 8);
    grid.attributes.at(1, channel::kDepth, 3, 5) = 1.0;
    const Eigen::Vector3d a = unproject(grid, 1, 3, 5);
    grid.attributes.at(1, channel::kDepth, 3, 5) = 2.5;
    const Eigen::Vector3d b = unproject(grid, 1, 3, 5);
    const Eigen::Vector3d c = grid.rig.poses[1].center;
    CHECK((a - c).cross(b - c).norm() < 1e-9);
}

TEST_CASE("unproject: out-of-bounds pixel throws") {
    const SplatGrid grid = small_uniform_grid();
    CHECK_THROWS_AS(unproject(grid, 0, 4, 0), DataError);
    CHECK_THROWS_AS(unproject(grid, 5, 0, 0), DataError);
}

TEST_CASE("covariance_trace: rotation drops out") {
    GaussianAttributes<double> g;
    g.scale << 1, 2, 2;
    g.rotation << 0.5, 0.5, 0.5, 0.5;
    g.rgb.setZero();
    g.depth = 1;
    g.opacity = 1;
    CHECK(covariance_trace(g) == doctest::Approx(9.0).epsilon(1e-12));
    g.scale << 1, 1, 1;
    CHECK(covariance_trace(g) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("covariance_trace: equals the trace of the explicit Sigma matrix") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        GaussianAttributes<double> g;
        g.scale << rng.uniform(0.01, 2.0), rng.uniform(0.01, 2.0), rng.uniform(0.01, 2.0);
        Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        g.rotation = q / q.norm();
        g.rgb.setZero();
        g.depth = 1;
        g.opacity = 1;
        const Eigen::Matrix3d sigma = covariance_matrix(g);
        CHECK(std::abs(covariance_trace(g) - sigma.trace()) < 1e-9);
    }
}

TEST_CASE("serialization: save/load reproduces channels bit-exactly") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "splatedit_test_grid.splatgrid";

    // canonicalize through one save/load so every value is float32-representable
    const SplatGrid original = testing::random_valid_grid(11, 3, 8);
    save_grid(path.string(), original);
    const SplatGrid once = load_grid(path.string());
    save_grid(path.string(), once);
    const SplatGrid twice = load_grid(path.string());
    CHECK(bit_equal(once.attributes, twice.attributes));
    CHECK(once.rig.view_count() == original.rig.view_count());
    for (int v = 0; v < once.rig.view_count(); ++v) {
        CHECK(once.rig.poses[v].rotation == twice.rig.poses[v].rotation);
        CHECK(once.rig.poses[v].center == twice.rig.poses[v].center);
    }
    fs::remove(path);
    fs::remove(path.string() + ".cameras");
}

TEST_CASE("serialization: load rejects corrupted magic") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "splatedit_bad.splatgrid";
    std::ofstream os(path, std::ios::binary);
    os << "NOTAGRID and then some bytes";
    os.close();
    CHECK_THROWS_AS(load_grid(path.string()), DataError);
    fs::remove(path);
}

TEST_CASE("ply export writes one record per Gaussian") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "splatedit_test.ply";
    const SplatGrid grid = small_uniform_grid(2, 4);
    export_ply(path.string(), grid);
    std::ifstream is(path, std::ios::binary);
    std::string header;
    std::string line;
    while (std::getline(is, line)) {
        header += line + "\n";
        if (line == "end_header") break;
    }
    CHECK(header.find("element vertex 32") != std::string::npos);
    const auto header_size = static_cast<std::size_t>(is.tellg());
    is.seekg(0, std::ios::end);
    CHECK(static_cast<std::size_t>(is.tellg()) - header_size == 32u * 17u * sizeof(float));
    fs::remove(path);
}

TEST_CASE("demo asset is valid and pixel-aligned") {
    const SplatGrid demo = make_demo_asset(4, 16);
    CHECK(validate_grid(demo).empty());
    // hit cells sit on the unit sphere
    int hits = 0;
    for (int v = 0; v < demo.view_count(); ++v)
        for (int y = 0; y < demo.height(); ++y)
            for (int x = 0; x < demo.width(); ++x) {
                if (demo.attributes.at(v, channel::kOpacity, y, x) <= 0.0) continue;
                ++hits;
                CHECK(unproject(demo, v, y, x).norm() == doctest::Approx(1.0).epsilon(1e-9));
            }
    CHECK(hits > 50);
}
