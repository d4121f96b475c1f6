#include <doctest.h>

#include <cmath>
#include <limits>

#include "corseg/fast_marching.hpp"

using namespace corseg;

namespace {

VoxelGrid uniform_speed(GridDims d, std::array<double, 3> sp, double value) {
    VoxelGrid g(d, sp, {0, 0, 0}, GridKind::weight, value);
    return g;
}

} // namespace

TEST_SUITE_BEGIN("fast_marching");

TEST_CASE("compute_ml is the masked median") {
    GridDims d{7, 1, 1};
    VoxelGrid img(d, {1, 1, 1}, {0, 0, 0}, GridKind::intensity);
    VoxelGrid w(d, {1, 1, 1}, {0, 0, 0}, GridKind::weight);
    double hus[7] = {300, 200, 500, 50, 900, 400, 1400};
    double ws[7] = {1, 1, 1, 1, 0, 1, 1};
    for (int i = 0; i < 7; ++i) {
        img(i, 0, 0) = hus[i];
        w(i, 0, 0) = ws[i];
    }
    ThresholdConfig cfg;
    // candidates: 300 200 500 400 1400 (50 below floor, 900 masked) -> median 400
    CHECK(compute_ml(img, w, cfg) == doctest::Approx(400.0));
    // even count averages the middle pair: drop 1400 via the mask
    w(6, 0, 0) = 0.0;
    CHECK(compute_ml(img, w, cfg) == doctest::Approx(350.0));
    VoxelGrid nw = VoxelGrid::like(w, GridKind::weight, 0.0);
    CHECK_THROWS_AS(compute_ml(img, nw, cfg), numeric_error);
}

TEST_CASE("lumen weight is a rescaled bell in [0.1, 1]") {
    GridDims d{3, 1, 1};
    VoxelGrid img(d, {1, 1, 1}, {0, 0, 0}, GridKind::intensity);
    img(0, 0, 0) = 350.0;
    img(1, 0, 0) = -1000.0;
    img(2, 0, 0) = 350.0 + 270.0;  // one half-width out
    ThresholdConfig cfg;
    VoxelGrid wl = lumen_weight_map(img, 350.0, cfg);
    CHECK(wl(0, 0, 0) == doctest::Approx(1.0));
    CHECK(wl(1, 0, 0) == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(wl(2, 0, 0) == doctest::Approx(0.9 * 0.5 + 0.1));
}

TEST_CASE("speed map multiplies and floors") {
    GridDims d{2, 1, 1};
    VoxelGrid wv(d, {1, 1, 1}, {0, 0, 0}, GridKind::weight);
    VoxelGrid wl(d, {1, 1, 1}, {0, 0, 0}, GridKind::weight);
    wv(0, 0, 0) = 0.5;
    wl(0, 0, 0) = 0.4;
    wv(1, 0, 0) = 0.0;
    wl(1, 0, 0) = 0.9;
    VoxelGrid s = speed_map(wv, wl);
    CHECK(s(0, 0, 0) == doctest::Approx(0.2));
    CHECK(s(1, 0, 0) == doctest::Approx(1e-3));
}

TEST_CASE("arrival times approximate euclidean distance at unit speed") {
    GridDims d{25, 25, 25};
    VoxelGrid speed = uniform_speed(d, {1, 1, 1}, 1.0);
    WorldPoint seed = speed.voxel_to_world(12, 12, 12);
    ArrivalTimeField T = fast_march(speed, {seed});
    CHECK(T.times(12, 12, 12) == 0.0);

    double worst = 0.0;
    for (int k = 0; k < 25; ++k)
        for (int j = 0; j < 25; ++j)
            for (int i = 0; i < 25; ++i) {
                double r = std::sqrt(double((i - 12) * (i - 12) + (j - 12) * (j - 12) +
                                            (k - 12) * (k - 12)));
                if (r < 6.0 || r > 11.5) continue;  // near field is seeded, far field clipped
                worst = std::max(worst, std::abs(T.times(i, j, k) - r) / r);
            }
    CHECK(worst < 0.03);
}

TEST_CASE("halving the speed doubles every arrival time") {
    GridDims d{19, 17, 15};
    VoxelGrid s1 = uniform_speed(d, {0.5, 0.5, 0.5}, 0.8);
    VoxelGrid s2 = uniform_speed(d, {0.5, 0.5, 0.5}, 0.4);
    WorldPoint seed = s1.voxel_to_world(3, 4, 5);
    ArrivalTimeField t1 = fast_march(s1, {seed});
    ArrivalTimeField t2 = fast_march(s2, {seed});
    for (std::int64_t u = 0; u < t1.times.size(); u += 7) {
        double a = t1.times.values()[u], b = t2.times.values()[u];
        CHECK(std::abs(b - 2.0 * a) <= 1e-9 * std::max(1.0, std::abs(b)));
    }
}

TEST_CASE("acceptance order is monotone in T") {
    VoxelGrid speed = uniform_speed({15, 15, 15}, {1, 1, 1}, 1.0);
    std::vector<double> trace;
    fast_march(speed, {speed.voxel_to_world(7, 7, 7)}, &trace);
    CHECK(trace.size() == 15 * 15 * 15);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1]);
}

TEST_CASE("anisotropic spacing is respected") {
    VoxelGrid speed = uniform_speed({31, 9, 9}, {0.25, 1.0, 1.0}, 1.0);
    ArrivalTimeField T = fast_march(speed, {speed.voxel_to_world(15, 4, 4)});
    // 10 voxels along x is 2.5 mm; 3 voxels along y is 3 mm
    CHECK(T.times(25, 4, 4) == doctest::Approx(2.5).epsilon(0.05));
    CHECK(T.times(15, 7, 4) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("backtrace recovers a straight centerline") {
    VoxelGrid speed = uniform_speed({11, 11, 41}, {0.5, 0.5, 0.5}, 1.0);
    WorldPoint a = speed.voxel_to_world(5, 5, 3);
    WorldPoint b = speed.voxel_to_world(5, 5, 37);
    ArrivalTimeField T = fast_march(speed, {a});
    Centerline line = backtrace_path(T, b);
    CHECK(line.points.size() >= 10);
    // ordered seed -> end
    CHECK(line.points.front().z < line.points.back().z);
    CHECK(norm(line.points.front() - a) < 1.0);
    CHECK(norm(line.points.back() - b) < 0.3);
    for (const WorldPoint& p : line.points) {
        CHECK(std::abs(p.x - a.x) < 0.5);
        CHECK(std::abs(p.y - a.y) < 0.5);
    }
}

TEST_CASE("seeds outside the volume are rejected") {
    VoxelGrid speed = uniform_speed({9, 9, 9}, {1, 1, 1}, 1.0);
    CHECK_THROWS_AS(fast_march(speed, {WorldPoint{50, 0, 0}}), bounds_error);
    CHECK_THROWS_AS(fast_march(speed, {}), input_error);
}

TEST_CASE("backtrace stalls raise numeric_error") {
    // arrival field with a flat plateau the gradient cannot descend
    VoxelGrid speed = uniform_speed({9, 9, 9}, {1, 1, 1}, 1.0);
    ArrivalTimeField T = fast_march(speed, {speed.voxel_to_world(4, 4, 4)});
    for (double& v : T.times.values()) v = 1.0;  // destroy the gradient
    T.times(4, 4, 4) = 1.0;
    CHECK_THROWS_AS(backtrace_path(T, T.times.voxel_to_world(8, 8, 8)), numeric_error);
}

TEST_CASE("extract_centerline runs the full stage on a synthetic tube") {
    GridDims d{21, 21, 61};
    VoxelGrid img(d, {0.4, 0.4, 0.4}, {-4.0, -4.0, 0.0}, GridKind::intensity);
    VoxelGrid wv = VoxelGrid::like(img, GridKind::weight);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                WorldPoint p = img.voxel_to_world(i, j, k);
                double r = std::hypot(p.x, p.y);
                img(i, j, k) = r <= 1.6 ? 350.0 : 0.0;
                wv(i, j, k) = r <= 2.0 ? 1.0 : 1e-4;
            }
    SeedPair seeds{img.voxel_to_world(10, 10, 4), img.voxel_to_world(10, 10, 56)};
    ThresholdConfig cfg;
    Centerline line = extract_centerline(img, wv, seeds, cfg);
    CHECK(line.total_length() > 18.0);
    double worst = 0.0;
    for (const WorldPoint& p : line.points) worst = std::max(worst, std::hypot(p.x, p.y));
    CHECK(worst < 0.4);  // stays within a voxel of the true axis
}

TEST_SUITE_END();
