#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "corseg/centerline.hpp"

using namespace corseg;

namespace {

Centerline straight_line(int n, double step) {
    Centerline line;
    for (int i = 0; i < n; ++i) line.points.push_back({0.0, 0.0, i * step});
    line.rebuild_arclength();
    return line;
}

// Exact point-to-segment distance, for cross-checking the library version.
double point_segment_dist(const WorldPoint& p, const WorldPoint& a, const WorldPoint& b) {
    WorldPoint ab = b - a;
    double denom = dot(ab, ab);
    double t = denom > 0 ? dot(p - a, ab) / denom : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    WorldPoint q = a + t * ab;
    return norm(p - q);
}

} // namespace

TEST_SUITE_BEGIN("centerline");

TEST_CASE("arclength accumulates segment lengths") {
    Centerline line = straight_line(11, 0.5);
    CHECK(line.total_length() == doctest::Approx(5.0));
    CHECK(line.arclength.front() == 0.0);
    CHECK(line.arclength[4] == doctest::Approx(2.0));
    CHECK_NOTHROW(line.validate());
}

TEST_CASE("point_at and tangent_at interpolate along the path") {
    Centerline line = straight_line(11, 0.5);
    WorldPoint p = line.point_at(2.25);
    CHECK(p.z == doctest::Approx(2.25));
    WorldPoint t = line.tangent_at(2.25);
    CHECK(t.z == doctest::Approx(1.0));
    // clamped at the ends
    CHECK(line.point_at(-1.0).z == doctest::Approx(0.0));
    CHECK(line.point_at(99.0).z == doctest::Approx(5.0));

    // right-angle bend: tangent flips from +z to +x across the corner
    Centerline bend;
    bend.points = {{0, 0, 0}, {0, 0, 1}, {1, 0, 1}};
    bend.rebuild_arclength();
    CHECK(bend.tangent_at(0.4).z == doctest::Approx(1.0));
    CHECK(bend.tangent_at(1.6).x == doctest::Approx(1.0));
}

TEST_CASE("reversed flips the traversal order") {
    Centerline line = straight_line(5, 1.0);
    Centerline rev = line.reversed();
    CHECK(rev.points.front().z == doctest::Approx(4.0));
    CHECK(rev.points.back().z == doctest::Approx(0.0));
    CHECK(rev.total_length() == doctest::Approx(line.total_length()));
}

TEST_CASE("validate rejects degenerate polylines") {
    Centerline line;
    CHECK_THROWS_AS(line.validate(), input_error);
    line.points = {{0, 0, 0}};
    CHECK_THROWS_AS(line.validate(), input_error);
    line.points = {{0, 0, 0}, {std::nan(""), 0, 0}};
    CHECK_THROWS_AS(line.validate(), input_error);
}

TEST_CASE("moving-average smoothing preserves endpoints and flattens zigzag") {
    Centerline zig;
    for (int i = 0; i < 21; ++i)
        zig.points.push_back({(i % 2 == 0) ? 0.0 : 0.4, 0.0, i * 0.5});
    zig.rebuild_arclength();
    Centerline smooth = smooth_moving_average(zig, 5);
    CHECK(smooth.points.size() == zig.points.size());
    CHECK(smooth.points.front().x == doctest::Approx(zig.points.front().x));
    CHECK(smooth.points.front().z == doctest::Approx(zig.points.front().z));
    CHECK(smooth.points.back().x == doctest::Approx(zig.points.back().x));
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 < smooth.points.size(); ++i)
        worst = std::max(worst, std::abs(smooth.points[i].x - 0.2));
    CHECK(worst < 0.15);  // interior hovers near the mean of the two rails

    CHECK_THROWS_AS(smooth_moving_average(zig, 4), input_error);   // even window
    CHECK_THROWS_AS(smooth_moving_average(zig, 1), input_error);   // too small
    Centerline tiny = straight_line(3, 1.0);
    Centerline same = smooth_moving_average(tiny, 7);  // window longer than the line
    for (std::size_t i = 0; i < tiny.points.size(); ++i)
        CHECK(same.points[i].z == doctest::Approx(tiny.points[i].z));
}

TEST_CASE("distance_to_polyline_mm matches exact segment distances") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> coord(2.0, 14.0);

    Centerline ref;
    for (int i = 0; i < 6; ++i) ref.points.push_back({coord(rng), coord(rng), coord(rng)});
    ref.rebuild_arclength();

    VoxelGrid g({17, 15, 13}, {1.0, 1.0, 1.0}, {0.5, 0.5, 0.5}, GridKind::intensity);
    VoxelGrid d = distance_to_polyline_mm(g, ref);
    CHECK(d.kind() == GridKind::distance);

    std::uniform_int_distribution<int> xi(0, 16), yi(0, 14), zi(0, 12);
    for (int n = 0; n < 200; ++n) {
        int i = xi(rng), j = yi(rng), k = zi(rng);
        WorldPoint p = g.voxel_to_world(i, j, k);
        double want = 1e300;
        for (std::size_t s = 0; s + 1 < ref.points.size(); ++s)
            want = std::min(want, point_segment_dist(p, ref.points[s], ref.points[s + 1]));
        CHECK(d(i, j, k) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("distance_to_polyline reports voxel units") {
    Centerline ref = straight_line(5, 2.0);
    VoxelGrid g({9, 9, 9}, {0.5, 0.5, 0.5}, {-2.0, -2.0, 0.0}, GridKind::intensity);
    VoxelGrid dv = distance_to_polyline(g, ref);
    VoxelGrid dm = distance_to_polyline_mm(g, ref);
    for (std::int64_t idx = 0; idx < g.size(); idx += 37)
        CHECK(dv.values()[idx] == doctest::Approx(dm.values()[idx] / 0.5));
}

TEST_SUITE_END();
