#include "corseg/centerline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "corseg/parallel.hpp"

namespace corseg {

void Centerline::rebuild_arclength() {
    if (points.size() < 2) throw input_error("centerline needs at least 2 points");
    std::vector<WorldPoint> kept;
    kept.reserve(points.size());
    kept.push_back(points.front());
    for (std::size_t n = 1; n < points.size(); ++n) {
        if (norm(points[n] - kept.back()) > 1e-9) kept.push_back(points[n]);
    }
    if (kept.size() < 2) {
        // Degenerate all-coincident input: keep a minimal two-point line.
        WorldPoint q = kept.front();
        q.x += 1e-6;
        kept.push_back(q);
    }
    points = std::move(kept);
    arclength.assign(points.size(), 0.0);
    for (std::size_t n = 1; n < points.size(); ++n)
        arclength[n] = arclength[n - 1] + norm(points[n] - points[n - 1]);
}

void Centerline::validate() const {
    if (points.size() < 2) throw input_error("centerline needs at least 2 points");
    if (arclength.size() != points.size()) throw input_error("centerline arclength out of sync");
    if (arclength.front() != 0.0) throw input_error("centerline arclength must start at 0");
    for (std::size_t n = 1; n < arclength.size(); ++n)
        if (!(arclength[n] > arclength[n - 1]))
            throw input_error("centerline arclength must be strictly increasing");
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw numeric_error("non-finite centerline point");
}

WorldPoint Centerline::point_at(double s) const {
    if (points.size() < 2) throw input_error("centerline needs at least 2 points");
    if (s <= 0.0) return points.front();
    if (s >= arclength.back()) return points.back();
    auto it = std::upper_bound(arclength.begin(), arclength.end(), s);
    std::size_t hi = static_cast<std::size_t>(it - arclength.begin());
    std::size_t lo = hi - 1;
    double t = (s - arclength[lo]) / (arclength[hi] - arclength[lo]);
    return points[lo] + t * (points[hi] - points[lo]);
}

WorldPoint Centerline::tangent_at(double s) const {
    if (points.size() < 2) throw input_error("centerline needs at least 2 points");
    double L = arclength.back();
    s = std::clamp(s, 0.0, L);
    std::size_t hi;
    if (s >= L) {
        hi = points.size() - 1;
    } else {
        hi = static_cast<std::size_t>(std::upper_bound(arclength.begin(), arclength.end(), s) -
                                      arclength.begin());
    }
    std::size_t lo = hi - 1;
    return normalized(points[hi] - points[lo]);
}

Centerline Centerline::reversed() const {
    Centerline out;
    out.points.assign(points.rbegin(), points.rend());
    out.rebuild_arclength();
    return out;
}

Centerline smooth_moving_average(const Centerline& line, int window) {
    if (window < 3 || window % 2 == 0) throw input_error("smoothing window must be odd and >= 3");
    const auto& p = line.points;
    if (static_cast<int>(p.size()) < window) return line;
    Centerline out;
    out.points.resize(p.size());
    out.points.front() = p.front();
    out.points.back() = p.back();
    int half = window / 2;
    for (std::size_t n = 1; n + 1 < p.size(); ++n) {
        int lo = std::max<int>(0, static_cast<int>(n) - half);
        int hi = std::min<int>(static_cast<int>(p.size()) - 1, static_cast<int>(n) + half);
        // Symmetric window shrunk near the ends so the average stays centered.
        int reach = std::min<int>(static_cast<int>(n) - lo, hi - static_cast<int>(n));
        WorldPoint acc {0, 0, 0};
        int cnt = 0;
        for (int m = static_cast<int>(n) - reach; m <= static_cast<int>(n) + reach; ++m) {
            acc = acc + p[static_cast<std::size_t>(m)];
            ++cnt;
        }
        out.points[n] = (1.0 / cnt) * acc;
    }
    out.rebuild_arclength();
    return out;
}

namespace {

struct Segment {
    WorldPoint a;
    WorldPoint d;   // b - a
    double len2;    // |d|^2
};

double point_segment_dist2(const WorldPoint& p, const Segment& s) {
    WorldPoint ap = p - s.a;
    double t = s.len2 > 0.0 ? dot(ap, s.d) / s.len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    WorldPoint q = s.a + t * s.d;
    WorldPoint r = p - q;
    return dot(r, r);
}

} // namespace

VoxelGrid distance_to_polyline_mm(const VoxelGrid& ref, const Centerline& line) {
    line.validate();
    std::vector<Segment> segs;
    segs.reserve(line.points.size() - 1);
    for (std::size_t n = 1; n < line.points.size(); ++n) {
        Segment s;
        s.a = line.points[n - 1];
        s.d = line.points[n] - line.points[n - 1];
        s.len2 = dot(s.d, s.d);
        segs.push_back(s);
    }
    VoxelGrid out = VoxelGrid::like(ref, GridKind::distance);
    const GridDims& d = ref.dims();
    const auto sp = ref.spacing();
    const WorldPoint org = ref.origin();
    auto& vals = out.values();
    parallel_ranges(d.count(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            int i, j, k;
            out.unindex(idx, i, j, k);
            WorldPoint p {org.x + i * sp[0], org.y + j * sp[1], org.z + k * sp[2]};
            double best = point_segment_dist2(p, segs[0]);
            for (std::size_t n = 1; n < segs.size(); ++n) {
                double d2 = point_segment_dist2(p, segs[n]);
                if (d2 < best) best = d2;
            }
            vals[static_cast<std::size_t>(idx)] = std::sqrt(best);
        }
    });
    return out;
}

VoxelGrid distance_to_polyline(const VoxelGrid& ref, const Centerline& line) {
    const auto sp = ref.spacing();
    if (std::abs(sp[0] - sp[1]) > 0.01 * sp[0])
        std::fprintf(stderr, "warning: in-plane spacing differs by more than 1%% (%g vs %g); "
                             "voxel-unit distances use sx\n", sp[0], sp[1]);
    VoxelGrid out = distance_to_polyline_mm(ref, line);
    for (auto& v : out.values()) v /= sp[0];
    return out;
}

} // namespace corseg
