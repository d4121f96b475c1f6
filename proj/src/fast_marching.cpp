#include "corseg/fast_marching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "corseg/parallel.hpp"

namespace corseg {

double compute_ml(const VoxelGrid& grid, const VoxelGrid& w_vessel, const ThresholdConfig& cfg) {
    if (!grid.same_geometry(w_vessel)) throw input_error("intensity and vesselness grids differ in shape");
    std::vector<double> candidates;
    const auto& iv = grid.values();
    const auto& wv = w_vessel.values();
    for (std::size_t u = 0; u < iv.size(); ++u)
        if (iv[u] > cfg.candidate_hu_floor && wv[u] > 0.0) candidates.push_back(iv[u]);
    if (candidates.empty())
        throw numeric_error("no vessel candidates: nothing above the intensity floor with vesselness support");
    std::sort(candidates.begin(), candidates.end());
    std::size_t n = candidates.size();
    if (n % 2 == 1) return candidates[n / 2];
    return 0.5 * (candidates[n / 2 - 1] + candidates[n / 2]);
}

VoxelGrid lumen_weight_map(const VoxelGrid& grid, double ml, const ThresholdConfig& cfg) {
    if (!std::isfinite(ml)) throw input_error("lumen reference intensity must be finite");
    const double center = ml + cfg.lumen_center_offset;
    const double half_width =
        std::clamp(ml - cfg.l_thres, cfg.lumen_halfwidth_min, cfg.lumen_halfwidth_max);
    VoxelGrid out = VoxelGrid::like(grid, GridKind::weight);
    const auto& iv = grid.values();
    auto& ov = out.values();
    parallel_ranges(grid.size(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            std::size_t u = static_cast<std::size_t>(idx);
            ov[u] = 0.9 * bell(iv[u], center, half_width, cfg.bell_exponent) + 0.1;
        }
    });
    return out;
}

VoxelGrid speed_map(const VoxelGrid& w_vessel, const VoxelGrid& w_lumen, double speed_floor) {
    if (!w_vessel.same_geometry(w_lumen)) throw input_error("weight grids differ in shape");
    if (!(speed_floor > 0.0)) throw input_error("speed floor must be positive");
    VoxelGrid out = VoxelGrid::like(w_vessel, GridKind::weight);
    const auto& a = w_vessel.values();
    const auto& b = w_lumen.values();
    auto& ov = out.values();
    for (std::size_t u = 0; u < a.size(); ++u) ov[u] = std::max(a[u] * b[u], speed_floor);
    return out;
}

namespace {

struct Stencil {
    // Up to three orthogonal directions with their physical spacings.
    int dir[3][3];
    double h[3];
    int ndir;
    // Highest difference order the stencil may use. Only the axis stencil
    // runs at second order: a diagonal stencil earns its keep on the
    // characteristics it nearly aligns with, where first order is already
    // accurate, while its symmetric direction pairs would turn wavefront
    // curvature into an undershooting second-order extrapolation that the
    // min-keeping update then locks in.
    int order;
};

// One directional one-sided difference, reduced to weight and pull value so
// first- and second-order terms share the same quadratic.
struct UpwindTerm {
    double t;  // value the difference pulls the solution toward
    double w;  // squared coefficient of the difference
};

// Solves sum over used terms w_i (T - t_i)^2 = 1/V^2 for the largest root,
// dropping the largest t_i while the root does not dominate every used term.
double solve_quadratic(std::vector<UpwindTerm>& terms, double inv_v) {
    std::sort(terms.begin(), terms.end(),
              [](const UpwindTerm& x, const UpwindTerm& y) { return x.t < y.t; });
    for (std::size_t m = terms.size(); m >= 1; --m) {
        double a = 0.0, b = 0.0, c = -inv_v * inv_v;
        for (std::size_t i = 0; i < m; ++i) {
            a += terms[i].w;
            b += -2.0 * terms[i].t * terms[i].w;
            c += terms[i].t * terms[i].t * terms[i].w;
        }
        double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
            double t = (-b + std::sqrt(disc)) / (2.0 * a);
            if (t >= terms[m - 1].t) return t;
        }
    }
    return std::numeric_limits<double>::infinity();
}

} // namespace

ArrivalTimeField fast_march(const VoxelGrid& speed, const std::vector<WorldPoint>& seeds,
                            std::vector<double>* accepted_trace) {
    if (seeds.empty()) throw input_error("fast march needs at least one seed");
    const GridDims& d = speed.dims();
    const auto sp = speed.spacing();
    const std::int64_t n = speed.size();
    const double inf = std::numeric_limits<double>::infinity();

    for (double v : speed.values())
        if (!(v > 0.0)) throw input_error("fast march requires strictly positive speed everywhere");

    ArrivalTimeField out;
    out.times = VoxelGrid::like(speed, GridKind::distance, inf);
    auto& T = out.times.values();
    std::vector<std::uint8_t> status(static_cast<std::size_t>(n), 0);  // 0 far, 1 narrow, 2 accepted

    auto iso = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(a, b); };
    std::vector<Stencil> stencils;
    stencils.push_back({{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {sp[0], sp[1], sp[2]}, 3, 2});
    if (iso(sp[0], sp[1]))
        stencils.push_back({{{1, 1, 0}, {1, -1, 0}, {0, 0, 1}},
                            {sp[0] * std::sqrt(2.0), sp[0] * std::sqrt(2.0), sp[2]}, 3, 1});
    if (iso(sp[0], sp[2]))
        stencils.push_back({{{1, 0, 1}, {1, 0, -1}, {0, 1, 0}},
                            {sp[0] * std::sqrt(2.0), sp[0] * std::sqrt(2.0), sp[1]}, 3, 1});
    if (iso(sp[1], sp[2]))
        stencils.push_back({{{0, 1, 1}, {0, 1, -1}, {1, 0, 0}},
                            {sp[1] * std::sqrt(2.0), sp[1] * std::sqrt(2.0), sp[0]}, 3, 1});

    // All voxels participating in some stencil around a center voxel.
    std::vector<std::array<int, 3>> update_offsets;
    for (const auto& st : stencils)
        for (int a = 0; a < st.ndir; ++a)
            for (int s = -1; s <= 1; s += 2) {
                std::array<int, 3> off {s * st.dir[a][0], s * st.dir[a][1], s * st.dir[a][2]};
                if (std::find(update_offsets.begin(), update_offsets.end(), off) == update_offsets.end())
                    update_offsets.push_back(off);
            }

    using HeapItem = std::pair<double, std::int64_t>;
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>> heap;

    std::vector<UpwindTerm> terms;
    auto solve_at = [&](int i, int j, int k) {
        const double inv_v = 1.0 / speed(i, j, k);
        double best = inf;
        for (const auto& st : stencils) {
            terms.clear();
            for (int a = 0; a < st.ndir; ++a) {
                // nearest accepted neighbor on either side of this direction
                double t1 = inf;
                int sgn = 0;
                for (int s = -1; s <= 1; s += 2) {
                    int pi = i + s * st.dir[a][0], pj = j + s * st.dir[a][1], pk = k + s * st.dir[a][2];
                    if (!d.contains(pi, pj, pk)) continue;
                    std::size_t pu = static_cast<std::size_t>(speed.index(pi, pj, pk));
                    if (status[pu] == 2 && T[pu] < t1) {
                        t1 = T[pu];
                        sgn = s;
                    }
                }
                if (t1 == inf) continue;
                // Second-order difference when the stencil allows it and the
                // next point on the same side is accepted and strictly
                // smaller; the point-source error of the first-order scheme
                // decays too slowly to be usable. Strictness matters: a flat
                // pair (t2 == t1, as on the symmetric shells around a seed)
                // would extrapolate an overconfident gradient and poison
                // everything downstream.
                double t2 = inf;
                if (st.order >= 2) {
                    int qi = i + 2 * sgn * st.dir[a][0], qj = j + 2 * sgn * st.dir[a][1],
                        qk = k + 2 * sgn * st.dir[a][2];
                    if (d.contains(qi, qj, qk)) {
                        std::size_t qu = static_cast<std::size_t>(speed.index(qi, qj, qk));
                        if (status[qu] == 2 && T[qu] < t1) t2 = T[qu];
                    }
                }
                if (t2 < inf)
                    terms.push_back({(4.0 * t1 - t2) / 3.0, 2.25 / (st.h[a] * st.h[a])});
                else
                    terms.push_back({t1, 1.0 / (st.h[a] * st.h[a])});
            }
            if (!terms.empty()) best = std::min(best, solve_quadratic(terms, inv_v));
        }
        return best;
    };

    // Seed voxels start at T = 0. The arrival-time field of a point source
    // is singular at the source (the wavefront curvature blows up), where no
    // difference stencil is accurate, so a small ball around each seed is
    // initialized with analytic straight-ray times and kept fixed; the error
    // committed there is O(ball^2 * |grad v| / v^2), far below what the
    // stencils would commit, and beyond the ball the march stays accurate.
    std::vector<std::uint8_t> frozen(static_cast<std::size_t>(n), 0);
    const double ball = 3.0 * std::min({sp[0], sp[1], sp[2]});
    for (const auto& s : seeds) {
        int i, j, k;
        if (!speed.world_to_nearest_voxel(s, i, j, k))
            throw bounds_error("seed (" + std::to_string(s.x) + "," + std::to_string(s.y) + "," +
                               std::to_string(s.z) + ") outside the volume");
        std::int64_t idx = speed.index(i, j, k);
        T[static_cast<std::size_t>(idx)] = 0.0;
        status[static_cast<std::size_t>(idx)] = 1;
        frozen[static_cast<std::size_t>(idx)] = 1;
        heap.emplace(0.0, idx);
        out.seed_indices.push_back(idx);
        out.seed_points.push_back(speed.voxel_to_world(i, j, k));
    }
    for (std::size_t s = 0; s < out.seed_indices.size(); ++s) {
        int i, j, k;
        speed.unindex(out.seed_indices[s], i, j, k);
        double vs = speed(i, j, k);
        int ri = static_cast<int>(std::ceil(ball / sp[0]));
        int rj = static_cast<int>(std::ceil(ball / sp[1]));
        int rk = static_cast<int>(std::ceil(ball / sp[2]));
        for (int dk = -rk; dk <= rk; ++dk)
            for (int dj = -rj; dj <= rj; ++dj)
                for (int di = -ri; di <= ri; ++di) {
                    if (di == 0 && dj == 0 && dk == 0) continue;
                    int pi = i + di, pj = j + dj, pk = k + dk;
                    if (!d.contains(pi, pj, pk)) continue;
                    double dist = std::sqrt(di * di * sp[0] * sp[0] + dj * dj * sp[1] * sp[1] +
                                            dk * dk * sp[2] * sp[2]);
                    if (dist > ball * (1.0 + 1e-12)) continue;
                    std::size_t u = static_cast<std::size_t>(speed.index(pi, pj, pk));
                    double t = dist / (0.5 * (vs + speed(pi, pj, pk)));
                    if (t < T[u]) {
                        T[u] = t;
                        status[u] = 1;
                        frozen[u] = 1;
                        heap.emplace(t, speed.index(pi, pj, pk));
                    }
                }
    }

    while (!heap.empty()) {
        auto [t, idx] = heap.top();
        heap.pop();
        std::size_t u = static_cast<std::size_t>(idx);
        if (status[u] == 2) continue;  // stale heap entry
        status[u] = 2;
        if (accepted_trace) accepted_trace->push_back(T[u]);
        int i, j, k;
        speed.unindex(idx, i, j, k);
        for (const auto& off : update_offsets) {
            int pi = i + off[0], pj = j + off[1], pk = k + off[2];
            if (!d.contains(pi, pj, pk)) continue;
            std::size_t pu = static_cast<std::size_t>(speed.index(pi, pj, pk));
            if (status[pu] == 2 || frozen[pu]) continue;
            double tn = solve_at(pi, pj, pk);
            if (tn < T[pu]) {
                T[pu] = tn;
                status[pu] = 1;
                heap.emplace(tn, speed.index(pi, pj, pk));
            }
        }
    }
    return out;
}

namespace {

// Central-difference gradient of T in 1/mm, one-sided at borders and next to
// unreached voxels.
struct GradientField {
    VoxelGrid gx, gy, gz;

    explicit GradientField(const VoxelGrid& T)
        : gx(VoxelGrid::like(T, GridKind::intensity)),
          gy(VoxelGrid::like(T, GridKind::intensity)),
          gz(VoxelGrid::like(T, GridKind::intensity)) {
        const GridDims& d = T.dims();
        const auto sp = T.spacing();
        auto diff = [&](int i, int j, int k, int axis) {
            int lo[3] = {i, j, k}, hi[3] = {i, j, k};
            lo[axis] -= 1;
            hi[axis] += 1;
            double c = T(i, j, k);
            bool has_lo = d.contains(lo[0], lo[1], lo[2]) && std::isfinite(T(lo[0], lo[1], lo[2]));
            bool has_hi = d.contains(hi[0], hi[1], hi[2]) && std::isfinite(T(hi[0], hi[1], hi[2]));
            double h = sp[axis];
            if (has_lo && has_hi) return (T(hi[0], hi[1], hi[2]) - T(lo[0], lo[1], lo[2])) / (2 * h);
            if (has_hi && std::isfinite(c)) return (T(hi[0], hi[1], hi[2]) - c) / h;
            if (has_lo && std::isfinite(c)) return (c - T(lo[0], lo[1], lo[2])) / h;
            return 0.0;
        };
        parallel_ranges(T.size(), [&](std::int64_t begin, std::int64_t end) {
            for (std::int64_t idx = begin; idx < end; ++idx) {
                int i, j, k;
                T.unindex(idx, i, j, k);
                std::size_t u = static_cast<std::size_t>(idx);
                gx.values()[u] = diff(i, j, k, 0);
                gy.values()[u] = diff(i, j, k, 1);
                gz.values()[u] = diff(i, j, k, 2);
            }
        });
    }

    // Unit descent direction at p; false when the gradient vanishes.
    bool direction(const WorldPoint& p, WorldPoint& dir) const {
        WorldPoint g {gx.sample_trilinear(p), gy.sample_trilinear(p), gz.sample_trilinear(p)};
        double m = norm(g);
        if (m < 1e-12) return false;
        dir = {-g.x / m, -g.y / m, -g.z / m};
        return true;
    }
};

} // namespace

Centerline backtrace_path(const ArrivalTimeField& T, const WorldPoint& end, double step_voxels) {
    if (!(step_voxels > 0.0)) throw input_error("backtrace step must be positive");
    if (T.seed_points.empty()) throw input_error("arrival-time field has no seeds");
    const VoxelGrid& times = T.times;
    int ei, ej, ek;
    if (!times.world_to_nearest_voxel(end, ei, ej, ek))
        throw bounds_error("backtrace endpoint (" + std::to_string(end.x) + "," + std::to_string(end.y) +
                           "," + std::to_string(end.z) + ") outside the volume");
    if (!std::isfinite(times(ei, ej, ek)))
        throw numeric_error("backtrace endpoint was never reached by the front");

    const auto sp = times.spacing();
    const double min_sp = std::min({sp[0], sp[1], sp[2]});
    const double h = step_voxels * min_sp;
    GradientField grad(times);

    auto nearest_seed = [&](const WorldPoint& p, double& dist) {
        std::size_t best = 0;
        dist = norm(p - T.seed_points[0]);
        for (std::size_t s = 1; s < T.seed_points.size(); ++s) {
            double dd = norm(p - T.seed_points[s]);
            if (dd < dist) {
                dist = dd;
                best = s;
            }
        }
        return best;
    };

    std::vector<WorldPoint> pts;
    WorldPoint x = times.voxel_to_world(ei, ej, ek);
    pts.push_back(x);

    const GridDims& gd = times.dims();
    const std::int64_t max_steps =
        20 * static_cast<std::int64_t>((gd.nx + gd.ny + gd.nz) / step_voxels + 16);

    auto trapped = [&](const WorldPoint& p) {
        int i, j, k;
        times.world_to_nearest_voxel(p, i, j, k);
        throw numeric_error("trapped backtrace near voxel (" + std::to_string(i) + "," +
                            std::to_string(j) + "," + std::to_string(k) + ")");
    };

    for (std::int64_t step = 0; step < max_steps; ++step) {
        double seed_dist;
        std::size_t s = nearest_seed(x, seed_dist);
        if (seed_dist <= min_sp) {
            pts.push_back(T.seed_points[s]);
            break;
        }
        WorldPoint k1, k2, k3, k4;
        if (!grad.direction(x, k1)) trapped(x);
        if (!grad.direction(x + (h / 2) * k1, k2)) k2 = k1;
        if (!grad.direction(x + (h / 2) * k2, k3)) k3 = k2;
        if (!grad.direction(x + h * k3, k4)) k4 = k3;
        WorldPoint nx = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (norm(nx - x) < 0.05 * h) trapped(x);
        x = nx;
        pts.push_back(x);
        if (step + 1 == max_steps) trapped(x);
    }

    std::reverse(pts.begin(), pts.end());
    if (pts.size() < 2 || norm(pts.front() - pts.back()) < 1e-9) {
        // Degenerate request (end at the seed): minimal two-point path.
        WorldPoint a = T.seed_points[0];
        WorldPoint b = a;
        b.x += 1e-6;
        pts = {a, b};
    }
    Centerline line;
    line.points = std::move(pts);
    line.rebuild_arclength();
    return line;
}

Centerline recenter_on_ridge(const Centerline& line, const VoxelGrid& speed,
                             double radius_mm, int iterations) {
    if (!(radius_mm > 0.0)) throw input_error("recenter radius must be positive");
    if (iterations < 0) throw input_error("recenter iterations must be non-negative");
    Centerline out = line;
    if (out.points.size() < 3 || iterations == 0) return out;

    const int rings = 3;  // sample lattice pitch = radius / rings
    for (int it = 0; it < iterations; ++it) {
        std::vector<WorldPoint> next = out.points;
        for (std::size_t i = 1; i + 1 < out.points.size(); ++i) {
            WorldPoint tang = out.points[i + 1] - out.points[i - 1];
            double tn = norm(tang);
            if (tn < 1e-12) continue;
            tang = (1.0 / tn) * tang;
            WorldPoint ref{1.0, 0.0, 0.0};
            if (std::abs(tang.x) > 0.9) ref = {0.0, 1.0, 0.0};
            WorldPoint e1 = normalized(cross(tang, ref));
            WorldPoint e2 = cross(tang, e1);
            double wsum = 0.0, cu = 0.0, cv = 0.0;
            for (int gv = -rings; gv <= rings; ++gv) {
                for (int gu = -rings; gu <= rings; ++gu) {
                    double u = radius_mm * gu / rings;
                    double v = radius_mm * gv / rings;
                    if (u * u + v * v > radius_mm * radius_mm * (1.0 + 1e-12)) continue;
                    double s = speed.sample_trilinear(out.points[i] + u * e1 + v * e2);
                    double w = s * s;
                    w *= w;  // speed^4: sharp enough to track the crest, smooth enough
                             // to average out voxel-level ripple
                    wsum += w;
                    cu += w * u;
                    cv += w * v;
                }
            }
            if (wsum <= 0.0) continue;
            next[i] = out.points[i] + (cu / wsum) * e1 + (cv / wsum) * e2;
        }
        out.points = std::move(next);
    }
    out.rebuild_arclength();
    return out;
}

Centerline extract_centerline(const VoxelGrid& grid, const VoxelGrid& w_vessel,
                              const SeedPair& seeds, const ThresholdConfig& cfg,
                              const CenterlineOptions& opts) {
    if (norm(seeds.start - seeds.end) < 1e-9)
        throw input_error("start and end seeds must differ");
    double ml = compute_ml(grid, w_vessel, cfg);
    VoxelGrid wl = lumen_weight_map(grid, ml, cfg);
    VoxelGrid v = speed_map(w_vessel, wl, opts.speed_floor);
    ArrivalTimeField T = fast_march(v, {seeds.start});
    Centerline line = backtrace_path(T, seeds.end, opts.backtrace_step_voxels);
    line = smooth_moving_average(line, opts.smooth_window);
    line = recenter_on_ridge(line, v, opts.recenter_radius_mm, opts.recenter_iterations);
    line = smooth_moving_average(line, opts.smooth_window);
    line.validate();
    return line;
}

} // namespace corseg
