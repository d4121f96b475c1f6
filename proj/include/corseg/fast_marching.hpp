#pragma once

#include <vector>

#include "corseg/centerline.hpp"
#include "corseg/membership.hpp"
#include "corseg/vesselness.hpp"
#include "corseg/voxel_grid.hpp"

namespace corseg {

struct SeedPair {
    WorldPoint start;
    WorldPoint end;
};

struct ArrivalTimeField {
    VoxelGrid times;                       // mm of travel time; +inf where unreached
    std::vector<std::int64_t> seed_indices;
    std::vector<WorldPoint> seed_points;   // voxel-center positions of the seeds
};

// Median, not mean: the single value splitting the candidate multiset
// {I(v) : I(v) > candidate_hu_floor and w_vessel(v) > 0} in half.
double compute_ml(const VoxelGrid& grid, const VoxelGrid& w_vessel, const ThresholdConfig& cfg);

// Front-propagation lumen weight: 0.9*bell(I; ml + lumen_center_offset,
// clamp(ml - l_thres, ...), bell_exponent) + 0.1, in [0.1, 1].
VoxelGrid lumen_weight_map(const VoxelGrid& grid, double ml, const ThresholdConfig& cfg);

// Elementwise w_vessel * w_lumen, clamped below by speed_floor so the eikonal
// domain never disconnects.
VoxelGrid speed_map(const VoxelGrid& w_vessel, const VoxelGrid& w_lumen,
                    double speed_floor = 1e-3);

// First-arrival times of |grad T| * speed = 1 from the seeds, second-order
// upwind over the axis stencil plus 2D-diagonal cross stencils (diagonals are
// used only in planes with equal spacing, where they form orthogonal frames).
// A small ball around each seed is set analytically, because no difference
// stencil is accurate at the point-source singularity of the solution.
// accepted_trace, when given, records T in acceptance order.
ArrivalTimeField fast_march(const VoxelGrid& speed, const std::vector<WorldPoint>& seeds,
                            std::vector<double>* accepted_trace = nullptr);

// Steepest-descent path on -grad T from end back to the nearest seed, RK4 at
// step_voxels sub-voxel steps; returned ordered seed -> end.
Centerline backtrace_path(const ArrivalTimeField& T, const WorldPoint& end,
                          double step_voxels = 0.5);

struct CenterlineOptions {
    double speed_floor = 1e-3;
    double backtrace_step_voxels = 0.5;
    int smooth_window = 5;
    int recenter_iterations = 3;
    double recenter_radius_mm = 1.0;
};

// Pull each interior point onto the local speed ridge: iteratively replace it
// with the speed^4-weighted centroid of trilinear samples on a disc of the
// given radius in the plane normal to the path. Geodesics of the travel-time
// field cut toward the inner side of a bend (a radial offset is first order
// in path length but only second order in speed loss near the ridge crest),
// so the raw backtrace carries a curvature-proportional bias this removes.
// Endpoints stay fixed.
Centerline recenter_on_ridge(const Centerline& line, const VoxelGrid& speed,
                             double radius_mm, int iterations);

// Full stage-2 composition: lumen weights from the vesselness-masked median,
// speed map, fast march from start, backtrace from end, moving-average smooth,
// ridge recentering.
Centerline extract_centerline(const VoxelGrid& grid, const VoxelGrid& w_vessel,
                              const SeedPair& seeds, const ThresholdConfig& cfg,
                              const CenterlineOptions& opts = {});

} // namespace corseg
