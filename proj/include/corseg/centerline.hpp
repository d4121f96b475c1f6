#pragma once

#include <vector>

#include "corseg/voxel_grid.hpp"

namespace corseg {

// Ordered polyline in world millimetres with cached arclength.
// Invariants: >= 2 points, arclength[0] == 0 and strictly increasing.
struct Centerline {
    std::vector<WorldPoint> points;
    std::vector<double> arclength;

    double total_length() const { return arclength.empty() ? 0.0 : arclength.back(); }

    // Recomputes arclength from points, dropping consecutive duplicates.
    void rebuild_arclength();
    void validate() const;

    // Linear interpolation along arclength, clamped to [0, total_length].
    WorldPoint point_at(double s) const;
    // Unit tangent of the segment containing s (forward difference at the ends).
    WorldPoint tangent_at(double s) const;

    Centerline reversed() const;
};

// Moving-average smoothing with fixed endpoints. window must be odd and >= 3;
// polylines shorter than window are returned unchanged.
Centerline smooth_moving_average(const Centerline& line, int window = 5);

// Exact minimum distance from each voxel center to the polyline segments, in mm.
VoxelGrid distance_to_polyline_mm(const VoxelGrid& ref, const Centerline& line);

// Same distance expressed in in-plane voxel units (mm / sx). Assumes sx == sy;
// warns on stderr when they differ by more than 1%.
VoxelGrid distance_to_polyline(const VoxelGrid& ref, const Centerline& line);

} // namespace corseg
