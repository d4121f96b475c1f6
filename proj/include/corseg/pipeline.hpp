#pragma once

#include <string>
#include <vector>

#include "corseg/centerline.hpp"
#include "corseg/fast_marching.hpp"
#include "corseg/level_set.hpp"
#include "corseg/membership.hpp"
#include "corseg/vesselness.hpp"
#include "corseg/voxel_grid.hpp"

namespace corseg {

// One level-set application. The five stage blocks differ only in their
// values; the defaults encode the published schedule.
struct StageParams {
    double curvature_factor = 0.1;
    int iterations = 200;
    double data_weight = 1.0;
    double shape_weight = 0.0;
    double label_weight = 0.0;
};

struct PipelineConfig {
    ThresholdConfig thresholds;
    FrangiParams frangi;

    StageParams lumen_pass1{0.1, 200, 1.0, 0.3, 0.0};
    StageParams lumen_pass2{0.6, 200, 1.0, 0.3, 0.0};
    StageParams outer_pass1{0.1, 200, 1.0, 0.0, 0.0};
    StageParams outer_pass2{0.6, 200, 1.0, 0.0, 0.0};
    StageParams plaque{0.5, 200, 1.0, 0.0, 0.0};

    double prior_tube_radius_mm = 1.5;
    double speed_floor = 1e-3;
    double backtrace_step_voxels = 0.5;
    int smooth_window = 5;
    int recenter_iterations = 3;
    double recenter_radius_mm = 1.0;
    // Outer-wall ROI: {phi_lumen > -0.1} dilated by this many voxel rounds.
    // Wide eccentric calcifications need a larger radius than the default.
    int outer_roi_dilation = 2;
    // Pass-2 ROI: {pass-1 phi > -0.1} dilated by this many rounds.
    int pass2_band_dilation = 2;
    double time_step = 0.45;
    double label_magnitude = 1000.0;

    SeedPair seeds;  // overridden by the command line; kept here so a config
                     // file fully determines a run

    void validate() const;
};

struct StageTiming {
    std::string name;
    double milliseconds = 0.0;
};

struct SegmentationResult {
    VoxelGrid phi_lumen;
    VoxelGrid phi_outer;
    VoxelGrid phi_plaque;
    BinaryMask lumen_mask;   // phi_lumen > 0, after containment repair
    BinaryMask outer_mask;   // superset of lumen_mask
    BinaryMask plaque_mask;  // subset of outer_mask, disjoint from lumen_mask
    Centerline centerline;
    double mean_lumen_hu = 0.0;   // the measured lumen mean the memberships used
    double median_lumen_hu = 0.0; // the front-propagation median
    PipelineConfig config;        // snapshot of the effective configuration
    std::vector<StageTiming> timings;
};

// Tube prior around the centerline: psi = radius_mm - distance(voxel, line),
// positive inside, in millimetres.
VoxelGrid make_tube_prior(const Centerline& line, double radius_mm, const VoxelGrid& grid);

// Stage 4: two-pass lumen segmentation (a = 0.1 on the gated region, then
// a = 0.6 on the band around the first result), tube prior attached.
VoxelGrid segment_lumen(const VoxelGrid& grid, const Centerline& line,
                        const TissueFields& tissue, const PipelineConfig& cfg);

// Stage 5: outer wall. Initialization is (f2_outer + f2_plaque > 1/2) union
// the positive lumen; the ROI is the dilated {phi_lumen > -0.1} band; the
// two-pass schedule mirrors the lumen stage.
VoxelGrid segment_outer_wall(const VoxelGrid& grid, const VoxelGrid& phi_lumen,
                             const TissueFields& tissue, const PipelineConfig& cfg);

// Stage 6: calcified plaque, single pass at a = 0.5 inside {phi_outer > 0}.
// An empty initialization yields an explicitly empty result, not an error.
VoxelGrid segment_plaques(const VoxelGrid& grid, const VoxelGrid& phi_outer,
                          const TissueFields& tissue, const PipelineConfig& cfg);

// All stages in order: vesselness, centerline, memberships, lumen, outer
// wall, plaque, containment repair. Stage failures rethrow with the stage
// name prefixed.
SegmentationResult run_pipeline(const VoxelGrid& volume, const SeedPair& seeds,
                                const PipelineConfig& cfg);

} // namespace corseg
