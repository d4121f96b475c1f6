#pragma once

#include "corseg/centerline.hpp"
#include "corseg/voxel_grid.hpp"

namespace corseg {

// Intensity and distance constants shared by the membership, centerline and
// level-set stages. Defaults are the published operating point; every field
// can be overridden from the config file.
struct ThresholdConfig {
    double l_thres = 80.0;        // HU, lumen lower threshold
    double cp_thres = 400.0;      // HU, calcified-plaque offset above the lumen mean
    double ncp_thres = 50.0;      // HU, non-calcified component of the outer-wall center
    double epsilon = 0.05;        // membership floor
    double wi = 1000.0;           // probability-to-image scale for the level set

    // Distance gating. Values are physical mm; in voxel units the centers sit
    // at value/p_x where p_x is the in-plane spacing.
    double lumen_gate_center = 2.0;   // mm
    double outer_gate_center = 2.5;   // mm
    double gate_cutoff = 4.0;         // mm, memberships are exactly 0 beyond this
    double gate_slope = 0.5;          // 1/voxel, applied with negative sign (decay)

    // Lumen-mean estimation.
    double candidate_hu_floor = 100.0;  // HU
    double candidate_distance = 5.0;    // voxels from the centerline

    // Membership function shape.
    double bell_exponent = 4.0;
    // Offset of the lumen bell center above the measured lumen mean. 0 keeps
    // the peak on the lumen intensity itself; the printed table's variant
    // (peak at mean + cp_thres) is obtained by setting this to cp_thres.
    double lumen_center_offset = 0.0;
    double lumen_halfwidth_min = 150.0;  // HU
    double lumen_halfwidth_max = 500.0;  // HU
    double outer_center_min = 100.0;     // HU
    double outer_center_max = 200.0;     // HU
    double outer_slope = 0.02;           // 1/HU
    double plaque_slope = 0.05;          // 1/HU

    void validate() const;
};

// Per-tissue function parameters resolved from the lumen mean intensity.
struct MembershipParams {
    double lumen_center = 0.0;      // bell
    double lumen_half_width = 0.0;
    double lumen_exponent = 4.0;
    double outer_center = 0.0;      // sigmoid
    double outer_slope = 0.0;
    double plaque_center = 0.0;     // sigmoid
    double plaque_slope = 0.0;
};

enum class Tissue { lumen, outer, plaque };

struct TissueFields {
    MembershipParams params;
    VoxelGrid f_lumen, f_outer, f_plaque;      // ungated memberships in [epsilon, 1]
    VoxelGrid f1, f2_outer, f2_plaque;          // distance-gated fields in [0, 1]
};

// Generalized bell: 1 / (1 + |(x-center)/half_width|^(2*exponent)).
double bell(double x, double center, double half_width, double exponent);

// Logistic sigmoid: 1 / (1 + exp(-slope*(x-center))).
double sigmoid(double x, double slope, double center);

// Mean intensity over voxels brighter than candidate_hu_floor and closer than
// candidate_distance voxels to the centerline. d1_vox is the distance field in
// in-plane voxel units.
double mean_lumen_intensity(const VoxelGrid& grid, const VoxelGrid& d1_vox,
                            const ThresholdConfig& cfg);
double mean_lumen_intensity(const VoxelGrid& grid, const Centerline& line,
                            const ThresholdConfig& cfg);

MembershipParams make_membership_params(double mean_lumen_hu, const ThresholdConfig& cfg);

// Ungated memberships: f = (1-epsilon)*g + epsilon per tissue.
TissueFields tissue_memberships(const VoxelGrid& grid, double mean_lumen_hu,
                                const ThresholdConfig& cfg);

// Distance gate: f * sigmoid(d1; -gate_slope, center/p_x), hard 0 beyond
// gate_cutoff/p_x. Centers differ per tissue (lumen vs outer/plaque).
VoxelGrid gate_by_distance(const VoxelGrid& f, const VoxelGrid& d1_vox, Tissue tissue,
                           const ThresholdConfig& cfg);

// Memberships plus gating in one pass, as the pipeline consumes them.
TissueFields compute_tissue_fields(const VoxelGrid& grid, const VoxelGrid& d1_vox,
                                   double mean_lumen_hu, const ThresholdConfig& cfg);

// Threshold at wi/2: mask = (f * wi > wi/2), i.e. f > 0.5 strictly.
// Throws numeric_error when the mask comes out empty.
BinaryMask binarize_initial_phi(const VoxelGrid& f_gated, const ThresholdConfig& cfg);

} // namespace corseg
