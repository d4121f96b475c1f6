#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "corseg/centerline.hpp"
#include "corseg/fast_marching.hpp"
#include "corseg/voxel_grid.hpp"

namespace corseg {

enum class PathKind { straight, arc, helix };

// Spherical calcification attached to the vessel at arclength s, azimuth theta
// around the local tangent, centered offset_mm from the axis.
struct CalcBlob {
    double s_mm = 0.0;
    double theta = 0.0;
    double offset_mm = 0.0;
    double radius_mm = 0.5;
};

// Gaussian narrowing of the lumen radius profile:
//   r(s) = base * (1 - depth * exp(-(s - location)^2 / (2 * (width/2)^2)))
struct GaussianStenosis {
    double location_mm = 0.0;
    double depth = 0.0;  // fraction of the base radius, in [0,1)
    double width_mm = 4.0;
    // When set, the dip annulus [r(s), base) is filled with calcium and the
    // outer surface stays at the base radius (calcified inward remodeling).
    bool calcified = false;
};

struct PhantomSpec {
    std::string name = "phantom";

    PathKind path = PathKind::straight;
    double length_mm = 40.0;  // arclength of the vessel segment
    double arc_radius_mm = 25.0;
    double helix_radius_mm = 10.0;
    double helix_pitch_mm = 20.0;

    double lumen_radius_mm = 2.0;
    GaussianStenosis stenosis;
    double wall_thickness_mm = 0.5;
    std::vector<CalcBlob> blobs;

    double lumen_hu = 350.0;
    double wall_hu = 40.0;
    double background_hu = 0.0;
    double calcium_hu = 800.0;

    double noise_sd = 0.0;
    std::uint64_t noise_seed = 0xC0FFEE;

    std::array<double, 3> spacing{0.4, 0.4, 0.5};
    double margin_mm = 4.0;
    double seed_inset_mm = 2.0;
    // Guard against runaway grids; exceeding it is an input error.
    int max_grid_dim = 1024;

    void validate() const;
};

// Analytic cross-section truth sampled at the reporting step (0.5 mm).
struct TrueSection {
    double s_mm = 0.0;
    double lumen_radius_mm = 0.0;
    double lumen_area_mm2 = 0.0;
    double outer_radius_mm = 0.0;
    double outer_area_mm2 = 0.0;
};

struct GroundTruth {
    Centerline centerline;  // densified to 0.25 mm steps
    BinaryMask lumen;
    BinaryMask outer;
    BinaryMask plaque;
    SeedPair seeds;       // inset from both ends of the axis
    double ds2 = 0.0;     // analytic diameter stenosis (0 when no stenosis)
    double mla_mm2 = 0.0; // analytic minimal lumen area
    double mld_mm = 0.0;  // analytic minimal lumen diameter
    std::vector<TrueSection> sections;
};

struct PhantomVolume {
    VoxelGrid image;
    GroundTruth truth;
};

// Voxelize the analytic geometry. Boundary voxels are 2x2x2 supersampled so
// material edges carry partial-volume values; interior voxels are classified
// at their centers. Noise is additive Gaussian, generated per voxel from a
// counter-based generator keyed on (noise_seed, voxel index), so the result
// is bit-identical for a given spec regardless of thread count.
PhantomVolume generate(const PhantomSpec& spec);

// Named ready-made specs: clean-straight, stenosed-50, arc-bend, helical,
// calcified-two-blob, noisy-sd30, zero-wall, bright-wall.
std::vector<PhantomSpec> default_recipes();

// Lookup into default_recipes(); input_error on unknown names.
PhantomSpec recipe_by_name(const std::string& name);

} // namespace corseg
