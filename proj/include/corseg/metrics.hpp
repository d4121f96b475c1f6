#pragma once

#include <string>
#include <vector>

#include "corseg/centerline.hpp"
#include "corseg/voxel_grid.hpp"

namespace corseg {

// Overlap of two same-geometry masks: 2|A inter B| / (|A| + |B|).
// Two empty masks are identical, so their overlap is 1.
double dice(const BinaryMask& a, const BinaryMask& b);

// Exact symmetric Hausdorff distance in millimetres between the boundary
// voxels (world centers) of two masks. Throws input_error when either mask
// is empty or the geometries differ.
double hausdorff_mm(const BinaryMask& a, const BinaryMask& b);

// Trilinear interpolation of a mask treated as a {0,1} field, clamped at the
// border; a point is considered inside the surface where this reads >= 0.5.
double sample_mask_trilinear(const BinaryMask& mask, const WorldPoint& p);

struct SectionConfig {
    double step_mm = 0.5;        // arclength spacing of the cutting planes
    double distal_fraction = 0.2;  // tail share used for the reference diameter
    int directions = 180;        // chord directions tested for the min diameter
    double halfwidth_mm = 8.0;   // in-plane sampling extent on each side
};

// One cross-section, cut perpendicular to the centerline at arclength s.
struct CrossSection {
    double s_mm = 0.0;
    double lumen_area_mm2 = 0.0;
    double lumen_min_diameter_mm = 0.0;  // shortest chord through the centroid
    double outer_area_mm2 = 0.0;
};

// Planar resampling every step_mm along the centerline. The in-plane frame is
// e1 = normalize(t x z) (x when t is near z), e2 = t x e1; areas count
// sx/4-spaced samples, the min diameter marches sx/8 steps from the lumen
// centroid. Sections whose center or +-halfwidth/2 axis probes leave the
// volume, or whose lumen is empty, are dropped.
std::vector<CrossSection> slice_sections(const BinaryMask& lumen, const BinaryMask& outer,
                                         const Centerline& line, const SectionConfig& cfg = {});

struct VesselMetrics {
    double mla_mm2 = 0.0;        // minimal lumen area
    double mld_mm = 0.0;         // minimal lumen diameter
    double ds1 = 0.0;            // 1 - MLD / outer diameter at the same section
    double ds2 = 0.0;            // 1 - MLD / mean distal lumen diameter
    double plaque_burden_mean = 0.0;  // mean (outer - lumen) / outer
    double plaque_burden_sd = 0.0;    // sample standard deviation of the same
    double length_mm = 0.0;
    int section_count = 0;
};

// Aggregates the section series; needs at least 5 sections for the stenosis
// ratios to mean anything (throws input_error otherwise).
VesselMetrics summarize_sections(const std::vector<CrossSection>& sections,
                                 const SectionConfig& cfg = {});

struct VesselReport {
    std::vector<CrossSection> sections;
    VesselMetrics metrics;
    double mean_lumen_hu = 0.0;
    double median_lumen_hu = 0.0;
};

void write_report_json(const VesselReport& report, const std::string& path);
void write_sections_csv(const std::vector<CrossSection>& sections, const std::string& path);

} // namespace corseg
