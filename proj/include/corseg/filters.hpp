#pragma once

#include "corseg/voxel_grid.hpp"

namespace corseg {

// Separable Gaussian smoothing with a physical scale sigma_mm. The per-axis
// voxel sigma is sigma_mm / spacing[axis]; kernel radius is ceil(4*sigma_vox)
// and the truncated kernel is renormalized to sum to 1. Borders replicate the
// edge sample. Throws input_error if sigma_mm <= 0.
VoxelGrid gaussian_smooth(const VoxelGrid& img, double sigma_mm);

// Second derivatives of the Gaussian-smoothed image, in physical (1/mm^2)
// units, scaled by sigma_mm^2 for scale normalization.
struct HessianFields {
    VoxelGrid xx, yy, zz, xy, xz, yz;
};

HessianFields hessian_field(const VoxelGrid& img, double sigma_mm);

} // namespace corseg
