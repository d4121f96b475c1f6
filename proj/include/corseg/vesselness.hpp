#pragma once

#include <vector>

#include "corseg/voxel_grid.hpp"

namespace corseg {

struct FrangiParams {
    // Gaussian scales sized for coronary lumina (radius ~1-2.5 mm; a tube of
    // radius r responds strongest near sigma = r/sqrt(2)). Kept compact on
    // purpose: a kernel that spans a bend drags the response ridge toward the
    // inner side by ~sigma^2/2R, which then biases any path traced along it.
    std::vector<double> scales_mm {1.0, 1.4, 1.8};
    double alpha = 0.5;
    double beta = 0.5;
    double gamma = 0.0;        // <= 0 selects auto: half the max structureness per scale
    bool bright_tubes = true;

    void validate() const;
};

// Multiscale tubular-structure response in [0,1]: per voxel the maximum over
// scales of the eigenvalue-ratio response. Eigenvalues are sorted by absolute
// value (ties broken by signed value); the response is zero wherever the two
// dominant eigenvalues do not indicate a bright (or dark, per bright_tubes)
// tube cross-section.
VoxelGrid frangi_vesselness(const VoxelGrid& grid, const FrangiParams& params);

} // namespace corseg
