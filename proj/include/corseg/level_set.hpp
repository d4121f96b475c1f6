#pragma once

#include <cstdint>
#include <vector>

#include "corseg/voxel_grid.hpp"

namespace corseg {

struct LevelSetParams {
    double curvature_factor = 0.1;  // balance knob between data fit and smoothness
    int iterations = 200;
    double data_weight = 1.0;
    double shape_weight = 0.0;
    double label_weight = 0.0;      // diagnostic energy only; contributes no force
    double time_step = 0.45;
    const BinaryMask* roi = nullptr;      // evolution confined here when present
    const VoxelGrid* prior = nullptr;     // psi, positive inside the prior shape
    const VoxelGrid* labeling = nullptr;  // L, positive where labeled
    std::vector<double>* energy_trace = nullptr;  // per-iteration total energy when set

    void validate() const;
};

// Banded level-set state. phi is defined everywhere, clamped to [-2.5, 2.5],
// positive inside. Layer labels: 0 holds both sides of each zero crossing,
// +/-1 and +/-2 the shells around it, +/-3 is far. The active list is the
// sorted layer-0 index set.
struct SparseFieldState {
    VoxelGrid phi;
    std::vector<std::int8_t> layers;
    std::vector<std::int64_t> active;
    double c1 = 0.0;  // mean of u where phi > 0
    double c2 = 0.0;  // mean of u where phi < 0
    int iteration = 0;

    // Throws numeric_error when a layer/phi invariant is violated.
    void check_invariants() const;
};

// Builds layers by city-block distance to the opposite region; phi = +/-(d-0.5)
// capped at +/-2.5. Voxels outside roi are frozen background. u, when given,
// seeds c1/c2.
SparseFieldState init_from_mask(const BinaryMask& mask, const VoxelGrid* u = nullptr,
                                const BinaryMask* roi = nullptr);

// Arctangent-smoothed Heaviside with unit smoothing width, and its derivative.
double smoothed_heaviside(double z);
double smoothed_delta(double z);

// (u-c1)^2 - (u-c2)^2. Positive values shrink the inside region under descent.
double chan_vese_force(double u, double c1, double c2);

// Gradient of the squared prior mismatch (Hs(phi)Hs(L) - Hs(psi))^2 w.r.t.
// phi. Positive values shrink under descent, like the data term.
double shape_force(double phi, double psi, double L);

// Diagnostic fit of the two region means to the prior-shape partition.
double labeling_energy(const VoxelGrid& u, const VoxelGrid& psi, double c1, double c2,
                       const BinaryMask* roi = nullptr);

// Sparse-field evolution: per iteration, refresh c1/c2, step layer-0 phi by
// time_step * (data + shape descent + curvature), then rebuild the band.
void evolve(SparseFieldState& state, const VoxelGrid& u, const LevelSetParams& params);

// Weighted sum of the region, shape, and labeling energies over the ROI,
// with the ideal Heaviside for the region term.
double total_energy(const SparseFieldState& state, const VoxelGrid& u,
                    const LevelSetParams& params);

BinaryMask mask_from_phi(const VoxelGrid& phi, double iso = 0.0);

} // namespace corseg
