#include "corseg/vesselness.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "corseg/errors.hpp"
#include "corseg/filters.hpp"
#include "corseg/parallel.hpp"

namespace corseg {

void FrangiParams::validate() const {
    if (scales_mm.empty()) throw input_error("frangi scales must be non-empty");
    for (std::size_t n = 0; n < scales_mm.size(); ++n) {
        if (!(scales_mm[n] > 0.0)) throw input_error("frangi scales must be positive");
        if (n > 0 && !(scales_mm[n] > scales_mm[n - 1]))
            throw input_error("frangi scales must be strictly ascending");
    }
    if (!(alpha > 0.0) || !(beta > 0.0)) throw input_error("frangi alpha and beta must be positive");
}

VoxelGrid frangi_vesselness(const VoxelGrid& grid, const FrangiParams& params) {
    params.validate();
    const std::int64_t n = grid.size();
    VoxelGrid best = VoxelGrid::like(grid, GridKind::weight, 0.0);
    auto& best_v = best.values();

    // Sign convention: bright tubes have lambda2, lambda3 strongly negative.
    const double eig_sign = params.bright_tubes ? 1.0 : -1.0;

    VoxelGrid ra = VoxelGrid::like(grid, GridKind::intensity);
    VoxelGrid rb = VoxelGrid::like(grid, GridKind::intensity);
    VoxelGrid ss = VoxelGrid::like(grid, GridKind::intensity);

    for (double sigma : params.scales_mm) {
        HessianFields h = hessian_field(grid, sigma);
        auto& ra_v = ra.values();
        auto& rb_v = rb.values();
        auto& ss_v = ss.values();

        parallel_ranges(n, [&](std::int64_t begin, std::int64_t end) {
            for (std::int64_t idx = begin; idx < end; ++idx) {
                std::size_t u = static_cast<std::size_t>(idx);
                Eigen::Matrix3d m;
                m << h.xx.values()[u], h.xy.values()[u], h.xz.values()[u],
                     h.xy.values()[u], h.yy.values()[u], h.yz.values()[u],
                     h.xz.values()[u], h.yz.values()[u], h.zz.values()[u];
                Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m);
                double lam[3] = {eig_sign * solver.eigenvalues()[0],
                                 eig_sign * solver.eigenvalues()[1],
                                 eig_sign * solver.eigenvalues()[2]};
                std::sort(lam, lam + 3, [](double a, double b) {
                    double aa = std::abs(a), ab = std::abs(b);
                    if (aa != ab) return aa < ab;
                    return a < b;
                });
                double l1 = lam[0], l2 = lam[1], l3 = lam[2];
                if (l2 >= 0.0 || l3 >= 0.0 || l2 == 0.0 || l3 == 0.0) {
                    ra_v[u] = -1.0;  // sentinel: no tube response here
                    rb_v[u] = 0.0;
                    ss_v[u] = 0.0;
                    continue;
                }
                ra_v[u] = std::abs(l2) / std::abs(l3);
                rb_v[u] = std::abs(l1) / std::sqrt(std::abs(l2 * l3));
                ss_v[u] = std::sqrt(l1 * l1 + l2 * l2 + l3 * l3);
            }
        });

        double c = params.gamma;
        if (!(c > 0.0)) {
            double smax = 0.0;
            for (std::int64_t idx = 0; idx < n; ++idx)
                smax = std::max(smax, ss_v[static_cast<std::size_t>(idx)]);
            c = 0.5 * smax;
            if (!(c > 0.0)) continue;  // flat volume at this scale: zero response everywhere
        }

        const double inv2a2 = 1.0 / (2.0 * params.alpha * params.alpha);
        const double inv2b2 = 1.0 / (2.0 * params.beta * params.beta);
        const double inv2c2 = 1.0 / (2.0 * c * c);
        parallel_ranges(n, [&](std::int64_t begin, std::int64_t end) {
            for (std::int64_t idx = begin; idx < end; ++idx) {
                std::size_t u = static_cast<std::size_t>(idx);
                if (ra_v[u] < 0.0) continue;
                double v = (1.0 - std::exp(-ra_v[u] * ra_v[u] * inv2a2)) *
                           std::exp(-rb_v[u] * rb_v[u] * inv2b2) *
                           (1.0 - std::exp(-ss_v[u] * ss_v[u] * inv2c2));
                if (v > best_v[u]) best_v[u] = v;
            }
        });
    }

    for (auto& v : best_v) v = std::clamp(v, 0.0, 1.0);
    return best;
}

} // namespace corseg
