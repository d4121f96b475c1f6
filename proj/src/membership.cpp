#include "corseg/membership.hpp"

#include <algorithm>
#include <cmath>

#include "corseg/parallel.hpp"

namespace corseg {

void ThresholdConfig::validate() const {
    if (!(l_thres > 0.0) || !(cp_thres > 0.0) || !(ncp_thres > 0.0))
        throw input_error("intensity thresholds must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw input_error("epsilon must be in (0,1)");
    if (!(wi > 0.0)) throw input_error("wi must be positive");
    if (!(gate_cutoff > 0.0) || !(lumen_gate_center > 0.0) || !(outer_gate_center > 0.0))
        throw input_error("distance gate parameters must be positive");
    if (!(bell_exponent >= 1.0)) throw input_error("bell exponent must be >= 1");
    if (!(lumen_halfwidth_min > 0.0) || !(lumen_halfwidth_max >= lumen_halfwidth_min))
        throw input_error("lumen half-width clamp must be positive and ordered");
    if (outer_slope == 0.0 || plaque_slope == 0.0 || gate_slope == 0.0)
        throw input_error("sigmoid slopes must be nonzero");
}

double bell(double x, double center, double half_width, double exponent) {
    if (!(half_width > 0.0)) throw input_error("bell half-width must be positive");
    if (!(exponent >= 1.0)) throw input_error("bell exponent must be >= 1");
    double t = std::abs((x - center) / half_width);
    return 1.0 / (1.0 + std::pow(t, 2.0 * exponent));
}

double sigmoid(double x, double slope, double center) {
    if (slope == 0.0) throw input_error("sigmoid slope must be nonzero");
    return 1.0 / (1.0 + std::exp(-slope * (x - center)));
}

double mean_lumen_intensity(const VoxelGrid& grid, const VoxelGrid& d1_vox,
                            const ThresholdConfig& cfg) {
    if (!grid.same_geometry(d1_vox)) throw input_error("intensity and distance grids differ in shape");
    const auto& iv = grid.values();
    const auto& dv = d1_vox.values();
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::size_t u = 0; u < iv.size(); ++u) {
        if (iv[u] > cfg.candidate_hu_floor && dv[u] < cfg.candidate_distance) {
            sum += iv[u];
            ++n;
        }
    }
    if (n == 0) throw numeric_error("lumen sample empty: no voxels above the intensity floor near the centerline");
    return sum / static_cast<double>(n);
}

double mean_lumen_intensity(const VoxelGrid& grid, const Centerline& line,
                            const ThresholdConfig& cfg) {
    return mean_lumen_intensity(grid, distance_to_polyline(grid, line), cfg);
}

MembershipParams make_membership_params(double mean_lumen_hu, const ThresholdConfig& cfg) {
    if (!std::isfinite(mean_lumen_hu)) throw input_error("lumen mean intensity must be finite");
    MembershipParams p;
    p.lumen_center = mean_lumen_hu + cfg.lumen_center_offset;
    p.lumen_half_width =
        std::clamp(mean_lumen_hu - cfg.l_thres, cfg.lumen_halfwidth_min, cfg.lumen_halfwidth_max);
    p.lumen_exponent = cfg.bell_exponent;
    p.outer_slope = cfg.outer_slope;
    p.outer_center = std::min(cfg.outer_center_max,
                              std::max(mean_lumen_hu - cfg.l_thres - cfg.ncp_thres, cfg.outer_center_min));
    p.plaque_slope = cfg.plaque_slope;
    p.plaque_center = mean_lumen_hu + cfg.cp_thres;
    return p;
}

TissueFields tissue_memberships(const VoxelGrid& grid, double mean_lumen_hu,
                                const ThresholdConfig& cfg) {
    cfg.validate();
    TissueFields out;
    out.params = make_membership_params(mean_lumen_hu, cfg);
    out.f_lumen = VoxelGrid::like(grid, GridKind::membership);
    out.f_outer = VoxelGrid::like(grid, GridKind::membership);
    out.f_plaque = VoxelGrid::like(grid, GridKind::membership);

    const auto& iv = grid.values();
    auto& fl = out.f_lumen.values();
    auto& fo = out.f_outer.values();
    auto& fp = out.f_plaque.values();
    const MembershipParams& p = out.params;
    const double e = cfg.epsilon, e1 = 1.0 - cfg.epsilon;

    parallel_ranges(grid.size(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            std::size_t u = static_cast<std::size_t>(idx);
            double x = iv[u];
            fl[u] = e1 * bell(x, p.lumen_center, p.lumen_half_width, p.lumen_exponent) + e;
            fo[u] = e1 * sigmoid(x, p.outer_slope, p.outer_center) + e;
            fp[u] = e1 * sigmoid(x, p.plaque_slope, p.plaque_center) + e;
        }
    });
    return out;
}

VoxelGrid gate_by_distance(const VoxelGrid& f, const VoxelGrid& d1_vox, Tissue tissue,
                           const ThresholdConfig& cfg) {
    if (!f.same_geometry(d1_vox)) throw input_error("membership and distance grids differ in shape");
    const double px = f.spacing()[0];
    const double center_vox =
        (tissue == Tissue::lumen ? cfg.lumen_gate_center : cfg.outer_gate_center) / px;
    const double cutoff_vox = cfg.gate_cutoff / px;
    const double slope = -cfg.gate_slope;

    VoxelGrid out = VoxelGrid::like(f, GridKind::membership);
    const auto& fv = f.values();
    const auto& dv = d1_vox.values();
    auto& ov = out.values();
    parallel_ranges(f.size(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            std::size_t u = static_cast<std::size_t>(idx);
            ov[u] = dv[u] > cutoff_vox ? 0.0 : fv[u] * sigmoid(dv[u], slope, center_vox);
        }
    });
    return out;
}

TissueFields compute_tissue_fields(const VoxelGrid& grid, const VoxelGrid& d1_vox,
                                   double mean_lumen_hu, const ThresholdConfig& cfg) {
    TissueFields out = tissue_memberships(grid, mean_lumen_hu, cfg);
    out.f1 = gate_by_distance(out.f_lumen, d1_vox, Tissue::lumen, cfg);
    out.f2_outer = gate_by_distance(out.f_outer, d1_vox, Tissue::outer, cfg);
    out.f2_plaque = gate_by_distance(out.f_plaque, d1_vox, Tissue::plaque, cfg);
    return out;
}

BinaryMask binarize_initial_phi(const VoxelGrid& f_gated, const ThresholdConfig& cfg) {
    BinaryMask mask = BinaryMask::like(f_gated);
    const auto& fv = f_gated.values();
    std::int64_t count = 0;
    for (std::size_t u = 0; u < fv.size(); ++u) {
        if (fv[u] * cfg.wi > cfg.wi / 2.0) {
            mask.values[u] = 1;
            ++count;
        }
    }
    if (count == 0) throw numeric_error("empty initialization: no membership exceeds 1/2");
    return mask;
}

} // namespace corseg
