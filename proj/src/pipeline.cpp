#include "corseg/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <utility>

#include "corseg/parallel.hpp"

namespace corseg {

namespace {

template <typename F>
auto timed_stage(const char* name, std::vector<StageTiming>& timings, F&& fn) -> decltype(fn()) {
    auto t0 = std::chrono::steady_clock::now();
    try {
        decltype(fn()) r = fn();
        double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        timings.push_back({name, ms});
        return r;
    } catch (bounds_error& e) {
        throw bounds_error(std::string(name) + " stage: " + e.what());
    } catch (numeric_error& e) {
        throw numeric_error(std::string(name) + " stage: " + e.what());
    } catch (input_error& e) {
        throw input_error(std::string(name) + " stage: " + e.what());
    }
}

LevelSetParams to_level_set(const StageParams& s, const PipelineConfig& cfg) {
    LevelSetParams p;
    p.curvature_factor = s.curvature_factor;
    p.iterations = s.iterations;
    p.data_weight = s.data_weight;
    p.shape_weight = s.shape_weight;
    p.label_weight = s.label_weight;
    p.time_step = cfg.time_step;
    return p;
}

VoxelGrid scaled_field(const VoxelGrid& f, double wi) {
    VoxelGrid u = VoxelGrid::like(f, GridKind::intensity);
    const auto& src = f.values();
    auto& dst = u.values();
    parallel_ranges(u.size(), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i)
            dst[static_cast<std::size_t>(i)] = wi * src[static_cast<std::size_t>(i)];
    });
    return u;
}

VoxelGrid scaled_sum_field(const VoxelGrid& fa, const VoxelGrid& fb, double wi) {
    VoxelGrid u = VoxelGrid::like(fa, GridKind::intensity);
    const auto& a = fa.values();
    const auto& b = fb.values();
    auto& dst = u.values();
    parallel_ranges(u.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            dst[static_cast<std::size_t>(i)] =
                wi * (a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)]);
    });
    return u;
}

void validate_stage(const char* name, const StageParams& s) {
    if (!(s.curvature_factor > 0.0))
        throw input_error(std::string(name) + ": the a factor must be positive");
    if (s.iterations < 0) throw input_error(std::string(name) + ": iterations must be >= 0");
    if (s.data_weight < 0.0 || s.shape_weight < 0.0 || s.label_weight < 0.0)
        throw input_error(std::string(name) + ": weights must be >= 0");
}

std::string fmt_point(const WorldPoint& p) {
    return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " + std::to_string(p.z) + ")";
}

} // namespace

void PipelineConfig::validate() const {
    thresholds.validate();
    frangi.validate();
    validate_stage("lumen pass 1", lumen_pass1);
    validate_stage("lumen pass 2", lumen_pass2);
    validate_stage("outer pass 1", outer_pass1);
    validate_stage("outer pass 2", outer_pass2);
    validate_stage("plaque", plaque);
    if (!(prior_tube_radius_mm > 0.0)) throw input_error("prior tube radius must be positive");
    if (!(speed_floor > 0.0)) throw input_error("speed floor must be positive");
    if (!(backtrace_step_voxels > 0.0)) throw input_error("backtrace step must be positive");
    if (smooth_window < 3 || smooth_window % 2 == 0)
        throw input_error("smoothing window must be odd and >= 3");
    if (recenter_iterations < 0) throw input_error("recenter iterations must be non-negative");
    if (!(recenter_radius_mm > 0.0)) throw input_error("recenter radius must be positive");
    if (outer_roi_dilation < 0 || pass2_band_dilation < 0)
        throw input_error("dilation rounds must be >= 0");
    if (!(time_step > 0.0)) throw input_error("time step must be positive");
    if (!(label_magnitude > 0.0)) throw input_error("label magnitude must be positive");
}

VoxelGrid make_tube_prior(const Centerline& line, double radius_mm, const VoxelGrid& grid) {
    if (!(radius_mm > 0.0)) throw input_error("prior tube radius must be positive");
    VoxelGrid psi = distance_to_polyline_mm(grid, line);
    psi.set_kind(GridKind::phi);
    auto& v = psi.values();
    parallel_ranges(psi.size(), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i)
            v[static_cast<std::size_t>(i)] = radius_mm - v[static_cast<std::size_t>(i)];
    });
    return psi;
}

namespace {

VoxelGrid label_grid(const VoxelGrid& psi, double magnitude) {
    VoxelGrid L = VoxelGrid::like(psi, GridKind::intensity);
    const auto& s = psi.values();
    auto& v = L.values();
    parallel_ranges(L.size(), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i)
            v[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] > 0.0 ? magnitude : -magnitude;
    });
    return L;
}

// Run one two-pass schedule: pass 1 on (init, roi1), pass 2 re-initialized
// from the pass-1 surface on a dilated band around it.
VoxelGrid two_pass(const VoxelGrid& u, const BinaryMask& init, const BinaryMask& roi1,
                   const StageParams& p1, const StageParams& p2, const PipelineConfig& cfg,
                   const VoxelGrid* psi, const VoxelGrid* labels) {
    SparseFieldState state = init_from_mask(init, &u, &roi1);
    LevelSetParams lp1 = to_level_set(p1, cfg);
    lp1.roi = &roi1;
    lp1.prior = psi;
    lp1.labeling = labels;
    evolve(state, u, lp1);

    BinaryMask pass1_mask = mask_from_phi(state.phi, 0.0);
    BinaryMask band = dilate6(mask_from_phi(state.phi, -0.1), cfg.pass2_band_dilation);
    SparseFieldState state2 = init_from_mask(pass1_mask, &u, &band);
    LevelSetParams lp2 = to_level_set(p2, cfg);
    lp2.roi = &band;
    lp2.prior = psi;
    lp2.labeling = labels;
    evolve(state2, u, lp2);
    return std::move(state2.phi);
}

} // namespace

VoxelGrid segment_lumen(const VoxelGrid& grid, const Centerline& line, const TissueFields& tissue,
                        const PipelineConfig& cfg) {
    if (!grid.same_geometry(tissue.f1)) throw input_error("tissue fields do not match the volume");
    BinaryMask init = binarize_initial_phi(tissue.f1, cfg.thresholds);

    // The gated field is exactly zero beyond the distance cutoff, so its
    // support is the stage ROI.
    BinaryMask roi = BinaryMask::like(tissue.f1);
    const auto& f1 = tissue.f1.values();
    for (std::size_t v = 0; v < f1.size(); ++v) roi.values[v] = f1[v] > 0.0 ? 1 : 0;

    VoxelGrid u = scaled_field(tissue.f1, cfg.thresholds.wi);
    VoxelGrid psi = make_tube_prior(line, cfg.prior_tube_radius_mm, grid);
    VoxelGrid labels = label_grid(psi, cfg.label_magnitude);
    return two_pass(u, init, roi, cfg.lumen_pass1, cfg.lumen_pass2, cfg, &psi, &labels);
}

VoxelGrid segment_outer_wall(const VoxelGrid& grid, const VoxelGrid& phi_lumen,
                             const TissueFields& tissue, const PipelineConfig& cfg) {
    if (!grid.same_geometry(phi_lumen)) throw input_error("phi_lumen does not match the volume");
    BinaryMask lumen_band = mask_from_phi(phi_lumen, -0.1);
    BinaryMask roi = dilate6(lumen_band, cfg.outer_roi_dilation);

    const auto& fo = tissue.f2_outer.values();
    const auto& fp = tissue.f2_plaque.values();
    const auto& pl = phi_lumen.values();
    BinaryMask init = BinaryMask::like(tissue.f2_outer);
    for (std::size_t v = 0; v < fo.size(); ++v) {
        bool fg = (fo[v] + fp[v]) > 0.5 || pl[v] > 0.0;
        init.values[v] = (fg && roi.values[v]) ? 1 : 0;
    }

    VoxelGrid u = scaled_sum_field(tissue.f2_outer, tissue.f2_plaque, cfg.thresholds.wi);
    return two_pass(u, init, roi, cfg.outer_pass1, cfg.outer_pass2, cfg, nullptr, nullptr);
}

VoxelGrid segment_plaques(const VoxelGrid& grid, const VoxelGrid& phi_outer,
                          const TissueFields& tissue, const PipelineConfig& cfg) {
    if (!grid.same_geometry(phi_outer)) throw input_error("phi_outer does not match the volume");
    BinaryMask roi = mask_from_phi(phi_outer, 0.0);

    const auto& fp = tissue.f2_plaque.values();
    BinaryMask init = BinaryMask::like(tissue.f2_plaque);
    bool any = false;
    for (std::size_t v = 0; v < fp.size(); ++v) {
        bool fg = fp[v] > 0.5 && roi.values[v] != 0;
        init.values[v] = fg ? 1 : 0;
        any = any || fg;
    }
    if (!any) {
        // Absence of calcium is a valid outcome: an everywhere-negative field.
        return VoxelGrid::like(grid, GridKind::phi, -2.5);
    }

    VoxelGrid u = scaled_field(tissue.f2_plaque, cfg.thresholds.wi);
    SparseFieldState state = init_from_mask(init, &u, &roi);
    LevelSetParams lp = to_level_set(cfg.plaque, cfg);
    lp.roi = &roi;
    evolve(state, u, lp);
    return std::move(state.phi);
}

SegmentationResult run_pipeline(const VoxelGrid& volume, const SeedPair& seeds,
                                const PipelineConfig& cfg) {
    cfg.validate();
    {
        int i, j, k;
        if (!volume.world_to_nearest_voxel(seeds.start, i, j, k))
            throw bounds_error("start seed " + fmt_point(seeds.start) + " lies outside the volume");
        if (!volume.world_to_nearest_voxel(seeds.end, i, j, k))
            throw bounds_error("end seed " + fmt_point(seeds.end) + " lies outside the volume");
    }

    SegmentationResult res;
    res.config = cfg;
    res.config.seeds = seeds;

    VoxelGrid w_vessel = timed_stage("vesselness", res.timings,
                                     [&] { return frangi_vesselness(volume, cfg.frangi); });

    CenterlineOptions opts;
    opts.speed_floor = cfg.speed_floor;
    opts.backtrace_step_voxels = cfg.backtrace_step_voxels;
    opts.smooth_window = cfg.smooth_window;
    opts.recenter_iterations = cfg.recenter_iterations;
    opts.recenter_radius_mm = cfg.recenter_radius_mm;
    res.centerline = timed_stage("centerline", res.timings, [&] {
        return extract_centerline(volume, w_vessel, seeds, cfg.thresholds, opts);
    });

    struct Memberships {
        TissueFields fields;
        double mean_hu;
        double median_hu;
    };
    Memberships m = timed_stage("memberships", res.timings, [&] {
        VoxelGrid d1 = distance_to_polyline(volume, res.centerline);
        double mean_hu = mean_lumen_intensity(volume, d1, cfg.thresholds);
        double median_hu = compute_ml(volume, w_vessel, cfg.thresholds);
        return Memberships{compute_tissue_fields(volume, d1, mean_hu, cfg.thresholds), mean_hu,
                           median_hu};
    });
    res.mean_lumen_hu = m.mean_hu;
    res.median_lumen_hu = m.median_hu;

    res.phi_lumen = timed_stage("lumen", res.timings, [&] {
        return segment_lumen(volume, res.centerline, m.fields, cfg);
    });
    res.phi_outer = timed_stage("outer-wall", res.timings, [&] {
        return segment_outer_wall(volume, res.phi_lumen, m.fields, cfg);
    });
    res.phi_plaque = timed_stage("plaque", res.timings, [&] {
        return segment_plaques(volume, res.phi_outer, m.fields, cfg);
    });

    // Containment repair: metrics need nested contours.
    res.lumen_mask = mask_from_phi(res.phi_lumen, 0.0);
    res.outer_mask = mask_from_phi(res.phi_outer, 0.0);
    res.plaque_mask = mask_from_phi(res.phi_plaque, 0.0);
    for (std::size_t v = 0; v < res.lumen_mask.values.size(); ++v) {
        if (res.lumen_mask.values[v]) res.outer_mask.values[v] = 1;
        if (!res.outer_mask.values[v] || res.lumen_mask.values[v]) res.plaque_mask.values[v] = 0;
    }
    return res;
}

} // namespace corseg
