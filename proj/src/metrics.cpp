#include "corseg/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "corseg/errors.hpp"
#include "corseg/parallel.hpp"

namespace corseg {

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_geometry(b)) throw input_error("dice: mask geometries differ");
    std::int64_t na = 0, nb = 0, ni = 0;
    for (std::size_t v = 0; v < a.values.size(); ++v) {
        bool in_a = a.values[v] != 0, in_b = b.values[v] != 0;
        na += in_a;
        nb += in_b;
        ni += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

namespace {

std::vector<WorldPoint> boundary_points(const BinaryMask& m) {
    std::vector<WorldPoint> pts;
    for (std::int64_t idx : boundary_voxels(m)) {
        std::int64_t i = idx % m.dims.nx;
        std::int64_t rest = idx / m.dims.nx;
        std::int64_t j = rest % m.dims.ny;
        std::int64_t k = rest / m.dims.ny;
        pts.push_back(m.voxel_to_world(static_cast<int>(i), static_cast<int>(j),
                                        static_cast<int>(k)));
    }
    return pts;
}

// Exact directed Hausdorff (squared). A shared monotone lower bound of the
// answer lets every scan of `to` stop once the running minimum can no longer
// raise the final maximum; only fully scanned minima update the bound.
double directed_hausdorff_sq(const std::vector<WorldPoint>& from,
                             const std::vector<WorldPoint>& to) {
    std::atomic<std::uint64_t> worst_bits{0};  // nonnegative doubles order as their bits
    auto load_worst = [&] {
        std::uint64_t b = worst_bits.load(std::memory_order_relaxed);
        double w;
        std::memcpy(&w, &b, 8);
        return w;
    };
    auto raise_worst = [&](double v) {
        std::uint64_t nb;
        std::memcpy(&nb, &v, 8);
        std::uint64_t cur = worst_bits.load(std::memory_order_relaxed);
        while (cur < nb && !worst_bits.compare_exchange_weak(cur, nb, std::memory_order_relaxed)) {
        }
    };

    parallel_ranges(static_cast<std::int64_t>(from.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t a = lo; a < hi; ++a) {
            const WorldPoint& p = from[static_cast<std::size_t>(a)];
            double bound = load_worst();
            double nearest = std::numeric_limits<double>::infinity();
            bool complete = true;
            for (const WorldPoint& q : to) {
                double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
                double d2 = dx * dx + dy * dy + dz * dz;
                if (d2 < nearest) {
                    nearest = d2;
                    if (nearest <= bound) {
                        complete = false;
                        break;
                    }
                }
            }
            if (complete && nearest > bound) raise_worst(nearest);
        }
    });
    return load_worst();
}

} // namespace

double hausdorff_mm(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_geometry(b)) throw input_error("hausdorff: mask geometries differ");
    if (a.empty() || b.empty()) throw input_error("hausdorff: a mask is empty");
    std::vector<WorldPoint> pa = boundary_points(a);
    std::vector<WorldPoint> pb = boundary_points(b);
    double h2 = std::max(directed_hausdorff_sq(pa, pb), directed_hausdorff_sq(pb, pa));
    return std::sqrt(h2);
}

double sample_mask_trilinear(const BinaryMask& mask, const WorldPoint& p) {
    const GridDims& d = mask.dims;
    double cx = (p.x - mask.origin.x) / mask.spacing[0];
    double cy = (p.y - mask.origin.y) / mask.spacing[1];
    double cz = (p.z - mask.origin.z) / mask.spacing[2];
    cx = std::clamp(cx, 0.0, static_cast<double>(d.nx - 1));
    cy = std::clamp(cy, 0.0, static_cast<double>(d.ny - 1));
    cz = std::clamp(cz, 0.0, static_cast<double>(d.nz - 1));
    int i0 = std::min(static_cast<int>(cx), d.nx - 2 >= 0 ? d.nx - 2 : 0);
    int j0 = std::min(static_cast<int>(cy), d.ny - 2 >= 0 ? d.ny - 2 : 0);
    int k0 = std::min(static_cast<int>(cz), d.nz - 2 >= 0 ? d.nz - 2 : 0);
    i0 = std::max(0, i0);
    j0 = std::max(0, j0);
    k0 = std::max(0, k0);
    int i1 = std::min(i0 + 1, d.nx - 1), j1 = std::min(j0 + 1, d.ny - 1),
        k1 = std::min(k0 + 1, d.nz - 1);
    double fx = cx - i0, fy = cy - j0, fz = cz - k0;

    auto at = [&](int i, int j, int k) { return static_cast<double>(mask(i, j, k)); };
    double c00 = at(i0, j0, k0) * (1 - fx) + at(i1, j0, k0) * fx;
    double c10 = at(i0, j1, k0) * (1 - fx) + at(i1, j1, k0) * fx;
    double c01 = at(i0, j0, k1) * (1 - fx) + at(i1, j0, k1) * fx;
    double c11 = at(i0, j1, k1) * (1 - fx) + at(i1, j1, k1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

namespace {

bool inside_hull(const BinaryMask& m, const WorldPoint& p) {
    double cx = (p.x - m.origin.x) / m.spacing[0];
    double cy = (p.y - m.origin.y) / m.spacing[1];
    double cz = (p.z - m.origin.z) / m.spacing[2];
    return cx >= -0.5 && cx <= m.dims.nx - 0.5 && cy >= -0.5 && cy <= m.dims.ny - 0.5 &&
           cz >= -0.5 && cz <= m.dims.nz - 0.5;
}

WorldPoint axis_e1(const WorldPoint& t) {
    if (std::abs(t.z) > 0.9) return {1.0, 0.0, 0.0};
    // t x z-hat, normalized
    double len = std::sqrt(t.y * t.y + t.x * t.x);
    return {t.y / len, -t.x / len, 0.0};
}

} // namespace

std::vector<CrossSection> slice_sections(const BinaryMask& lumen, const BinaryMask& outer,
                                         const Centerline& line, const SectionConfig& cfg) {
    if (!lumen.same_geometry(outer)) throw input_error("sections: mask geometries differ");
    if (!(cfg.step_mm > 0) || !(cfg.halfwidth_mm > 0) || cfg.directions < 1 ||
        !(cfg.distal_fraction > 0) || cfg.distal_fraction > 1)
        throw input_error("sections: invalid section configuration");
    line.validate();

    double total = line.total_length();
    int n_planes = static_cast<int>(std::floor(total / cfg.step_mm + 1e-9)) + 1;
    double delta = lumen.spacing[0] / 4.0;       // area sampling pitch
    double march = lumen.spacing[0] / 8.0;       // diameter marching pitch
    int half_samples = static_cast<int>(std::ceil(cfg.halfwidth_mm / delta));

    struct PlaneResult {
        CrossSection cs;
        bool valid = false;
    };
    std::vector<PlaneResult> planes(static_cast<std::size_t>(n_planes));

    parallel_for_coarse(n_planes, [&](std::int64_t pi) {
        double s = static_cast<double>(pi) * cfg.step_mm;
        WorldPoint c = line.point_at(s);
        WorldPoint t = line.tangent_at(s);
        WorldPoint e1 = axis_e1(t);
        WorldPoint e2 = cross(t, e1);

        auto plane_pt = [&](double u, double v) {
            return WorldPoint{c.x + u * e1.x + v * e2.x, c.y + u * e1.y + v * e2.y,
                              c.z + u * e1.z + v * e2.z};
        };

        double half = cfg.halfwidth_mm / 2.0;
        if (!inside_hull(lumen, c) || !inside_hull(lumen, plane_pt(half, 0)) ||
            !inside_hull(lumen, plane_pt(-half, 0)) || !inside_hull(lumen, plane_pt(0, half)) ||
            !inside_hull(lumen, plane_pt(0, -half)))
            return;

        std::int64_t lumen_hits = 0, outer_hits = 0;
        double cu = 0.0, cv = 0.0;
        for (int a = -half_samples; a <= half_samples; ++a) {
            for (int b = -half_samples; b <= half_samples; ++b) {
                WorldPoint p = plane_pt(a * delta, b * delta);
                if (sample_mask_trilinear(lumen, p) >= 0.5) {
                    ++lumen_hits;
                    cu += a * delta;
                    cv += b * delta;
                }
                if (sample_mask_trilinear(outer, p) >= 0.5) ++outer_hits;
            }
        }
        if (lumen_hits == 0) return;
        cu /= static_cast<double>(lumen_hits);
        cv /= static_cast<double>(lumen_hits);

        double min_chord = std::numeric_limits<double>::infinity();
        if (sample_mask_trilinear(lumen, plane_pt(cu, cv)) < 0.5) {
            min_chord = 0.0;  // centroid fell outside a non-convex lumen slice
        } else {
            for (int dir = 0; dir < cfg.directions; ++dir) {
                double th = M_PI * static_cast<double>(dir) / static_cast<double>(cfg.directions);
                double du = std::cos(th), dv = std::sin(th);
                double fwd = 0.0, bak = 0.0;
                double limit = 2.0 * cfg.halfwidth_mm;
                while (fwd < limit &&
                       sample_mask_trilinear(lumen, plane_pt(cu + (fwd + march) * du,
                                                             cv + (fwd + march) * dv)) >= 0.5)
                    fwd += march;
                while (bak < limit &&
                       sample_mask_trilinear(lumen, plane_pt(cu - (bak + march) * du,
                                                             cv - (bak + march) * dv)) >= 0.5)
                    bak += march;
                min_chord = std::min(min_chord, fwd + bak);
            }
        }

        PlaneResult& out = planes[static_cast<std::size_t>(pi)];
        out.cs.s_mm = s;
        out.cs.lumen_area_mm2 = static_cast<double>(lumen_hits) * delta * delta;
        out.cs.outer_area_mm2 = static_cast<double>(outer_hits) * delta * delta;
        out.cs.lumen_min_diameter_mm = std::isfinite(min_chord) ? min_chord : 0.0;
        out.valid = true;
    });

    std::vector<CrossSection> sections;
    for (const PlaneResult& p : planes)
        if (p.valid) sections.push_back(p.cs);
    return sections;
}

VesselMetrics summarize_sections(const std::vector<CrossSection>& sections,
                                 const SectionConfig& cfg) {
    if (sections.size() < 5)
        throw input_error("metrics need at least 5 usable cross-sections, got " +
                          std::to_string(sections.size()));

    VesselMetrics m;
    m.section_count = static_cast<int>(sections.size());
    m.length_mm = sections.back().s_mm - sections.front().s_mm;

    std::size_t mld_at = 0;
    m.mla_mm2 = std::numeric_limits<double>::infinity();
    m.mld_mm = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sections.size(); ++i) {
        m.mla_mm2 = std::min(m.mla_mm2, sections[i].lumen_area_mm2);
        if (sections[i].lumen_min_diameter_mm < m.mld_mm) {
            m.mld_mm = sections[i].lumen_min_diameter_mm;
            mld_at = i;
        }
    }

    std::size_t n = sections.size();
    std::size_t distal =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.distal_fraction *
                                                                       static_cast<double>(n))));
    double ref = 0.0;
    for (std::size_t i = n - distal; i < n; ++i) ref += sections[i].lumen_min_diameter_mm;
    ref /= static_cast<double>(distal);

    double outer_d = 2.0 * std::sqrt(sections[mld_at].outer_area_mm2 / M_PI);
    m.ds1 = outer_d > 0 ? 1.0 - m.mld_mm / outer_d : 0.0;
    m.ds2 = ref > 0 ? 1.0 - m.mld_mm / ref : 0.0;

    double mean = 0.0;
    for (const CrossSection& s : sections) {
        double pb = s.outer_area_mm2 > 0
                        ? (s.outer_area_mm2 - s.lumen_area_mm2) / s.outer_area_mm2
                        : 0.0;
        mean += pb;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const CrossSection& s : sections) {
        double pb = s.outer_area_mm2 > 0
                        ? (s.outer_area_mm2 - s.lumen_area_mm2) / s.outer_area_mm2
                        : 0.0;
        var += (pb - mean) * (pb - mean);
    }
    m.plaque_burden_mean = mean;
    m.plaque_burden_sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    return m;
}

void write_report_json(const VesselReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["summary"] = {{"mla_mm2", report.metrics.mla_mm2},
                    {"mld_mm", report.metrics.mld_mm},
                    {"ds1", report.metrics.ds1},
                    {"ds2", report.metrics.ds2},
                    {"plaque_burden_mean", report.metrics.plaque_burden_mean},
                    {"plaque_burden_sd", report.metrics.plaque_burden_sd},
                    {"length_mm", report.metrics.length_mm},
                    {"section_count", report.metrics.section_count},
                    {"mean_lumen_hu", report.mean_lumen_hu},
                    {"median_lumen_hu", report.median_lumen_hu}};
    nlohmann::ordered_json secs = nlohmann::ordered_json::array();
    for (const CrossSection& s : report.sections) {
        secs.push_back({{"s_mm", s.s_mm},
                        {"lumen_area_mm2", s.lumen_area_mm2},
                        {"lumen_min_diameter_mm", s.lumen_min_diameter_mm},
                        {"outer_area_mm2", s.outer_area_mm2}});
    }
    j["sections"] = std::move(secs);

    std::ofstream os(path);
    if (!os) throw input_error("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
    if (!os) throw input_error("failed while writing '" + path + "'");
}

void write_sections_csv(const std::vector<CrossSection>& sections, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot open '" + path + "' for writing");
    os << "s_mm,lumen_area_mm2,lumen_min_diameter_mm,outer_area_mm2\n";
    char buf[160];
    for (const CrossSection& s : sections) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", s.s_mm, s.lumen_area_mm2,
                      s.lumen_min_diameter_mm, s.outer_area_mm2);
        os << buf;
    }
    if (!os) throw input_error("failed while writing '" + path + "'");
}

} // namespace corseg
