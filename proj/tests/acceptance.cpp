// Acceptance suite: eleven release criteria, one pass/fail line each.
// Exits nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "corseg/fast_marching.hpp"
#include "corseg/level_set.hpp"
#include "corseg/mesh.hpp"
#include "corseg/metrics.hpp"
#include "corseg/phantom.hpp"
#include "corseg/pipeline.hpp"
#include "corseg/vesselness.hpp"
#include "corseg/volume_io.hpp"
#include "corseg/voxel_grid.hpp"

using namespace corseg;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
    va_list ap;
    va_start(ap, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double point_segment_dist(const WorldPoint& p, const WorldPoint& a, const WorldPoint& b) {
    WorldPoint ab = b - a;
    double len2 = dot(ab, ab);
    if (len2 < 1e-18) return norm(p - a);
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

// Distance from each extracted point to the true axis polyline, in units of
// the smallest voxel spacing.
void axis_deviation(const Centerline& got, const Centerline& truth, double vox_mm,
                    double& mean_vox, double& max_vox) {
    double sum = 0.0, worst = 0.0;
    for (const WorldPoint& p : got.points) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s + 1 < truth.points.size(); ++s)
            best = std::min(best, point_segment_dist(p, truth.points[s], truth.points[s + 1]));
        sum += best;
        worst = std::max(worst, best);
    }
    mean_vox = sum / (static_cast<double>(got.points.size()) * vox_mm);
    max_vox = worst / vox_mm;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- criterion 1

void criterion_1() {
    const int n = 41, c = 20;
    VoxelGrid speed({n, n, n}, {1, 1, 1}, {0, 0, 0}, GridKind::weight, 1.0);
    WorldPoint seed{double(c), double(c), double(c)};

    auto t0 = std::chrono::steady_clock::now();
    ArrivalTimeField T1 = fast_march(speed, {seed});
    double secs = seconds_since(t0);

    double worst = 0.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double r = std::sqrt(double((i - c) * (i - c) + (j - c) * (j - c) +
                                            (k - c) * (k - c)));
                if (r < 10.0) continue;
                worst = std::max(worst, std::abs(T1.times(i, j, k) - r) / r);
            }

    VoxelGrid half = speed;
    for (double& v : half.values()) v = 0.5;
    ArrivalTimeField T2 = fast_march(half, {seed});
    double worst_ratio = 0.0;
    for (std::size_t v = 0; v < T1.times.values().size(); ++v) {
        double a = T1.times.values()[v];
        if (a <= 0.0) continue;
        worst_ratio = std::max(worst_ratio, std::abs(T2.times.values()[v] - 2.0 * a) / (2.0 * a));
    }

    bool ok = worst <= 0.02 && worst_ratio <= 1e-9 && secs < 1.0;
    report(1, ok,
           fmt("eikonal 41^3: rel err %.4f at r>=10 (<=0.02), speed-halving dev %.2e (<=1e-9), "
               "%.2f s (<1)",
               worst, worst_ratio, secs));
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
    bool ok = true;
    std::string detail = "centerline deviation vox (mean/max)";
    for (const char* name : {"clean-straight", "arc-bend", "helical"}) {
        PhantomVolume pv = generate(recipe_by_name(name));
        auto t0 = std::chrono::steady_clock::now();
        VoxelGrid wv = frangi_vesselness(pv.image, FrangiParams{});
        Centerline line = extract_centerline(pv.image, wv, pv.truth.seeds, ThresholdConfig{});
        double secs = seconds_since(t0);
        double vox = *std::min_element(pv.image.spacing().begin(), pv.image.spacing().end());
        double mean_v = 0.0, max_v = 0.0;
        axis_deviation(line, pv.truth.centerline, vox, mean_v, max_v);
        ok = ok && mean_v <= 0.5 && max_v <= 1.0 && secs < 10.0;
        detail += fmt("  %s %.2f/%.2f in %.1f s", name, mean_v, max_v, secs);
    }
    report(2, ok, detail + "  (mean<=0.5, max<=1, <10 s each)");
}

// ------------------------------------------------- criteria 3, 10, 11 runners

struct PipelineRun {
    SegmentationResult res;
    double seconds = 0.0;
};

PipelineRun run_on(const PhantomVolume& pv, const PipelineConfig& cfg) {
    PipelineRun r;
    auto t0 = std::chrono::steady_clock::now();
    r.res = run_pipeline(pv.image, pv.truth.seeds, cfg);
    r.seconds = seconds_since(t0);
    return r;
}

// Serializes the artifacts a run would ship and returns the concatenated bytes.
std::vector<char> artifact_bytes(const SegmentationResult& res,
                                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_mask(res.lumen_mask, (dir / "lumen.nrrd").string());
    write_mask(res.outer_mask, (dir / "outer.nrrd").string());
    write_mask(res.plaque_mask, (dir / "plaque.nrrd").string());
    write_stl_binary(marching_cubes(res.phi_lumen, 0.0), (dir / "lumen.stl").string());
    write_stl_binary(marching_cubes(res.phi_outer, 0.0), (dir / "outer.stl").string());
    VesselReport rep;
    rep.sections = slice_sections(res.lumen_mask, res.outer_mask, res.centerline);
    rep.metrics = summarize_sections(rep.sections);
    rep.mean_lumen_hu = res.mean_lumen_hu;
    rep.median_lumen_hu = res.median_lumen_hu;
    write_report_json(rep, (dir / "report.json").string());

    std::vector<char> all;
    for (const char* f : {"lumen.nrrd", "outer.nrrd", "plaque.nrrd", "lumen.stl", "outer.stl",
                          "report.json"}) {
        std::vector<char> b = file_bytes(dir / f);
        all.insert(all.end(), b.begin(), b.end());
    }
    return all;
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
    PhantomVolume pv = generate(recipe_by_name("stenosed-50"));
    PipelineRun run = run_on(pv, PipelineConfig{});
    std::vector<CrossSection> secs =
        slice_sections(run.res.lumen_mask, run.res.outer_mask, run.res.centerline);
    VesselMetrics m = summarize_sections(secs);
    double ds2_err = std::abs(m.ds2 - pv.truth.ds2);
    double mla_rel = std::abs(m.mla_mm2 - pv.truth.mla_mm2) / pv.truth.mla_mm2;
    bool ok = ds2_err <= 0.08 && mla_rel <= 0.15;
    report(4, ok,
           fmt("stenosed-50: ds2 %.3f vs %.3f (|err| %.3f <= 0.08), mla %.3f vs %.3f (%.1f%% <= 15%%)",
               m.ds2, pv.truth.ds2, ds2_err, m.mla_mm2, pv.truth.mla_mm2, 100.0 * mla_rel));
}

// ---------------------------------------------------------------- criterion 5

void criterion_5() {
    PhantomVolume pv = generate(recipe_by_name("calcified-two-blob"));
    PipelineConfig cfg;
    cfg.outer_roi_dilation = 12;  // wide eccentric blobs need the wider wall ROI
    PipelineRun run = run_on(pv, cfg);

    const BinaryMask& tp = pv.truth.plaque;
    const BinaryMask& pred = run.res.plaque_mask;
    int zmin = tp.dims.nz, zmax = -1;
    for (int k = 0; k < tp.dims.nz; ++k)
        for (int j = 0; j < tp.dims.ny && zmax < k; ++j)
            for (int i = 0; i < tp.dims.nx; ++i)
                if (tp(i, j, k)) {
                    zmin = std::min(zmin, k);
                    zmax = k;
                    break;
                }
    int zmid = (zmin + zmax) / 2;  // blobs sit at distinct arclengths along z

    std::int64_t b1 = 0, b2 = 0, hit1 = 0, hit2 = 0, in_lumen = 0;
    for (int k = 0; k < tp.dims.nz; ++k)
        for (int j = 0; j < tp.dims.ny; ++j)
            for (int i = 0; i < tp.dims.nx; ++i) {
                bool p = pred(i, j, k) != 0;
                if (tp(i, j, k)) {
                    (k <= zmid ? b1 : b2) += 1;
                    if (p) (k <= zmid ? hit1 : hit2) += 1;
                }
                if (p && pv.truth.lumen(i, j, k)) ++in_lumen;
            }
    double r1 = b1 ? double(hit1) / double(b1) : 0.0;
    double r2 = b2 ? double(hit2) / double(b2) : 0.0;
    bool ok = r1 >= 0.8 && r2 >= 0.8 && in_lumen == 0;
    report(5, ok,
           fmt("two-blob: recalls %.3f / %.3f (>=0.8 each), plaque voxels in true lumen %lld (==0)",
               r1, r2, static_cast<long long>(in_lumen)));
}

// ---------------------------------------------------------------- criterion 6

void criterion_6() {
    std::mt19937_64 rng(20260817u);
    bool ok = true;
    double worst_dice = 0.0, worst_h = 0.0;
    for (int pair = 0; pair < 200 && ok; ++pair) {
        std::uniform_int_distribution<int> dim(3, 20);
        GridDims d{dim(rng), dim(rng), dim(rng)};
        std::uniform_real_distribution<double> sp(0.3, 1.5);
        std::array<double, 3> spacing{sp(rng), sp(rng), sp(rng)};
        std::uniform_real_distribution<double> dens(0.05, 0.6);
        double da = dens(rng), db = dens(rng);
        BinaryMask a(d, spacing, {0, 0, 0}), b(d, spacing, {0, 0, 0});
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (std::size_t v = 0; v < a.values.size(); ++v) {
            a.values[v] = u01(rng) < da;
            b.values[v] = u01(rng) < db;
        }
        if (a.empty()) a.values[rng() % a.values.size()] = 1;
        if (b.empty()) b.values[rng() % b.values.size()] = 1;

        // brute dice
        std::int64_t na = 0, nb = 0, ni = 0;
        for (std::size_t v = 0; v < a.values.size(); ++v) {
            na += a.values[v] != 0;
            nb += b.values[v] != 0;
            ni += a.values[v] && b.values[v];
        }
        double bd = (na + nb == 0) ? 1.0 : 2.0 * double(ni) / double(na + nb);

        // brute hausdorff over boundary voxel centers, no pruning
        auto boundary = [&](const BinaryMask& m) {
            std::vector<WorldPoint> pts;
            for (int k = 0; k < d.nz; ++k)
                for (int j = 0; j < d.ny; ++j)
                    for (int i = 0; i < d.nx; ++i) {
                        if (!m(i, j, k)) continue;
                        auto bg = [&](int x, int y, int z) {
                            if (!d.contains(x, y, z)) return true;
                            return m(x, y, z) == 0;
                        };
                        if (bg(i - 1, j, k) || bg(i + 1, j, k) || bg(i, j - 1, k) ||
                            bg(i, j + 1, k) || bg(i, j, k - 1) || bg(i, j, k + 1))
                            pts.push_back(m.voxel_to_world(i, j, k));
                    }
            return pts;
        };
        auto directed = [](const std::vector<WorldPoint>& from,
                           const std::vector<WorldPoint>& to) {
            double worst = 0.0;
            for (const WorldPoint& p : from) {
                double best = std::numeric_limits<double>::infinity();
                for (const WorldPoint& q : to) {
                    double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                }
                worst = std::max(worst, best);
            }
            return worst;
        };
        std::vector<WorldPoint> pa = boundary(a), pb = boundary(b);
        double bh = std::sqrt(std::max(directed(pa, pb), directed(pb, pa)));

        double ld = dice(a, b);
        double lh = hausdorff_mm(a, b);
        worst_dice = std::max(worst_dice, std::abs(ld - bd));
        worst_h = std::max(worst_h, std::abs(lh - bh));
        ok = ok && ld == bd && lh == bh;
    }
    report(6, ok,
           fmt("dice/hausdorff vs brute force on 200 random pairs: max |dice dev| %.1e, max "
               "|hausdorff dev| %.1e (exact match required)",
               worst_dice, worst_h));
}

// ---------------------------------------------------------------- criterion 7

void criterion_7() {
    const int n = 27;
    const double r = 10.0, c = 13.0;
    VoxelGrid phi({n, n, n}, {1, 1, 1}, {0, 0, 0}, GridKind::phi, 0.0);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                phi(i, j, k) = r - std::sqrt((i - c) * (i - c) + (j - c) * (j - c) +
                                             (k - c) * (k - c));
    TriangleMesh mesh = marching_cubes(phi, 0.0);

    // independent watertight check: every undirected edge on exactly 2 triangles
    auto key = [](std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (std::uint64_t(a) << 32) | b;
    };
    std::vector<std::uint64_t> ek;
    ek.reserve(mesh.triangles.size() * 3);
    for (const auto& t : mesh.triangles) {
        ek.push_back(key(t[0], t[1]));
        ek.push_back(key(t[1], t[2]));
        ek.push_back(key(t[2], t[0]));
    }
    std::sort(ek.begin(), ek.end());
    bool watertight = !ek.empty();
    for (std::size_t i = 0; i < ek.size();) {
        std::size_t j = i;
        while (j < ek.size() && ek[j] == ek[i]) ++j;
        if (j - i != 2) {
            watertight = false;
            break;
        }
        i = j;
    }

    double area = surface_area(mesh);
    double truth = 4.0 * 3.14159265358979323846 * r * r;
    double rel = std::abs(area - truth) / truth;
    double vol = signed_volume(mesh);
    bool ok = watertight && rel <= 0.03 && vol > 0.0;
    report(7, ok,
           fmt("sphere r=10 mesh: watertight %s, area %.1f vs %.1f (%.2f%% <= 3%%), signed "
               "volume %.0f (> 0)",
               watertight ? "yes" : "no", area, truth, 100.0 * rel, vol));
}

// ---------------------------------------------------------------- criterion 8

void criterion_8() {
    GridDims d{24, 24, 24};
    BinaryMask truth(d, {1, 1, 1}, {0, 0, 0});
    VoxelGrid u(d, {1, 1, 1}, {0, 0, 0}, GridKind::intensity, 0.0);
    for (int k = 0; k < 24; ++k)
        for (int j = 0; j < 24; ++j)
            for (int i = 0; i < 24; ++i) {
                double dx = i - 11.5, dy = j - 11.5, dz = k - 11.5;
                if (dx * dx + dy * dy + dz * dz <= 6.5 * 6.5) {
                    truth(i, j, k) = 1;
                    u(i, j, k) = 1000.0;
                }
            }
    // deliberately poor initialization: small and off-center
    BinaryMask init(d, {1, 1, 1}, {0, 0, 0});
    for (int k = 0; k < 24; ++k)
        for (int j = 0; j < 24; ++j)
            for (int i = 0; i < 24; ++i) {
                double dx = i - 9.5, dy = j - 10.5, dz = k - 11.5;
                if (dx * dx + dy * dy + dz * dz <= 3.5 * 3.5) init(i, j, k) = 1;
            }
    SparseFieldState st = init_from_mask(init, &u);
    LevelSetParams p;
    p.curvature_factor = 0.2;
    p.iterations = 200;
    double e0 = total_energy(st, u, p);
    evolve(st, u, p);
    double ef = total_energy(st, u, p);
    double dc = dice(mask_from_phi(st.phi), truth);
    bool ok = ef <= e0 && dc >= 0.98;
    report(8, ok,
           fmt("two-region image: energy %.4g -> %.4g (non-increasing), dice %.4f (>= 0.98)", e0,
               ef, dc));
}

// ---------------------------------------------------------------- criterion 9

void criterion_9() {
    PipelineConfig c;
    bool ok = c.thresholds.l_thres == 80.0 && c.thresholds.cp_thres == 400.0 &&
              c.thresholds.ncp_thres == 50.0 && c.thresholds.epsilon == 0.05 &&
              c.thresholds.wi == 1000.0 && c.thresholds.lumen_gate_center == 2.0 &&
              c.thresholds.outer_gate_center == 2.5 && c.thresholds.gate_cutoff == 4.0 &&
              c.lumen_pass1.curvature_factor == 0.1 && c.lumen_pass2.curvature_factor == 0.6 &&
              c.outer_pass1.curvature_factor == 0.1 && c.outer_pass2.curvature_factor == 0.6 &&
              c.plaque.curvature_factor == 0.5 && c.lumen_pass1.iterations == 200 &&
              c.lumen_pass2.iterations == 200 && c.outer_pass1.iterations == 200 &&
              c.outer_pass2.iterations == 200 && c.plaque.iterations == 200;
    report(9, ok,
           "default config: l_thres 80, cp_thres 400, ncp_thres 50, eps 0.05, wi 1000, gates "
           "2.0/2.5 mm cutoff 4.0 mm, curvature 0.1/0.6 + 0.5, 200 iterations per pass");
}

} // namespace

int main() {
    criterion_1();
    criterion_2();

    // Shared pipeline runs for criteria 3, 10, 11.
    PhantomVolume clean = generate(recipe_by_name("clean-straight"));
    PipelineRun clean1 = run_on(clean, PipelineConfig{});
    PhantomVolume heli = generate(recipe_by_name("helical"));
    PipelineRun heli1 = run_on(heli, PipelineConfig{});
    PhantomVolume noisy = generate(recipe_by_name("noisy-sd30"));
    PipelineRun noisy1 = run_on(noisy, PipelineConfig{});

    double d_clean = dice(clean1.res.lumen_mask, clean.truth.lumen);
    double d_heli = dice(heli1.res.lumen_mask, heli.truth.lumen);
    double d_noisy = dice(noisy1.res.lumen_mask, noisy.truth.lumen);
    report(3, d_clean >= 0.90 && d_heli >= 0.90 && d_noisy >= 0.85,
           fmt("lumen dice: clean %.4f (>=0.90), helical %.4f (>=0.90), noisy-sd30 %.4f (>=0.85)",
               d_clean, d_heli, d_noisy));

    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();

    report(10, clean1.seconds < 60.0,
           fmt("full pipeline on the 40 mm / 0.4 mm phantom: %.1f s (< 60)", clean1.seconds));

    PipelineRun clean2 = run_on(clean, PipelineConfig{});
    std::filesystem::path tmp = std::filesystem::temp_directory_path() / "corseg_acceptance";
    std::vector<char> run1 = artifact_bytes(clean1.res, tmp / "run1");
    std::vector<char> run2 = artifact_bytes(clean2.res, tmp / "run2");
    report(11, !run1.empty() && run1 == run2,
           fmt("determinism: masks + meshes + report byte-identical across two runs (%zu bytes)",
               run1.size()));

    if (g_failures) std::printf("%d criteria failed\n", g_failures);
    return g_failures ? 1 : 0;
}
