#include "corseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "corseg/parallel.hpp"

namespace corseg {

namespace {

constexpr double kAxisStep = 0.05;    // mm, densified axis used for distance queries
constexpr double kTruthStep = 0.25;   // mm, ground-truth centerline step
constexpr double kSectionStep = 0.5;  // mm, analytic section table step
constexpr double kDipFloor = 0.01;    // relative dip below which a calcified annulus is off

WorldPoint path_point(const PhantomSpec& sp, double s) {
    switch (sp.path) {
        case PathKind::straight:
            return {0.0, 0.0, s};
        case PathKind::arc: {
            double R = sp.arc_radius_mm;
            return {R * std::sin(s / R), R * (1.0 - std::cos(s / R)), 0.0};
        }
        case PathKind::helix: {
            double a = sp.helix_radius_mm;
            double c = sp.helix_pitch_mm / (2.0 * M_PI);
            double phi = s / std::sqrt(a * a + c * c);
            return {a * std::cos(phi), a * std::sin(phi), c * phi};
        }
    }
    return {0.0, 0.0, s};
}

WorldPoint path_tangent(const PhantomSpec& sp, double s) {
    switch (sp.path) {
        case PathKind::straight:
            return {0.0, 0.0, 1.0};
        case PathKind::arc:
            return {std::cos(s / sp.arc_radius_mm), std::sin(s / sp.arc_radius_mm), 0.0};
        case PathKind::helix: {
            double a = sp.helix_radius_mm;
            double c = sp.helix_pitch_mm / (2.0 * M_PI);
            double q = std::sqrt(a * a + c * c);
            double phi = s / q;
            return {-a * std::sin(phi) / q, a * std::cos(phi) / q, c / q};
        }
    }
    return {0.0, 0.0, 1.0};
}

// Densified axis with a coarse-then-fine nearest-point query. The coarse scan
// always covers the whole curve so results never depend on traversal order.
struct AxisCurve {
    std::vector<WorldPoint> pts;
    std::vector<double> svals;

    void build(const PhantomSpec& sp) {
        int n = std::max(2, static_cast<int>(std::ceil(sp.length_mm / kAxisStep)) + 1);
        pts.resize(static_cast<std::size_t>(n));
        svals.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double s = std::min(sp.length_mm, i * kAxisStep);
            pts[static_cast<std::size_t>(i)] = path_point(sp, s);
            svals[static_cast<std::size_t>(i)] = s;
        }
        pts.back() = path_point(sp, sp.length_mm);
        svals.back() = sp.length_mm;
    }

    // Nearest point on the polyline. A non-negative hint restricts the search
    // to a window around that node; hint < 0 scans the whole curve coarsely.
    void nearest(const WorldPoint& p, int hint, double& dist, double& s_out, int& node_out) const {
        int n = static_cast<int>(pts.size());
        int lo = 0, hi = n - 1;
        if (hint < 0) {
            int stride = n > 64 ? 8 : 1;
            double best = std::numeric_limits<double>::infinity();
            int bi = 0;
            for (int i = 0; i < n; i += stride) {
                WorldPoint d = p - pts[static_cast<std::size_t>(i)];
                double q = dot(d, d);
                if (q < best) {
                    best = q;
                    bi = i;
                }
            }
            {
                WorldPoint d = p - pts.back();
                double q = dot(d, d);
                if (q < best) {
                    best = q;
                    bi = n - 1;
                }
            }
            lo = std::max(0, bi - stride - 1);
            hi = std::min(n - 1, bi + stride + 1);
        } else {
            lo = std::max(0, hint - 16);
            hi = std::min(n - 1, hint + 16);
        }
        double best = std::numeric_limits<double>::infinity();
        double bs = svals[static_cast<std::size_t>(lo)];
        int bn = lo;
        for (int i = lo; i < hi; ++i) {
            const WorldPoint& a = pts[static_cast<std::size_t>(i)];
            const WorldPoint& b = pts[static_cast<std::size_t>(i + 1)];
            WorldPoint ab = b - a;
            WorldPoint ap = p - a;
            double len2 = dot(ab, ab);
            double t = len2 > 0.0 ? std::clamp(dot(ap, ab) / len2, 0.0, 1.0) : 0.0;
            WorldPoint q = ap - t * ab;
            double d2 = dot(q, q);
            if (d2 < best) {
                best = d2;
                bs = svals[static_cast<std::size_t>(i)] +
                     t * (svals[static_cast<std::size_t>(i + 1)] - svals[static_cast<std::size_t>(i)]);
                bn = t > 0.5 ? i + 1 : i;
            }
        }
        dist = std::sqrt(best);
        s_out = bs;
        node_out = bn;
    }
};

enum class Mat { background, wall, lumen, calcium };

double lumen_radius_at(const PhantomSpec& sp, double s) {
    double r = sp.lumen_radius_mm;
    const GaussianStenosis& st = sp.stenosis;
    if (st.depth > 0.0) {
        double sig = st.width_mm / 2.0;
        double g = std::exp(-(s - st.location_mm) * (s - st.location_mm) / (2.0 * sig * sig));
        r *= 1.0 - st.depth * g;
    }
    return r;
}

bool st_calcified(const PhantomSpec& sp) {
    return sp.stenosis.calcified && sp.stenosis.depth > 0.0;
}

double outer_radius_at(const PhantomSpec& sp, double s) {
    if (st_calcified(sp)) return sp.lumen_radius_mm + sp.wall_thickness_mm;
    return lumen_radius_at(sp, s) + sp.wall_thickness_mm;
}

struct Materializer {
    const PhantomSpec* sp;
    std::vector<WorldPoint> blob_centers;

    Mat classify(const WorldPoint& p, double d_axis, double s) const {
        for (std::size_t b = 0; b < blob_centers.size(); ++b) {
            WorldPoint d = p - blob_centers[b];
            double r = sp->blobs[b].radius_mm;
            if (dot(d, d) < r * r) return Mat::calcium;
        }
        double rl = lumen_radius_at(*sp, s);
        if (d_axis < rl) return Mat::lumen;
        if (st_calcified(*sp)) {
            double dip = sp->lumen_radius_mm - rl;
            if (dip > kDipFloor * sp->lumen_radius_mm && d_axis < sp->lumen_radius_mm)
                return Mat::calcium;
            if (d_axis < sp->lumen_radius_mm + sp->wall_thickness_mm) return Mat::wall;
            return Mat::background;
        }
        if (d_axis < rl + sp->wall_thickness_mm) return Mat::wall;
        return Mat::background;
    }

    double hu(Mat m) const {
        switch (m) {
            case Mat::background: return sp->background_hu;
            case Mat::wall: return sp->wall_hu;
            case Mat::lumen: return sp->lumen_hu;
            case Mat::calcium: return sp->calcium_hu;
        }
        return sp->background_hu;
    }

    // Distance from the sample to the closest material interface; cheap lower
    // bound used to decide which voxels need supersampling.
    double interface_distance(const WorldPoint& p, double d_axis, double s) const {
        double rl = lumen_radius_at(*sp, s);
        double m = std::abs(d_axis - rl);
        if (sp->wall_thickness_mm > 0.0)
            m = std::min(m, std::abs(d_axis - (rl + sp->wall_thickness_mm)));
        if (st_calcified(*sp)) {
            m = std::min(m, std::abs(d_axis - sp->lumen_radius_mm));
            if (sp->wall_thickness_mm > 0.0)
                m = std::min(m, std::abs(d_axis - (sp->lumen_radius_mm + sp->wall_thickness_mm)));
        }
        for (std::size_t b = 0; b < blob_centers.size(); ++b) {
            WorldPoint d = p - blob_centers[b];
            m = std::min(m, std::abs(norm(d) - sp->blobs[b].radius_mm));
        }
        return m;
    }
};

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double uniform01(std::uint64_t bits) {
    double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return u > 0x1.0p-53 ? u : 0x1.0p-53;
}

// One standard normal draw per voxel, keyed by (seed, index) only.
double counter_gauss(std::uint64_t seed, std::int64_t idx) {
    std::uint64_t i = static_cast<std::uint64_t>(idx);
    double u1 = uniform01(mix64(seed + 0x9E3779B97F4A7C15ull * (2 * i + 1)));
    double u2 = uniform01(mix64(seed + 0x9E3779B97F4A7C15ull * (2 * i + 2)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace

void PhantomSpec::validate() const {
    if (!(length_mm > 0.0)) throw input_error("phantom length must be positive");
    if (!(lumen_radius_mm > 0.0)) throw input_error("phantom lumen radius must be positive");
    if (wall_thickness_mm < 0.0) throw input_error("phantom wall thickness must be >= 0");
    if (path == PathKind::arc && !(arc_radius_mm > 0.0))
        throw input_error("arc radius must be positive");
    if (path == PathKind::helix && (!(helix_radius_mm > 0.0) || !(helix_pitch_mm > 0.0)))
        throw input_error("helix radius and pitch must be positive");
    if (stenosis.depth < 0.0 || stenosis.depth >= 1.0)
        throw input_error("stenosis depth fraction must lie in [0,1)");
    if (stenosis.depth > 0.0 && !(stenosis.width_mm > 0.0))
        throw input_error("stenosis width must be positive");
    for (const CalcBlob& b : blobs) {
        if (!(b.radius_mm > 0.0)) throw input_error("blob radius must be positive");
        if (b.offset_mm < 0.0) throw input_error("blob offset must be >= 0");
        if (b.s_mm < 0.0 || b.s_mm > length_mm)
            throw input_error("blob arclength must lie within the segment");
    }
    if (noise_sd < 0.0) throw input_error("noise sd must be >= 0");
    for (double s : spacing)
        if (!(s > 0.0)) throw input_error("phantom spacing must be positive");
    if (margin_mm < 0.0) throw input_error("phantom margin must be >= 0");
    if (seed_inset_mm < 0.0 || 2.0 * seed_inset_mm >= length_mm)
        throw input_error("seed inset must be >= 0 and leave the seeds distinct");
    if (max_grid_dim < 8) throw input_error("max grid dimension must be at least 8");
}

PhantomVolume generate(const PhantomSpec& spec) {
    spec.validate();

    AxisCurve axis;
    axis.build(spec);

    Materializer mat;
    mat.sp = &spec;
    for (const CalcBlob& b : spec.blobs) {
        WorldPoint t = path_tangent(spec, b.s_mm);
        WorldPoint e1 = std::abs(t.z) > 0.9 ? WorldPoint{1.0, 0.0, 0.0}
                                            : normalized(cross(t, WorldPoint{0.0, 0.0, 1.0}));
        WorldPoint e2 = cross(t, e1);
        mat.blob_centers.push_back(path_point(spec, b.s_mm) +
                                   b.offset_mm * std::cos(b.theta) * e1 +
                                   b.offset_mm * std::sin(b.theta) * e2);
    }

    // Bounding box: axis nodes inflated by the widest outer surface, plus blobs.
    double reach = spec.lumen_radius_mm + spec.wall_thickness_mm;
    WorldPoint lo = axis.pts.front(), hi = axis.pts.front();
    auto grow = [&](const WorldPoint& p, double r) {
        lo.x = std::min(lo.x, p.x - r);
        lo.y = std::min(lo.y, p.y - r);
        lo.z = std::min(lo.z, p.z - r);
        hi.x = std::max(hi.x, p.x + r);
        hi.y = std::max(hi.y, p.y + r);
        hi.z = std::max(hi.z, p.z + r);
    };
    for (const WorldPoint& p : axis.pts) grow(p, reach);
    for (std::size_t b = 0; b < mat.blob_centers.size(); ++b)
        grow(mat.blob_centers[b], spec.blobs[b].radius_mm);

    WorldPoint origin{lo.x - spec.margin_mm, lo.y - spec.margin_mm, lo.z - spec.margin_mm};
    GridDims dims;
    dims.nx = static_cast<int>(std::ceil((hi.x + spec.margin_mm - origin.x) / spec.spacing[0])) + 1;
    dims.ny = static_cast<int>(std::ceil((hi.y + spec.margin_mm - origin.y) / spec.spacing[1])) + 1;
    dims.nz = static_cast<int>(std::ceil((hi.z + spec.margin_mm - origin.z) / spec.spacing[2])) + 1;
    if (dims.nx > spec.max_grid_dim || dims.ny > spec.max_grid_dim || dims.nz > spec.max_grid_dim)
        throw input_error("phantom geometry exceeds the maximum grid size of " +
                          std::to_string(spec.max_grid_dim) + " voxels per axis");

    PhantomVolume out;
    out.image = VoxelGrid(dims, spec.spacing, origin, GridKind::intensity, spec.background_hu);
    out.truth.lumen = BinaryMask::like(out.image);
    out.truth.outer = BinaryMask::like(out.image);
    out.truth.plaque = BinaryMask::like(out.image);

    const double shell =
        0.5 * std::sqrt(spec.spacing[0] * spec.spacing[0] + spec.spacing[1] * spec.spacing[1] +
                        spec.spacing[2] * spec.spacing[2]) +
        0.05;
    const double ox = 0.25 * spec.spacing[0];
    const double oy = 0.25 * spec.spacing[1];
    const double oz = 0.25 * spec.spacing[2];

    auto& img = out.image.values();
    const std::int64_t n = out.image.size();
    parallel_ranges(n, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            int i, j, k;
            out.image.unindex(idx, i, j, k);
            WorldPoint p = out.image.voxel_to_world(i, j, k);
            double d, s;
            int node;
            axis.nearest(p, -1, d, s, node);

            Mat center = mat.classify(p, d, s);
            std::size_t v = static_cast<std::size_t>(idx);
            out.truth.lumen.values[v] = center == Mat::lumen ? 1 : 0;
            out.truth.outer.values[v] = center != Mat::background ? 1 : 0;
            out.truth.plaque.values[v] = center == Mat::calcium ? 1 : 0;

            if (mat.interface_distance(p, d, s) > shell) {
                img[v] = mat.hu(center);
                continue;
            }
            double acc = 0.0;
            for (int c = 0; c < 8; ++c) {
                WorldPoint q{p.x + ((c & 1) ? ox : -ox), p.y + ((c & 2) ? oy : -oy),
                             p.z + ((c & 4) ? oz : -oz)};
                double dq, sq;
                int nq;
                axis.nearest(q, node, dq, sq, nq);
                acc += mat.hu(mat.classify(q, dq, sq));
            }
            img[v] = acc / 8.0;
        }
    });

    if (spec.noise_sd > 0.0) {
        parallel_ranges(n, [&](std::int64_t begin, std::int64_t end) {
            for (std::int64_t idx = begin; idx < end; ++idx)
                img[static_cast<std::size_t>(idx)] +=
                    spec.noise_sd * counter_gauss(spec.noise_seed, idx);
        });
    }

    // Ground-truth centerline, seeds, analytic metrics, and section table.
    Centerline& line = out.truth.centerline;
    int steps = static_cast<int>(std::floor(spec.length_mm / kTruthStep));
    for (int i = 0; i <= steps; ++i) line.points.push_back(path_point(spec, i * kTruthStep));
    if (steps * kTruthStep < spec.length_mm - 1e-9)
        line.points.push_back(path_point(spec, spec.length_mm));
    line.rebuild_arclength();

    out.truth.seeds.start = path_point(spec, spec.seed_inset_mm);
    out.truth.seeds.end = path_point(spec, spec.length_mm - spec.seed_inset_mm);

    double min_r = spec.lumen_radius_mm * (1.0 - spec.stenosis.depth);
    out.truth.ds2 = spec.stenosis.depth;
    out.truth.mld_mm = 2.0 * min_r;
    out.truth.mla_mm2 = M_PI * min_r * min_r;

    int nsec = static_cast<int>(std::floor(spec.length_mm / kSectionStep));
    for (int i = 0; i <= nsec; ++i) {
        TrueSection ts;
        ts.s_mm = i * kSectionStep;
        ts.lumen_radius_mm = lumen_radius_at(spec, ts.s_mm);
        ts.lumen_area_mm2 = M_PI * ts.lumen_radius_mm * ts.lumen_radius_mm;
        ts.outer_radius_mm = outer_radius_at(spec, ts.s_mm);
        ts.outer_area_mm2 = M_PI * ts.outer_radius_mm * ts.outer_radius_mm;
        out.truth.sections.push_back(ts);
    }
    return out;
}

std::vector<PhantomSpec> default_recipes() {
    std::vector<PhantomSpec> r;

    PhantomSpec clean;
    clean.name = "clean-straight";
    r.push_back(clean);

    PhantomSpec sten;
    sten.name = "stenosed-50";
    sten.lumen_radius_mm = 1.6;
    sten.wall_thickness_mm = 0.0;
    sten.stenosis.location_mm = 20.0;
    sten.stenosis.depth = 0.5;
    sten.stenosis.width_mm = 4.0;
    sten.stenosis.calcified = true;
    r.push_back(sten);

    PhantomSpec arc;
    arc.name = "arc-bend";
    arc.path = PathKind::arc;
    arc.arc_radius_mm = 25.0;
    arc.length_mm = 25.0 * 1.2566370614359172;  // 72 degree bend
    r.push_back(arc);

    PhantomSpec helix;
    helix.name = "helical";
    helix.path = PathKind::helix;
    helix.helix_radius_mm = 10.0;
    helix.helix_pitch_mm = 20.0;
    helix.length_mm = 50.0;
    r.push_back(helix);

    PhantomSpec blobs;
    blobs.name = "calcified-two-blob";
    blobs.lumen_radius_mm = 1.6;
    blobs.wall_thickness_mm = 0.8;
    blobs.calcium_hu = 950.0;  // lumen level + 600
    blobs.spacing = {0.2, 0.2, 0.2};
    blobs.blobs.push_back({15.0, 0.0, 1.35, 1.0});
    blobs.blobs.push_back({25.0, M_PI, 1.35, 1.0});
    r.push_back(blobs);

    PhantomSpec noisy = clean;
    noisy.name = "noisy-sd30";
    noisy.noise_sd = 30.0;
    r.push_back(noisy);

    PhantomSpec zero = clean;
    zero.name = "zero-wall";
    zero.wall_thickness_mm = 0.0;
    r.push_back(zero);

    PhantomSpec bright;
    bright.name = "bright-wall";
    bright.lumen_radius_mm = 1.6;
    bright.wall_thickness_mm = 1.0;
    bright.wall_hu = 300.0;
    r.push_back(bright);

    return r;
}

PhantomSpec recipe_by_name(const std::string& name) {
    std::vector<PhantomSpec> recipes = default_recipes();
    for (PhantomSpec& s : recipes)
        if (s.name == name) return s;
    std::string known;
    for (const PhantomSpec& s : recipes) {
        if (!known.empty()) known += ", ";
        known += s.name;
    }
    throw input_error("unknown phantom recipe '" + name + "' (known: " + known + ")");
}

} // namespace corseg
