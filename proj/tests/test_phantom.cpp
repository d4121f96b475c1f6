#include <doctest.h>

#include <cmath>

#include "corseg/metrics.hpp"
#include "corseg/phantom.hpp"

using namespace corseg;

TEST_SUITE_BEGIN("phantom");

TEST_CASE("recipes materialize with sane intensities") {
    PhantomVolume ph = generate(recipe_by_name("clean-straight"));
    CHECK(ph.image.dims().nx > 10);
    CHECK(ph.truth.lumen.count() > 0);

    // interior lumen voxels sit at the lumen intensity
    double hu_at_seed_axis = ph.image.sample_trilinear(ph.truth.seeds.start);
    CHECK(hu_at_seed_axis == doctest::Approx(350.0).epsilon(0.02));
    // far corner is background
    CHECK(ph.image(0, 0, 0) == doctest::Approx(0.0));

    PhantomVolume calc = generate(recipe_by_name("calcified-two-blob"));
    CHECK(calc.truth.plaque.count() > 0);
    double peak = -1e300;
    for (double v : calc.image.values()) peak = std::max(peak, v);
    CHECK(peak > 500.0);  // calcium clearly above every soft-tissue value
}

TEST_CASE("truth masks are nested") {
    for (const char* name : {"clean-straight", "stenosed-50", "calcified-two-blob"}) {
        CAPTURE(name);
        PhantomVolume ph = generate(recipe_by_name(name));
        const auto& lum = ph.truth.lumen.values;
        const auto& out = ph.truth.outer.values;
        const auto& pla = ph.truth.plaque.values;
        bool lumen_in_outer = true, plaque_in_outer = true, plaque_off_lumen = true;
        for (std::size_t v = 0; v < lum.size(); ++v) {
            if (lum[v] && !out[v]) lumen_in_outer = false;
            if (pla[v] && !out[v]) plaque_in_outer = false;
            if (pla[v] && lum[v]) plaque_off_lumen = false;
        }
        CHECK(lumen_in_outer);
        CHECK(plaque_in_outer);
        CHECK(plaque_off_lumen);
    }
}

TEST_CASE("noisy recipe differs from its clean twin only by noise") {
    PhantomSpec clean = recipe_by_name("clean-straight");
    PhantomSpec noisy = recipe_by_name("noisy-sd30");
    CHECK(noisy.noise_sd == doctest::Approx(30.0));
    noisy.noise_sd = 0.0;
    noisy.name = clean.name;
    PhantomVolume a = generate(clean);
    PhantomVolume b = generate(noisy);
    REQUIRE(a.image.dims() == b.image.dims());
    CHECK(a.image.values() == b.image.values());
}

TEST_CASE("generation is deterministic") {
    PhantomSpec spec = recipe_by_name("noisy-sd30");
    PhantomVolume a = generate(spec);
    PhantomVolume b = generate(spec);
    CHECK(a.image.values() == b.image.values());
    CHECK(a.truth.lumen.values == b.truth.lumen.values);

    spec.noise_seed ^= 0x1234;
    PhantomVolume c = generate(spec);
    CHECK(a.image.values() != c.image.values());
}

TEST_CASE("stenosed recipe carries the analytic severity") {
    PhantomSpec spec = recipe_by_name("stenosed-50");
    CHECK(spec.stenosis.depth == doctest::Approx(0.5));
    PhantomVolume ph = generate(spec);
    CHECK(ph.truth.ds2 == doctest::Approx(0.5).epsilon(1e-6));
    double r_min = spec.lumen_radius_mm * (1.0 - spec.stenosis.depth);
    CHECK(ph.truth.mla_mm2 == doctest::Approx(3.14159265358979 * r_min * r_min).epsilon(1e-6));
    CHECK(ph.truth.mld_mm == doctest::Approx(2.0 * r_min).epsilon(1e-6));
    CHECK(ph.truth.plaque.count() > 0);  // the calcified annulus
}

TEST_CASE("voxelized truth agrees with the analytic sections") {
    PhantomVolume ph = generate(recipe_by_name("stenosed-50"));
    // trim the ends: cross-sections near the caps probe outside the volume
    Centerline inner;
    const Centerline& full = ph.truth.centerline;
    double lo = 6.0, hi = full.total_length() - 6.0;
    for (std::size_t i = 0; i < full.points.size(); ++i)
        if (full.arclength[i] >= lo && full.arclength[i] <= hi)
            inner.points.push_back(full.points[i]);
    inner.rebuild_arclength();

    std::vector<CrossSection> secs = slice_sections(ph.truth.lumen, ph.truth.outer, inner);
    REQUIRE(secs.size() >= 5);
    // Areas measured on the voxelized mask run systematically low: the 0.5
    // level of the trilinear mask sits about a quarter voxel inside the true
    // boundary, which costs ~11% of area at radius 1.6 mm on 0.4 mm voxels
    // and more where the radius dips. Absolute areas are therefore held to
    // bounds that include that bias, and the shape of the profile is pinned
    // through bias-cancelling ratios below.
    double worst_wide = 0.0, worst_any = 0.0;
    for (const CrossSection& cs : secs) {
        double s_global = cs.s_mm + lo;
        // find the matching analytic section
        double want = -1.0, want_r = -1.0;
        for (const TrueSection& ts : ph.truth.sections)
            if (std::abs(ts.s_mm - s_global) < 0.26) {
                want = ts.lumen_area_mm2;
                want_r = ts.lumen_radius_mm;
            }
        if (want < 0) continue;
        double rel = std::abs(cs.lumen_area_mm2 - want) / want;
        worst_any = std::max(worst_any, rel);
        if (want_r >= 1.2) worst_wide = std::max(worst_wide, rel);
    }
    CHECK(worst_wide < 0.15);
    CHECK(worst_any < 0.25);

    // Ratios cancel the shared shrink: the degree of stenosis and the
    // minimum area from the measured profile must land on the analytic
    // values even though every individual area reads low.
    VesselMetrics sum = summarize_sections(secs);
    CHECK(std::abs(sum.ds2 - 0.5) <= 0.08);
    CHECK(sum.mla_mm2 == doctest::Approx(3.14159265 * 0.64).epsilon(0.15));
}

TEST_CASE("grid-dimension guard") {
    PhantomSpec spec = recipe_by_name("clean-straight");
    spec.max_grid_dim = 16;
    CHECK_THROWS_AS(generate(spec), input_error);
}

TEST_CASE("recipe lookup") {
    CHECK(recipe_by_name("helical").path == PathKind::helix);
    CHECK(recipe_by_name("arc-bend").path == PathKind::arc);
    CHECK_THROWS_AS(recipe_by_name("no-such-recipe"), input_error);
    CHECK(default_recipes().size() == 8);
}

TEST_CASE("spec validation") {
    PhantomSpec spec;
    CHECK_NOTHROW(spec.validate());
    spec.lumen_radius_mm = 0.0;
    CHECK_THROWS_AS(spec.validate(), input_error);
    spec = PhantomSpec{};
    spec.stenosis.depth = 1.0;
    CHECK_THROWS_AS(spec.validate(), input_error);
    spec = PhantomSpec{};
    spec.length_mm = 2.0 * spec.seed_inset_mm;  // seeds would coincide
    CHECK_THROWS_AS(spec.validate(), input_error);
    spec = PhantomSpec{};
    spec.noise_sd = -1.0;
    CHECK_THROWS_AS(spec.validate(), input_error);
}

TEST_SUITE_END();
