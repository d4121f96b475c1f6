#include <doctest.h>

#include <cmath>
#include <string>

#include "corseg/phantom.hpp"
#include "corseg/pipeline.hpp"

using namespace corseg;

namespace {

PhantomSpec small_clean() {
    PhantomSpec spec = recipe_by_name("clean-straight");
    spec.name = "unit-clean";
    spec.length_mm = 25.0;
    spec.lumen_radius_mm = 1.8;
    return spec;
}

double mask_dice(const BinaryMask& a, const BinaryMask& b) {
    std::int64_t inter = 0, na = 0, nb = 0;
    for (std::size_t u = 0; u < a.values.size(); ++u) {
        na += a.values[u] != 0;
        nb += b.values[u] != 0;
        inter += (a.values[u] != 0) && (b.values[u] != 0);
    }
    return na + nb == 0 ? 1.0 : 2.0 * inter / double(na + nb);
}

} // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("tube prior is a signed radial offset") {
    VoxelGrid g({21, 21, 11}, {0.5, 0.5, 0.5}, {-5, -5, 0}, GridKind::intensity);
    Centerline line;
    line.points = {{0, 0, 0}, {0, 0, 5}};
    line.rebuild_arclength();
    VoxelGrid psi = make_tube_prior(line, 1.5, g);
    CHECK(psi.kind() == GridKind::phi);
    CHECK(psi(10, 10, 5) == doctest::Approx(1.5));          // on the axis
    CHECK(psi(12, 10, 5) == doctest::Approx(0.5));          // 1.0 mm out
    CHECK(psi(10, 2, 5) == doctest::Approx(1.5 - 4.0));     // 4.0 mm out
}

TEST_CASE("config validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lumen_pass1.curvature_factor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = PipelineConfig{};
    cfg.smooth_window = 4;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = PipelineConfig{};
    cfg.prior_tube_radius_mm = -1.0;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = PipelineConfig{};
    cfg.outer_roi_dilation = -2;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = PipelineConfig{};
    cfg.plaque.iterations = -5;
    CHECK_THROWS_AS(cfg.validate(), input_error);
}

TEST_CASE("seeds outside the volume are rejected up front") {
    PhantomVolume ph = generate(small_clean());
    PipelineConfig cfg;
    cfg.seeds = {{500.0, 0.0, 0.0}, ph.truth.seeds.end};
    try {
        run_pipeline(ph.image, cfg.seeds, cfg);
        FAIL("expected bounds_error");
    } catch (const bounds_error& e) {
        CHECK(std::string(e.what()).find("start seed") != std::string::npos);
        CHECK(std::string(e.what()).find("outside the volume") != std::string::npos);
    }
}

TEST_CASE("stage failures carry the stage name and keep their type") {
    PhantomVolume ph = generate(small_clean());
    PipelineConfig cfg;
    cfg.seeds = ph.truth.seeds;
    cfg.thresholds.candidate_hu_floor = 2000.0;  // nothing qualifies as lumen
    try {
        run_pipeline(ph.image, cfg.seeds, cfg);
        FAIL("expected numeric_error");
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).find("centerline stage:") == 0);
    }
}

TEST_CASE("full pipeline segments a small clean vessel") {
    PhantomVolume ph = generate(small_clean());
    PipelineConfig cfg;
    cfg.seeds = ph.truth.seeds;
    SegmentationResult res = run_pipeline(ph.image, cfg.seeds, cfg);

    CHECK(mask_dice(res.lumen_mask, ph.truth.lumen) > 0.85);
    CHECK(res.median_lumen_hu == doctest::Approx(350.0).epsilon(0.05));
    CHECK(res.plaque_mask.empty());
    double peak_plaque_phi = -1e300;
    for (double v : res.phi_plaque.values()) peak_plaque_phi = std::max(peak_plaque_phi, v);
    CHECK(peak_plaque_phi < 0.0);

    // containment after repair
    bool contained = true;
    for (std::size_t v = 0; v < res.lumen_mask.values.size(); ++v)
        if (res.lumen_mask.values[v] && !res.outer_mask.values[v]) contained = false;
    CHECK(contained);

    // one timing per stage, in pipeline order
    REQUIRE(res.timings.size() == 6);
    CHECK(res.timings[0].name == "vesselness");
    CHECK(res.timings[1].name == "centerline");
    CHECK(res.timings[2].name == "memberships");
    CHECK(res.timings[3].name == "lumen");
    CHECK(res.timings[4].name == "outer-wall");
    CHECK(res.timings[5].name == "plaque");

    CHECK(res.centerline.total_length() > 15.0);
    CHECK(res.config.seeds.start.z == doctest::Approx(cfg.seeds.start.z));
}

TEST_CASE("pipeline runs are reproducible") {
    PhantomVolume ph = generate(small_clean());
    PipelineConfig cfg;
    cfg.seeds = ph.truth.seeds;
    SegmentationResult a = run_pipeline(ph.image, cfg.seeds, cfg);
    SegmentationResult b = run_pipeline(ph.image, cfg.seeds, cfg);
    CHECK(a.phi_lumen.values() == b.phi_lumen.values());
    CHECK(a.phi_outer.values() == b.phi_outer.values());
    CHECK(a.lumen_mask.values == b.lumen_mask.values);
    CHECK(a.mean_lumen_hu == b.mean_lumen_hu);
}

TEST_SUITE_END();
