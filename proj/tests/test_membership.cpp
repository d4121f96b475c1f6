#include <doctest.h>

#include <cmath>

#include "corseg/membership.hpp"

using namespace corseg;

TEST_SUITE_BEGIN("membership");

TEST_CASE("bell closed forms") {
    CHECK(bell(750, 750, 270, 4) == doctest::Approx(1.0));
    CHECK(bell(750 + 270, 750, 270, 4) == doctest::Approx(0.5));
    CHECK(bell(750 - 270, 750, 270, 4) == doctest::Approx(0.5));
    // exponent 4 means |.|^8: two half-widths out gives 1/(1+2^8)
    CHECK(bell(750 + 540, 750, 270, 4) == doctest::Approx(1.0 / 257.0));
    CHECK(bell(0, 0, 1, 1) == doctest::Approx(1.0));
    CHECK(bell(2, 0, 1, 1) == doctest::Approx(0.2));
}

TEST_CASE("sigmoid closed forms") {
    CHECK(sigmoid(200, 0.02, 200) == doctest::Approx(0.5));
    CHECK(sigmoid(250, 0.02, 200) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(sigmoid(150, 0.02, 200) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
    // negative slope decays with x
    CHECK(sigmoid(10, -0.5, 5) < 0.1);
    CHECK(sigmoid(0, -0.5, 5) == doctest::Approx(1.0 / (1.0 + std::exp(-2.5))));
}

TEST_CASE("parameter table at a 350 HU lumen mean") {
    ThresholdConfig cfg;
    SUBCASE("default keeps the bell peak on the lumen mean") {
        MembershipParams p = make_membership_params(350.0, cfg);
        CHECK(p.lumen_center == doctest::Approx(350.0));
        CHECK(p.lumen_half_width == doctest::Approx(270.0));  // 350 - 80
        CHECK(p.outer_center == doctest::Approx(200.0));      // min(200, 350-80-50)
        CHECK(p.outer_slope == doctest::Approx(0.02));
        CHECK(p.plaque_center == doctest::Approx(750.0));     // 350 + 400
        CHECK(p.plaque_slope == doctest::Approx(0.05));
        CHECK(p.lumen_exponent == doctest::Approx(4.0));
    }
    SUBCASE("offset variant shifts the peak by cp_thres") {
        cfg.lumen_center_offset = cfg.cp_thres;
        MembershipParams p = make_membership_params(350.0, cfg);
        CHECK(p.lumen_center == doctest::Approx(750.0));
        CHECK(p.lumen_half_width == doctest::Approx(270.0));
        CHECK(p.outer_center == doctest::Approx(200.0));
        CHECK(p.plaque_center == doctest::Approx(750.0));
    }
}

TEST_CASE("parameter clamps") {
    ThresholdConfig cfg;
    MembershipParams lo = make_membership_params(200.0, cfg);
    CHECK(lo.lumen_half_width == doctest::Approx(150.0));  // 120 clamped up
    CHECK(lo.outer_center == doctest::Approx(100.0));      // max(70, 100)
    MembershipParams hi = make_membership_params(700.0, cfg);
    CHECK(hi.lumen_half_width == doctest::Approx(500.0));  // 620 clamped down
    CHECK(hi.outer_center == doctest::Approx(200.0));
}

TEST_CASE("distance gate closed form at 0.4 mm in-plane spacing") {
    GridDims d{12, 1, 1};
    VoxelGrid f(d, {0.4, 0.4, 0.4}, {0, 0, 0}, GridKind::membership, 1.0);
    VoxelGrid d1(d, {0.4, 0.4, 0.4}, {0, 0, 0}, GridKind::distance);
    for (int i = 0; i < 12; ++i) d1(i, 0, 0) = static_cast<double>(i);  // voxel units

    ThresholdConfig cfg;
    VoxelGrid g = gate_by_distance(f, d1, Tissue::lumen, cfg);
    // center 2.0 mm / 0.4 = 5 voxels, slope -0.5/voxel:
    // gate(0) = 1/(1+e^{-2.5}) = 0.92414
    CHECK(g(0, 0, 0) == doctest::Approx(0.9241418).epsilon(1e-6));
    CHECK(g(5, 0, 0) == doctest::Approx(0.5));
    // hard cutoff at 4.0 mm / 0.4 = 10 voxels
    CHECK(g(9, 0, 0) > 0.0);
    d1(10, 0, 0) = 10.2;
    d1(11, 0, 0) = 30.0;
    VoxelGrid gcut = gate_by_distance(f, d1, Tissue::lumen, cfg);
    CHECK(gcut(10, 0, 0) == 0.0);
    CHECK(gcut(11, 0, 0) == 0.0);

    VoxelGrid go = gate_by_distance(f, d1, Tissue::outer, cfg);
    // outer center 2.5 mm / 0.4 = 6.25 voxels
    CHECK(go(0, 0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5 * 6.25))).epsilon(1e-9));
    CHECK(go(5, 0, 0) > g(5, 0, 0));  // looser gate sits farther out
    CHECK(go(10, 0, 0) == 0.0);
    VoxelGrid gp = gate_by_distance(f, d1, Tissue::plaque, cfg);
    CHECK(gp(3, 0, 0) == doctest::Approx(go(3, 0, 0)));
}

TEST_CASE("memberships honor the epsilon floor and peak values") {
    GridDims d{5, 1, 1};
    VoxelGrid img(d, {0.4, 0.4, 0.4}, {0, 0, 0}, GridKind::intensity);
    img(0, 0, 0) = 350.0;    // on the lumen peak
    img(1, 0, 0) = -900.0;   // air, far off every curve
    img(2, 0, 0) = 750.0;    // on the plaque sigmoid's center
    img(3, 0, 0) = 200.0;    // outer sigmoid center
    img(4, 0, 0) = 1400.0;   // dense calcium

    ThresholdConfig cfg;
    TissueFields tf = tissue_memberships(img, 350.0, cfg);
    CHECK(tf.f_lumen(0, 0, 0) == doctest::Approx(1.0));          // 0.95*1 + 0.05
    CHECK(tf.f_lumen(1, 0, 0) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(tf.f_outer(3, 0, 0) == doctest::Approx(0.95 * 0.5 + 0.05));
    CHECK(tf.f_plaque(2, 0, 0) == doctest::Approx(0.95 * 0.5 + 0.05));
    CHECK(tf.f_plaque(4, 0, 0) > 0.99);
    for (int i = 0; i < 5; ++i) {
        CHECK(tf.f_lumen(i, 0, 0) >= 0.05);
        CHECK(tf.f_outer(i, 0, 0) >= 0.05);
        CHECK(tf.f_plaque(i, 0, 0) >= 0.05);
    }
}

TEST_CASE("compute_tissue_fields gates each membership") {
    GridDims d{4, 1, 1};
    VoxelGrid img(d, {0.4, 0.4, 0.4}, {0, 0, 0}, GridKind::intensity, 350.0);
    VoxelGrid d1(d, {0.4, 0.4, 0.4}, {0, 0, 0}, GridKind::distance);
    d1(0, 0, 0) = 0.0;
    d1(1, 0, 0) = 5.0;
    d1(2, 0, 0) = 9.0;
    d1(3, 0, 0) = 30.0;

    ThresholdConfig cfg;
    TissueFields tf = compute_tissue_fields(img, d1, 350.0, cfg);
    CHECK(tf.f1(0, 0, 0) == doctest::Approx(0.9241418).epsilon(1e-6));
    CHECK(tf.f1(1, 0, 0) == doctest::Approx(0.5));
    CHECK(tf.f1(3, 0, 0) == 0.0);
    CHECK(tf.f2_outer(3, 0, 0) == 0.0);
    CHECK(tf.f2_plaque(3, 0, 0) == 0.0);
    CHECK(tf.params.lumen_center == doctest::Approx(350.0));
}

TEST_CASE("mean_lumen_intensity averages bright voxels near the line") {
    GridDims d{6, 1, 1};
    VoxelGrid img(d, {1, 1, 1}, {0, 0, 0}, GridKind::intensity);
    VoxelGrid d1(d, {1, 1, 1}, {0, 0, 0}, GridKind::distance);
    double hus[6] = {300, 400, 50, 500, 350, 900};
    double dist[6] = {0, 1, 1, 4.9, 5.1, 20};
    for (int i = 0; i < 6; ++i) {
        img(i, 0, 0) = hus[i];
        d1(i, 0, 0) = dist[i];
    }
    ThresholdConfig cfg;
    // included: 300, 400, 500 (bright and within 5 voxels); 50 is too dark,
    // 350 and 900 are too far
    CHECK(mean_lumen_intensity(img, d1, cfg) == doctest::Approx(400.0));
    // no candidates at all
    VoxelGrid dark = VoxelGrid::like(img, GridKind::intensity, 10.0);
    CHECK_THROWS_AS(mean_lumen_intensity(dark, d1, cfg), numeric_error);
}

TEST_CASE("binarize_initial_phi thresholds at one half") {
    GridDims d{4, 1, 1};
    VoxelGrid f(d, {1, 1, 1}, {0, 0, 0}, GridKind::membership);
    f(0, 0, 0) = 0.9;
    f(1, 0, 0) = 0.5;   // not strictly greater
    f(2, 0, 0) = 0.51;
    f(3, 0, 0) = 0.0;
    ThresholdConfig cfg;
    BinaryMask m = binarize_initial_phi(f, cfg);
    CHECK(m(0, 0, 0) == 1);
    CHECK(m(1, 0, 0) == 0);
    CHECK(m(2, 0, 0) == 1);
    CHECK(m(3, 0, 0) == 0);

    VoxelGrid none = VoxelGrid::like(f, GridKind::membership, 0.2);
    CHECK_THROWS_AS(binarize_initial_phi(none, cfg), numeric_error);
}

TEST_CASE("threshold validation") {
    ThresholdConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = ThresholdConfig{};
    cfg.gate_cutoff = 0.0;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = ThresholdConfig{};
    cfg.wi = 0.0;
    CHECK_THROWS_AS(cfg.validate(), input_error);
    cfg = ThresholdConfig{};
    cfg.lumen_halfwidth_min = 600.0;  // exceeds max
    CHECK_THROWS_AS(cfg.validate(), input_error);
}

TEST_SUITE_END();
