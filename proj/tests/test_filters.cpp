#include <doctest.h>

#include <cmath>

#include "corseg/filters.hpp"

using namespace corseg;

namespace {

VoxelGrid field_like(int n, double sp, double (*f)(double, double, double)) {
    VoxelGrid g({n, n, n}, {sp, sp, sp}, {0, 0, 0}, GridKind::intensity);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                WorldPoint p = g.voxel_to_world(i, j, k);
                g(i, j, k) = f(p.x, p.y, p.z);
            }
    return g;
}

} // namespace

TEST_SUITE_BEGIN("filters");

TEST_CASE("gaussian smoothing leaves constants and linears unchanged") {
    VoxelGrid c = field_like(12, 0.5, [](double, double, double) { return 3.5; });
    VoxelGrid sc = gaussian_smooth(c, 1.0);
    for (std::int64_t i = 0; i < sc.size(); i += 17)
        CHECK(sc.values()[i] == doctest::Approx(3.5).epsilon(1e-12));

    // a symmetric kernel passes linear ramps through, away from the borders
    VoxelGrid r = field_like(24, 0.5, [](double x, double y, double z) { return x + 2 * y - z; });
    VoxelGrid sr = gaussian_smooth(r, 0.8);
    int margin = 8;
    for (int k = margin; k < 24 - margin; ++k)
        for (int j = margin; j < 24 - margin; ++j)
            for (int i = margin; i < 24 - margin; ++i)
                CHECK(sr(i, j, k) == doctest::Approx(r(i, j, k)).epsilon(1e-9));
}

TEST_CASE("gaussian smoothing shrinks a delta into a separable bump") {
    VoxelGrid g({21, 21, 21}, {1, 1, 1}, {0, 0, 0}, GridKind::intensity);
    g(10, 10, 10) = 1.0;
    VoxelGrid s = gaussian_smooth(g, 1.5);
    CHECK(s(10, 10, 10) > s(11, 10, 10));
    CHECK(s(11, 10, 10) > s(12, 10, 10));
    // isotropic spacing: equal response along each axis
    CHECK(s(11, 10, 10) == doctest::Approx(s(10, 11, 10)).epsilon(1e-12));
    CHECK(s(11, 10, 10) == doctest::Approx(s(10, 10, 11)).epsilon(1e-12));
    // mass is conserved in the interior
    double sum = 0.0;
    for (double v : s.values()) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(gaussian_smooth(g, 0.0), input_error);
}

TEST_CASE("anisotropic spacing keeps the physical scale") {
    // same physical field sampled on two lattices; the smoothed center must agree
    auto f = [](double x, double, double) { return std::exp(-x * x / 8.0); };
    VoxelGrid fine({41, 9, 9}, {0.25, 1, 1}, {-5, -4, -4}, GridKind::intensity);
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 41; ++i) fine(i, j, k) = f(fine.voxel_to_world(i, j, k).x, 0, 0);
    VoxelGrid coarse({21, 9, 9}, {0.5, 1, 1}, {-5, -4, -4}, GridKind::intensity);
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 21; ++i)
                coarse(i, j, k) = f(coarse.voxel_to_world(i, j, k).x, 0, 0);
    double a = gaussian_smooth(fine, 1.0)(20, 4, 4);
    double b = gaussian_smooth(coarse, 1.0)(10, 4, 4);
    CHECK(a == doctest::Approx(b).epsilon(5e-3));
}

TEST_CASE("hessian of a quadratic matches the analytic form") {
    // f = 2x^2 + y^2 - 3z^2 + xy: Hxx=4, Hyy=2, Hzz=-6, Hxy=1, Hxz=Hyz=0.
    // Convolving a quadratic with a Gaussian shifts it by a constant, so the
    // second derivatives are exact; the fields carry a sigma^2 normalization.
    double sigma = 1.2;
    VoxelGrid g = field_like(26, 0.5, [](double x, double y, double z) {
        return 2 * x * x + y * y - 3 * z * z + x * y;
    });
    HessianFields h = hessian_field(g, sigma);
    double s2 = sigma * sigma;
    // kernel radius is ceil(4 * 1.2 / 0.5) = 10 voxels; stay a central
    // difference away from the first fully-covered sample
    int lo = 11, hi = 15;
    for (int k = lo; k < hi; k += 3)
        for (int j = lo; j < hi; j += 3)
            for (int i = lo; i < hi; i += 3) {
                CHECK(h.xx(i, j, k) == doctest::Approx(4.0 * s2).epsilon(1e-6));
                CHECK(h.yy(i, j, k) == doctest::Approx(2.0 * s2).epsilon(1e-6));
                CHECK(h.zz(i, j, k) == doctest::Approx(-6.0 * s2).epsilon(1e-6));
                CHECK(h.xy(i, j, k) == doctest::Approx(1.0 * s2).epsilon(1e-5));
                CHECK(std::abs(h.xz(i, j, k)) < 1e-9);
                CHECK(std::abs(h.yz(i, j, k)) < 1e-9);
            }
}

TEST_SUITE_END();
