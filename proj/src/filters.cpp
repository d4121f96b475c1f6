#include "corseg/filters.hpp"

#include <cmath>
#include <vector>

#include "corseg/errors.hpp"
#include "corseg/parallel.hpp"

namespace corseg {

namespace {

std::vector<double> gaussian_kernel(double sigma_vox) {
    int radius = static_cast<int>(std::ceil(4.0 * sigma_vox));
    if (radius < 1) radius = 1;
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int n = -radius; n <= radius; ++n) {
        double v = std::exp(-0.5 * (n / sigma_vox) * (n / sigma_vox));
        k[static_cast<std::size_t>(n + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Convolve along a single axis with replicate borders.
void convolve_axis(const VoxelGrid& src, VoxelGrid& dst, int axis, const std::vector<double>& k) {
    const GridDims& d = src.dims();
    const int radius = static_cast<int>(k.size() / 2);
    const int extent[3] = {d.nx, d.ny, d.nz};
    const int n_axis = extent[axis];
    auto& out = dst.values();
    parallel_ranges(d.count(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            int c[3];
            src.unindex(idx, c[0], c[1], c[2]);
            double acc = 0.0;
            int base = c[axis];
            for (int t = -radius; t <= radius; ++t) {
                int p = base + t;
                if (p < 0) p = 0;
                if (p >= n_axis) p = n_axis - 1;
                int q[3] = {c[0], c[1], c[2]};
                q[axis] = p;
                acc += k[static_cast<std::size_t>(t + radius)] * src(q[0], q[1], q[2]);
            }
            out[static_cast<std::size_t>(idx)] = acc;
        }
    });
}

} // namespace

VoxelGrid gaussian_smooth(const VoxelGrid& img, double sigma_mm) {
    if (!(sigma_mm > 0.0)) throw input_error("gaussian sigma must be positive");
    const auto sp = img.spacing();
    VoxelGrid a = VoxelGrid::like(img, img.kind());
    VoxelGrid b = VoxelGrid::like(img, img.kind());
    convolve_axis(img, a, 0, gaussian_kernel(sigma_mm / sp[0]));
    convolve_axis(a, b, 1, gaussian_kernel(sigma_mm / sp[1]));
    convolve_axis(b, a, 2, gaussian_kernel(sigma_mm / sp[2]));
    return a;
}

HessianFields hessian_field(const VoxelGrid& img, double sigma_mm) {
    VoxelGrid s = gaussian_smooth(img, sigma_mm);
    const GridDims& d = s.dims();
    const auto sp = s.spacing();
    const double scale = sigma_mm * sigma_mm;

    if (d.nx < 3 || d.ny < 3 || d.nz < 3)
        throw input_error("hessian_field needs at least 3 voxels per axis");

    HessianFields h {VoxelGrid::like(img, GridKind::intensity), VoxelGrid::like(img, GridKind::intensity),
                     VoxelGrid::like(img, GridKind::intensity), VoxelGrid::like(img, GridKind::intensity),
                     VoxelGrid::like(img, GridKind::intensity), VoxelGrid::like(img, GridKind::intensity)};

    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };

    auto& xx = h.xx.values();
    auto& yy = h.yy.values();
    auto& zz = h.zz.values();
    auto& xy = h.xy.values();
    auto& xz = h.xz.values();
    auto& yz = h.yz.values();

    parallel_ranges(d.count(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            int i, j, k;
            s.unindex(idx, i, j, k);
            int im = clampi(i - 1, 0, d.nx - 1), ip = clampi(i + 1, 0, d.nx - 1);
            int jm = clampi(j - 1, 0, d.ny - 1), jp = clampi(j + 1, 0, d.ny - 1);
            int km = clampi(k - 1, 0, d.nz - 1), kp = clampi(k + 1, 0, d.nz - 1);
            double c = s(i, j, k);
            std::size_t u = static_cast<std::size_t>(idx);
            xx[u] = scale * (s(ip, j, k) - 2 * c + s(im, j, k)) / (sp[0] * sp[0]);
            yy[u] = scale * (s(i, jp, k) - 2 * c + s(i, jm, k)) / (sp[1] * sp[1]);
            zz[u] = scale * (s(i, j, kp) - 2 * c + s(i, j, km)) / (sp[2] * sp[2]);
            xy[u] = scale * (s(ip, jp, k) - s(ip, jm, k) - s(im, jp, k) + s(im, jm, k)) /
                    (4.0 * sp[0] * sp[1]);
            xz[u] = scale * (s(ip, j, kp) - s(ip, j, km) - s(im, j, kp) + s(im, j, km)) /
                    (4.0 * sp[0] * sp[2]);
            yz[u] = scale * (s(i, jp, kp) - s(i, jp, km) - s(i, jm, kp) + s(i, jm, km)) /
                    (4.0 * sp[1] * sp[2]);
        }
    });
    return h;
}

} // namespace corseg
