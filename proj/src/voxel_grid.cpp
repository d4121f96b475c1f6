#include "corseg/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace corseg {

const char* grid_kind_name(GridKind k) {
    switch (k) {
        case GridKind::intensity: return "intensity";
        case GridKind::weight: return "weight";
        case GridKind::membership: return "membership";
        case GridKind::distance: return "distance";
        case GridKind::phi: return "phi";
    }
    return "unknown";
}

VoxelGrid::VoxelGrid(GridDims dims, std::array<double, 3> spacing_mm, WorldPoint origin, GridKind kind,
                     double fill)
    : dims_(dims), spacing_(spacing_mm), origin_(origin), kind_(kind) {
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
        throw input_error("grid dimensions must be positive");
    for (double s : spacing_)
        if (!(s > 0.0) || !std::isfinite(s)) throw input_error("grid spacing must be positive and finite");
    values_.assign(static_cast<std::size_t>(dims.count()), fill);
}

double VoxelGrid::at(int i, int j, int k) const {
    if (!dims_.contains(i, j, k))
        throw bounds_error("voxel index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                           std::to_string(k) + ") out of bounds");
    return values_[index(i, j, k)];
}

double& VoxelGrid::at(int i, int j, int k) {
    if (!dims_.contains(i, j, k))
        throw bounds_error("voxel index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                           std::to_string(k) + ") out of bounds");
    return values_[index(i, j, k)];
}

WorldPoint VoxelGrid::voxel_to_world(int i, int j, int k) const {
    if (!dims_.contains(i, j, k))
        throw bounds_error("voxel index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                           std::to_string(k) + ") out of bounds");
    return {origin_.x + i * spacing_[0], origin_.y + j * spacing_[1], origin_.z + k * spacing_[2]};
}

bool VoxelGrid::world_to_continuous(const WorldPoint& p, double& i, double& j, double& k) const {
    i = (p.x - origin_.x) / spacing_[0];
    j = (p.y - origin_.y) / spacing_[1];
    k = (p.z - origin_.z) / spacing_[2];
    return i >= -0.5 && j >= -0.5 && k >= -0.5 && i <= dims_.nx - 0.5 && j <= dims_.ny - 0.5 &&
           k <= dims_.nz - 0.5;
}

bool VoxelGrid::world_to_nearest_voxel(const WorldPoint& p, int& i, int& j, int& k) const {
    double ci, cj, ck;
    bool inside = world_to_continuous(p, ci, cj, ck);
    i = std::clamp(static_cast<int>(std::lround(ci)), 0, dims_.nx - 1);
    j = std::clamp(static_cast<int>(std::lround(cj)), 0, dims_.ny - 1);
    k = std::clamp(static_cast<int>(std::lround(ck)), 0, dims_.nz - 1);
    return inside;
}

double VoxelGrid::sample_trilinear(const WorldPoint& p) const {
    double ci, cj, ck;
    world_to_continuous(p, ci, cj, ck);
    ci = std::clamp(ci, 0.0, double(dims_.nx - 1));
    cj = std::clamp(cj, 0.0, double(dims_.ny - 1));
    ck = std::clamp(ck, 0.0, double(dims_.nz - 1));
    int i0 = std::min(static_cast<int>(ci), dims_.nx - 2 >= 0 ? dims_.nx - 2 : 0);
    int j0 = std::min(static_cast<int>(cj), dims_.ny - 2 >= 0 ? dims_.ny - 2 : 0);
    int k0 = std::min(static_cast<int>(ck), dims_.nz - 2 >= 0 ? dims_.nz - 2 : 0);
    int i1 = std::min(i0 + 1, dims_.nx - 1);
    int j1 = std::min(j0 + 1, dims_.ny - 1);
    int k1 = std::min(k0 + 1, dims_.nz - 1);
    double fx = ci - i0, fy = cj - j0, fz = ck - k0;
    auto v = [&](int a, int b, int c) { return values_[index(a, b, c)]; };
    double c00 = v(i0, j0, k0) * (1 - fx) + v(i1, j0, k0) * fx;
    double c10 = v(i0, j1, k0) * (1 - fx) + v(i1, j1, k0) * fx;
    double c01 = v(i0, j0, k1) * (1 - fx) + v(i1, j0, k1) * fx;
    double c11 = v(i0, j1, k1) * (1 - fx) + v(i1, j1, k1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

void VoxelGrid::validate() const {
    for (std::size_t n = 0; n < values_.size(); ++n) {
        double v = values_[n];
        if (!std::isfinite(v))
            throw numeric_error(std::string("non-finite value in ") + grid_kind_name(kind_) +
                                " grid at linear index " + std::to_string(n));
        bool ok = true;
        switch (kind_) {
            case GridKind::weight:
            case GridKind::membership: ok = v >= 0.0 && v <= 1.0; break;
            case GridKind::distance: ok = v >= 0.0; break;
            case GridKind::intensity:
            case GridKind::phi: break;
        }
        if (!ok)
            throw numeric_error(std::string("value ") + std::to_string(v) + " violates " +
                                grid_kind_name(kind_) + " range at linear index " + std::to_string(n));
    }
}

std::int64_t BinaryMask::count() const {
    std::int64_t n = 0;
    for (std::uint8_t v : values) n += (v != 0);
    return n;
}

BinaryMask dilate6(const BinaryMask& mask, int rounds) {
    if (rounds <= 0) return mask;
    BinaryMask cur = mask;
    const int nx = mask.dims.nx, ny = mask.dims.ny, nz = mask.dims.nz;
    for (int r = 0; r < rounds; ++r) {
        BinaryMask next = cur;
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    if (cur(i, j, k)) continue;
                    bool hit = (i > 0 && cur(i - 1, j, k)) || (i + 1 < nx && cur(i + 1, j, k)) ||
                               (j > 0 && cur(i, j - 1, k)) || (j + 1 < ny && cur(i, j + 1, k)) ||
                               (k > 0 && cur(i, j, k - 1)) || (k + 1 < nz && cur(i, j, k + 1));
                    if (hit) next(i, j, k) = 1;
                }
        cur = std::move(next);
    }
    return cur;
}

std::vector<std::int64_t> boundary_voxels(const BinaryMask& mask, bool border_is_background) {
    std::vector<std::int64_t> out;
    const int nx = mask.dims.nx, ny = mask.dims.ny, nz = mask.dims.nz;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (!mask(i, j, k)) continue;
                bool surf = false;
                auto bg = [&](int a, int b, int c) {
                    if (!mask.dims.contains(a, b, c)) return border_is_background;
                    return mask(a, b, c) == 0;
                };
                surf = bg(i - 1, j, k) || bg(i + 1, j, k) || bg(i, j - 1, k) || bg(i, j + 1, k) ||
                       bg(i, j, k - 1) || bg(i, j, k + 1);
                if (surf) out.push_back(mask.index(i, j, k));
            }
    return out;
}

} // namespace corseg
