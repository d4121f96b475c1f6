#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "corseg/errors.hpp"

namespace corseg {

struct WorldPoint {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline WorldPoint operator+(const WorldPoint& a, const WorldPoint& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline WorldPoint operator-(const WorldPoint& a, const WorldPoint& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline WorldPoint operator*(double s, const WorldPoint& p) { return {s * p.x, s * p.y, s * p.z}; }
inline double dot(const WorldPoint& a, const WorldPoint& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline WorldPoint cross(const WorldPoint& a, const WorldPoint& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const WorldPoint& p) { return std::sqrt(dot(p, p)); }
inline WorldPoint normalized(const WorldPoint& p) {
    double n = norm(p);
    if (n <= 0.0) throw numeric_error("cannot normalize zero-length vector");
    return {p.x / n, p.y / n, p.z / n};
}

struct GridDims {
    int nx = 0, ny = 0, nz = 0;
    std::int64_t count() const { return std::int64_t(nx) * ny * nz; }
    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz;
    }
    bool operator==(const GridDims& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }
    bool operator!=(const GridDims& o) const { return !(*this == o); }
};

// Value-range contract attached to a grid. validate() enforces it.
enum class GridKind { intensity, weight, membership, distance, phi };

const char* grid_kind_name(GridKind k);

// Regular 3D scalar grid. Linearization is x-fastest:
//   index(i,j,k) = i + nx*(j + ny*k)
// World coordinates are millimetres; origin is the center of voxel (0,0,0).
class VoxelGrid {
public:
    VoxelGrid() = default;
    VoxelGrid(GridDims dims, std::array<double, 3> spacing_mm, WorldPoint origin, GridKind kind,
              double fill = 0.0);

    const GridDims& dims() const { return dims_; }
    const std::array<double, 3>& spacing() const { return spacing_; }
    const WorldPoint& origin() const { return origin_; }
    GridKind kind() const { return kind_; }
    void set_kind(GridKind k) { kind_ = k; }

    std::int64_t size() const { return dims_.count(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    std::int64_t index(int i, int j, int k) const {
        return std::int64_t(i) + std::int64_t(dims_.nx) * (std::int64_t(j) + std::int64_t(dims_.ny) * k);
    }
    void unindex(std::int64_t idx, int& i, int& j, int& k) const {
        i = static_cast<int>(idx % dims_.nx);
        std::int64_t rest = idx / dims_.nx;
        j = static_cast<int>(rest % dims_.ny);
        k = static_cast<int>(rest / dims_.ny);
    }

    double operator()(int i, int j, int k) const { return values_[index(i, j, k)]; }
    double& operator()(int i, int j, int k) { return values_[index(i, j, k)]; }

    // Bounds-checked access.
    double at(int i, int j, int k) const;
    double& at(int i, int j, int k);

    WorldPoint voxel_to_world(int i, int j, int k) const;
    WorldPoint continuous_to_world(double i, double j, double k) const {
        return {origin_.x + i * spacing_[0], origin_.y + j * spacing_[1], origin_.z + k * spacing_[2]};
    }
    // Continuous voxel coordinates; true when the point lies within the voxel lattice hull.
    bool world_to_continuous(const WorldPoint& p, double& i, double& j, double& k) const;
    bool world_to_nearest_voxel(const WorldPoint& p, int& i, int& j, int& k) const;

    // Trilinear interpolation with the lattice clamped at its borders.
    double sample_trilinear(const WorldPoint& p) const;

    // Throws numeric_error when values violate the kind contract or are not finite.
    void validate() const;

    static VoxelGrid like(const VoxelGrid& g, GridKind kind, double fill = 0.0) {
        return VoxelGrid(g.dims_, g.spacing_, g.origin_, kind, fill);
    }
    bool same_geometry(const VoxelGrid& o) const {
        return dims_ == o.dims_ && spacing_ == o.spacing_ && origin_.x == o.origin_.x &&
               origin_.y == o.origin_.y && origin_.z == o.origin_.z;
    }

private:
    GridDims dims_;
    std::array<double, 3> spacing_ {1.0, 1.0, 1.0};
    WorldPoint origin_;
    GridKind kind_ = GridKind::intensity;
    std::vector<double> values_;
};

// Byte-per-voxel mask sharing the VoxelGrid geometry conventions.
struct BinaryMask {
    GridDims dims;
    std::array<double, 3> spacing {1.0, 1.0, 1.0};
    WorldPoint origin;
    std::vector<std::uint8_t> values;

    BinaryMask() = default;
    BinaryMask(GridDims d, std::array<double, 3> sp, WorldPoint org, std::uint8_t fill = 0)
        : dims(d), spacing(sp), origin(org), values(static_cast<std::size_t>(d.count()), fill) {}

    std::int64_t index(int i, int j, int k) const {
        return std::int64_t(i) + std::int64_t(dims.nx) * (std::int64_t(j) + std::int64_t(dims.ny) * k);
    }
    std::uint8_t operator()(int i, int j, int k) const { return values[index(i, j, k)]; }
    std::uint8_t& operator()(int i, int j, int k) { return values[index(i, j, k)]; }

    std::int64_t count() const;
    bool empty() const { return count() == 0; }
    bool same_geometry(const BinaryMask& o) const {
        return dims == o.dims && spacing == o.spacing && origin.x == o.origin.x &&
               origin.y == o.origin.y && origin.z == o.origin.z;
    }
    bool same_geometry(const VoxelGrid& g) const {
        return dims == g.dims() && spacing == g.spacing() && origin.x == g.origin().x &&
               origin.y == g.origin().y && origin.z == g.origin().z;
    }

    WorldPoint voxel_to_world(int i, int j, int k) const {
        return {origin.x + i * spacing[0], origin.y + j * spacing[1], origin.z + k * spacing[2]};
    }

    static BinaryMask like(const VoxelGrid& g) { return BinaryMask(g.dims(), g.spacing(), g.origin()); }
    static BinaryMask like(const BinaryMask& m) { return BinaryMask(m.dims, m.spacing, m.origin); }
};

// City-block dilation by `rounds` one-voxel steps (6-neighborhood).
BinaryMask dilate6(const BinaryMask& mask, int rounds);

// Mask voxels with at least one background 6-neighbor. When border_is_background,
// voxels on the volume faces count as surface.
std::vector<std::int64_t> boundary_voxels(const BinaryMask& mask, bool border_is_background = true);

} // namespace corseg
