#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "corseg/voxel_grid.hpp"

namespace corseg {

// Indexed triangle surface in world millimetres. Triangles are wound so that
// the right-hand-rule normal points out of the segmented region (toward
// field values below the iso level), which makes the signed volume of a
// closed surface positive.
struct TriangleMesh {
    std::vector<WorldPoint> vertices;
    std::vector<std::array<std::int32_t, 3>> triangles;
    std::string label;  // "lumen", "outer", "plaque", or free-form

    bool empty() const { return triangles.empty(); }
};

// Extract the iso-level surface of a scalar grid by marching the cells,
// each split into six tetrahedra around its main diagonal so neighboring
// cells always agree on shared faces and the surface is watertight by
// construction. Vertices on shared segments are emitted once, so the result
// is index-connected, and triangles wind outward from the above-iso region.
// Throws input_error when the field never crosses the level.
TriangleMesh marching_cubes(const VoxelGrid& field, double iso = 0.0);

double surface_area(const TriangleMesh& mesh);
// Divergence-theorem volume; positive for outward-wound closed surfaces.
double signed_volume(const TriangleMesh& mesh);
// True when every undirected edge is used by exactly two triangles.
bool is_watertight(const TriangleMesh& mesh);

// Uniform-umbrella smoothing: v += lambda * (mean(neighbors) - v), applied
// jacobi-style for the given number of passes. Connectivity is unchanged.
TriangleMesh laplacian_smooth(const TriangleMesh& mesh, double lambda = 0.5, int passes = 10);

void write_stl_binary(const TriangleMesh& mesh, const std::string& path);
void write_obj(const TriangleMesh& mesh, const std::string& path);
void write_ply_ascii(const TriangleMesh& mesh, const std::string& path);
// Dispatch on the (case-insensitive) extension: .stl, .obj, or .ply.
void write_mesh(const TriangleMesh& mesh, const std::string& path);

// Reads a binary STL written by write_stl_binary (or any well-formed binary
// STL), re-welding vertices that share an exact float32 position.
TriangleMesh import_stl_binary(const std::string& path);

} // namespace corseg
