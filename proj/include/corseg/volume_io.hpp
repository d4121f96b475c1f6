#pragma once

#include <string>

#include "corseg/voxel_grid.hpp"

namespace corseg {

// Supported containers, chosen by extension:
//   .nrrd          NRRD with the data attached after the header
//   .nhdr          NRRD detached header plus a sibling .raw file
//   .json / .raw   flat little-endian scalars plus a JSON sidecar carrying
//                  dims, spacing, origin, dtype, endianness, and an optional
//                  rescale (value = slope * raw + intercept)
// Volumes are written as doubles, masks as unsigned bytes; reading also
// accepts float, short, unsigned short, and int sample types. Big-endian
// files and non-raw encodings are rejected as input errors.

VoxelGrid read_volume(const std::string& path);
void write_volume(const VoxelGrid& grid, const std::string& path);

BinaryMask read_mask(const std::string& path);
void write_mask(const BinaryMask& mask, const std::string& path);

} // namespace corseg
