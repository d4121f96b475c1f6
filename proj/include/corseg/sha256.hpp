#pragma once

#include <cstddef>
#include <string>

namespace corseg {

// Lowercase hex SHA-256 digest of a byte buffer.
std::string sha256_hex(const void* data, std::size_t n);
std::string sha256_hex(const std::string& s);
// Digest of a file's contents; throws input_error when it cannot be read.
std::string sha256_file_hex(const std::string& path);

} // namespace corseg
