#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "e2edet/pyramid.hpp"

namespace e2edet {

/// Pyramid dump: an ASCII line "DFP1 <L>\n", then per level an ASCII line
/// "<C> <H> <W> <stride>\n" followed by C*H*W little-endian float32 values.
std::string encode_pyramid(const FeaturePyramid& p);

/// Throws ParseError (with byte offset) on malformed input.
FeaturePyramid decode_pyramid(std::string_view bytes);

void write_pyramid(const std::filesystem::path& path, const FeaturePyramid& p);
FeaturePyramid read_pyramid(const std::filesystem::path& path);

/// Binary 8-bit PGM of the per-cell channel maximum, scaled so the level maximum maps
/// to 255. Negative values clamp to 0; an all-non-positive level renders black.
std::string encode_pgm(const Grid& g);

/// Writes <dir>/<prefix>_L<level>.pgm for every level; returns the paths written.
std::vector<std::filesystem::path> write_heatmaps(const FeaturePyramid& p,
                                                  const std::filesystem::path& dir,
                                                  const std::string& prefix);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace e2edet
