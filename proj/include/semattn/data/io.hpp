#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semattn/data/types.hpp"

namespace semattn::data {

// 8-bit RGB PNG <-> float image in [0, 1]. Alpha and grey inputs are
// converted to RGB on read.
RgbImage read_png(const std::filesystem::path& path);
std::string encode_png(const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

// Packed 8-bit RGB rows, for callers that draw directly (overlays, charts).
std::string encode_png_rgb8(int height, int width, const std::vector<unsigned char>& rgb);

// .sem container: "SEM1", u32 height, u32 width, u32 L, then height*width
// records of {3 x u16 label, 3 x f32 score}, all little-endian.
std::string encode_sem(const SemanticScoreTensor& sem);
SemanticScoreTensor decode_sem(const std::string& bytes, const std::string& context = "<memory>");
SemanticScoreTensor read_sem(const std::filesystem::path& path);
void write_sem(const std::filesystem::path& path, const SemanticScoreTensor& sem);

}  // namespace semattn::data
