#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vdnet/tensor.hpp"

namespace vdnet {

/// 8-bit raster with interleaved channels (1 = grey, 3 = RGB).
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Parses binary P6 (3 channels) or P5 (1 channel) data with maxval 255.
/// Throws FormatError on a malformed header or a truncated payload.
Image8 decode_pnm(std::string_view bytes);
std::string encode_pnm(const Image8& image);

Image8 read_pnm_file(const std::filesystem::path& path);
void write_pnm_file(const std::filesystem::path& path, const Image8& image);

/// [c,h,w] tensor in [0,1] from an 8-bit image (v / 255).
Tensor image_to_tensor(const Image8& image);
/// Quantizes round(v * 255) clamped to [0,255]. Accepts [c,h,w] or [h,w].
Image8 tensor_to_image(const Tensor& tensor);
/// Linear min-max stretch of a [h,w] map to 0..255; constant maps become 0.
Image8 normalized_grey(const Tensor& map);

Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

}  // namespace vdnet
