#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decodet/tensor.hpp"

namespace decodet {

/// Interleaved 8-bit RGB image.
struct ImageU8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // height*width*3, row-major from top-left
};

/// Single-channel 16-bit image (depth rasters with an external scale).
struct GrayU16 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> v;
};

ImageU8 read_png_rgb8(const std::string& path);
void write_png_rgb8(const std::string& path, const ImageU8& img);

GrayU16 read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const GrayU16& img);

/// Grayscale portable float map ("Pf"). The header scale's sign selects
/// endianness, its magnitude multiplies the stored values on read. File rows
/// run bottom-up; in memory the raster is top-left origin. Writes are
/// little-endian (scale -1.0) 32-bit floats.
Tensor read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Tensor& raster);

/// [3,H,W] doubles in [0,1] <-> interleaved 8-bit. Quantization rounds
/// half away from zero.
Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& t);

}  // namespace decodet
