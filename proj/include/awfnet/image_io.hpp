#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awfnet/errors.hpp"

namespace awfnet {

/// Decoded 8-bit raster image, interleaved channels.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (gray) or 3 (rgb)
  std::vector<std::uint8_t> pixels;
};

/// Reads P2/P5 (PGM) and P3/P6 (PPM) files with maxval <= 255.
RawImage read_pnm(const std::string& path);

/// Binary 8-bit PGM.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& gray);

/// Rec.601 luminance in [0,1].
std::vector<float> to_luminance(const RawImage& img);

std::vector<float> resize_bilinear(const std::vector<float>& img, int src_h,
                                   int src_w, int dst_h, int dst_w);

/// Rotation about the image center, bilinear sampling, zeros outside.
std::vector<float> rotate_bilinear(const std::vector<float>& img, int h, int w,
                                   double degrees);

/// In-place standardization to mean 0 / variance 1; a near-constant image
/// becomes all zeros.
void normalize_image(std::vector<float>& img);

}  // namespace awfnet
