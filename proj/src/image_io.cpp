#include "awfnet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace awfnet {

namespace {

// Skips whitespace and '#' comments, then reads one non-negative integer.
int read_pnm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c))
    throw DatasetError("pnm: malformed header in " + path);
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 30) throw DatasetError("pnm: absurd header value in " + path);
    c = in.get();
  }
  return static_cast<int>(v);
}

}  // namespace

RawImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("pnm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '2' && m1 != '3' && m1 != '5' && m1 != '6'))
    throw DatasetError("pnm: unsupported magic in " + path +
                       " (expected P2/P3/P5/P6)");
  const bool ascii = m1 == '2' || m1 == '3';
  const int channels = (m1 == '3' || m1 == '6') ? 3 : 1;

  RawImage img;
  img.channels = channels;
  img.width = read_pnm_int(in, path);
  img.height = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (img.width < 1 || img.height < 1)
    throw DatasetError("pnm: bad dimensions in " + path);
  if (maxval < 1 || maxval > 255)
    throw DatasetError("pnm: only 8-bit rasters supported, maxval=" +
                       std::to_string(maxval) + " in " + path);

  const std::size_t n =
      std::size_t(img.width) * img.height * static_cast<std::size_t>(channels);
  img.pixels.resize(n);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = read_pnm_int(in, path);
      if (v > maxval) throw DatasetError("pnm: sample exceeds maxval in " + path);
      img.pixels[i] = static_cast<std::uint8_t>(v * 255 / maxval);
    }
  } else {
    // single whitespace byte separates header from raster
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw DatasetError("pnm: truncated raster in " + path);
    if (maxval != 255)
      for (auto& p : img.pixels)
        p = static_cast<std::uint8_t>(int(p) * 255 / maxval);
  }
  return img;
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& gray) {
  if (gray.size() != std::size_t(width) * height)
    throw ContractError("write_pgm: pixel count does not match size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("pnm: cannot write " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()),
            static_cast<std::streamsize>(gray.size()));
}

std::vector<float> to_luminance(const RawImage& img) {
  const std::size_t n = std::size_t(img.width) * img.height;
  std::vector<float> out(n);
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = img.pixels[i] / 255.0f;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const float r = img.pixels[3 * i] / 255.0f;
      const float g = img.pixels[3 * i + 1] / 255.0f;
      const float b = img.pixels[3 * i + 2] / 255.0f;
      out[i] = 0.299f * r + 0.587f * g + 0.114f * b;
    }
  }
  return out;
}

std::vector<float> resize_bilinear(const std::vector<float>& img, int src_h,
                                   int src_w, int dst_h, int dst_w) {
  std::vector<float> out(std::size_t(dst_h) * dst_w);
  const double sy = double(src_h) / dst_h;
  const double sx = double(src_w) / dst_w;
  for (int y = 0; y < dst_h; ++y)
    for (int x = 0; x < dst_w; ++x) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src_h - 1));
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src_w - 1));
      const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      const int y1 = std::min(y0 + 1, src_h - 1), x1 = std::min(x0 + 1, src_w - 1);
      const double wy = fy - y0, wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * img[std::size_t(y0) * src_w + x0] +
                                   wx * img[std::size_t(y0) * src_w + x1]) +
                       wy * ((1 - wx) * img[std::size_t(y1) * src_w + x0] +
                             wx * img[std::size_t(y1) * src_w + x1]);
      out[std::size_t(y) * dst_w + x] = static_cast<float>(v);
    }
  return out;
}

std::vector<float> rotate_bilinear(const std::vector<float>& img, int h, int w,
                                   double degrees) {
  const double rad = degrees * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
  std::vector<float> out(img.size(), 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // inverse mapping into the source
      const double dy = y - cy, dx = x - cx;
      const double fy = c * dy + s * dx + cy;
      const double fx = -s * dy + c * dx + cx;
      if (fy < 0 || fy > h - 1 || fx < 0 || fx > w - 1) continue;
      const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double wy = fy - y0, wx = fx - x0;
      out[std::size_t(y) * w + x] = static_cast<float>(
          (1 - wy) * ((1 - wx) * img[std::size_t(y0) * w + x0] +
                      wx * img[std::size_t(y0) * w + x1]) +
          wy * ((1 - wx) * img[std::size_t(y1) * w + x0] +
                wx * img[std::size_t(y1) * w + x1]));
    }
  return out;
}

void normalize_image(std::vector<float>& img) {
  double mean = 0;
  for (float v : img) mean += v;
  mean /= double(img.size());
  double var = 0;
  for (float v : img) {
    const double d = v - mean;
    var += d * d;
  }
  var /= double(img.size());
  const double std_dev = std::sqrt(var);
  if (std_dev < 1e-6) {
    std::fill(img.begin(), img.end(), 0.0f);
    return;
  }
  for (float& v : img) v = static_cast<float>((v - mean) / std_dev);
}

}  // namespace awfnet
