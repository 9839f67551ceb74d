#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "viewfield/geom.hpp"

namespace viewfield {

/// Row-major interleaved RGB image with channels in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, const Vec3& fill = Vec3::Zero());

  Vec3 at(int x, int y) const {
    const double* p = data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, const Vec3& c) {
    double* p = data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    p[0] = c.x();
    p[1] = c.y();
    p[2] = c.z();
  }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image&) const = default;
};

/// Metric depth with a per-pixel validity mask.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> meters;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h);

  double at(int x, int y) const { return meters[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, double d, bool ok) {
    meters[static_cast<std::size_t>(y) * width + x] = d;
    valid[static_cast<std::size_t>(y) * width + x] = ok ? 1 : 0;
  }
  bool operator==(const DepthMap&) const = default;
};

/// Binary 8-bit PPM (P6). Values are clamped to [0, 1] and rounded.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, maxval 65535) in millimeters; 0 marks invalid pixels.
void write_depth_pgm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth_pgm(const std::filesystem::path& path);

/// Round-trips an image through 8-bit quantization without touching disk.
Image quantize_8bit(const Image& image);

}  // namespace viewfield
