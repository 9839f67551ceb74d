#include "viewfield/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace viewfield {

Image::Image(int w, int h, const Vec3& fill) : width(w), height(h), data(3 * static_cast<std::size_t>(w) * h) {
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill.x();
    data[i + 1] = fill.y();
    data[i + 2] = fill.z();
  }
}

DepthMap::DepthMap(int w, int h)
    : width(w), height(h), meters(static_cast<std::size_t>(w) * h, 0.0), valid(static_cast<std::size_t>(w) * h, 0) {}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads the ASCII header, skipping comments, and leaves the stream at the first data byte.
PnmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  PnmHeader h;
  auto next_token = [&]() {
    std::string tok;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> tok;
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw std::runtime_error("malformed image header: " + path.string());
  }
  in.get();  // single whitespace before the raster
  if (!in || h.width <= 0 || h.height <= 0) throw std::runtime_error("malformed image header: " + path.string());
  return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<std::uint8_t> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P6" || h.maxval != 255) throw std::runtime_error("unsupported PPM (need P6/255): " + path.string());
  Image img(h.width, h.height);
  std::vector<std::uint8_t> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("truncated PPM: " + path.string());
  std::transform(bytes.begin(), bytes.end(), img.data.begin(), [](std::uint8_t b) { return b / 255.0; });
  return img;
}

void write_depth_pgm(const std::filesystem::path& path, const DepthMap& depth) {
  auto out = open_out(path);
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  std::vector<std::uint8_t> bytes(2 * depth.meters.size());
  for (std::size_t i = 0; i < depth.meters.size(); ++i) {
    long mm = depth.valid[i] ? std::lround(depth.meters[i] * 1000.0) : 0;
    mm = std::clamp(mm, depth.valid[i] ? 1L : 0L, 65535L);
    bytes[2 * i] = static_cast<std::uint8_t>(mm >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(mm & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DepthMap read_depth_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P5" || h.maxval != 65535) {
    throw std::runtime_error("unsupported depth PGM (need P5/65535): " + path.string());
  }
  DepthMap depth(h.width, h.height);
  std::vector<std::uint8_t> bytes(2 * depth.meters.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("truncated PGM: " + path.string());
  for (std::size_t i = 0; i < depth.meters.size(); ++i) {
    const int mm = (bytes[2 * i] << 8) | bytes[2 * i + 1];
    depth.meters[i] = mm / 1000.0;
    depth.valid[i] = mm > 0 ? 1 : 0;
  }
  return depth;
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace viewfield
