#include "viewfield/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace viewfield {

namespace {

constexpr std::uint32_t kPrimeY = 2654435761u;
constexpr std::uint32_t kPrimeZ = 805459861u;

struct AxisSample {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

AxisSample periodic_axis(double x, int res) {
  const double scaled = x * res;
  double base = std::floor(scaled);
  AxisSample a;
  a.frac = scaled - base;
  long i = static_cast<long>(base) % res;
  if (i < 0) i += res;
  a.lo = static_cast<int>(i);
  a.hi = (a.lo + 1) % res;
  return a;
}

AxisSample clamped_axis(double x, int res) {
  const double scaled = std::clamp(x, 0.0, 1.0) * res;
  const int lo = std::min(static_cast<int>(std::floor(scaled)), res - 1);
  return {lo, lo + 1, scaled - lo};
}

}  // namespace

MultiResGrid::MultiResGrid(const GridConfig& config) : config_(config) {
  if (config.levels < 1 || config.features_per_level < 1 || config.base_resolution < 2 ||
      config.growth < 1.0 || config.log2_table_size < 1 || config.log2_table_size > 30) {
    throw std::invalid_argument("MultiResGrid: invalid configuration");
  }
  const std::size_t table = std::size_t{1} << config.log2_table_size;
  std::size_t offset = 0;
  int previous = 0;
  for (int l = 0; l < config.levels; ++l) {
    int res = static_cast<int>(std::floor(config.base_resolution * std::pow(config.growth, l)));
    res = std::max(res, previous + 1);
    previous = res;
    GridLevel level;
    level.resolution = {res, res, res};
    const std::size_t vertices = static_cast<std::size_t>(res) * (res + 1) * (res + 1);
    level.dense = vertices <= table;
    level.slots = level.dense ? vertices : table;
    level.offset = offset;
    offset += level.slots * config.features_per_level;
    levels_.push_back(level);
  }
  params_.assign(offset, 0.0);
}

std::span<double> MultiResGrid::level_params(int level) {
  const auto& lv = levels_.at(level);
  return std::span<double>(params_).subspan(lv.offset, lv.slots * config_.features_per_level);
}

std::span<const double> MultiResGrid::level_params(int level) const {
  const auto& lv = levels_.at(level);
  return std::span<const double>(params_).subspan(lv.offset, lv.slots * config_.features_per_level);
}

void MultiResGrid::init_uniform(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& p : params_) p = dist(rng);
}

std::size_t MultiResGrid::vertex_slot(int level, int i, int j, int k) const {
  const auto& lv = levels_[level];
  const int res = lv.resolution[0];
  i %= res;
  if (i < 0) i += res;
  if (lv.dense) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(res) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(res + 1) * k);
  }
  const std::uint32_t h = static_cast<std::uint32_t>(i) ^ (static_cast<std::uint32_t>(j) * kPrimeY) ^
                          (static_cast<std::uint32_t>(k) * kPrimeZ);
  return h & (lv.slots - 1);
}

ContractedPoint MultiResGrid::vertex_coordinate(int level, int i, int j, int k) const {
  const auto& res = levels_[level].resolution;
  return {static_cast<double>(i) / res[0], static_cast<double>(j) / res[1], static_cast<double>(k) / res[2]};
}

CornerSet MultiResGrid::corners(int level, const ContractedPoint& c) const {
  const auto& lv = levels_[level];
  const AxisSample a = periodic_axis(c.theta, lv.resolution[0]);
  const AxisSample b = clamped_axis(c.phi, lv.resolution[1]);
  const AxisSample r = clamped_axis(c.rho, lv.resolution[2]);
  CornerSet out;
  const std::size_t features = config_.features_per_level;
  for (int corner = 0; corner < 8; ++corner) {
    const bool di = corner & 1, dj = corner & 2, dk = corner & 4;
    const double w = (di ? a.frac : 1.0 - a.frac) * (dj ? b.frac : 1.0 - b.frac) * (dk ? r.frac : 1.0 - r.frac);
    const std::size_t slot = vertex_slot(level, di ? a.hi : a.lo, dj ? b.hi : b.lo, dk ? r.hi : r.lo);
    out.offset[corner] = lv.offset + slot * features;
    out.weight[corner] = w;
  }
  return out;
}

void MultiResGrid::encode_level(int level, const ContractedPoint& c, std::span<double> out) const {
  const CornerSet cs = corners(level, c);
  const int features = config_.features_per_level;
  for (int f = 0; f < features; ++f) out[f] = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const double* v = params_.data() + cs.offset[corner];
    for (int f = 0; f < features; ++f) out[f] += cs.weight[corner] * v[f];
  }
}

void MultiResGrid::encode(const ContractedPoint& c, std::span<double> out) const {
  const int features = config_.features_per_level;
  for (int l = 0; l < num_levels(); ++l) encode_level(l, c, out.subspan(l * features, features));
}

void MultiResGrid::backward(const ContractedPoint& c, std::span<const double> d_out,
                            std::span<double> d_params) const {
  const int features = config_.features_per_level;
  for (int l = 0; l < num_levels(); ++l) {
    const CornerSet cs = corners(l, c);
    const double* g = d_out.data() + l * features;
    for (int corner = 0; corner < 8; ++corner) {
      double* d = d_params.data() + cs.offset[corner];
      for (int f = 0; f < features; ++f) d[f] += cs.weight[corner] * g[f];
    }
  }
}

}  // namespace viewfield
