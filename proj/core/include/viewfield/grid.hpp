#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "viewfield/geom.hpp"

namespace viewfield {

struct GridConfig {
  int levels = 8;
  int features_per_level = 2;
  int base_resolution = 16;
  double growth = 1.4;
  int log2_table_size = 14;

  bool operator==(const GridConfig&) const = default;
};

struct GridLevel {
  std::array<int, 3> resolution{};  // cells along (theta, phi, rho)
  bool dense = false;               // true iff every vertex owns a slot
  std::size_t slots = 0;
  std::size_t offset = 0;           // first parameter of the level

  bool operator==(const GridLevel&) const = default;
};

/// Eight interpolation corners of one level: parameter offsets and weights.
struct CornerSet {
  std::array<std::size_t, 8> offset{};
  std::array<double, 8> weight{};
};

/// Multi-resolution feature grid over the contracted cube [0,1]^3.
///
/// Levels whose vertex count fits in the table are stored densely (no
/// collisions); finer levels are spatially hashed. The theta axis is periodic:
/// a level of resolution N has N distinct theta vertices, vertex N aliases
/// vertex 0. The phi and rho axes have N + 1 vertices each.
class MultiResGrid {
 public:
  MultiResGrid() = default;
  explicit MultiResGrid(const GridConfig& config);

  const GridConfig& config() const { return config_; }
  const std::vector<GridLevel>& levels() const { return levels_; }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  int features_per_level() const { return config_.features_per_level; }
  int output_dim() const { return num_levels() * features_per_level(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> level_params(int level);
  std::span<const double> level_params(int level) const;

  void init_uniform(std::mt19937_64& rng, double scale);

  /// Slot index inside a level for integer vertex (i, j, k); i wraps.
  std::size_t vertex_slot(int level, int i, int j, int k) const;
  /// Contracted coordinate of a vertex.
  ContractedPoint vertex_coordinate(int level, int i, int j, int k) const;

  CornerSet corners(int level, const ContractedPoint& c) const;

  /// Writes output_dim() features, level-major.
  void encode(const ContractedPoint& c, std::span<double> out) const;
  void encode_level(int level, const ContractedPoint& c, std::span<double> out) const;

  /// Accumulates d(loss)/d(params) given d(loss)/d(encode(c)).
  void backward(const ContractedPoint& c, std::span<const double> d_out, std::span<double> d_params) const;

  bool operator==(const MultiResGrid& other) const = default;

 private:
  GridConfig config_;
  std::vector<GridLevel> levels_;
  std::vector<double> params_;
};

}  // namespace viewfield
