#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "viewfield/geom.hpp"
#include "viewfield/grid.hpp"
#include "viewfield/mlp.hpp"

namespace viewfield {

struct FieldConfig {
  GridConfig grid{8, 2, 16, 1.4, 14};
  GridConfig proposal_grid{4, 2, 12, 1.5, 12};
  int density_hidden = 64;
  int geo_features = 15;
  int color_hidden = 64;
  int color_hidden_layers = 2;
  int proposal_hidden = 32;
  double init_feature_scale = 1e-4;

  bool operator==(const FieldConfig&) const = default;
};

/// 16^3 boolean grid over the contracted cube; a cell is set once any
/// training sample inside it carried noticeable rendering weight.
class OccupancyGrid {
 public:
  static constexpr int kResolution = 16;
  static constexpr int kCells = kResolution * kResolution * kResolution;

  static int cell_index(const ContractedPoint& c);
  static int cell_index(int i, int j, int k) { return i + kResolution * (j + kResolution * k); }

  bool occupied(const ContractedPoint& c) const { return bits_.test(cell_index(c)); }
  bool occupied(int cell) const { return bits_.test(cell); }
  void mark(int cell) { bits_.set(cell); }
  void fill(bool value);
  std::size_t count() const { return bits_.count(); }

  const std::bitset<kCells>& bits() const { return bits_; }
  std::bitset<kCells>& bits() { return bits_; }

  bool operator==(const OccupancyGrid&) const = default;

 private:
  std::bitset<kCells> bits_;
};

enum class ParamGroup : int { Grid = 0, ProposalGrid, DensityMlp, ColorMlp, ProposalMlp };
inline constexpr std::array<ParamGroup, 5> kParamGroups{ParamGroup::Grid, ParamGroup::ProposalGrid,
                                                        ParamGroup::DensityMlp, ParamGroup::ColorMlp,
                                                        ParamGroup::ProposalMlp};
std::string_view param_group_name(ParamGroup group);
inline bool is_grid_group(ParamGroup g) { return g == ParamGroup::Grid || g == ParamGroup::ProposalGrid; }

/// Gradient buffers with the same layout as a model's parameters.
struct ParamGradients {
  std::array<std::vector<double>, kParamGroups.size()> groups;

  std::span<double> of(ParamGroup g) { return groups[static_cast<int>(g)]; }
  std::span<const double> of(ParamGroup g) const { return groups[static_cast<int>(g)]; }
  void set_zero();
  bool all_finite() const;
};

struct AdamConfig {
  double lr_grid = 1e-2;
  double lr_mlp = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  std::int64_t step = 0;
  std::array<std::vector<double>, kParamGroups.size()> first;
  std::array<std::vector<double>, kParamGroups.size()> second;

  bool operator==(const AdamState&) const = default;
};

/// One local radiance field, defined in the frame of its anchor keyframe.
struct LocalFieldModel {
  int id = 0;
  int anchor_keyframe = 0;
  FieldConfig config;
  MultiResGrid grid;
  Mlp density_mlp;  // grid features -> [density logit, geometry features]
  Mlp color_mlp;    // [geometry features, view direction] -> rgb logits
  MultiResGrid proposal_grid;
  Mlp proposal_mlp;  // proposal features -> density logit
  OccupancyGrid occupancy;
  std::set<int> training_frames;
  AdamState optimizer;

  std::span<double> params(ParamGroup g);
  std::span<const double> params(ParamGroup g) const;
  ParamGradients zero_gradients() const;
  std::size_t parameter_count() const;
  /// FNV-1a over every parameter byte; used to assert that updates leave a model untouched.
  std::uint64_t parameter_checksum() const;

  bool operator==(const LocalFieldModel&) const = default;
};

struct FieldSample {
  double sigma = 0.0;
  Vec3 rgb = Vec3::Zero();
};

struct WeightedSample {
  ContractedPoint point;
  double weight = 0.0;
};

double softplus(double x);
double sigmoid(double x);

LocalFieldModel init_model(int id, int anchor_keyframe, const FieldConfig& config, std::uint64_t rng_seed);

FieldSample query(const LocalFieldModel& model, const ContractedPoint& c, const Vec3& view_dir);
double query_proposal(const LocalFieldModel& model, const ContractedPoint& c);

/// Batched main-field evaluation with everything backward() needs.
struct MainFieldPass {
  std::vector<ContractedPoint> points;
  Matrix encoded;       // grid features, one column per sample
  Mlp::Cache density_cache;
  Matrix density_out;   // row 0 density logit, rows 1.. geometry features
  Mlp::Cache color_cache;
  Matrix color_out;     // rgb logits
  Eigen::VectorXd sigma;
  Matrix rgb;           // 3 x n
};

struct ProposalFieldPass {
  std::vector<ContractedPoint> points;
  Matrix encoded;
  Mlp::Cache cache;
  Eigen::VectorXd logit;
  Eigen::VectorXd sigma;
};

void main_field_forward(const LocalFieldModel& model, std::span<const ContractedPoint> points,
                        const Matrix& view_dirs, MainFieldPass& pass);
void main_field_backward(const LocalFieldModel& model, const MainFieldPass& pass,
                         std::span<const double> d_sigma, const Matrix& d_rgb, ParamGradients& grads);

void proposal_field_forward(const LocalFieldModel& model, std::span<const ContractedPoint> points,
                            ProposalFieldPass& pass);
void proposal_field_backward(const LocalFieldModel& model, const ProposalFieldPass& pass,
                             std::span<const double> d_sigma, ParamGradients& grads);

/// Initializes target from a trained source. relative_pose maps target-local
/// coordinates into source-local coordinates. Dense (collision-free) grid levels
/// are resampled from the source, hashed levels keep their initialization and
/// all MLP weights are copied.
void propagate_features(const LocalFieldModel& source, LocalFieldModel& target, const Pose& relative_pose);

/// Sets every cell holding a sample whose weight exceeds threshold.
void mark_occupancy(LocalFieldModel& model, std::span<const WeightedSample> samples, double threshold);

/// One Adam update over all parameter groups.
void adam_step(LocalFieldModel& model, const ParamGradients& grads, const AdamConfig& config);

}  // namespace viewfield
