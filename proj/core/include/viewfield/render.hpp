#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "viewfield/field.hpp"
#include "viewfield/geom.hpp"

namespace viewfield {

struct RenderConfig {
  int proposal_samples = 64;
  int main_samples = 32;
  double near = 0.05;
  /// Metric clamp for the last interval, which otherwise reaches infinity.
  double far = 1e3;
  Vec3 background = Vec3::Zero();
  /// Uniform mass added to the proposal histogram before resampling.
  double resample_floor = 1e-5;

  bool operator==(const RenderConfig&) const = default;
};

/// Maps normalized contracted ray coordinates s in [0, 1] to metric distance
/// along the ray: s = 1 - (1 + near) / (1 + t), so equal steps in s are equal
/// steps in 1 / (1 + t).
struct RaySpacing {
  double near = 0.05;
  double far = 1e3;

  double to_metric(double s) const;
  double to_normalized(double t) const;
};

enum class RenderMode { Train, Eval };

/// Interval boundaries s_0 < ... < s_N plus per-interval field values.
struct RaySamples {
  std::vector<double> boundaries;
  std::vector<double> sigma;
  std::vector<Vec3> rgb;

  int intervals() const { return static_cast<int>(boundaries.size()) - 1; }
  double midpoint(int i) const { return 0.5 * (boundaries[i] + boundaries[i + 1]); }
};

struct RenderOutput {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;  // metric distance along the ray
  double opacity = 0.0;
  std::vector<double> weights;
  std::vector<double> transmittance;
};

/// N + 1 boundaries evenly spaced on [0, 1]. With a generator the interior
/// boundaries are stratified: boundary k is uniform on [(k-1)/(N-1), k/(N-1)).
/// Throws std::invalid_argument for n < 1.
std::vector<double> sample_uniform_contracted(int n, std::mt19937_64* jitter = nullptr);

/// Inverse-CDF resampling of n intervals from the piecewise-constant
/// histogram (proposal_boundaries, proposal_weights) plus a uniform floor.
/// The endpoints always match the proposal's endpoints.
std::vector<double> resample_from_proposal(std::span<const double> proposal_weights,
                                           std::span<const double> proposal_boundaries, int n, double floor,
                                           std::mt19937_64* jitter = nullptr);

RenderOutput composite(const RaySamples& samples, const RaySpacing& spacing, const Vec3& background);

/// Reverse pass of composite. d_weights may be empty (no direct weight terms).
void composite_backward(const RaySamples& samples, const RaySpacing& spacing, const Vec3& background,
                        const RenderOutput& out, const Vec3& d_color, double d_depth,
                        std::span<const double> d_weights, std::span<double> d_sigma, std::span<Vec3> d_rgb);

/// Mean over rays of the squared color error. Optional gradient w.r.t. predictions.
double loss_rgb(std::span<const Vec3> predicted, std::span<const Vec3> target, std::span<Vec3> d_predicted = {});

/// Distortion regularizer of one ray on normalized boundaries.
double loss_distortion(std::span<const double> weights, std::span<const double> boundaries,
                       std::span<double> d_weights = {});

/// Sum of proposal weights whose interval overlaps [lo, hi) with positive measure.
double bound(std::span<const double> proposal_boundaries, std::span<const double> proposal_weights, double lo,
             double hi);

/// Proposal supervision of one ray. The main weights are constants; the
/// optional gradient is w.r.t. the proposal weights only.
double loss_proposal(std::span<const double> boundaries, std::span<const double> weights,
                     std::span<const double> proposal_boundaries, std::span<const double> proposal_weights,
                     std::span<double> d_proposal_weights = {});

struct DepthLoss {
  double value = 0.0;
  bool empty = false;  // no valid depth in the batch
};

/// Mean absolute depth error over masked rays. The subgradient at a tie is 0.
DepthLoss loss_depth(std::span<const double> predicted, std::span<const double> target,
                     std::span<const std::uint8_t> mask, std::span<double> d_predicted = {});

struct LossWeights {
  double distortion = 0.002;
  double proposal = 1.0;
  double depth = 0.5;
  bool rgb_only = false;

  bool operator==(const LossWeights&) const = default;
};

struct LossParts {
  double rgb = 0.0;
  double distortion = 0.0;
  double proposal = 0.0;
  double depth = 0.0;
};

double loss_total(const LossParts& parts, const LossWeights& weights);

/// A minibatch of supervised rays in one model's local frame. depth is metric
/// distance along the ray.
struct TrainingRays {
  std::vector<Ray> rays;
  std::vector<Vec3> rgb;
  std::vector<double> depth;
  std::vector<std::uint8_t> depth_valid;

  std::size_t size() const { return rays.size(); }
};

/// Frozen sample placement for a batch: proposal boundaries and the main
/// boundaries resampled from them. Both are constants for differentiation.
struct SampleLayout {
  int proposal_intervals = 0;
  int main_intervals = 0;
  std::vector<double> proposal_bounds;  // rays x (proposal_intervals + 1)
  std::vector<double> main_bounds;      // rays x (main_intervals + 1)
};

SampleLayout plan_samples(const LocalFieldModel& model, std::span<const Ray> rays, const RenderConfig& config,
                          std::mt19937_64* jitter);

struct LossEvaluation {
  LossParts parts;
  double total = 0.0;
  bool depth_empty = false;
  std::vector<double> main_weights;  // rays x main_intervals
  std::vector<WeightedSample> weighted_samples;
  std::vector<Vec3> colors;
  std::vector<double> depths;
};

/// Forward pass of the full loss for a fixed layout; with grads set, also the
/// reverse pass (accumulated into grads). detached_main_weights, when given,
/// replaces the main weights inside the proposal loss.
LossEvaluation evaluate_loss(const LocalFieldModel& model, const TrainingRays& batch, const SampleLayout& layout,
                             const RenderConfig& config, const LossWeights& weights, ParamGradients* grads,
                             std::span<const double> detached_main_weights = {});

/// Batched evaluation-mode rendering. With use_skipping, main samples in
/// unoccupied cells get zero density and no field evaluation.
std::vector<RenderOutput> render_rays(const LocalFieldModel& model, std::span<const Ray> rays,
                                      const RenderConfig& config, bool use_skipping);

RenderOutput render_ray(const LocalFieldModel& model, const Ray& ray, const RenderConfig& config, RenderMode mode,
                        bool use_skipping, std::mt19937_64* jitter = nullptr);

}  // namespace viewfield
