#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "viewfield/field.hpp"
#include "viewfield/geom.hpp"
#include "viewfield/image.hpp"
#include "viewfield/render.hpp"

namespace viewfield {

struct Keyframe {
  int id = 0;
  Pose pose;  // camera-to-world; overwritten by pose updates
  Image image;
  std::optional<DepthMap> depth;  // z-depth in meters
  int primary_model = -1;
  // Where the pixels came from, for replayable checkpoints. Empty for in-memory frames.
  std::string image_path;
  std::string depth_path;
};

/// Undirected weighted graph over keyframe ids. Symmetric, no self-edges.
class CovisibilityGraph {
 public:
  void add_node(int id) { adjacency_[id]; }
  void add_edge(int a, int b, double weight);
  bool contains(int id) const { return adjacency_.count(id) != 0; }
  bool connected(int a, int b) const;
  double weight(int a, int b) const;
  std::set<int> neighbors(int id) const;
  const std::map<int, std::map<int, double>>& adjacency() const { return adjacency_; }
  bool is_symmetric() const;

 private:
  std::map<int, std::map<int, double>> adjacency_;
};

struct TrainConfig {
  int rays_per_batch = 1024;
  double occupancy_threshold = 1e-2;
  AdamConfig adam;
  LossWeights loss;
};

struct AtlasConfig {
  double distance_threshold = 0.3;
  int max_models = 12;
  /// World-centric baseline: exactly one model, anchored at the first keyframe.
  bool single_model = false;
  bool propagate = true;
  CameraIntrinsics intrinsics;
  FieldConfig field;
  RenderConfig render;
  TrainConfig train;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const AtlasConfig& config);
AtlasConfig atlas_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraIntrinsics& intrinsics);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

struct AssignmentReport {
  int keyframe = 0;
  int primary_model = -1;
  std::optional<int> created_model;
  std::optional<int> propagated_from;
  std::vector<int> secondary_models;  // older covisible models that also got the frame
  bool cap_reached = false;
};

struct ModelStepReport {
  int model_id = 0;
  bool skipped = false;  // empty training batch
  LossParts parts;
  double total = 0.0;
  bool depth_empty = false;
};

/// The view-centric map: local field models anchored at keyframes, fed by a
/// tracker's keyframe / covisibility / pose-update stream.
class Atlas {
 public:
  explicit Atlas(AtlasConfig config);

  /// Registers a new keyframe with its covisible keyframes (id -> shared-observation weight).
  AssignmentReport on_keyframe(Keyframe kf, const std::map<int, double>& covisible);
  AssignmentReport on_keyframe(Keyframe kf, const std::set<int>& covisible);

  /// New model anchored at anchor_kf, initialized from the model with the
  /// nearest anchor when one exists (and propagation is enabled).
  int create_model(int anchor_kf);

  /// Up to three model ids: the two newest holding latest_kf plus one random pick.
  std::vector<int> schedule_training_step(int latest_kf);

  /// One Adam step per listed model on a fresh ray minibatch.
  std::vector<ModelStepReport> train_step(std::span<const int> model_ids);

  /// Overwrites keyframe poses; model parameters are never touched.
  void apply_pose_update(const std::map<int, Pose>& updates);

  /// Supervised rays for a model, expressed in its anchor frame from current poses.
  TrainingRays sample_training_rays(const LocalFieldModel& model, int count, std::mt19937_64& rng) const;

  const AtlasConfig& config() const { return config_; }
  const std::vector<LocalFieldModel>& models() const { return models_; }
  const LocalFieldModel& model(int id) const { return models_.at(id); }
  LocalFieldModel& mutable_model(int id) { return models_.at(id); }
  const std::map<int, Keyframe>& keyframes() const { return keyframes_; }
  const Keyframe& keyframe(int id) const { return keyframes_.at(id); }
  const CovisibilityGraph& graph() const { return graph_; }
  const Pose& anchor_pose(int model_id) const { return keyframes_.at(models_.at(model_id).anchor_keyframe).pose; }
  /// L_total of every step a model has taken, in order.
  const std::vector<double>& loss_history(int model_id) const { return loss_history_.at(model_id); }
  /// Model a given model was propagated from, or -1.
  int propagation_source(int model_id) const { return propagation_source_.at(model_id); }
  const std::vector<std::string>& event_log() const { return event_log_; }

  /// Factor between depth stored in memory and depth read from keyframe files
  /// (the pipeline rescales scenes); used when reloading a checkpoint.
  void set_depth_file_scale(double s) { depth_file_scale_ = s; }
  double depth_file_scale() const { return depth_file_scale_; }

  /// Directory of model checkpoints plus manifest.json.
  void save(const std::filesystem::path& dir) const;
  /// Loads a saved atlas; keyframe pixels are re-read from their recorded paths when present.
  static Atlas load(const std::filesystem::path& dir);

 private:
  int nearest_model(const Pose& pose, std::span<const int> candidates) const;

  AtlasConfig config_;
  std::vector<LocalFieldModel> models_;
  std::map<int, Keyframe> keyframes_;
  CovisibilityGraph graph_;
  std::mt19937_64 rng_;
  std::vector<std::vector<double>> loss_history_;
  std::vector<int> propagation_source_;
  std::vector<std::string> event_log_;
  double depth_file_scale_ = 1.0;
};

}  // namespace viewfield
