#pragma once

#include <span>
#include <vector>

#include "viewfield/atlas.hpp"
#include "viewfield/image.hpp"

namespace viewfield {

struct BlendConfig {
  int max_models = 3;
  double power = 4.0;          // inverse-distance exponent p
  double min_distance = 1e-6;  // clamp for an exact hit on a training view
  bool use_skipping = true;
};

struct BlendSelection {
  int reference_keyframe = -1;    // training keyframe nearest to the test camera
  std::vector<int> model_ids;     // ranked, at most max_models
  std::vector<int> nearest_views; // per model, its training view nearest to the test camera
  std::vector<double> distances;  // |o - t_i|
  std::vector<double> weights;    // normalized inverse-distance weights
};

/// w_i proportional to max(d_i, min_distance)^-p, normalized to sum to one.
std::vector<double> inverse_distance_weights(std::span<const double> distances, double power, double min_distance);

/// Ranks models by how close their training views are to the training view
/// nearest the test camera; weights come from the test camera's own distances.
BlendSelection select_models(const Atlas& atlas, const Pose& test_pose, const BlendConfig& config = {});

struct ModelView {
  Image image;
  DepthMap depth;  // z-depth
};

/// Full-image render of one model from a world-frame camera pose.
ModelView render_model_view(const LocalFieldModel& model, const Pose& anchor_pose, const Pose& camera_pose,
                            const CameraIntrinsics& intrinsics, const RenderConfig& config, bool use_skipping);

struct NovelView {
  Image image;
  DepthMap depth;
  std::vector<ModelView> layers;  // one per selected model, for debugging
  BlendSelection selection;
};

NovelView render_novel_view(const Atlas& atlas, const Pose& test_pose, const CameraIntrinsics& intrinsics,
                            const BlendConfig& config = {});

}  // namespace viewfield
