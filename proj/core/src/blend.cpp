#include "viewfield/blend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace viewfield {

std::vector<double> inverse_distance_weights(std::span<const double> distances, double power, double min_distance) {
  if (distances.empty()) return {};
  // Scale by the smallest clamped distance so an exact hit cannot overflow.
  std::vector<double> clamped(distances.size());
  std::transform(distances.begin(), distances.end(), clamped.begin(),
                 [&](double d) { return std::max(d, min_distance); });
  const double smallest = *std::min_element(clamped.begin(), clamped.end());
  std::vector<double> w(clamped.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::pow(smallest / clamped[i], power);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

// Member training view of a model nearest to a position; ties go to the smaller id.
std::pair<int, double> nearest_member(const Atlas& atlas, const LocalFieldModel& model, const Vec3& position) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int kf : model.training_frames) {
    const double d = (atlas.keyframe(kf).pose.translation() - position).norm();
    if (d < best_d) {
      best = kf;
      best_d = d;
    }
  }
  return {best, best_d};
}

}  // namespace

BlendSelection select_models(const Atlas& atlas, const Pose& test_pose, const BlendConfig& config) {
  if (atlas.models().empty()) throw std::logic_error("select_models: atlas has no models");
  const Vec3 o = test_pose.translation();
  BlendSelection sel;

  double best = std::numeric_limits<double>::infinity();
  for (const auto& [id, kf] : atlas.keyframes()) {
    const double d = (kf.pose.translation() - o).norm();
    if (d < best) {
      best = d;
      sel.reference_keyframe = id;
    }
  }
  const Vec3 reference = atlas.keyframe(sel.reference_keyframe).pose.translation();

  std::vector<std::pair<double, int>> ranked;
  for (const auto& m : atlas.models()) {
    if (m.training_frames.empty()) continue;
    ranked.emplace_back(nearest_member(atlas, m, reference).second, m.id);
  }
  std::sort(ranked.begin(), ranked.end());
  const std::size_t take = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(config.max_models));
  for (std::size_t i = 0; i < take; ++i) {
    const int id = ranked[i].second;
    const auto [view, d] = nearest_member(atlas, atlas.model(id), o);
    sel.model_ids.push_back(id);
    sel.nearest_views.push_back(view);
    sel.distances.push_back(d);
  }
  sel.weights = inverse_distance_weights(sel.distances, config.power, config.min_distance);
  return sel;
}

ModelView render_model_view(const LocalFieldModel& model, const Pose& anchor_pose, const Pose& camera_pose,
                            const CameraIntrinsics& intrinsics, const RenderConfig& config, bool use_skipping) {
  const int w = intrinsics.width;
  const int h = intrinsics.height;
  std::vector<Ray> rays;
  std::vector<double> ray_length;
  rays.reserve(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      rays.push_back(pixel_to_ray(camera_pose, intrinsics, u + 0.5, v + 0.5, anchor_pose));
      ray_length.push_back(intrinsics.camera_direction(u + 0.5, v + 0.5).norm());
    }
  }
  const auto out = render_rays(model, rays, config, use_skipping);
  ModelView view{Image(w, h), DepthMap(w, h)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * w + u;
      view.image.set(u, v, out[i].color);
      view.depth.set(u, v, out[i].depth / ray_length[i], true);
    }
  }
  return view;
}

NovelView render_novel_view(const Atlas& atlas, const Pose& test_pose, const CameraIntrinsics& intrinsics,
                            const BlendConfig& config) {
  NovelView nv;
  nv.selection = select_models(atlas, test_pose, config);
  nv.image = Image(intrinsics.width, intrinsics.height);
  nv.depth = DepthMap(intrinsics.width, intrinsics.height);
  std::fill(nv.depth.valid.begin(), nv.depth.valid.end(), 1);
  for (std::size_t k = 0; k < nv.selection.model_ids.size(); ++k) {
    const int id = nv.selection.model_ids[k];
    const double w = nv.selection.weights[k];
    ModelView layer = render_model_view(atlas.model(id), atlas.anchor_pose(id), test_pose, intrinsics,
                                        atlas.config().render, config.use_skipping);
    for (std::size_t i = 0; i < nv.image.data.size(); ++i) nv.image.data[i] += w * layer.image.data[i];
    for (std::size_t i = 0; i < nv.depth.meters.size(); ++i) nv.depth.meters[i] += w * layer.depth.meters[i];
    nv.layers.push_back(std::move(layer));
  }
  return nv;
}

}  // namespace viewfield
