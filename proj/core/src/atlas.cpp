#include "viewfield/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "viewfield/checkpoint.hpp"

namespace viewfield {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

nlohmann::json pose_json(const Pose& p) { return p.to_array(); }

Pose pose_from(const nlohmann::json& j) {
  const auto v = j.get<std::array<double, 7>>();
  return Pose::from_array(v);
}

}  // namespace

void CovisibilityGraph::add_edge(int a, int b, double weight) {
  if (a == b) return;
  adjacency_[a][b] = weight;
  adjacency_[b][a] = weight;
}

bool CovisibilityGraph::connected(int a, int b) const {
  const auto it = adjacency_.find(a);
  return it != adjacency_.end() && it->second.count(b) != 0;
}

double CovisibilityGraph::weight(int a, int b) const {
  const auto it = adjacency_.find(a);
  if (it == adjacency_.end()) return 0.0;
  const auto jt = it->second.find(b);
  return jt == it->second.end() ? 0.0 : jt->second;
}

std::set<int> CovisibilityGraph::neighbors(int id) const {
  std::set<int> out;
  const auto it = adjacency_.find(id);
  if (it != adjacency_.end()) {
    for (const auto& [n, w] : it->second) out.insert(n);
  }
  return out;
}

bool CovisibilityGraph::is_symmetric() const {
  for (const auto& [a, edges] : adjacency_) {
    for (const auto& [b, w] : edges) {
      if (a == b || weight(b, a) != w || !connected(b, a)) return false;
    }
  }
  return true;
}

nlohmann::json to_json(const CameraIntrinsics& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  CameraIntrinsics c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  return c;
}

nlohmann::json to_json(const AtlasConfig& c) {
  const auto& r = c.render;
  const auto& t = c.train;
  return {{"distance_threshold", c.distance_threshold},
          {"max_models", c.max_models},
          {"single_model", c.single_model},
          {"propagate", c.propagate},
          {"intrinsics", to_json(c.intrinsics)},
          {"field", to_json(c.field)},
          {"render",
           {{"proposal_samples", r.proposal_samples},
            {"main_samples", r.main_samples},
            {"near", r.near},
            {"far", r.far},
            {"background", {r.background.x(), r.background.y(), r.background.z()}},
            {"resample_floor", r.resample_floor}}},
          {"train",
           {{"rays_per_batch", t.rays_per_batch},
            {"occupancy_threshold", t.occupancy_threshold},
            {"lr_grid", t.adam.lr_grid},
            {"lr_mlp", t.adam.lr_mlp},
            {"beta1", t.adam.beta1},
            {"beta2", t.adam.beta2},
            {"eps", t.adam.eps},
            {"lambda_dist", t.loss.distortion},
            {"lambda_prop", t.loss.proposal},
            {"lambda_depth", t.loss.depth},
            {"rgb_only", t.loss.rgb_only}}},
          {"seed", c.seed}};
}

AtlasConfig atlas_config_from_json(const nlohmann::json& j) {
  AtlasConfig c;
  c.distance_threshold = j.at("distance_threshold").get<double>();
  c.max_models = j.at("max_models").get<int>();
  c.single_model = j.at("single_model").get<bool>();
  c.propagate = j.at("propagate").get<bool>();
  c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  c.field = field_config_from_json(j.at("field"));
  const auto& r = j.at("render");
  c.render.proposal_samples = r.at("proposal_samples").get<int>();
  c.render.main_samples = r.at("main_samples").get<int>();
  c.render.near = r.at("near").get<double>();
  c.render.far = r.at("far").get<double>();
  const auto bg = r.at("background").get<std::array<double, 3>>();
  c.render.background = Vec3(bg[0], bg[1], bg[2]);
  c.render.resample_floor = r.at("resample_floor").get<double>();
  const auto& t = j.at("train");
  c.train.rays_per_batch = t.at("rays_per_batch").get<int>();
  c.train.occupancy_threshold = t.at("occupancy_threshold").get<double>();
  c.train.adam.lr_grid = t.at("lr_grid").get<double>();
  c.train.adam.lr_mlp = t.at("lr_mlp").get<double>();
  c.train.adam.beta1 = t.at("beta1").get<double>();
  c.train.adam.beta2 = t.at("beta2").get<double>();
  c.train.adam.eps = t.at("eps").get<double>();
  c.train.loss.distortion = t.at("lambda_dist").get<double>();
  c.train.loss.proposal = t.at("lambda_prop").get<double>();
  c.train.loss.depth = t.at("lambda_depth").get<double>();
  c.train.loss.rgb_only = t.at("rgb_only").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Atlas::Atlas(AtlasConfig config) : config_(std::move(config)), rng_(splitmix64(config_.seed)) {
  config_.intrinsics.validate();
  if (config_.max_models < 1) throw std::invalid_argument("Atlas: max_models must be positive");
  if (config_.distance_threshold < 0.0) throw std::invalid_argument("Atlas: negative distance threshold");
}

int Atlas::nearest_model(const Pose& pose, std::span<const int> candidates) const {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m : candidates) {
    const double d = pose_distance(pose, anchor_pose(m));
    if (d < best_d || (d == best_d && m < best)) {
      best = m;
      best_d = d;
    }
  }
  return best;
}

AssignmentReport Atlas::on_keyframe(Keyframe kf, const std::set<int>& covisible) {
  std::map<int, double> weighted;
  for (int c : covisible) weighted[c] = 1.0;
  return on_keyframe(std::move(kf), weighted);
}

AssignmentReport Atlas::on_keyframe(Keyframe kf, const std::map<int, double>& covisible) {
  if (keyframes_.count(kf.id)) throw std::invalid_argument("on_keyframe: duplicate keyframe id " + std::to_string(kf.id));
  if (kf.image.width != config_.intrinsics.width || kf.image.height != config_.intrinsics.height) {
    throw std::invalid_argument("on_keyframe: image size does not match intrinsics");
  }
  for (const auto& [c, w] : covisible) {
    if (!keyframes_.count(c)) throw std::invalid_argument("on_keyframe: unknown covisible keyframe " + std::to_string(c));
  }
  const int id = kf.id;
  const Pose pose = kf.pose;
  kf.primary_model = -1;
  keyframes_.emplace(id, std::move(kf));
  graph_.add_node(id);
  for (const auto& [c, w] : covisible) graph_.add_edge(id, c, w);

  AssignmentReport report;
  report.keyframe = id;

  std::set<int> covisible_models;
  for (const auto& [c, w] : covisible) covisible_models.insert(keyframes_.at(c).primary_model);

  int primary = -1;
  if (config_.single_model) {
    if (models_.empty()) {
      primary = create_model(id);
      report.created_model = primary;
    } else {
      primary = 0;
    }
  } else {
    const bool near_any = std::any_of(covisible_models.begin(), covisible_models.end(), [&](int m) {
      return pose_distance(pose, anchor_pose(m)) <= config_.distance_threshold;
    });
    if (covisible_models.empty() || !near_any) {
      if (static_cast<int>(models_.size()) < config_.max_models) {
        primary = create_model(id);
        report.created_model = primary;
        if (propagation_source_[primary] >= 0) report.propagated_from = propagation_source_[primary];
      } else {
        report.cap_reached = true;
        std::vector<int> candidates(covisible_models.begin(), covisible_models.end());
        if (candidates.empty()) {
          for (const auto& m : models_) candidates.push_back(m.id);
        }
        primary = nearest_model(pose, candidates);
        event_log_.push_back("model cap reached at keyframe " + std::to_string(id) + "; joined model " +
                             std::to_string(primary));
      }
    } else {
      primary = *covisible_models.rbegin();
    }
  }

  keyframes_.at(id).primary_model = primary;
  models_.at(primary).training_frames.insert(id);
  report.primary_model = primary;
  for (int m : covisible_models) {
    if (m < primary) {
      models_.at(m).training_frames.insert(id);
      report.secondary_models.push_back(m);
    }
  }
  return report;
}

int Atlas::create_model(int anchor_kf) {
  if (static_cast<int>(models_.size()) >= config_.max_models) {
    throw std::length_error("create_model: model cap of " + std::to_string(config_.max_models) + " reached");
  }
  const Keyframe& anchor = keyframes_.at(anchor_kf);
  const int id = static_cast<int>(models_.size());
  LocalFieldModel model = init_model(id, anchor_kf, config_.field, splitmix64(config_.seed ^ (0x1000u + id)));
  int source = -1;
  if (config_.propagate && !models_.empty()) {
    std::vector<int> all(models_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    source = nearest_model(anchor.pose, all);
    const Pose relative = anchor_pose(source).inverse() * anchor.pose;
    propagate_features(models_[source], model, relative);
  }
  models_.push_back(std::move(model));
  loss_history_.emplace_back();
  propagation_source_.push_back(source);
  return id;
}

std::vector<int> Atlas::schedule_training_step(int latest_kf) {
  if (models_.empty()) throw std::logic_error("schedule_training_step: atlas has no models");
  std::vector<int> holding;
  for (const auto& m : models_) {
    if (m.training_frames.count(latest_kf)) holding.push_back(m.id);
  }
  std::vector<int> picks;
  for (auto it = holding.rbegin(); it != holding.rend() && picks.size() < 2; ++it) picks.push_back(*it);

  const int n = static_cast<int>(models_.size());
  std::uniform_int_distribution<int> dist(0, n - 1);
  for (int attempt = 0; attempt < n; ++attempt) {
    const int draw = dist(rng_);
    if (std::find(picks.begin(), picks.end(), draw) == picks.end()) {
      picks.push_back(draw);
      break;
    }
  }
  return picks;
}

TrainingRays Atlas::sample_training_rays(const LocalFieldModel& model, int count, std::mt19937_64& rng) const {
  const std::vector<int> frames(model.training_frames.begin(), model.training_frames.end());
  if (frames.empty()) throw std::invalid_argument("sample_training_rays: empty training batch");
  const auto& intr = config_.intrinsics;
  const Pose& anchor = anchor_pose(model.id);
  std::uniform_int_distribution<std::size_t> pick_frame(0, frames.size() - 1);
  std::uniform_int_distribution<int> pick_u(0, intr.width - 1);
  std::uniform_int_distribution<int> pick_v(0, intr.height - 1);

  TrainingRays batch;
  batch.rays.reserve(count);
  for (int r = 0; r < count; ++r) {
    const Keyframe& kf = keyframes_.at(frames[pick_frame(rng)]);
    if (kf.image.data.empty()) throw std::runtime_error("keyframe " + std::to_string(kf.id) + " has no pixels");
    const int u = pick_u(rng);
    const int v = pick_v(rng);
    batch.rays.push_back(pixel_to_ray(kf.pose, intr, u + 0.5, v + 0.5, anchor));
    batch.rgb.push_back(kf.image.at(u, v));
    if (kf.depth && kf.depth->is_valid(u, v)) {
      const double ray_length = intr.camera_direction(u + 0.5, v + 0.5).norm();
      batch.depth.push_back(kf.depth->at(u, v) * ray_length);
      batch.depth_valid.push_back(1);
    } else {
      batch.depth.push_back(0.0);
      batch.depth_valid.push_back(0);
    }
  }
  return batch;
}

std::vector<ModelStepReport> Atlas::train_step(std::span<const int> model_ids) {
  std::set<int> seen;
  for (int id : model_ids) {
    if (id < 0 || id >= static_cast<int>(models_.size())) throw std::out_of_range("train_step: unknown model");
    if (!seen.insert(id).second) throw std::invalid_argument("train_step: duplicate model id");
  }
  std::vector<ModelStepReport> reports;
  for (int id : model_ids) {
    LocalFieldModel& model = models_[id];
    ModelStepReport report;
    report.model_id = id;
    if (model.training_frames.empty()) {
      report.skipped = true;
      reports.push_back(report);
      continue;
    }
    const TrainingRays batch = sample_training_rays(model, config_.train.rays_per_batch, rng_);
    const SampleLayout layout = plan_samples(model, batch.rays, config_.render, &rng_);
    ParamGradients grads = model.zero_gradients();
    const LossEvaluation eval = evaluate_loss(model, batch, layout, config_.render, config_.train.loss, &grads);
    if (!grads.all_finite()) throw std::runtime_error("train_step: non-finite gradient in model " + std::to_string(id));
    adam_step(model, grads, config_.train.adam);
    mark_occupancy(model, eval.weighted_samples, config_.train.occupancy_threshold);
    report.parts = eval.parts;
    report.total = eval.total;
    report.depth_empty = eval.depth_empty;
    loss_history_[id].push_back(eval.total);
    reports.push_back(report);
  }
  return reports;
}

void Atlas::apply_pose_update(const std::map<int, Pose>& updates) {
  for (const auto& [id, pose] : updates) {
    if (!keyframes_.count(id)) throw std::out_of_range("apply_pose_update: unknown keyframe " + std::to_string(id));
  }
  for (const auto& [id, pose] : updates) keyframes_.at(id).pose = pose;
}

void Atlas::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir / "models");
  nlohmann::json manifest;
  manifest["format"] = "viewfield-atlas";
  manifest["version"] = 1;
  manifest["config"] = to_json(config_);
  manifest["depth_file_scale"] = depth_file_scale_;
  nlohmann::json kfs = nlohmann::json::array();
  for (const auto& [id, kf] : keyframes_) {
    kfs.push_back({{"id", id},
                   {"pose", pose_json(kf.pose)},
                   {"primary_model", kf.primary_model},
                   {"image_path", kf.image_path},
                   {"depth_path", kf.depth_path}});
  }
  manifest["keyframes"] = kfs;
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : models_) {
    char name[32];
    std::snprintf(name, sizeof(name), "model_%02d.vfm", m.id);
    write_model_checkpoint(dir / "models" / name, m);
    models.push_back({{"id", m.id},
                      {"anchor_keyframe", m.anchor_keyframe},
                      {"file", std::string("models/") + name},
                      {"propagated_from", propagation_source_[m.id]},
                      {"loss_history", loss_history_[m.id]}});
  }
  manifest["models"] = models;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, nbrs] : graph_.adjacency()) {
    for (const auto& [b, w] : nbrs) {
      if (a < b) edges.push_back({a, b, w});
    }
  }
  manifest["graph"] = {{"nodes", nlohmann::json::array()}, {"edges", edges}};
  for (const auto& [a, nbrs] : graph_.adjacency()) manifest["graph"]["nodes"].push_back(a);
  std::ostringstream rng_state;
  rng_state << rng_;
  manifest["rng_state"] = rng_state.str();
  manifest["event_log"] = event_log_;

  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Atlas Atlas::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
  const nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "viewfield-atlas") throw std::runtime_error("not an atlas manifest");

  Atlas atlas(atlas_config_from_json(manifest.at("config")));
  atlas.depth_file_scale_ = manifest.at("depth_file_scale").get<double>();
  for (const auto& k : manifest.at("keyframes")) {
    Keyframe kf;
    kf.id = k.at("id").get<int>();
    kf.pose = pose_from(k.at("pose"));
    kf.primary_model = k.at("primary_model").get<int>();
    kf.image_path = k.at("image_path").get<std::string>();
    kf.depth_path = k.at("depth_path").get<std::string>();
    if (!kf.image_path.empty() && std::filesystem::exists(kf.image_path)) kf.image = read_ppm(kf.image_path);
    if (!kf.depth_path.empty() && std::filesystem::exists(kf.depth_path)) {
      DepthMap d = read_depth_pgm(kf.depth_path);
      for (double& v : d.meters) v *= atlas.depth_file_scale_;
      kf.depth = std::move(d);
    }
    atlas.keyframes_.emplace(kf.id, std::move(kf));
  }
  for (const auto& m : manifest.at("models")) {
    LocalFieldModel model = read_model_checkpoint(dir / m.at("file").get<std::string>());
    if (model.id != static_cast<int>(atlas.models_.size())) throw std::runtime_error("atlas models out of order");
    atlas.models_.push_back(std::move(model));
    atlas.propagation_source_.push_back(m.at("propagated_from").get<int>());
    atlas.loss_history_.push_back(m.at("loss_history").get<std::vector<double>>());
  }
  for (int node : manifest.at("graph").at("nodes")) atlas.graph_.add_node(node);
  for (const auto& e : manifest.at("graph").at("edges")) {
    atlas.graph_.add_edge(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>());
  }
  std::istringstream rng_state(manifest.at("rng_state").get<std::string>());
  rng_state >> atlas.rng_;
  atlas.event_log_ = manifest.at("event_log").get<std::vector<std::string>>();
  return atlas;
}

}  // namespace viewfield
