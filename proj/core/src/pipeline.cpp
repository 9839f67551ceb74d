#include "viewfield/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "viewfield/metrics.hpp"

namespace viewfield {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(MapMode mode) {
  return mode == MapMode::ViewCentric ? "view_centric" : "world_centric_single";
}

MapMode map_mode_from_string(const std::string& text) {
  if (text == "view_centric") return MapMode::ViewCentric;
  if (text == "world_centric_single") return MapMode::WorldCentricSingle;
  throw std::invalid_argument("unknown mode '" + text + "' (expected view_centric or world_centric_single)");
}

void RunConfig::validate() const {
  const auto& w = atlas.train.loss;
  if (w.distortion < 0.0 || w.proposal < 0.0 || w.depth < 0.0) throw std::invalid_argument("loss weights must be nonnegative");
  if (steps_per_keyframe < 0) throw std::invalid_argument("steps_per_keyframe must be nonnegative");
  if (eval_interval < 1) throw std::invalid_argument("eval_interval must be positive");
  if (atlas.train.rays_per_batch < 1) throw std::invalid_argument("rays_per_batch must be positive");
  if (atlas.max_models < 1) throw std::invalid_argument("max_models must be positive");
  if (atlas.distance_threshold < 0.0) throw std::invalid_argument("distance_threshold must be nonnegative");
  if (blend.max_models < 1) throw std::invalid_argument("blend max_models must be positive");
  if (blend.power < 0.0) throw std::invalid_argument("blend power must be nonnegative");
}

json to_json(const RunConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"stream", c.stream.string()},
          {"steps_per_keyframe", c.steps_per_keyframe},
          {"eval_interval", c.eval_interval},
          {"rescale", c.rescale},
          {"atlas", to_json(c.atlas)},
          {"blend",
           {{"max_models", c.blend.max_models},
            {"power", c.blend.power},
            {"min_distance", c.blend.min_distance},
            {"use_skipping", c.blend.use_skipping}}}};
}

SceneTransform fit_unit_sphere(const EventStream& stream) {
  std::vector<Vec3> points;
  for (const auto& ev : stream.events) {
    if (ev.tag == TrackerEvent::Tag::Keyframe) points.push_back(ev.pose.translation());
  }
  SceneTransform t;
  if (points.empty()) return t;
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  t.center = 0.5 * (lo + hi);
  double radius = 0.0;
  for (const auto& p : points) radius = std::max(radius, (p - t.center).norm());
  t.scale = radius > 1e-9 ? 1.0 / radius : 1.0;
  return t;
}

namespace {

struct TestFrame {
  int id = 0;
  Pose pose;
  Image image;
  std::optional<DepthMap> depth;  // file units (meters)
};

char* frame_file(char* buf, std::size_t n, int id, const char* suffix) {
  std::snprintf(buf, n, "frame_%05d%s", id, suffix);
  return buf;
}

MetricRecord evaluate(const Atlas& atlas, const std::vector<TestFrame>& tests, const BlendConfig& blend,
                      double scale, const std::optional<fs::path>& render_dir) {
  MetricRecord record;
  if (render_dir) fs::create_directories(*render_dir);
  for (const auto& t : tests) {
    NovelView view = render_novel_view(atlas, t.pose, atlas.config().intrinsics, blend);
    for (double& d : view.depth.meters) d /= scale;
    FrameMetric m;
    m.frame = t.id;
    m.psnr = psnr(view.image, t.image);
    m.ssim = ssim(view.image, t.image);
    if (t.depth && std::any_of(t.depth->valid.begin(), t.depth->valid.end(), [](auto v) { return v != 0; })) {
      m.l1_depth = l1_depth(view.depth, *t.depth);
    }
    record.frames.push_back(m);
    if (render_dir) {
      char buf[64];
      write_ppm(*render_dir / frame_file(buf, sizeof(buf), t.id, ".ppm"), view.image);
      write_depth_pgm(*render_dir / frame_file(buf, sizeof(buf), t.id, "_depth.pgm"), view.depth);
      for (std::size_t k = 0; k < view.layers.size(); ++k) {
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "_model_%02d.ppm", view.selection.model_ids[k]);
        write_ppm(*render_dir / frame_file(buf, sizeof(buf), t.id, suffix), view.layers[k].image);
      }
    }
  }
  return record;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_pipeline(const RunConfig& config) { return run_pipeline(config, read_stream(config.stream)); }

RunResult run_pipeline(const RunConfig& config_in, const EventStream& stream) {
  config_in.validate();
  RunConfig config = config_in;
  config.atlas.intrinsics = stream.intrinsics;
  config.atlas.single_model = config.mode == MapMode::WorldCentricSingle;

  const bool write = !config.out.empty();
  if (write) {
    fs::create_directories(config.out);
    write_json(config.out / "config.json", to_json(config));
  }

  RunResult result;
  result.transform = config.rescale ? fit_unit_sphere(stream) : SceneTransform{};
  const SceneTransform& xf = result.transform;
  Atlas atlas(config.atlas);
  atlas.set_depth_file_scale(xf.scale);

  std::vector<TestFrame> tests;
  int keyframes = 0;
  long steps = 0;
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  struct Timing {
    double train = 0.0, eval = 0.0;
  };
  std::vector<Timing> timings;
  double train_since_eval = 0.0;

  auto run_eval = [&](const std::string& event, bool final_record) {
    if (atlas.models().empty() || tests.empty()) return;
    const auto t0 = clock::now();
    std::optional<fs::path> render_dir;
    if (final_record && write && config.write_renders) render_dir = config.out / "renders";
    MetricRecord r = evaluate(atlas, tests, config.blend, xf.scale, render_dir);
    r.index = static_cast<int>(result.records.size());
    r.keyframes = keyframes;
    r.train_steps = steps;
    r.event = event;
    result.records.push_back(std::move(r));
    timings.push_back({train_since_eval, std::chrono::duration<double>(clock::now() - t0).count()});
    train_since_eval = 0.0;
  };

  bool ended = false;
  for (const auto& ev : stream.events) {
    if (ev.tag == TrackerEvent::Tag::End) {
      ended = true;
      break;
    }
    if (ev.tag == TrackerEvent::Tag::PoseUpdate) {
      run_eval("pre_update", false);
      std::map<int, Pose> updates;
      for (const auto& [id, pose] : ev.updates) {
        const Pose p = xf.apply(pose);
        auto test = std::find_if(tests.begin(), tests.end(), [&](const TestFrame& t) { return t.id == id; });
        if (test != tests.end()) test->pose = p;
        else updates.emplace(id, p);
      }
      atlas.apply_pose_update(updates);
      run_eval("post_update", false);
      continue;
    }
    if (ev.held_out) {
      tests.push_back({ev.id, xf.apply(ev.pose), ev.image, ev.depth});
      continue;
    }
    Keyframe kf;
    kf.id = ev.id;
    kf.pose = xf.apply(ev.pose);
    kf.image = ev.image;
    kf.image_path = ev.image_path;
    kf.depth_path = ev.depth_path;
    if (ev.depth) {
      DepthMap d = *ev.depth;
      for (double& v : d.meters) v *= xf.scale;
      kf.depth = std::move(d);
    }
    std::map<int, double> covisible;
    for (const auto& [id, w] : ev.covisible) {
      if (atlas.keyframes().count(id)) covisible.emplace(id, w);
    }
    atlas.on_keyframe(std::move(kf), covisible);
    ++keyframes;

    const auto t0 = clock::now();
    for (int s = 0; s < config.steps_per_keyframe; ++s) {
      const auto ids = atlas.schedule_training_step(ev.id);
      atlas.train_step(ids);
      ++steps;
    }
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    result.train_seconds += dt;
    train_since_eval += dt;
    if (keyframes % config.eval_interval == 0) run_eval("interval", false);
  }
  if (!ended) throw std::runtime_error("stream does not end with END");
  run_eval("final", true);
  result.train_steps = steps;

  if (write) {
    write_metrics_csv(config.out / "metrics.csv", result.records);
    std::vector<SummaryRow> rows;
    for (const auto& r : result.records) rows.push_back(summarize(r));
    write_summary_csv(config.out / "summary.csv", rows);
    std::ofstream timing(config.out / "timing.csv");
    timing << "record,event,keyframes,train_steps,train_seconds,eval_seconds\n";
    for (std::size_t i = 0; i < result.records.size(); ++i) {
      const auto& r = result.records[i];
      timing << r.index << ',' << r.event << ',' << r.keyframes << ',' << r.train_steps << ',' << timings[i].train
             << ',' << timings[i].eval << '\n';
    }
    timing << "total,,," << steps << ',' << result.train_seconds << ','
           << std::chrono::duration<double>(clock::now() - start).count() << '\n';
    if (!result.records.empty()) emit_report({config.out}, config.out);
    if (config.write_checkpoint) {
      atlas.save(config.out / "checkpoint");
      write_json(config.out / "checkpoint" / "run.json",
                 {{"mode", to_string(config.mode)},
                  {"center", {xf.center.x(), xf.center.y(), xf.center.z()}},
                  {"scale", xf.scale},
                  {"train_steps", steps},
                  {"blend",
                   {{"max_models", config.blend.max_models},
                    {"power", config.blend.power},
                    {"min_distance", config.blend.min_distance},
                    {"use_skipping", config.blend.use_skipping}}}});
    }
  }
  result.atlas.emplace(std::move(atlas));
  return result;
}

std::vector<MetricRecord> evaluate_checkpoint(const fs::path& checkpoint, const fs::path& stream_path,
                                              const fs::path& out, const BlendConfig& blend) {
  const Atlas atlas = Atlas::load(checkpoint);
  std::ifstream in(checkpoint / "run.json");
  if (!in) throw std::runtime_error("missing " + (checkpoint / "run.json").string());
  const json run = json::parse(in);
  SceneTransform xf;
  const auto c = run.at("center").get<std::array<double, 3>>();
  xf.center = Vec3(c[0], c[1], c[2]);
  xf.scale = run.at("scale").get<double>();

  const EventStream stream = read_stream(stream_path);
  std::vector<TestFrame> tests;
  for (const auto& ev : stream.events) {
    if (ev.tag == TrackerEvent::Tag::Keyframe && ev.held_out) {
      tests.push_back({ev.id, xf.apply(ev.pose), ev.image, ev.depth});
    } else if (ev.tag == TrackerEvent::Tag::PoseUpdate) {
      for (auto& t : tests) {
        auto it = ev.updates.find(t.id);
        if (it != ev.updates.end()) t.pose = xf.apply(it->second);
      }
    }
  }
  std::vector<MetricRecord> records;
  if (!atlas.models().empty() && !tests.empty()) {
    MetricRecord r = evaluate(atlas, tests, blend, xf.scale,
                              out.empty() ? std::nullopt : std::optional<fs::path>(out / "renders"));
    r.index = 0;
    r.keyframes = static_cast<int>(atlas.keyframes().size());
    r.train_steps = run.value("train_steps", 0L);
    r.event = "eval";
    records.push_back(std::move(r));
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_metrics_csv(out / "metrics.csv", records);
    std::vector<SummaryRow> rows;
    for (const auto& r : records) rows.push_back(summarize(r));
    write_summary_csv(out / "summary.csv", rows);
  }
  return records;
}

CameraIntrinsics GenConfig::intrinsics() const {
  CameraIntrinsics c{focal, focal, 0.5 * width, 0.5 * height, width, height};
  c.validate();
  return c;
}

EventStream generate_stream(const GenConfig& config, const fs::path& dir) {
  if (dir.empty()) throw std::invalid_argument("generate_stream: output directory required");
  const CameraIntrinsics intr = config.intrinsics();
  const SyntheticScene scene = make_scene(config.scene_seed);
  const auto gt = generate_trajectory(config.trajectory, config.keyframes, config.radius);
  const auto drifted = inject_drift(gt, config.drift_rate);
  StreamParams params;
  params.loop_close_at = config.loop_close_at;
  params.covis_radius = config.covis_radius;
  params.holdout_every = config.holdout_every;
  params.with_depth = config.with_depth;
  auto events = emit_stream(scene, gt, drifted, intr, params);
  write_stream(dir, events, intr);
  return read_stream(dir);
}

}  // namespace viewfield
