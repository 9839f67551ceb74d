// Command-line front end: gen, run, eval, report.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <limits>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "viewfield/pipeline.hpp"
#include "viewfield/report.hpp"

namespace {

using namespace viewfield;

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

struct RunArgs {
  RunConfig config;
  std::string mode = "view_centric";
  bool rgb_only = false;
  bool no_propagation = false;
  bool no_rescale = false;
  bool no_renders = false;
  bool no_checkpoint = false;
  std::string stream;
  std::string out;
  std::string config_file;
};

// Config entries become --key=value arguments placed before the real ones, so
// a flag on the command line wins over the file. Keys are the long flag names;
// a [run] / [eval] / [gen] section scopes keys to that subcommand.
std::vector<std::string> config_arguments(const std::string& path, const std::string& command) {
  CLI::ConfigTOML reader;
  std::vector<std::string> args;
  for (const CLI::ConfigItem& item : reader.from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && (item.parents.size() != 1 || item.parents[0] != command)) continue;
    for (const auto& value : item.inputs) args.push_back("--" + item.name + "=" + value);
  }
  return args;
}

std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  auto extra = config_arguments(path, args[0]);
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

void add_run(CLI::App& app, RunArgs& a) {
  auto* run = app.add_subcommand("run", "Replay a tracker stream, train the map and evaluate held-out views");
  run->add_option("--config", a.config_file, "Configuration file (key = value, TOML or INI); flags override it");
  auto& c = a.config;
  run->add_option("--stream", a.stream, "stream.jsonl or the directory holding it")->required();
  run->add_option("--out", a.out, "Run output directory")->required();
  run->add_option("--mode", a.mode, "view_centric | world_centric_single")
      ->check(CLI::IsMember({"view_centric", "world_centric_single"}))
      ->capture_default_str();
  run->add_flag("--rgb-only", a.rgb_only, "Drop the depth loss");
  run->add_option("--seed", c.atlas.seed, "Seed for model init, ray sampling and scheduling")->capture_default_str();
  run->add_option("--steps-per-keyframe", c.steps_per_keyframe)->capture_default_str();
  run->add_option("--eval-interval", c.eval_interval, "Training keyframes between evaluations")
      ->capture_default_str();
  run->add_option("--rays", c.atlas.train.rays_per_batch, "Rays per model per step")->capture_default_str();
  run->add_option("--lambda-dist", c.atlas.train.loss.distortion)->capture_default_str();
  run->add_option("--lambda-prop", c.atlas.train.loss.proposal)->capture_default_str();
  run->add_option("--lambda-depth", c.atlas.train.loss.depth)->capture_default_str();
  run->add_option("--d-th", c.atlas.distance_threshold, "New-model anchor distance threshold")
      ->capture_default_str();
  run->add_option("--max-models", c.atlas.max_models)->capture_default_str();
  run->add_option("--power", c.blend.power, "Inverse-distance blending exponent")->capture_default_str();
  run->add_option("--blend-models", c.blend.max_models, "Models blended per novel view")->capture_default_str();
  run->add_option("--proposal-samples", c.atlas.render.proposal_samples)->capture_default_str();
  run->add_option("--main-samples", c.atlas.render.main_samples)->capture_default_str();
  run->add_option("--lr-grid", c.atlas.train.adam.lr_grid)->capture_default_str();
  run->add_option("--lr-mlp", c.atlas.train.adam.lr_mlp)->capture_default_str();
  run->add_flag("--no-propagation", a.no_propagation, "Initialize new models from scratch");
  run->add_flag("--no-rescale", a.no_rescale, "Keep the stream's metric scale");
  run->add_flag("--no-renders", a.no_renders, "Skip writing final renders");
  run->add_flag("--no-checkpoint", a.no_checkpoint, "Skip writing the atlas checkpoint");
}

int do_run(RunArgs& a) {
  RunConfig& c = a.config;
  c.mode = map_mode_from_string(a.mode);
  c.atlas.train.loss.rgb_only = a.rgb_only;
  c.atlas.propagate = !a.no_propagation;
  c.rescale = !a.no_rescale;
  c.write_renders = !a.no_renders;
  c.write_checkpoint = !a.no_checkpoint;
  c.stream = a.stream;
  c.out = a.out;
  const RunResult r = run_pipeline(c);
  nlohmann::json status = {{"status", "ok"},
                           {"out", c.out.string()},
                           {"records", r.records.size()},
                           {"models", r.atlas ? r.atlas->models().size() : 0},
                           {"train_steps", r.train_steps}};
  if (!r.records.empty()) status["final_psnr"] = summarize(r.records.back()).psnr_mean;
  std::cout << status.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View-centric multi-field mapping on a simulated tracker stream"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  RunArgs run_args;
  add_run(app, run_args);

  std::string eval_checkpoint, eval_stream, eval_out;
  BlendConfig eval_blend;
  auto* eval = app.add_subcommand("eval", "Re-evaluate a saved checkpoint on a stream's held-out frames");
  std::string unused_config;
  eval->add_option("--config", unused_config, "Configuration file");
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint directory (run_dir/checkpoint)")->required();
  eval->add_option("--stream", eval_stream)->required();
  eval->add_option("--out", eval_out)->required();
  eval->add_option("--power", eval_blend.power)->capture_default_str();
  eval->add_option("--blend-models", eval_blend.max_models)->capture_default_str();

  GenConfig gen_cfg;
  std::string gen_out, gen_traj = "loop";
  int loop_close_at = -1;
  bool no_depth = false;
  auto* gen = app.add_subcommand("gen", "Synthesize a scene and write a drifted tracker stream");
  gen->add_option("--config", unused_config, "Configuration file");
  gen->add_option("--out", gen_out, "Stream directory")->required();
  gen->add_option("--seed", gen_cfg.scene_seed, "Scene seed")->capture_default_str();
  gen->add_option("--keyframes", gen_cfg.keyframes)->capture_default_str();
  gen->add_option("--trajectory", gen_traj)->check(CLI::IsMember({"loop", "line"}))->capture_default_str();
  gen->add_option("--radius", gen_cfg.radius, "Loop radius or line extent (m)")->capture_default_str();
  gen->add_option("--drift", gen_cfg.drift_rate, "Drift rate per keyframe")->capture_default_str();
  gen->add_option("--loop-close-at", loop_close_at, "Keyframe index of the pose update (-1: none)")
      ->capture_default_str();
  gen->add_option("--covis-radius", gen_cfg.covis_radius)->capture_default_str();
  gen->add_option("--width", gen_cfg.width)->capture_default_str();
  gen->add_option("--height", gen_cfg.height)->capture_default_str();
  gen->add_option("--focal", gen_cfg.focal)->capture_default_str();
  gen->add_option("--holdout-every", gen_cfg.holdout_every)->capture_default_str();
  gen->add_flag("--no-depth", no_depth);

  std::vector<std::string> report_runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Summaries and time-series plots for one or more runs");
  report->add_option("runs", report_runs, "Run directories (two or more for an A/B table)")->required();
  report->add_option("--out", report_out)->required();

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(std::move(args));
  } catch (const CLI::FileError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "run") return do_run(run_args);
    if (command == "eval") {
      const auto records = evaluate_checkpoint(eval_checkpoint, eval_stream, eval_out, eval_blend);
      nlohmann::json status = {{"status", "ok"}, {"out", eval_out}};
      if (!records.empty()) status["psnr"] = summarize(records.front()).psnr_mean;
      std::cout << status.dump() << std::endl;
      return 0;
    }
    if (command == "gen") {
      gen_cfg.trajectory = gen_traj == "loop" ? TrajectoryKind::Loop : TrajectoryKind::Line;
      if (loop_close_at >= 0) gen_cfg.loop_close_at = loop_close_at;
      gen_cfg.with_depth = !no_depth;
      const auto stream = generate_stream(gen_cfg, gen_out);
      std::cout << nlohmann::json{{"status", "ok"}, {"out", gen_out}, {"events", stream.events.size()}}.dump()
                << std::endl;
      return 0;
    }
    std::vector<std::filesystem::path> dirs(report_runs.begin(), report_runs.end());
    emit_report(dirs, report_out);
    std::cout << nlohmann::json{{"status", "ok"}, {"out", report_out}}.dump() << std::endl;
    return 0;
  } catch (const std::exception& e) {
    print_error(command, e.what());
    return 1;
  }
}
