#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace viewfield {

struct FrameMetric {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> l1_depth;  // meters; absent without valid GT depth
};

/// One evaluation pass over the held-out frames known at that point.
struct MetricRecord {
  int index = 0;
  int keyframes = 0;       // training keyframes consumed so far
  long train_steps = 0;    // scheduled steps so far
  std::string event;       // interval | pre_update | post_update | final | eval
  std::vector<FrameMetric> frames;
};

struct SummaryRow {
  int index = 0;
  int keyframes = 0;
  long train_steps = 0;
  std::string event;
  int frames = 0;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  std::optional<double> l1_mean, l1_std;
};

/// Population mean and standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

SummaryRow summarize(const MetricRecord& record);

/// Per-frame table: record,keyframes,train_steps,event,frame,psnr,ssim,l1_depth.
/// Fixed-precision text so identical runs give identical bytes.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot as a standalone SVG document. `marker_x` draws a labelled
/// vertical rule (the pose-update position).
std::string svg_time_series(const std::string& title, const std::string& y_label, const std::vector<Series>& series,
                            std::optional<double> marker_x, const std::string& marker_label = "pose update");

/// Keyframe count at which the first pose update was applied, if any.
std::optional<int> pose_update_keyframes(const std::vector<MetricRecord>& records);

/// Reads metrics.csv from each run directory and writes summary tables and
/// per-metric plots to out. With two or more runs, also writes ab_summary.csv
/// listing the runs side by side; their step axes must match.
void emit_report(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out);

}  // namespace viewfield
