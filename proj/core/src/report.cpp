#include "viewfield/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace viewfield {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string optional_field(const std::optional<double>& v) { return v ? fixed(*v) : std::string(); }

}  // namespace

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

SummaryRow summarize(const MetricRecord& record) {
  SummaryRow row;
  row.index = record.index;
  row.keyframes = record.keyframes;
  row.train_steps = record.train_steps;
  row.event = record.event;
  row.frames = static_cast<int>(record.frames.size());
  std::vector<double> p, s, l;
  for (const auto& f : record.frames) {
    p.push_back(f.psnr);
    s.push_back(f.ssim);
    if (f.l1_depth) l.push_back(*f.l1_depth);
  }
  std::tie(row.psnr_mean, row.psnr_std) = mean_std(p);
  std::tie(row.ssim_mean, row.ssim_std) = mean_std(s);
  if (!l.empty()) {
    const auto [m, sd] = mean_std(l);
    row.l1_mean = m;
    row.l1_std = sd;
  }
  return row;
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "record,keyframes,train_steps,event,frame,psnr,ssim,l1_depth\n";
  for (const auto& r : records) {
    for (const auto& f : r.frames) {
      out << r.index << ',' << r.keyframes << ',' << r.train_steps << ',' << r.event << ',' << f.frame << ','
          << fixed(f.psnr) << ',' << fixed(f.ssim) << ',' << optional_field(f.l1_depth) << '\n';
    }
  }
}

std::vector<MetricRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing metrics table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("record,", 0) != 0) {
    throw std::runtime_error("bad metrics table header in " + path.string());
  }
  std::vector<MetricRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    try {
      const int index = std::stoi(f[0]);
      if (records.empty() || records.back().index != index) {
        MetricRecord r;
        r.index = index;
        r.keyframes = std::stoi(f[1]);
        r.train_steps = std::stol(f[2]);
        r.event = f[3];
        records.push_back(std::move(r));
      }
      FrameMetric m;
      m.frame = std::stoi(f[4]);
      m.psnr = std::stod(f[5]);
      m.ssim = std::stod(f[6]);
      if (!f[7].empty()) m.l1_depth = std::stod(f[7]);
      records.back().frames.push_back(m);
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return records;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "record,keyframes,train_steps,event,frames,psnr_mean,psnr_std,ssim_mean,ssim_std,l1_mean,l1_std\n";
  for (const auto& r : rows) {
    out << r.index << ',' << r.keyframes << ',' << r.train_steps << ',' << r.event << ',' << r.frames << ','
        << fixed(r.psnr_mean) << ',' << fixed(r.psnr_std) << ',' << fixed(r.ssim_mean) << ',' << fixed(r.ssim_std)
        << ',' << optional_field(r.l1_mean) << ',' << optional_field(r.l1_std) << '\n';
  }
}

std::string svg_time_series(const std::string& title, const std::string& y_label, const std::vector<Series>& series,
                            std::optional<double> marker_x, const std::string& marker_label) {
  constexpr double W = 640, H = 380, L = 70, R = 150, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (marker_x) {
    x0 = std::min(x0, *marker_x);
    x1 = std::max(x1, *marker_x);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 1, x1 += 1;
  if (y1 - y0 < 1e-12) y0 -= 1, y1 += 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << fixed(px(xv), 1) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(xv, 1)
      << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4, 1) << "\" text-anchor=\"end\">" << fixed(yv, 3)
      << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << fixed(py(yv), 1) << "\" x2=\"" << W - R << "\" y2=\""
      << fixed(py(yv), 1) << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">keyframes</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << y_label
    << "</text>\n";
  if (marker_x) {
    const double mx = px(*marker_x);
    o << "<line x1=\"" << fixed(mx, 1) << "\" y1=\"" << T << "\" x2=\"" << fixed(mx, 1) << "\" y2=\"" << H - B
      << "\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
    o << "<text x=\"" << fixed(mx + 4, 1) << "\" y=\"" << T + 12 << "\" fill=\"#555\">" << marker_label
      << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % std::size(colors)];
    std::ostringstream pts;
    int count = 0;
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      pts << fixed(px(series[s].x[i]), 2) << ',' << fixed(py(series[s].y[i]), 2) << ' ';
      o << "<circle cx=\"" << fixed(px(series[s].x[i]), 2) << "\" cy=\"" << fixed(py(series[s].y[i]), 2)
        << "\" r=\"3\" fill=\"" << c << "\"/>\n";
      ++count;
    }
    if (count > 1) {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    }
    const double ly = T + 10 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << series[s].name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::optional<int> pose_update_keyframes(const std::vector<MetricRecord>& records) {
  for (const auto& r : records) {
    if (r.event == "post_update") return r.keyframes;
  }
  return std::nullopt;
}

void emit_report(const std::vector<fs::path>& run_dirs, const fs::path& out) {
  if (run_dirs.empty()) throw std::invalid_argument("emit_report: no run directories");
  fs::create_directories(out);

  struct Run {
    std::string name;
    std::vector<SummaryRow> rows;
    std::optional<int> update;
  };
  std::vector<Run> runs;
  std::map<std::string, int> name_count;
  for (const auto& dir : run_dirs) {
    const auto records = read_metrics_csv(dir / "metrics.csv");
    Run run;
    run.name = fs::absolute(dir).lexically_normal().filename().string();
    if (run.name.empty()) run.name = "run";
    if (name_count[run.name]++ > 0) run.name += "_" + std::to_string(name_count[run.name]);
    for (const auto& r : records) run.rows.push_back(summarize(r));
    run.update = pose_update_keyframes(records);
    runs.push_back(std::move(run));
  }

  for (const auto& run : runs) {
    write_summary_csv(out / (runs.size() == 1 ? std::string("summary.csv") : "summary_" + run.name + ".csv"),
                      run.rows);
  }

  if (runs.size() > 1) {
    for (std::size_t r = 1; r < runs.size(); ++r) {
      bool same = runs[r].rows.size() == runs[0].rows.size();
      for (std::size_t i = 0; same && i < runs[0].rows.size(); ++i) {
        same = runs[r].rows[i].keyframes == runs[0].rows[i].keyframes && runs[r].rows[i].event == runs[0].rows[i].event;
      }
      if (!same) throw std::runtime_error("emit_report: runs '" + runs[0].name + "' and '" + runs[r].name +
                                         "' have different step axes");
    }
    std::ofstream ab(out / "ab_summary.csv");
    if (!ab) throw std::runtime_error("cannot write " + (out / "ab_summary.csv").string());
    ab << "record,keyframes,event";
    for (const auto& run : runs) {
      ab << ',' << run.name << "_psnr," << run.name << "_ssim," << run.name << "_l1";
    }
    ab << '\n';
    for (std::size_t i = 0; i < runs[0].rows.size(); ++i) {
      const auto& base = runs[0].rows[i];
      ab << base.index << ',' << base.keyframes << ',' << base.event;
      for (const auto& run : runs) {
        const auto& row = run.rows[i];
        ab << ',' << fixed(row.psnr_mean) << ',' << fixed(row.ssim_mean) << ',' << optional_field(row.l1_mean);
      }
      ab << '\n';
    }
  }

  struct Metric {
    const char* file;
    const char* title;
    const char* label;
  };
  const Metric metrics[] = {{"psnr.svg", "Test-view PSNR", "PSNR (dB)"},
                            {"ssim.svg", "Test-view SSIM", "SSIM"},
                            {"l1_depth.svg", "Test-view depth L1", "L1 depth (m)"}};
  std::optional<int> update;
  for (const auto& run : runs) {
    if (run.update) update = run.update;
  }
  for (const auto& m : metrics) {
    std::vector<Series> series;
    for (const auto& run : runs) {
      Series s{run.name, {}, {}};
      for (const auto& row : run.rows) {
        s.x.push_back(row.keyframes);
        if (m.file[0] == 'p') s.y.push_back(row.psnr_mean);
        else if (m.file[0] == 's') s.y.push_back(row.ssim_mean);
        else s.y.push_back(row.l1_mean.value_or(std::numeric_limits<double>::quiet_NaN()));
      }
      series.push_back(std::move(s));
    }
    std::ofstream svg(out / m.file);
    if (!svg) throw std::runtime_error("cannot write " + (out / m.file).string());
    svg << svg_time_series(m.title, m.label, series,
                           update ? std::optional<double>(static_cast<double>(*update)) : std::nullopt);
  }
}

}  // namespace viewfield
