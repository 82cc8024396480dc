// Copyright 2026 The muevo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "muevo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "muevo/error.hpp"

namespace muevo {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void report_error(const std::string& msg) {
  throw Error(ErrorCode::kReportError, msg);
}

std::string num(double v, int precision = 6) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s(buf);
  if (s == "-" + std::string(s.size() - 1, '0')) return s.substr(1);
  return s;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof *kPalette)]; }

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> spread;  // optional symmetric band
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double d = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
    return {lo - d, hi + d};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;

std::string svg_open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, 0) + "\" height=\"" +
         num(kHeight, 0) + "\" viewBox=\"0 0 " + num(kWidth, 0) + " " + num(kHeight, 0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2, 1) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         xml_escape(title) + "</text>\n";
}

std::string axes(Range xr, Range yr, const std::string& xlabel, const std::string& ylabel,
                 bool x_ticks = true) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string s = "<rect x=\"" + num(kLeft, 1) + "\" y=\"" + num(kTop, 1) + "\" width=\"" +
                  num(pw, 1) + "\" height=\"" + num(ph, 1) +
                  "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double py = kTop + ph * (1 - f);
    const double vy = yr.lo + (yr.hi - yr.lo) * f;
    s += "<line x1=\"" + num(kLeft, 1) + "\" y1=\"" + num(py, 1) + "\" x2=\"" +
         num(kLeft + pw, 1) + "\" y2=\"" + num(py, 1) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + num(kLeft - 6, 1) + "\" y=\"" + num(py + 4, 1) +
         "\" text-anchor=\"end\">" + num(vy, 3) + "</text>\n";
    if (x_ticks) {
      const double px = kLeft + pw * f;
      const double vx = xr.lo + (xr.hi - xr.lo) * f;
      s += "<text x=\"" + num(px, 1) + "\" y=\"" + num(kTop + ph + 16, 1) +
           "\" text-anchor=\"middle\">" + num(vx, 2) + "</text>\n";
    }
  }
  s += "<text x=\"" + num(kLeft + pw / 2, 1) + "\" y=\"" + num(kHeight - 10, 1) +
       "\" text-anchor=\"middle\">" + xml_escape(xlabel) + "</text>\n";
  s += "<text transform=\"translate(16 " + num(kTop + ph / 2, 1) +
       ") rotate(-90)\" text-anchor=\"middle\">" + xml_escape(ylabel) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18 * static_cast<double>(i);
    const double x = kWidth - kRight + 12;
    s += "<rect x=\"" + num(x, 1) + "\" y=\"" + num(y - 9, 1) +
         "\" width=\"12\" height=\"12\" fill=\"" + color(i) + "\"/>\n";
    s += "<text x=\"" + num(x + 18, 1) + "\" y=\"" + num(y + 1, 1) + "\">" +
         xml_escape(names[i]) + "</text>\n";
  }
  return s;
}

std::string line_chart(const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, const std::vector<Series>& series) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double band = s.spread.empty() ? 0.0 : s.spread[i];
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i] - band);
      yhi = std::max(yhi, s.y[i] + band);
    }
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  const Range xr = xlo < xhi ? Range{xlo, xhi} : padded(xlo, xhi);
  const Range yr = padded(ylo, yhi);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + pw * (v - xr.lo) / (xr.hi - xr.lo); };
  auto py = [&](double v) { return kTop + ph * (1 - (v - yr.lo) / (yr.hi - yr.lo)); };

  std::string svg = svg_open(title) + axes(xr, yr, xlabel, ylabel);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    names.push_back(s.name);
    if (!s.spread.empty() && !s.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        pts += num(px(s.x[i]), 2) + "," + num(py(s.y[i] + s.spread[i]), 2) + " ";
      }
      for (std::size_t i = s.x.size(); i-- > 0;) {
        pts += num(px(s.x[i]), 2) + "," + num(py(s.y[i] - s.spread[i]), 2) + " ";
      }
      pts.pop_back();
      svg += "<polygon points=\"" + pts + "\" fill=\"" + color(k) +
             "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) pts += " ";
      pts += num(px(s.x[i]), 2) + "," + num(py(s.y[i]), 2);
    }
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color(k) +
           "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      svg += "<circle cx=\"" + num(px(s.x[i]), 2) + "\" cy=\"" + num(py(s.y[i]), 2) +
             "\" r=\"2.5\" fill=\"" + color(k) + "\"/>\n";
    }
  }
  return svg + legend(names) + "</svg>\n";
}

struct BarGroup {
  std::string category;
  std::vector<double> values;  // one per series
};

std::string bar_chart(const std::string& title, const std::string& ylabel,
                      const std::vector<std::string>& series_names,
                      const std::vector<BarGroup>& groups) {
  double yhi = 0.0;
  for (const auto& g : groups) {
    for (double v : g.values) yhi = std::max(yhi, v);
  }
  const Range yr{0.0, yhi > 0 ? yhi * 1.05 : 1.0};
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string svg = svg_open(title) + axes({0, 1}, yr, "", ylabel, false);
  const double slot = groups.empty() ? pw : pw / static_cast<double>(groups.size());
  const double bw = slot * 0.8 / static_cast<double>(std::max<std::size_t>(series_names.size(), 1));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double x0 = kLeft + slot * static_cast<double>(gi) + slot * 0.1;
    for (std::size_t si = 0; si < groups[gi].values.size(); ++si) {
      const double h = ph * groups[gi].values[si] / yr.hi;
      svg += "<rect x=\"" + num(x0 + bw * static_cast<double>(si), 2) + "\" y=\"" +
             num(kTop + ph - h, 2) + "\" width=\"" + num(bw, 2) + "\" height=\"" + num(h, 2) +
             "\" fill=\"" + color(si) + "\"/>\n";
    }
    const double cx = kLeft + slot * (static_cast<double>(gi) + 0.5);
    svg += "<text transform=\"translate(" + num(cx, 2) + " " + num(kTop + ph + 12, 2) +
           ") rotate(30)\" font-size=\"9\">" + xml_escape(groups[gi].category) + "</text>\n";
  }
  return svg + legend(series_names) + "</svg>\n";
}

void write_file(const fs::path& file, const std::string& text, std::vector<fs::path>& written) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) report_error("cannot write " + file.string());
  written.push_back(file);
}

double default_clone_prob(const RunRecord& run) {
  const auto& c = run.config;
  if (c.is_object() && c.contains("agent") && c["agent"].contains("mu_init")) {
    return c["agent"]["mu_init"].get<double>();
  }
  return MuBounds{}.p_init;
}

}  // namespace

std::vector<CurvePoint> aggregate_curve(const RunRecord& run) {
  if (run.repetitions.empty()) report_error("run record has no repetitions");
  const auto n_iter = static_cast<std::size_t>(run.iterations);
  for (const auto& rep : run.repetitions) {
    if (rep.iterations.size() != n_iter) {
      report_error("repetition " + std::to_string(rep.index) + " has " +
                   std::to_string(rep.iterations.size()) + " iterations, expected " +
                   std::to_string(n_iter));
    }
  }
  std::vector<CurvePoint> curve;
  const double k = static_cast<double>(run.repetitions.size());
  for (std::size_t i = 0; i < n_iter; ++i) {
    CurvePoint p;
    p.iteration = static_cast<int>(i) + 1;
    for (const auto& rep : run.repetitions) {
      const IterationMetrics& m = rep.iterations[i];
      if (m.iteration != p.iteration) report_error("iteration numbering mismatch");
      p.wall_clock_s += m.wall_clock_s;
      p.mean_val_acc += m.mean_val_acc;
      p.mean_test_acc += m.mean_test_acc;
      p.mean_acc_params += m.mean_acc_params;
      p.mean_flops += m.mean_flops;
    }
    p.wall_clock_s /= k;
    p.mean_val_acc /= k;
    p.mean_test_acc /= k;
    p.mean_acc_params /= k;
    p.mean_flops /= k;
    if (run.repetitions.size() > 1) {
      double ss = 0.0;
      for (const auto& rep : run.repetitions) {
        const double d = rep.iterations[i].mean_test_acc - p.mean_test_acc;
        ss += d * d;
      }
      p.std_test_acc = std::sqrt(ss / (k - 1));
    }
    curve.push_back(p);
  }
  return curve;
}

std::vector<DepthProbability> clone_probability_by_depth(const RunRecord& run) {
  const double fallback = default_clone_prob(run);
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& rep : run.repetitions) {
    for (const auto& f : rep.final_paths) {
      for (std::size_t d = 0; d < f.depth; ++d) {
        auto it = f.mu.find("clone:" + std::to_string(d));
        auto& slot = acc[d];
        slot.first += it == f.mu.end() ? fallback : it->second;
        ++slot.second;
      }
    }
  }
  std::vector<DepthProbability> out;
  for (const auto& [d, v] : acc) {
    out.push_back({d, v.first / static_cast<double>(v.second), v.second});
  }
  return out;
}

std::vector<HyperparamCount> hyperparam_histogram(const RunRecord& run) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& rep : run.repetitions) {
    for (const auto& f : rep.final_paths) {
      const HyperParams& hp = f.hyperparams;
      char lr[32], mom[32];
      std::snprintf(lr, sizeof lr, "%g", hp.learning_rate);
      std::snprintf(mom, sizeof mom, "%g", hp.momentum);
      ++counts[{"learning_rate", lr}];
      ++counts[{"momentum", mom}];
      ++counts[{"batch_size", std::to_string(hp.batch_size)}];
      ++counts[{"epochs", std::to_string(hp.epochs)}];
      ++counts[{"input_resolution", std::string(to_string(hp.input_resolution))}];
    }
  }
  std::vector<HyperparamCount> out;
  for (const auto& [key, c] : counts) out.push_back({key.first, key.second, c});
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string s = std::string(kCurveCsvHeader) + "\n";
  for (const auto& p : curve) {
    s += std::to_string(p.iteration) + "," + num(p.wall_clock_s) + "," + num(p.mean_val_acc) +
         "," + num(p.mean_test_acc) + "," + num(p.std_test_acc) + "," + num(p.mean_acc_params) +
         "," + num(p.mean_flops) + "\n";
  }
  return s;
}

std::string depth_csv(const std::vector<DepthProbability>& rows) {
  std::string s = "depth,mean_clone_prob,paths\n";
  for (const auto& r : rows) {
    s += std::to_string(r.depth) + "," + num(r.mean_clone_prob) + "," + std::to_string(r.paths) +
         "\n";
  }
  return s;
}

std::string hyperparam_csv(const std::vector<HyperparamCount>& rows) {
  std::string s = "field,value,count\n";
  for (const auto& r : rows) s += r.field + "," + r.value + "," + std::to_string(r.count) + "\n";
  return s;
}

std::vector<fs::path> emit_report(const std::vector<LabeledRun>& runs, const fs::path& out_dir) {
  if (runs.empty()) report_error("no run records");
  std::set<std::string> labels;
  for (const auto& r : runs) {
    if (!labels.insert(r.label).second) report_error("duplicate run label " + r.label);
    if (r.record.tasks != runs.front().record.tasks) {
      report_error("run " + r.label + " covers different tasks than " + runs.front().label);
    }
    if (r.record.iterations != runs.front().record.iterations) {
      report_error("run " + r.label + " has a different iteration count than " +
                   runs.front().label);
    }
  }
  std::vector<std::vector<CurvePoint>> curves;
  for (const auto& r : runs) curves.push_back(aggregate_curve(r.record));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) report_error("mkdir " + out_dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  std::vector<std::vector<DepthProbability>> depths;
  std::vector<std::vector<HyperparamCount>> hists;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string& label = runs[i].label;
    depths.push_back(clone_probability_by_depth(runs[i].record));
    hists.push_back(hyperparam_histogram(runs[i].record));
    write_file(out_dir / (label + ".curves.csv"), curve_csv(curves[i]), written);
    write_file(out_dir / (label + ".mu_by_depth.csv"), depth_csv(depths[i]), written);
    write_file(out_dir / (label + ".hyperparams.csv"), hyperparam_csv(hists[i]), written);
  }

  auto curve_series = [&](auto x_of, auto y_of, bool band) {
    std::vector<Series> out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      Series s;
      s.name = runs[i].label;
      for (const auto& p : curves[i]) {
        s.x.push_back(x_of(p));
        s.y.push_back(y_of(p));
        if (band) s.spread.push_back(p.std_test_acc);
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  auto by_iter = [](const CurvePoint& p) { return static_cast<double>(p.iteration); };
  auto by_wall = [](const CurvePoint& p) { return p.wall_clock_s; };
  auto test_acc = [](const CurvePoint& p) { return p.mean_test_acc; };
  write_file(out_dir / "accuracy_vs_iteration.svg",
             line_chart("Mean test accuracy", "task-set iteration", "test accuracy",
                        curve_series(by_iter, test_acc, true)),
             written);
  write_file(out_dir / "accuracy_vs_wall_clock.svg",
             line_chart("Mean test accuracy", "wall clock (s)", "test accuracy",
                        curve_series(by_wall, test_acc, true)),
             written);
  write_file(out_dir / "params_vs_iteration.svg",
             line_chart("Mean accounted parameters", "task-set iteration", "parameters",
                        curve_series(by_iter, [](const CurvePoint& p) { return p.mean_acc_params; },
                                     false)),
             written);
  write_file(out_dir / "flops_vs_iteration.svg",
             line_chart("Mean inference flops", "task-set iteration", "flops",
                        curve_series(by_iter, [](const CurvePoint& p) { return p.mean_flops; },
                                     false)),
             written);

  std::vector<Series> depth_series;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    Series s;
    s.name = runs[i].label;
    for (const auto& d : depths[i]) {
      s.x.push_back(static_cast<double>(d.depth));
      s.y.push_back(d.mean_clone_prob);
    }
    depth_series.push_back(std::move(s));
  }
  write_file(out_dir / "mu_by_depth.svg",
             line_chart("Clone probability by depth", "layer position", "mean probability",
                        depth_series),
             written);

  std::map<std::pair<std::string, std::string>, std::vector<double>> bars;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    names.push_back(runs[i].label);
    for (const auto& h : hists[i]) {
      auto& v = bars[{h.field, h.value}];
      v.resize(runs.size(), 0.0);
      v[i] = static_cast<double>(h.count);
    }
  }
  std::vector<BarGroup> groups;
  for (auto& [key, v] : bars) {
    v.resize(runs.size(), 0.0);
    groups.push_back({key.first + "=" + key.second, v});
  }
  write_file(out_dir / "hyperparams.svg",
             bar_chart("Hyperparameters of retained paths", "paths", names, groups), written);

  std::string speedups;
  for (const auto& s : runs) {
    if (s.record.mode != RunMode::kSequential) continue;
    for (const auto& m : runs) {
      if (m.record.mode != RunMode::kMultiagent) continue;
      if (s.record.repetitions.size() != m.record.repetitions.size()) continue;
      speedups += s.label + "," + m.label + "," + num(measured_speedup(s.record, m.record), 4) +
                  "," + num(m.record.speedup_bound, 4) + "\n";
    }
  }
  if (!speedups.empty()) {
    write_file(out_dir / "speedup.csv",
               "sequential_run,multiagent_run,speedup,speedup_bound\n" + speedups, written);
  }
  return written;
}

}  // namespace muevo
