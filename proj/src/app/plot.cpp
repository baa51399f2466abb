#include "tiger/app/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace tiger::app {

namespace fs = std::filesystem;

namespace {

std::string first_line(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("{}: cannot open", path.string()));
  std::string line;
  std::getline(in, line);
  return line;
}

std::vector<AggregateRow> load_file(const fs::path& path) {
  const std::string header = first_line(path);
  if (header == kAggregateHeader) return read_aggregate(path);
  if (header == kMetricsHeader) return aggregate({read_metrics(path)});
  throw ParseError(fmt::format("{}:1: neither a metrics nor an aggregate file", path.string()));
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Tick step from {1, 2, 5}·10^k giving about five intervals.
double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

Series load_series(const std::string& spec) {
  Series s;
  std::string path_text = spec;
  const auto eq = spec.find('=');
  if (eq != std::string::npos) {
    s.label = spec.substr(0, eq);
    path_text = spec.substr(eq + 1);
  }
  const fs::path path(path_text);
  if (fs::is_directory(path)) {
    if (s.label.empty()) s.label = fs::absolute(path).lexically_normal().filename().string();
    if (fs::exists(path / "aggregate.csv")) {
      s.rows = read_aggregate(path / "aggregate.csv");
    } else {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) files.push_back(entry.path() / "metrics.csv");
      }
      if (files.empty()) throw ParseError(fmt::format("{}: no aggregate.csv or seed_*/metrics.csv", path.string()));
      std::sort(files.begin(), files.end());
      std::vector<std::vector<MetricsRow>> runs;
      for (const auto& f : files) runs.push_back(read_metrics(f));
      s.rows = aggregate(runs);
    }
  } else {
    if (s.label.empty()) s.label = path.parent_path().filename().string();
    if (s.label.empty()) s.label = path.stem().string();
    s.rows = load_file(path);
  }
  return s;
}

std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& y_label) {
  const double width = 800, height = 500, left = 70, right = 180, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;

  double x_max = 0.0, y_min = 0.0, y_max = 1.0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& r : s.rows) {
      x_max = std::max(x_max, double(r.env_steps));
      if (!any) {
        y_min = r.mean - r.std;
        y_max = r.mean + r.std;
        any = true;
      }
      y_min = std::min(y_min, r.mean - r.std);
      y_max = std::max(y_max, r.mean + r.std);
    }
  }
  if (x_max <= 0.0) x_max = 1.0;
  if (y_max - y_min < 1e-12) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double ystep = nice_step(y_max - y_min);
  y_min = std::floor(y_min / ystep) * ystep;
  y_max = std::ceil(y_max / ystep) * ystep;
  const double xstep = nice_step(x_max);
  x_max = std::ceil(x_max / xstep) * xstep;

  auto px = [&](double x) { return left + pw * x / x_max; };
  auto py = [&](double y) { return top + ph * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height, width, height);
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
  out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", left + pw / 2,
                     escape(title));

  for (double y = y_min; y <= y_max + 1e-9 * ystep; y += ystep) {
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#e0e0e0\"/>\n", left,
                       py(y), left + pw, py(y));
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", left - 6, py(y) + 4,
                       std::abs(y) < 1e-12 ? 0.0 : y);
  }
  for (double x = 0.0; x <= x_max + 1e-9 * xstep; x += xstep) {
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#e0e0e0\"/>\n", px(x),
                       top, px(x), top + ph);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:g}</text>\n", px(x), top + ph + 18, x);
  }
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left, top,
                     pw, ph);
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">environment steps</text>\n", left + pw / 2,
                     height - 15);
  out += fmt::format("<text transform=\"translate(18,{}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     top + ph / 2, escape(y_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.rows.empty()) {
      std::string band, line;
      for (const auto& r : s.rows) band += fmt::format("{:.2f},{:.2f} ", px(double(r.env_steps)), py(r.mean + r.std));
      for (auto it = s.rows.rbegin(); it != s.rows.rend(); ++it) {
        band += fmt::format("{:.2f},{:.2f} ", px(double(it->env_steps)), py(it->mean - it->std));
      }
      for (const auto& r : s.rows) line += fmt::format("{:.2f},{:.2f} ", px(double(r.env_steps)), py(r.mean));
      out += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", band, color);
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", line, color);
    }
    const double ly = top + 10 + 20.0 * double(k);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n",
                       left + pw + 12, ly, left + pw + 32, ly, color);
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw + 38, ly + 4, escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

std::string flat_csv(const std::vector<Series>& series) {
  std::string out = "label,env_steps,mean,std\n";
  for (const auto& s : series) {
    for (const auto& r : s.rows) out += fmt::format("{},{},{:.17g},{:.17g}\n", s.label, r.env_steps, r.mean, r.std);
  }
  return out;
}

}  // namespace tiger::app
