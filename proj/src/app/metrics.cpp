#include "tiger/app/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <fmt/format.h>

namespace tiger::app {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void bad(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw ParseError(fmt::format("{}:{}: {}", path.string(), line, what));
}

double to_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  if (s.empty()) bad(path, line, "empty field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) bad(path, line, fmt::format("'{}' is not a number", s));
  return v;
}

std::uint64_t to_uint(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    bad(path, line, fmt::format("'{}' is not a non-negative integer", s));
  }
  return v;
}

/// Complete lines of a text file; a trailing partial line is dropped.
std::vector<std::string> complete_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("{}: cannot open", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1) {
    lines.push_back(text.substr(start, nl - start));
  }
  return lines;
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string format_row(const MetricsRow& r) {
  return fmt::format("{},{},{},{},{},{},{}", r.env_steps, g17(r.train_loss), g17(r.eval_metric), g17(r.eval_std),
                     g17(r.epsilon), g17(r.wall_seconds), r.seed);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : path_(path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error(fmt::format("{}: cannot open for writing", path.string()));
  if (fresh) {
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }
}

void MetricsWriter::append(const MetricsRow& row) {
  out_ << format_row(row) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error(fmt::format("{}: write failed", path_.string()));
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  const auto lines = complete_lines(path);
  if (lines.empty()) bad(path, 1, "missing header");
  if (lines[0] != kMetricsHeader) bad(path, 1, fmt::format("unexpected header '{}'", lines[0]));
  std::vector<MetricsRow> rows;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t line = k + 1;
    const auto cells = split(lines[k]);
    if (cells.size() != 7) bad(path, line, fmt::format("expected 7 fields, got {}", cells.size()));
    MetricsRow r;
    r.env_steps = std::size_t(to_uint(cells[0], path, line));
    r.train_loss = to_double(cells[1], path, line);
    r.eval_metric = to_double(cells[2], path, line);
    r.eval_std = to_double(cells[3], path, line);
    r.epsilon = to_double(cells[4], path, line);
    r.wall_seconds = to_double(cells[5], path, line);
    r.seed = to_uint(cells[6], path, line);
    if (!rows.empty() && r.env_steps <= rows.back().env_steps) {
      bad(path, line, fmt::format("env_steps {} does not increase", r.env_steps));
    }
    rows.push_back(r);
  }
  return rows;
}

void truncate_metrics(const std::filesystem::path& path, std::size_t keep) {
  const auto lines = complete_lines(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("{}: cannot rewrite", path.string()));
  for (std::size_t k = 0; k < lines.size() && k <= keep; ++k) out << lines[k] << '\n';
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(var / double(values.size()));
  return r;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRow>>& runs) {
  std::vector<AggregateRow> out;
  if (runs.empty()) return out;
  std::size_t rows = runs.front().size();
  for (const auto& r : runs) rows = std::min(rows, r.size());
  for (std::size_t k = 0; k < rows; ++k) {
    std::vector<double> values, steps;
    for (const auto& r : runs) {
      values.push_back(r[k].eval_metric);
      steps.push_back(double(r[k].env_steps));
    }
    const auto ms = mean_std(values);
    out.push_back({std::size_t(std::llround(mean_std(steps).mean)), ms.mean, ms.std, values.size()});
  }
  return out;
}

void write_aggregate(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("{}: cannot open for writing", path.string()));
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) out << fmt::format("{},{},{},{}\n", r.env_steps, g17(r.mean), g17(r.std), r.n_seeds);
}

std::vector<AggregateRow> read_aggregate(const std::filesystem::path& path) {
  const auto lines = complete_lines(path);
  if (lines.empty() || lines[0] != kAggregateHeader) bad(path, 1, "missing or unexpected header");
  std::vector<AggregateRow> rows;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto cells = split(lines[k]);
    if (cells.size() != 4) bad(path, k + 1, fmt::format("expected 4 fields, got {}", cells.size()));
    rows.push_back({std::size_t(to_uint(cells[0], path, k + 1)), to_double(cells[1], path, k + 1),
                    to_double(cells[2], path, k + 1), std::size_t(to_uint(cells[3], path, k + 1))});
  }
  return rows;
}

}  // namespace tiger::app
