#include "xr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "xr/errors.hpp"

namespace fs = std::filesystem;

namespace xr {

namespace {

std::vector<double> metric_values(const RunSeries& series, const std::string& metric) {
  std::vector<double> values;
  values.reserve(series.runs.size());
  for (const auto& run : series.runs) {
    auto it = run.metrics.find(metric);
    if (it == run.metrics.end())
      throw InputError("series \"" + series.label + "\" has a run without metric " + metric);
    values.push_back(it->second);
  }
  return values;
}

MeanStd mean_std(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

std::map<std::string, MeanStd> summarize(const RunSeries& series) {
  if (series.runs.size() < 2)
    throw TooFewRuns("summarize: series \"" + series.label + "\" has " +
                     std::to_string(series.runs.size()) + " runs, need at least 2");
  for (const auto& run : series.runs) {
    if (run.metrics.size() != series.runs.front().metrics.size())
      throw InputError("summarize: runs of \"" + series.label + "\" disagree on metric set");
  }
  std::map<std::string, MeanStd> out;
  for (const auto& [name, _] : series.runs.front().metrics)
    out[name] = mean_std(metric_values(series, name));
  return out;
}

SignificanceRecord compare(const RunSeries& a, const RunSeries& b, const std::string& metric,
                           double alpha) {
  if (a.runs.size() != b.runs.size())
    throw UnpairedRuns("compare: series \"" + a.label + "\" has " +
                       std::to_string(a.runs.size()) + " runs, \"" + b.label + "\" has " +
                       std::to_string(b.runs.size()));
  if (a.runs.size() < 2) throw TooFewRuns("compare: need at least 2 paired runs");

  const auto va = metric_values(a, metric);
  const auto vb = metric_values(b, metric);

  SignificanceRecord rec;
  rec.metric = metric;
  rec.label_a = a.label;
  rec.label_b = b.label;
  rec.mean_a = mean_std(va).mean;
  rec.mean_b = mean_std(vb).mean;
  rec.alpha = alpha;
  try {
    rec.t_p = paired_t_one_sided(va, vb);
    rec.wilcoxon_p = wilcoxon_signed_rank(va, vb);
    rec.reject_t = rec.t_p < alpha;
    rec.reject_wilcoxon = rec.wilcoxon_p < alpha;
  } catch (const DegenerateInput&) {
    rec.degenerate = true;
    rec.t_p = 1.0;
    rec.wilcoxon_p = 1.0;
  }
  return rec;
}

std::vector<RunSeries> load_series_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("series directory does not exist: " + dir);
  struct Entry {
    std::uint64_t seed;
    std::string file;
    EvalReport report;
  };
  std::map<std::string, std::vector<Entry>> grouped;

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    EvalReport report = load_report(path.string());
    const std::string label = report.metadata.value("label", path.stem().string());
    const std::uint64_t seed = report.metadata.value("seed", std::uint64_t{0});
    grouped[label].push_back(Entry{seed, path.string(), std::move(report)});
  }
  if (grouped.empty()) throw InputError("no report files found under " + dir);

  std::vector<RunSeries> series;
  for (auto& [label, entries] : grouped) {
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
      return std::tie(x.seed, x.file) < std::tie(y.seed, y.file);
    });
    RunSeries s;
    s.label = label;
    for (auto& e : entries) s.runs.push_back(std::move(e.report));
    series.push_back(std::move(s));
  }
  return series;
}

std::string comparison_table(const std::vector<RunSeries>& series, const std::string& against,
                             const std::string& metric, double alpha) {
  const RunSeries* base = nullptr;
  for (const auto& s : series)
    if (s.label == against) base = &s;
  if (!base) throw InputError("series \"" + against + "\" not found");

  std::ostringstream out;
  out << std::left << std::setw(24) << "method" << std::right << std::setw(10) << "mean"
      << std::setw(10) << "stddev" << std::setw(14) << "t-test p" << std::setw(14) << "wilcoxon p"
      << std::setw(10) << "verdict" << '\n';

  for (const auto& s : series) {
    const auto stats = summarize(s).at(metric);
    out << std::left << std::setw(24) << s.label << std::right << std::fixed
        << std::setprecision(4) << std::setw(10) << stats.mean << std::setw(10) << stats.stddev;
    if (s.label == against) {
      out << std::setw(14) << "--" << std::setw(14) << "--" << std::setw(10) << "--" << '\n';
      continue;
    }
    const auto rec = compare(*base, s, metric, alpha);
    out << std::scientific << std::setprecision(3) << std::setw(14) << rec.t_p << std::setw(14)
        << rec.wilcoxon_p << std::setw(10)
        << (rec.degenerate ? "none" : (rec.reject_t && rec.reject_wilcoxon ? "reject" : "accept"))
        << '\n';
    out << std::fixed;
  }
  return out.str();
}

}  // namespace xr
