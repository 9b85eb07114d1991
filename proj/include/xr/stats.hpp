#pragma once

#include <map>
#include <string>
#include <vector>

#include "xr/metrics.hpp"

namespace xr {

// A set of repeated benchmark runs (different seeds or backends) sharing one
// dataset and metric set, paired by position.
struct RunSeries {
  std::string label;
  std::vector<EvalReport> runs;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

// Sample mean and sample standard deviation (n-1 denominator) of every
// metric shared by all runs.
std::map<std::string, MeanStd> summarize(const RunSeries& series);

struct SignificanceRecord {
  std::string metric;
  std::string label_a;
  std::string label_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t_p = 0.0;
  double wilcoxon_p = 0.0;
  double alpha = 0.05;
  bool reject_t = false;
  bool reject_wilcoxon = false;
  bool degenerate = false;  // zero-variance differences: "no evidence"
};

// Paired one-sided comparison (alternative: a outperforms b) on one metric,
// runs paired by position within each series.
SignificanceRecord compare(const RunSeries& a, const RunSeries& b, const std::string& metric,
                           double alpha = 0.05);

// Groups report files by their metadata label into series (sorted by seed).
std::vector<RunSeries> load_series_dir(const std::string& dir);

// Appendix-style comparison table: every other series against `against`.
std::string comparison_table(const std::vector<RunSeries>& series, const std::string& against,
                             const std::string& metric, double alpha = 0.05);

}  // namespace xr
