#include "xr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "xr/errors.hpp"

namespace xr {

double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& targets,
                   std::size_t k) {
  if (k < 1) throw InputError("recall_at_k: k must be at least 1");
  if (ranked.empty()) throw EmptyRanking("recall_at_k: empty ranking");
  if (targets.empty()) throw InputError("recall_at_k: empty target set");
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i)
    if (targets.count(ranked[i])) return 1.0;
  return 0.0;
}

double map_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& targets,
                std::size_t k) {
  if (k < 1) throw InputError("map_at_k: k must be at least 1");
  if (ranked.empty()) throw EmptyRanking("map_at_k: empty ranking");
  if (targets.empty()) throw InputError("map_at_k: empty target set");
  const std::size_t depth = std::min(k, ranked.size());
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (targets.count(ranked[i])) {
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  const double denom = static_cast<double>(std::min(targets.size(), k));
  return precision_sum / denom;
}

double subset_recall_at_k(const std::vector<std::string>& ranked,
                          const std::set<std::string>& targets,
                          const std::set<std::string>& subset, std::size_t k) {
  if (subset.empty()) throw InputError("subset_recall_at_k: empty subset");
  std::vector<std::string> restricted;
  restricted.reserve(subset.size());
  for (const auto& id : ranked)
    if (subset.count(id)) restricted.push_back(id);
  if (restricted.empty())
    throw EmptySubsetRanking("subset_recall_at_k: no subset member was ranked");
  return recall_at_k(restricted, targets, k);
}

// ---------------------------------------------------------------------------
// Significance tests

namespace {

std::vector<double> paired_differences(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  if (a.size() != b.size()) throw LengthMismatch("paired test: sample sizes differ");
  if (a.size() < 2) throw InputError("paired test: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace

double paired_t_one_sided(const std::vector<double>& a, const std::vector<double>& b) {
  const auto d = paired_differences(a, b);
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double var = ss / (n - 1.0);
  if (var == 0.0) throw DegenerateInput("paired t-test: zero variance of differences");
  const double t = mean / std::sqrt(var / n);
  boost::math::students_t dist(n - 1.0);
  // Upper tail: small p favors mean(a) > mean(b).
  return boost::math::cdf(boost::math::complement(dist, t));
}

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  const auto all_d = paired_differences(a, b);
  std::vector<double> d;
  d.reserve(all_d.size());
  for (double x : all_d)
    if (x != 0.0) d.push_back(x);
  if (d.empty()) throw DegenerateInput("wilcoxon: all differences are zero");

  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t x, std::size_t y) { return std::fabs(d[x]) < std::fabs(d[y]); });

  // Average ranks over ties; doubled so they stay integral.
  std::vector<std::size_t> rank2(n, 0);
  std::vector<std::size_t> tie_sizes;
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t end = pos;
    while (end + 1 < n && std::fabs(d[idx[end + 1]]) == std::fabs(d[idx[pos]])) ++end;
    const std::size_t r2 = (pos + 1) + (end + 1);  // 2 * average of 1-based positions
    for (std::size_t i = pos; i <= end; ++i) rank2[idx[i]] = r2;
    tie_sizes.push_back(end - pos + 1);
    pos = end + 1;
  }

  std::size_t w2 = 0;  // doubled W+
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0.0) w2 += rank2[i];

  if (n <= 25) {
    // Exact: count sign assignments with doubled rank sum >= w2.
    const std::size_t max_sum = n * (n + 1);  // sum of doubled ranks
    std::vector<std::uint64_t> counts(max_sum + 1, 0);
    counts[0] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r2 = rank2[i];
      for (std::size_t s = max_sum; s + 1 > r2; --s) counts[s] += counts[s - r2];
    }
    std::uint64_t at_least = 0;
    for (std::size_t s = w2; s <= max_sum; ++s) at_least += counts[s];
    return static_cast<double>(at_least) / std::ldexp(1.0, static_cast<int>(n));
  }

  const double nd = static_cast<double>(n);
  const double mu = nd * (nd + 1.0) / 4.0;
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  for (std::size_t t : tie_sizes) {
    const double td = static_cast<double>(t);
    var -= (td * td * td - td) / 48.0;
  }
  if (var <= 0.0) throw DegenerateInput("wilcoxon: zero variance under ties");
  const double w = static_cast<double>(w2) / 2.0;
  const double z = (w - mu - 0.5) / std::sqrt(var);
  boost::math::normal norm;
  return boost::math::cdf(boost::math::complement(norm, z));
}

// ---------------------------------------------------------------------------
// EvalReport

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["metrics"] = metrics;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : per_query) {
    rows.push_back({{"query_id", row.query_id},
                    {"status", row.status},
                    {"best_target_rank", row.best_target_rank}});
  }
  j["per_query"] = rows;
  j["metadata"] = metadata;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport report;
  for (const auto& [key, value] : j.at("metrics").items())
    report.metrics[key] = value.get<double>();
  for (const auto& row : j.at("per_query")) {
    report.per_query.push_back(PerQueryRow{row.at("query_id").get<std::string>(),
                                           row.at("status").get<std::string>(),
                                           row.at("best_target_rank").get<std::size_t>()});
  }
  if (j.contains("metadata")) report.metadata = j.at("metadata");
  return report;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  std::size_t name_width = 6;
  for (const auto& [name, _] : metrics) name_width = std::max(name_width, name.size());
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "metric" << "value\n";
  for (const auto& [name, value] : metrics) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << name << std::fixed
        << std::setprecision(4) << value << '\n';
  }
  std::size_t failed = 0;
  for (const auto& row : per_query)
    if (row.status != "ok") ++failed;
  out << "\nqueries: " << per_query.size() << "  failed: " << failed << '\n';
  return out.str();
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out << report.to_json().dump(2) << '\n';
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("bad report file " + path + ": " + ex.what());
  }
  return EvalReport::from_json(j);
}

}  // namespace xr
