#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace xr {

struct GroundTruth {
  std::string query_id;
  std::set<std::string> targets;                 // singleton for CIRR/FashionIQ
  std::optional<std::set<std::string>> subset;   // CIRR subset task
};

// Per-query hit: 1.0 if any target appears in the first min(k, |ranked|)
// entries, else 0.0.
double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& targets,
                   std::size_t k);

// Truncated average precision with denominator min(|targets|, k).
double map_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& targets,
                std::size_t k);

// Restricts the ranking to subset members (order preserved), then recall@k.
double subset_recall_at_k(const std::vector<std::string>& ranked,
                          const std::set<std::string>& targets,
                          const std::set<std::string>& subset, std::size_t k);

// Paired one-sided tests with alternative mean(a) > mean(b). Wilcoxon uses
// the exact signed-rank distribution for n <= 25 non-zero differences and a
// normal approximation with continuity correction above.
double paired_t_one_sided(const std::vector<double>& a, const std::vector<double>& b);
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

struct PerQueryRow {
  std::string query_id;
  std::string status;           // "ok" or the failure message
  std::size_t best_target_rank = 0;  // 1-based; 0 when no target was ranked
};

struct EvalReport {
  std::map<std::string, double> metrics;
  std::vector<PerQueryRow> per_query;
  nlohmann::json metadata;  // config, backend identities, label, seed, timing

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_table() const;
};

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

}  // namespace xr
