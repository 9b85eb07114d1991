#pragma once

#include <string>
#include <vector>

#include "xr/agents.hpp"
#include "xr/coarse.hpp"
#include "xr/datasets.hpp"
#include "xr/domain.hpp"
#include "xr/embed_index.hpp"
#include "xr/fine.hpp"
#include "xr/metrics.hpp"

namespace xr {

struct StageTimings {
  double imagination_ms = 0.0;
  double coarse_ms = 0.0;
  double fine_ms = 0.0;
  double total_ms = 0.0;
};

// Full record of one query's pass through the pipeline.
struct QueryTrace {
  std::string query_id;
  ImaginationResult imagination;
  std::vector<SimilarityQuad> quads;     // catalog order, length N
  ModalityScores modality;               // catalog order, length N
  FusedRanking fused;                    // catalog order, length N
  std::vector<std::size_t> shortlist;    // catalog indices, coarse order
  std::vector<std::string> shortlist_ids;
  QuestionSet question_set;              // empty when verification is ablated
  VerificationOutcome verification;
  RankedResult fine;
  std::vector<std::string> top_k_ids;    // the final retrieved set, best first
  std::vector<std::string> full_ranking; // all N ids: re-ranked shortlist, then coarse tail
  StageTimings timings;
};

struct AblationSwitches {
  bool disable_text_sim = false;
  bool disable_vision_sim = false;
  bool disable_text_q = false;
  bool disable_vision_q = false;
};

struct RunOptions {
  AblationSwitches switches;
  bool bypass_select = false;  // feed the whole fused order into fine filtering
};

// Executes the whole per-query algorithm: reference caption, the two
// imaginations, cross-modal scoring, rank fusion, top-k' selection, question
// generation, verification, and re-ranking.
QueryTrace run_query(const Query& query, const Catalog& catalog, AgentService& service,
                     const PipelineConfig& cfg, const RunOptions& options = {});

struct BenchmarkOptions {
  RunOptions run;
  std::string run_dir;          // empty = no trace output
  bool trace_candidates = false;
  double fail_threshold = 0.10;
  std::string label = "xr";
  std::uint64_t seed = 0;       // recorded in metadata only
  std::size_t query_parallelism = 1;
};

EvalReport run_benchmark(const Manifest& manifest, const Catalog& catalog, AgentService& service,
                         const PipelineConfig& cfg, const BenchmarkOptions& options = {});

// Metrics over precomputed full rankings, e.g. re-scoring a run's trace
// files. Queries without a ranking are reported as missing.
EvalReport evaluate_rankings(const Manifest& manifest,
                             const std::map<std::string, std::vector<std::string>>& rankings);

struct AblationVariant {
  std::string label;
  PipelineConfig cfg;
  AblationSwitches switches;
};

// Expands sweep values and switch combinations into labeled variants;
// validates that at least one similarity modality stays enabled.
std::vector<AblationVariant> make_ablation_variants(
    const PipelineConfig& base, const AblationSwitches& switches,
    const std::vector<double>& lambda_sweep, const std::vector<double>& z_sweep,
    const std::vector<std::size_t>& k_prime_sweep,
    const std::vector<std::size_t>& n_questions_sweep);

std::vector<std::pair<std::string, EvalReport>> ablate(const Manifest& manifest,
                                                       const Catalog& catalog,
                                                       AgentService& service,
                                                       const std::vector<AblationVariant>& grid,
                                                       const BenchmarkOptions& options = {});

// Trace serialization: one ldJSON file per query. Timing records carry
// kind "timings" so byte-level comparisons can exclude them.
void write_query_trace(const QueryTrace& trace, const Catalog& catalog, const std::string& path,
                       bool candidates);
nlohmann::json trace_summary_json(const QueryTrace& trace);

}  // namespace xr
