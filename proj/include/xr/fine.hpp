#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xr/agents.hpp"
#include "xr/embed_index.hpp"

namespace xr {

// Per-candidate counts of correctly answered questions, one vector per
// verifier modality. Entries lie in [0, n_questions].
struct VerificationScores {
  std::vector<int> s_q_text;
  std::vector<int> s_q_vision;
};

// Full per-cell correctness (1 = verdict matched the expected answer),
// [candidate][question]. Needed by the conjunctive scoring variant.
struct VerdictGrid {
  std::vector<std::vector<int>> text;
  std::vector<std::vector<int>> vision;
};

struct VerificationOutcome {
  VerificationScores scores;
  VerdictGrid grid;
  std::size_t unparsable = 0;
};

struct CandidateProvenance {
  std::string id;
  int s_q_text = 0;
  int s_q_vision = 0;
  double fused_sim = 0.0;
  double norm_sim = 0.0;
  double final_score = 0.0;
};

// Re-ranked shortlist. order and top_k hold positions into the shortlist
// (0..k'-1); callers map them back to candidate ids.
struct RankedResult {
  std::vector<double> final_scores;
  std::vector<std::size_t> order;
  std::vector<std::size_t> top_k;
  std::vector<CandidateProvenance> provenance;
};

// Runs the (candidate x question x 2 modalities) verdict grid over the
// shortlist. An UnparsableVerdict scores 0 and is logged; BackendError
// aborts. Cells are independent and run on up to max_inflight workers with
// index-slotted results, so output never depends on scheduling.
VerificationOutcome verify(const std::vector<std::size_t>& shortlist, const Catalog& catalog,
                           const QuestionSet& question_set, AgentService& text_verifier,
                           AgentService& vision_verifier, std::size_t max_inflight = 1);

// lambda*s_text + (1-lambda)*s_vision, element-wise.
std::vector<double> fuse_similarity(const std::vector<double>& s_text,
                                    const std::vector<double>& s_vision, double lambda);

// Min-max normalization of the fused similarity over the shortlist;
// a constant vector maps to all ones.
std::vector<double> normalize_similarity(const std::vector<double>& s_text,
                                         const std::vector<double>& s_vision, double lambda);
std::vector<double> min_max_normalize(const std::vector<double>& values);

// final[a] = verification_sum[a] * norm_sim[a]; descending order with ties
// broken by fused_sim descending, then candidate id ascending.
RankedResult rerank_counts(const std::vector<int>& verification_sum,
                           const std::vector<double>& norm_sim,
                           const std::vector<double>& fused_sim,
                           const std::vector<std::string>& ids, std::size_t k);

// The default scoring: independent sum of the two modality counts.
RankedResult rerank(const VerificationScores& verif, const std::vector<double>& norm_sim,
                    const std::vector<double>& fused_sim, const std::vector<std::string>& ids,
                    std::size_t k);

// Count of questions answered correctly under BOTH modalities.
std::vector<int> conjunctive_counts(const VerdictGrid& grid);

}  // namespace xr
