#pragma once

#include <cstddef>
#include <vector>

#include "xr/embed_index.hpp"

namespace xr {

// The four cross-modal similarities of one candidate: the two target-proxy
// captions against the candidate's caption and image.
struct SimilarityQuad {
  double s_tt;  // sim(c_t, candidate caption)
  double s_tv;  // sim(c_v, candidate caption)
  double s_vt;  // sim(c_t, candidate image)
  double s_vv;  // sim(c_v, candidate image)
};

// Per-candidate aggregates, grouped by which imagination caption conditioned
// the score: s_text sums the c_t-conditioned pair, s_vision the c_v pair.
struct ModalityScores {
  std::vector<double> s_text;
  std::vector<double> s_vision;

  std::size_t size() const { return s_text.size(); }
};

struct FusedRanking {
  std::vector<double> rrf_scores;         // per candidate, catalog order
  std::vector<std::size_t> ranks_text;    // 1-based rank of s_text[a]
  std::vector<std::size_t> ranks_vision;  // 1-based rank of s_vision[a]
  std::vector<std::size_t> order;         // candidate indices, best first
  std::vector<std::size_t> top_k_prime;   // filled by select_top
};

// Scores every candidate against the two imagination captions. Exactly two
// fresh embedding calls (c_t, c_v); all candidate vectors come from the
// catalog.
std::vector<SimilarityQuad> score_all(const Caption& c_t, const Caption& c_v,
                                      const Catalog& catalog, AgentService& embedder);

ModalityScores aggregate(const std::vector<SimilarityQuad>& quads);

// 1-based positions under descending sort; ties take the lower index.
std::vector<std::size_t> rank_positions(const std::vector<double>& scores);

// rrf[a] = 1/(z+rank_text(a)) + 1/(z+rank_vision(a)); order sorts rrf
// descending with index-ascending tie-break.
FusedRanking rrf_fuse(const ModalityScores& scores, double z);
// Single-list degenerate form used when one similarity modality is ablated.
FusedRanking rrf_fuse_single(const std::vector<double>& scores, double z, bool text_side);
// Direct score summation baseline (no rank transform).
FusedRanking sum_fuse(const ModalityScores& scores);
FusedRanking sum_fuse_single(const std::vector<double>& scores, bool text_side);

// First min(k_prime, N) of fused.order; k_prime > N clamps with a warning.
std::vector<std::size_t> select_top(const FusedRanking& fused, std::size_t k_prime);

}  // namespace xr
