#include "xr/coarse.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "xr/errors.hpp"

namespace xr {

std::vector<SimilarityQuad> score_all(const Caption& c_t, const Caption& c_v,
                                      const Catalog& catalog, AgentService& embedder) {
  if (c_t.text.empty() || c_v.text.empty())
    throw InputError("score_all: imagination captions must be non-empty");

  const std::vector<float> e_t = embedder.embed_text(c_t.text);
  const std::vector<float> e_v = embedder.embed_text(c_v.text);

  const auto tt = batch_similarity(e_t, catalog, CatalogSide::caption_vectors);
  const auto tv = batch_similarity(e_v, catalog, CatalogSide::caption_vectors);
  const auto vt = batch_similarity(e_t, catalog, CatalogSide::image_vectors);
  const auto vv = batch_similarity(e_v, catalog, CatalogSide::image_vectors);

  std::vector<SimilarityQuad> quads(catalog.size());
  for (std::size_t a = 0; a < catalog.size(); ++a)
    quads[a] = SimilarityQuad{tt[a], tv[a], vt[a], vv[a]};
  return quads;
}

ModalityScores aggregate(const std::vector<SimilarityQuad>& quads) {
  if (quads.empty()) throw InputError("aggregate: no quads");
  ModalityScores scores;
  scores.s_text.reserve(quads.size());
  scores.s_vision.reserve(quads.size());
  for (const auto& q : quads) {
    scores.s_text.push_back(q.s_tt + q.s_vt);
    scores.s_vision.push_back(q.s_vv + q.s_tv);
  }
  return scores;
}

std::vector<std::size_t> rank_positions(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) ranks[idx[pos]] = pos + 1;
  return ranks;
}

namespace {

FusedRanking finish(std::vector<double> fused_scores, std::vector<std::size_t> ranks_text,
                    std::vector<std::size_t> ranks_vision) {
  FusedRanking out;
  out.order.resize(fused_scores.size());
  std::iota(out.order.begin(), out.order.end(), 0);
  std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (fused_scores[a] != fused_scores[b]) return fused_scores[a] > fused_scores[b];
    return a < b;
  });
  out.rrf_scores = std::move(fused_scores);
  out.ranks_text = std::move(ranks_text);
  out.ranks_vision = std::move(ranks_vision);
  return out;
}

}  // namespace

FusedRanking rrf_fuse(const ModalityScores& scores, double z) {
  if (scores.s_text.size() != scores.s_vision.size())
    throw LengthMismatch("rrf_fuse: modality vectors differ in length");
  if (scores.s_text.empty()) throw InputError("rrf_fuse: no candidates");
  if (!(z > 0.0)) throw ConfigError("rrf_fuse: z must be positive");

  auto ranks_t = rank_positions(scores.s_text);
  auto ranks_v = rank_positions(scores.s_vision);
  std::vector<double> rrf(scores.size());
  for (std::size_t a = 0; a < scores.size(); ++a)
    rrf[a] = 1.0 / (z + static_cast<double>(ranks_t[a])) +
             1.0 / (z + static_cast<double>(ranks_v[a]));
  return finish(std::move(rrf), std::move(ranks_t), std::move(ranks_v));
}

FusedRanking rrf_fuse_single(const std::vector<double>& scores, double z, bool text_side) {
  if (scores.empty()) throw InputError("rrf_fuse_single: no candidates");
  if (!(z > 0.0)) throw ConfigError("rrf_fuse_single: z must be positive");
  auto ranks = rank_positions(scores);
  std::vector<double> rrf(scores.size());
  for (std::size_t a = 0; a < scores.size(); ++a)
    rrf[a] = 1.0 / (z + static_cast<double>(ranks[a]));
  if (text_side) return finish(std::move(rrf), std::move(ranks), {});
  return finish(std::move(rrf), {}, std::move(ranks));
}

FusedRanking sum_fuse(const ModalityScores& scores) {
  if (scores.s_text.size() != scores.s_vision.size())
    throw LengthMismatch("sum_fuse: modality vectors differ in length");
  if (scores.s_text.empty()) throw InputError("sum_fuse: no candidates");
  std::vector<double> sums(scores.size());
  for (std::size_t a = 0; a < scores.size(); ++a)
    sums[a] = scores.s_text[a] + scores.s_vision[a];
  auto ranks_t = rank_positions(scores.s_text);
  auto ranks_v = rank_positions(scores.s_vision);
  return finish(std::move(sums), std::move(ranks_t), std::move(ranks_v));
}

FusedRanking sum_fuse_single(const std::vector<double>& scores, bool text_side) {
  if (scores.empty()) throw InputError("sum_fuse_single: no candidates");
  auto ranks = rank_positions(scores);
  std::vector<double> sums = scores;
  if (text_side) return finish(std::move(sums), std::move(ranks), {});
  return finish(std::move(sums), {}, std::move(ranks));
}

std::vector<std::size_t> select_top(const FusedRanking& fused, std::size_t k_prime) {
  if (k_prime < 1) throw ConfigError("select_top: k_prime must be positive");
  const std::size_t n = fused.order.size();
  if (k_prime > n) {
    std::cerr << "[xr] warning: k_prime " << k_prime << " exceeds candidate count " << n
              << ", clamping\n";
    k_prime = n;
  }
  return {fused.order.begin(), fused.order.begin() + static_cast<std::ptrdiff_t>(k_prime)};
}

}  // namespace xr
