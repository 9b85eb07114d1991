#include "xr/fine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "xr/errors.hpp"

namespace xr {

namespace {

// One verdict grid cell: returns 1 when the verifier agrees with the
// expected answer, 0 otherwise (including unparsable replies).
int score_cell(AgentService& service, bool text_side, const Caption& caption,
               const ImageHandle& image, const std::string& question, bool expected,
               std::atomic<std::size_t>& unparsable) {
  try {
    const bool verdict = text_side ? service.answer_question_text(caption, question)
                                   : service.answer_question_vision(image, question);
    return verdict == expected ? 1 : 0;
  } catch (const UnparsableVerdict& ex) {
    unparsable.fetch_add(1);
    std::cerr << "[xr] warning: " << ex.what() << " (scored 0)\n";
    return 0;
  }
}

}  // namespace

VerificationOutcome verify(const std::vector<std::size_t>& shortlist, const Catalog& catalog,
                           const QuestionSet& question_set, AgentService& text_verifier,
                           AgentService& vision_verifier, std::size_t max_inflight) {
  if (shortlist.empty()) throw InputError("verify: empty shortlist");
  if (question_set.questions.size() != question_set.expected.size())
    throw LengthMismatch("verify: questions and expected answers differ in length");
  if (question_set.size() == 0) throw InputError("verify: empty question set");
  for (std::size_t idx : shortlist) {
    if (idx >= catalog.size()) throw InputError("verify: shortlist index out of range");
  }

  const std::size_t n_cand = shortlist.size();
  const std::size_t n_q = question_set.size();
  VerificationOutcome out;
  out.grid.text.assign(n_cand, std::vector<int>(n_q, 0));
  out.grid.vision.assign(n_cand, std::vector<int>(n_q, 0));

  std::atomic<std::size_t> unparsable{0};

  // Cell c in [0, n_cand*n_q*2): candidate-major, question next, modality last.
  const std::size_t total = n_cand * n_q * 2;
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= total) return;
      {
        std::lock_guard lock(error_mu);
        if (first_error) return;
      }
      const std::size_t a = cell / (n_q * 2);
      const std::size_t q = (cell / 2) % n_q;
      const bool text_side = (cell % 2) == 0;
      const std::size_t cat_idx = shortlist[a];
      try {
        const int score = score_cell(text_side ? text_verifier : vision_verifier, text_side,
                                     catalog.captions[cat_idx], catalog.images[cat_idx],
                                     question_set.questions[q], question_set.expected[q],
                                     unparsable);
        (text_side ? out.grid.text : out.grid.vision)[a][q] = score;
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(max_inflight, total));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  out.scores.s_q_text.resize(n_cand);
  out.scores.s_q_vision.resize(n_cand);
  for (std::size_t a = 0; a < n_cand; ++a) {
    out.scores.s_q_text[a] = std::accumulate(out.grid.text[a].begin(), out.grid.text[a].end(), 0);
    out.scores.s_q_vision[a] =
        std::accumulate(out.grid.vision[a].begin(), out.grid.vision[a].end(), 0);
  }
  out.unparsable = unparsable.load();
  return out;
}

std::vector<double> fuse_similarity(const std::vector<double>& s_text,
                                    const std::vector<double>& s_vision, double lambda) {
  if (s_text.size() != s_vision.size())
    throw LengthMismatch("fuse_similarity: vectors differ in length");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("fuse_similarity: lambda outside [0,1]");
  std::vector<double> fused(s_text.size());
  for (std::size_t a = 0; a < s_text.size(); ++a)
    fused[a] = lambda * s_text[a] + (1.0 - lambda) * s_vision[a];
  return fused;
}

std::vector<double> min_max_normalize(const std::vector<double>& values) {
  if (values.empty()) throw InputError("min_max_normalize: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  const double span = hi - lo;
  for (std::size_t a = 0; a < values.size(); ++a) out[a] = (values[a] - lo) / span;
  return out;
}

std::vector<double> normalize_similarity(const std::vector<double>& s_text,
                                         const std::vector<double>& s_vision, double lambda) {
  return min_max_normalize(fuse_similarity(s_text, s_vision, lambda));
}

RankedResult rerank_counts(const std::vector<int>& verification_sum,
                           const std::vector<double>& norm_sim,
                           const std::vector<double>& fused_sim,
                           const std::vector<std::string>& ids, std::size_t k) {
  const std::size_t n = verification_sum.size();
  if (norm_sim.size() != n || fused_sim.size() != n || ids.size() != n)
    throw LengthMismatch("rerank: input vectors differ in length");
  if (n == 0) throw InputError("rerank: empty shortlist");
  if (k > n) throw ConfigError("rerank: k exceeds shortlist size");

  RankedResult result;
  result.final_scores.resize(n);
  for (std::size_t a = 0; a < n; ++a)
    result.final_scores[a] = static_cast<double>(verification_sum[a]) * norm_sim[a];

  result.order.resize(n);
  std::iota(result.order.begin(), result.order.end(), 0);
  std::sort(result.order.begin(), result.order.end(), [&](std::size_t a, std::size_t b) {
    if (result.final_scores[a] != result.final_scores[b])
      return result.final_scores[a] > result.final_scores[b];
    if (fused_sim[a] != fused_sim[b]) return fused_sim[a] > fused_sim[b];
    return ids[a] < ids[b];
  });

  const std::size_t keep = std::min(k, n);
  result.top_k.assign(result.order.begin(),
                      result.order.begin() + static_cast<std::ptrdiff_t>(keep));

  result.provenance.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    result.provenance[a] = CandidateProvenance{
        ids[a], 0, 0, fused_sim[a], norm_sim[a], result.final_scores[a]};
    result.provenance[a].s_q_text = verification_sum[a];
  }
  return result;
}

RankedResult rerank(const VerificationScores& verif, const std::vector<double>& norm_sim,
                    const std::vector<double>& fused_sim, const std::vector<std::string>& ids,
                    std::size_t k) {
  if (verif.s_q_text.size() != verif.s_q_vision.size())
    throw LengthMismatch("rerank: verification vectors differ in length");
  std::vector<int> sums(verif.s_q_text.size());
  for (std::size_t a = 0; a < sums.size(); ++a)
    sums[a] = verif.s_q_text[a] + verif.s_q_vision[a];
  RankedResult result = rerank_counts(sums, norm_sim, fused_sim, ids, k);
  for (std::size_t a = 0; a < sums.size(); ++a) {
    result.provenance[a].s_q_text = verif.s_q_text[a];
    result.provenance[a].s_q_vision = verif.s_q_vision[a];
  }
  return result;
}

std::vector<int> conjunctive_counts(const VerdictGrid& grid) {
  if (grid.text.size() != grid.vision.size())
    throw LengthMismatch("conjunctive_counts: grids differ in candidate count");
  std::vector<int> counts(grid.text.size(), 0);
  for (std::size_t a = 0; a < grid.text.size(); ++a) {
    if (grid.text[a].size() != grid.vision[a].size())
      throw LengthMismatch("conjunctive_counts: grids differ in question count");
    for (std::size_t q = 0; q < grid.text[a].size(); ++q)
      counts[a] += (grid.text[a][q] == 1 && grid.vision[a][q] == 1) ? 1 : 0;
  }
  return counts;
}

}  // namespace xr
