#include "xr/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "xr/errors.hpp"

namespace fs = std::filesystem;

namespace xr {

namespace {

constexpr const char* kVersion = "xr 0.1.0";

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

void check_switches(const AblationSwitches& s) {
  if (s.disable_text_sim && s.disable_vision_sim && s.disable_text_q && s.disable_vision_q)
    throw ConfigError("all four scoring modalities disabled: nothing left to rank");
  if (s.disable_text_sim && s.disable_vision_sim)
    throw ConfigError("at least one similarity modality must stay enabled");
}

nlohmann::json config_json(const PipelineConfig& cfg) {
  return {{"lambda", cfg.lambda},
          {"z", cfg.z},
          {"k", cfg.k},
          {"k_prime", cfg.k_prime},
          {"n_questions", cfg.n_questions},
          {"temperature", cfg.temperature},
          {"top_p", cfg.top_p},
          {"max_inflight", cfg.max_inflight},
          {"fusion", to_string(cfg.fusion)},
          {"verify_mode", to_string(cfg.verify_mode)}};
}

nlohmann::json switches_json(const AblationSwitches& s) {
  return {{"disable_text_sim", s.disable_text_sim},
          {"disable_vision_sim", s.disable_vision_sim},
          {"disable_text_q", s.disable_text_q},
          {"disable_vision_q", s.disable_vision_q}};
}

}  // namespace

QueryTrace run_query(const Query& query, const Catalog& catalog, AgentService& service,
                     const PipelineConfig& cfg, const RunOptions& options) {
  validate_config(cfg);
  check_switches(options.switches);
  if (catalog.size() == 0) throw StateError("run_query: catalog is empty");
  const auto t_total = std::chrono::steady_clock::now();

  QueryTrace trace;
  trace.query_id = query.query_id;

  // Reference caption: reuse the catalog's caption when the reference is a
  // catalog member, otherwise ask the caption agent.
  const auto t_imag = std::chrono::steady_clock::now();
  Caption c_r;
  if (auto idx = catalog.index_of(query.reference.id)) {
    c_r = Caption{catalog.captions[*idx].text, CaptionSource::reference};
  } else {
    c_r = service.caption(query.reference, CaptionSource::reference);
  }

  auto [m_t, c_t] = service.imagine_text(query.modification_text, c_r);
  auto [m_v, c_v] = service.imagine_vision(query.modification_text, query.reference);
  trace.imagination = ImaginationResult{c_t, c_v, std::move(m_t), std::move(m_v)};
  trace.timings.imagination_ms = ms_since(t_imag);

  // Coarse filtering.
  const auto t_coarse = std::chrono::steady_clock::now();
  trace.quads = score_all(trace.imagination.c_t, trace.imagination.c_v, catalog, service);
  trace.modality = aggregate(trace.quads);

  const auto& sw = options.switches;
  if (sw.disable_text_sim) {
    trace.fused = cfg.fusion == FusionMode::rrf
                      ? rrf_fuse_single(trace.modality.s_vision, cfg.z, false)
                      : sum_fuse_single(trace.modality.s_vision, false);
  } else if (sw.disable_vision_sim) {
    trace.fused = cfg.fusion == FusionMode::rrf
                      ? rrf_fuse_single(trace.modality.s_text, cfg.z, true)
                      : sum_fuse_single(trace.modality.s_text, true);
  } else {
    trace.fused = cfg.fusion == FusionMode::rrf ? rrf_fuse(trace.modality, cfg.z)
                                                : sum_fuse(trace.modality);
  }

  trace.shortlist = options.bypass_select ? trace.fused.order
                                          : select_top(trace.fused, cfg.k_prime);
  trace.fused.top_k_prime = trace.shortlist;
  trace.shortlist_ids.reserve(trace.shortlist.size());
  for (std::size_t idx : trace.shortlist) trace.shortlist_ids.push_back(catalog.images[idx].id);
  trace.timings.coarse_ms = ms_since(t_coarse);

  // Fine filtering.
  const auto t_fine = std::chrono::steady_clock::now();
  const std::size_t k_eff = std::min(cfg.k, trace.shortlist.size());

  double lambda_eff = cfg.lambda;
  if (sw.disable_text_sim) lambda_eff = 0.0;
  if (sw.disable_vision_sim) lambda_eff = 1.0;
  std::vector<double> s_t_sub(trace.shortlist.size()), s_v_sub(trace.shortlist.size());
  for (std::size_t j = 0; j < trace.shortlist.size(); ++j) {
    s_t_sub[j] = trace.modality.s_text[trace.shortlist[j]];
    s_v_sub[j] = trace.modality.s_vision[trace.shortlist[j]];
  }
  const std::vector<double> fused_sim = fuse_similarity(s_t_sub, s_v_sub, lambda_eff);
  const std::vector<double> norm_sim = min_max_normalize(fused_sim);

  const bool questions_enabled = !(sw.disable_text_q && sw.disable_vision_q);
  if (questions_enabled) {
    trace.question_set = service.generate_questions(
        trace.imagination.m_t, trace.imagination.m_v, query.modification_text, cfg.n_questions);
    trace.verification = verify(trace.shortlist, catalog, trace.question_set, service, service,
                                cfg.max_inflight);

    std::vector<int> counts;
    if (cfg.verify_mode == VerifyMode::conjunctive && !sw.disable_text_q && !sw.disable_vision_q) {
      counts = conjunctive_counts(trace.verification.grid);
    } else {
      counts.resize(trace.shortlist.size(), 0);
      for (std::size_t j = 0; j < counts.size(); ++j) {
        if (!sw.disable_text_q) counts[j] += trace.verification.scores.s_q_text[j];
        if (!sw.disable_vision_q) counts[j] += trace.verification.scores.s_q_vision[j];
      }
    }
    trace.fine = rerank_counts(counts, norm_sim, fused_sim, trace.shortlist_ids, k_eff);
    for (std::size_t j = 0; j < trace.shortlist.size(); ++j) {
      trace.fine.provenance[j].s_q_text = trace.verification.scores.s_q_text[j];
      trace.fine.provenance[j].s_q_vision = trace.verification.scores.s_q_vision[j];
    }
  } else {
    // Similarity-only mode keeps the coarse order; no questions are asked.
    RankedResult fine;
    const std::size_t n = trace.shortlist.size();
    fine.final_scores.assign(n, 0.0);
    fine.order.resize(n);
    for (std::size_t j = 0; j < n; ++j) fine.order[j] = j;
    fine.top_k.assign(fine.order.begin(), fine.order.begin() + static_cast<std::ptrdiff_t>(k_eff));
    fine.provenance.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      fine.provenance[j] =
          CandidateProvenance{trace.shortlist_ids[j], 0, 0, fused_sim[j], norm_sim[j], 0.0};
    trace.fine = std::move(fine);
  }
  trace.timings.fine_ms = ms_since(t_fine);

  trace.top_k_ids.reserve(trace.fine.top_k.size());
  for (std::size_t pos : trace.fine.top_k) trace.top_k_ids.push_back(trace.shortlist_ids[pos]);

  trace.full_ranking.reserve(catalog.size());
  for (std::size_t pos : trace.fine.order) trace.full_ranking.push_back(trace.shortlist_ids[pos]);
  for (std::size_t r = trace.shortlist.size(); r < trace.fused.order.size(); ++r)
    trace.full_ranking.push_back(catalog.images[trace.fused.order[r]].id);

  trace.timings.total_ms = ms_since(t_total);
  return trace;
}

// ---------------------------------------------------------------------------
// Trace files

nlohmann::json trace_summary_json(const QueryTrace& trace) {
  return {{"kind", "result"},
          {"query_id", trace.query_id},
          {"shortlist", trace.shortlist_ids},
          {"top_k", trace.top_k_ids},
          {"full_ranking", trace.full_ranking}};
}

void write_query_trace(const QueryTrace& trace, const Catalog& catalog, const std::string& path,
                       bool candidates) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file: " + path);

  out << nlohmann::json{{"kind", "query"}, {"query_id", trace.query_id}}.dump() << '\n';

  nlohmann::json m_v = nlohmann::json::array();
  for (const auto& flag : trace.imagination.m_v)
    m_v.push_back({{"attribute", flag.attribute}, {"present", flag.present}});
  out << nlohmann::json{{"kind", "imagination"},
                        {"c_t", trace.imagination.c_t.text},
                        {"c_v", trace.imagination.c_v.text},
                        {"m_t", trace.imagination.m_t},
                        {"m_v", m_v}}
             .dump()
      << '\n';

  if (candidates) {
    for (std::size_t a = 0; a < trace.quads.size(); ++a) {
      nlohmann::json rec{{"kind", "coarse"},
                         {"id", catalog.images[a].id},
                         {"s_tt", trace.quads[a].s_tt},
                         {"s_tv", trace.quads[a].s_tv},
                         {"s_vt", trace.quads[a].s_vt},
                         {"s_vv", trace.quads[a].s_vv},
                         {"s_t", trace.modality.s_text[a]},
                         {"s_v", trace.modality.s_vision[a]},
                         {"rrf", trace.fused.rrf_scores[a]}};
      if (!trace.fused.ranks_text.empty()) rec["rank_t"] = trace.fused.ranks_text[a];
      if (!trace.fused.ranks_vision.empty()) rec["rank_v"] = trace.fused.ranks_vision[a];
      out << rec.dump() << '\n';
    }
  }

  if (trace.question_set.size() > 0) {
    out << nlohmann::json{{"kind", "question_set"},
                          {"questions", trace.question_set.questions},
                          {"expected", trace.question_set.expected}}
               .dump()
        << '\n';
  }

  if (candidates) {
    for (const auto& p : trace.fine.provenance) {
      out << nlohmann::json{{"kind", "fine"},          {"id", p.id},
                            {"s_q_text", p.s_q_text},  {"s_q_vision", p.s_q_vision},
                            {"fused_sim", p.fused_sim}, {"norm_sim", p.norm_sim},
                            {"final", p.final_score}}
                 .dump()
          << '\n';
    }
  }

  out << trace_summary_json(trace).dump() << '\n';
  out << nlohmann::json{{"kind", "timings"},
                        {"imagination_ms", trace.timings.imagination_ms},
                        {"coarse_ms", trace.timings.coarse_ms},
                        {"fine_ms", trace.timings.fine_ms},
                        {"total_ms", trace.timings.total_ms}}
             .dump()
      << '\n';
}

// ---------------------------------------------------------------------------
// Benchmark driver

namespace {

const std::vector<std::size_t> kRecallKs{1, 5, 10, 50};
const std::vector<std::size_t> kMapKs{5, 10, 25, 50};
const std::vector<std::size_t> kSubsetKs{1, 2, 3};

std::map<std::string, double> metric_row(const GroundTruth& gt,
                                         const std::vector<std::string>& ranking) {
  std::map<std::string, double> row;
  for (std::size_t k : kRecallKs)
    row["R@" + std::to_string(k)] = recall_at_k(ranking, gt.targets, k);
  for (std::size_t k : kMapKs)
    row["mAP@" + std::to_string(k)] = map_at_k(ranking, gt.targets, k);
  if (gt.subset) {
    for (std::size_t k : kSubsetKs)
      row["R_subset@" + std::to_string(k)] =
          subset_recall_at_k(ranking, gt.targets, *gt.subset, k);
  }
  return row;
}

std::size_t rank_of_best_target(const GroundTruth& gt, const std::vector<std::string>& ranking) {
  for (std::size_t r = 0; r < ranking.size(); ++r)
    if (gt.targets.count(ranking[r])) return r + 1;
  return 0;
}

}  // namespace

// Per-query evaluation of one completed trace; traces stream to disk inside
// the worker so a full benchmark never holds more than one trace per worker.
EvalReport run_benchmark(const Manifest& manifest, const Catalog& catalog, AgentService& service,
                         const PipelineConfig& cfg, const BenchmarkOptions& options) {
  validate_config(cfg);
  if (manifest.queries.empty()) throw InputError("run_benchmark: manifest has no queries");
  for (const auto& img : manifest.images) {
    if (!catalog.index_of(img.id))
      throw StateError("catalog does not cover manifest image " + img.id);
  }
  const auto t_start = std::chrono::steady_clock::now();
  const std::uint64_t calls_before = service.backend().calls();
  if (!options.run_dir.empty()) fs::create_directories(fs::path(options.run_dir) / "traces");

  const auto gt = manifest.ground_truth();

  const std::size_t n = manifest.queries.size();
  std::vector<std::string> status(n, "ok");
  std::vector<std::map<std::string, double>> per_query_metrics(n);
  std::vector<std::size_t> best_rank(n, 0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t qi = next.fetch_add(1);
      if (qi >= n) return;
      const auto& mq = manifest.queries[qi];
      try {
        const auto ref_idx = catalog.index_of(mq.ref_id);
        if (!ref_idx) throw StateError("reference image not in catalog: " + mq.ref_id);
        Query query = make_query(mq.id, catalog.images[*ref_idx], mq.text);
        QueryTrace trace = run_query(query, catalog, service, cfg, options.run);

        if (!options.run_dir.empty()) {
          const auto path = fs::path(options.run_dir) / "traces" / (mq.id + ".jsonl");
          write_query_trace(trace, catalog, path.string(), options.trace_candidates);
        }

        auto it = gt.find(mq.id);
        if (it != gt.end()) {
          best_rank[qi] = rank_of_best_target(it->second, trace.full_ranking);
          per_query_metrics[qi] = metric_row(it->second, trace.full_ranking);
        }
      } catch (const Error& ex) {
        status[qi] = ex.what();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.query_parallelism, n));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::size_t n_failed = 0;
  for (const auto& s : status)
    if (s != "ok") ++n_failed;
  if (static_cast<double>(n_failed) > options.fail_threshold * static_cast<double>(n)) {
    throw BackendError("benchmark aborted: " + std::to_string(n_failed) + " of " +
                       std::to_string(n) + " queries failed (threshold " +
                       std::to_string(options.fail_threshold) + ")");
  }
  if (n_failed > 0)
    std::cerr << "[xr] warning: " << n_failed << " queries failed and are excluded from metrics\n";

  EvalReport report;
  std::map<std::string, std::pair<double, std::size_t>> sums;  // metric -> (sum, count)
  for (std::size_t qi = 0; qi < n; ++qi) {
    report.per_query.push_back(PerQueryRow{manifest.queries[qi].id, status[qi], best_rank[qi]});
    for (const auto& [name, value] : per_query_metrics[qi]) {
      auto& slot = sums[name];
      slot.first += value;
      slot.second += 1;
    }
  }
  for (const auto& [name, slot] : sums)
    report.metrics[name] = slot.second == 0 ? 0.0 : slot.first / static_cast<double>(slot.second);

  report.metadata = {{"dataset", to_string(manifest.dataset)},
                     {"label", options.label},
                     {"seed", options.seed},
                     {"config", config_json(cfg)},
                     {"switches", switches_json(options.run.switches)},
                     {"backend", service.backend().identity()},
                     {"embedder", service.backend().embedder_identity()},
                     {"version", kVersion},
                     {"n_queries", n},
                     {"n_failed", n_failed},
                     {"backend_calls", service.backend().calls() - calls_before},
                     {"wall_ms", ms_since(t_start)}};

  if (!options.run_dir.empty()) {
    std::ofstream run_json(fs::path(options.run_dir) / "run.json");
    if (!run_json) throw IoError("cannot write run.json under " + options.run_dir);
    run_json << report.metadata.dump(2) << '\n';
  }
  return report;
}

EvalReport evaluate_rankings(const Manifest& manifest,
                             const std::map<std::string, std::vector<std::string>>& rankings) {
  if (manifest.queries.empty()) throw InputError("evaluate_rankings: manifest has no queries");
  const auto gt = manifest.ground_truth();

  EvalReport report;
  std::map<std::string, std::pair<double, std::size_t>> sums;
  std::size_t missing = 0;
  for (const auto& mq : manifest.queries) {
    PerQueryRow row;
    row.query_id = mq.id;
    auto rank_it = rankings.find(mq.id);
    if (rank_it == rankings.end()) {
      row.status = "no ranking";
      ++missing;
    } else {
      row.status = "ok";
      auto gt_it = gt.find(mq.id);
      if (gt_it != gt.end()) {
        row.best_target_rank = rank_of_best_target(gt_it->second, rank_it->second);
        for (const auto& [name, value] : metric_row(gt_it->second, rank_it->second)) {
          auto& slot = sums[name];
          slot.first += value;
          slot.second += 1;
        }
      }
    }
    report.per_query.push_back(std::move(row));
  }
  for (const auto& [name, slot] : sums)
    report.metrics[name] = slot.second == 0 ? 0.0 : slot.first / static_cast<double>(slot.second);
  report.metadata = {{"dataset", to_string(manifest.dataset)},
                     {"n_queries", manifest.queries.size()},
                     {"n_missing", missing}};
  return report;
}

// ---------------------------------------------------------------------------
// Ablation grid

std::vector<AblationVariant> make_ablation_variants(
    const PipelineConfig& base, const AblationSwitches& switches,
    const std::vector<double>& lambda_sweep, const std::vector<double>& z_sweep,
    const std::vector<std::size_t>& k_prime_sweep,
    const std::vector<std::size_t>& n_questions_sweep) {
  check_switches(switches);

  std::string switch_label;
  if (switches.disable_text_sim) switch_label += "+no_text_sim";
  if (switches.disable_vision_sim) switch_label += "+no_vision_sim";
  if (switches.disable_text_q) switch_label += "+no_text_q";
  if (switches.disable_vision_q) switch_label += "+no_vision_q";
  if (base.fusion == FusionMode::sum) switch_label += "+sum";
  if (switch_label.empty()) switch_label = "full";
  else switch_label.erase(0, 1);

  std::vector<AblationVariant> grid;
  const bool has_sweep = !lambda_sweep.empty() || !z_sweep.empty() || !k_prime_sweep.empty() ||
                         !n_questions_sweep.empty();
  if (!has_sweep) {
    grid.push_back({switch_label, base, switches});
    return grid;
  }
  auto label_with = [&](const std::string& param) {
    return switch_label == "full" ? param : switch_label + "+" + param;
  };
  for (double v : lambda_sweep) {
    PipelineConfig cfg = base;
    cfg.lambda = v;
    grid.push_back({label_with("lambda=" + std::to_string(v)), cfg, switches});
  }
  for (double v : z_sweep) {
    PipelineConfig cfg = base;
    cfg.z = v;
    grid.push_back({label_with("z=" + std::to_string(v)), cfg, switches});
  }
  for (std::size_t v : k_prime_sweep) {
    PipelineConfig cfg = base;
    cfg.k_prime = v;
    if (cfg.k > cfg.k_prime) cfg.k = cfg.k_prime;
    grid.push_back({label_with("kprime=" + std::to_string(v)), cfg, switches});
  }
  for (std::size_t v : n_questions_sweep) {
    PipelineConfig cfg = base;
    cfg.n_questions = v;
    grid.push_back({label_with("nq=" + std::to_string(v)), cfg, switches});
  }
  return grid;
}

std::vector<std::pair<std::string, EvalReport>> ablate(const Manifest& manifest,
                                                       const Catalog& catalog,
                                                       AgentService& service,
                                                       const std::vector<AblationVariant>& grid,
                                                       const BenchmarkOptions& options) {
  if (grid.empty()) throw InputError("ablate: empty variant grid");
  std::vector<std::pair<std::string, EvalReport>> reports;
  reports.reserve(grid.size());
  for (const auto& variant : grid) {
    BenchmarkOptions opts = options;
    opts.run.switches = variant.switches;
    opts.label = variant.label;
    if (!options.run_dir.empty())
      opts.run_dir = (fs::path(options.run_dir) / variant.label).string();
    reports.emplace_back(variant.label, run_benchmark(manifest, catalog, service, variant.cfg, opts));
  }
  return reports;
}

}  // namespace xr
