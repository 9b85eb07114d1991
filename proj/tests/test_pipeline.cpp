#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "xr/errors.hpp"
#include "xr/pipeline.hpp"

using namespace xr;
using xr::test::ScriptBuilder;
using xr::test::make_rig;
using xr::test::make_temp_dir;

namespace fs = std::filesystem;

namespace {

fs::path fixture_dir(const std::string& name) {
  return fs::path(XR_SOURCE_DIR) / "fixtures" / name;
}

struct Scenario {
  test::MockRig rig;
  Manifest manifest;
  Catalog catalog;
};

Scenario load_scenario(const std::string& name) {
  Scenario s;
  s.rig = make_rig((fixture_dir(name) / "mock_script.jsonl").string());
  s.manifest = load_manifest((fixture_dir(name) / "manifest.jsonl").string());
  s.catalog = build_catalog(s.manifest.images, *s.rig.service);
  return s;
}

PipelineConfig golden_config() {
  PipelineConfig cfg;
  cfg.k = 5;
  cfg.k_prime = 6;
  cfg.n_questions = 3;
  return cfg;
}

Query query_of(const Scenario& s, std::size_t index) {
  const auto& mq = s.manifest.queries[index];
  const auto idx = s.catalog.index_of(mq.ref_id);
  REQUIRE(idx.has_value());
  return make_query(mq.id, s.catalog.images[*idx], mq.text);
}

// Trace file bytes with timing records stripped, for byte-level comparisons.
std::string trace_without_timings(const fs::path& path) {
  std::ifstream in(path);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.find("\"kind\":\"timings\"") != std::string::npos) continue;
    kept += line;
    kept += '\n';
  }
  return kept;
}

}  // namespace

TEST_CASE("golden scenario ranks the planted target first") {
  auto s = load_scenario("golden");
  for (std::size_t qi = 0; qi < s.manifest.queries.size(); ++qi) {
    const auto trace = run_query(query_of(s, qi), s.catalog, *s.rig.service, golden_config());
    REQUIRE(trace.top_k_ids.size() == 5);
    CHECK(trace.top_k_ids[0] == s.manifest.queries[qi].targets[0]);
    CHECK(trace.shortlist.size() == 6);
    CHECK(trace.full_ranking.size() == 12);
    CHECK(trace.question_set.size() == 3);
    // The planted target passes every question in both modalities.
    const auto target_pos = std::find(trace.shortlist_ids.begin(), trace.shortlist_ids.end(),
                                      s.manifest.queries[qi].targets[0]) -
                            trace.shortlist_ids.begin();
    CHECK(trace.verification.scores.s_q_text[static_cast<std::size_t>(target_pos)] == 3);
    CHECK(trace.verification.scores.s_q_vision[static_cast<std::size_t>(target_pos)] == 3);
  }
}

TEST_CASE("run_query stages reproduce from recorded inputs") {
  auto s = load_scenario("golden");
  const auto trace = run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config());

  const auto modality = aggregate(trace.quads);
  CHECK(modality.s_text == trace.modality.s_text);
  CHECK(modality.s_vision == trace.modality.s_vision);

  const auto fused = rrf_fuse(modality, 60.0);
  CHECK(fused.order == trace.fused.order);
  CHECK(fused.rrf_scores == trace.fused.rrf_scores);

  const auto again = run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config());
  CHECK(again.top_k_ids == trace.top_k_ids);
  CHECK(again.full_ranking == trace.full_ranking);
  CHECK(again.fine.final_scores == trace.fine.final_scores);
}

TEST_CASE("k_prime = N equals the select-bypass run") {
  auto s = load_scenario("golden");
  PipelineConfig cfg = golden_config();
  cfg.k_prime = 12;

  const auto full = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);
  RunOptions bypass;
  bypass.bypass_select = true;
  const auto bypassed = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg, bypass);
  CHECK(full.top_k_ids == bypassed.top_k_ids);
  CHECK(full.full_ranking == bypassed.full_ranking);
  CHECK(full.fine.final_scores == bypassed.fine.final_scores);
}

TEST_CASE("k_prime = k re-orders exactly the coarse top-k set") {
  auto s = load_scenario("golden");
  PipelineConfig cfg = golden_config();
  cfg.k = 6;
  cfg.k_prime = 6;

  const auto trace = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);
  REQUIRE(trace.top_k_ids.size() == 6);
  std::multiset<std::string> output_set(trace.top_k_ids.begin(), trace.top_k_ids.end());
  std::multiset<std::string> coarse_set(trace.shortlist_ids.begin(), trace.shortlist_ids.end());
  CHECK(output_set == coarse_set);
}

TEST_CASE("backend call budget matches the per-query formula") {
  auto dir = make_temp_dir("xr_pipe");
  // Catalog of three; the query reference lives outside the catalog.
  ScriptBuilder sb;
  for (int i = 0; i < 3; ++i) {
    const std::string id = "m" + std::to_string(i);
    std::vector<double> basis(4, 0.0);
    basis[static_cast<std::size_t>(i)] = 1.0;
    sb.chat(AgentKind::caption, {id}, "member caption " + std::to_string(i));
    sb.embed_image(id, basis);
    sb.embed_text("member caption " + std::to_string(i), basis);
  }
  sb.chat(AgentKind::caption, {"outside"}, "external reference caption");
  sb.chat(AgentKind::text_imagination, {"budget query text", "external reference caption"},
          "one edit\n---\nbudget ct");
  sb.chat(AgentKind::vision_imagination, {"budget query text", "outside"},
          "flag: present\n---\nbudget cv");
  sb.embed_text("budget ct", {1.0, 0.2, 0.1, 0.0});
  sb.embed_text("budget cv", {0.9, 0.3, 0.2, 0.0});
  sb.chat(AgentKind::question_gen, {"budget query text", "one edit", "flag=present", "2"},
          "b1 :: true\nb2 :: false");
  for (int cand = 0; cand < 3; ++cand) {
    const std::string id = "m" + std::to_string(cand);
    const std::string cap = "member caption " + std::to_string(cand);
    for (const std::string q : {"b1", "b2"}) {
      sb.chat(AgentKind::text_verifier, {cap, q}, "true");
      sb.chat(AgentKind::vision_verifier, {q, id}, "true");
    }
  }
  auto rig = make_rig(sb.write(dir / "s.jsonl"));
  Catalog cat = build_catalog({{"m0", "u"}, {"m1", "u"}, {"m2", "u"}}, *rig.service);

  PipelineConfig cfg;
  cfg.k = 2;
  cfg.k_prime = 3;
  cfg.n_questions = 2;

  const auto calls_before = rig.backend->calls();
  Query q = make_query("budget", {"outside", "file://outside"}, "budget query text");
  run_query(q, cat, *rig.service, cfg);
  // 2 imagination + 1 reference caption + 2 query embeddings + 1 question
  // generation + 2 * k' * n_questions verification cells.
  CHECK(rig.backend->calls() - calls_before == 2 + 1 + 2 + 1 + 2 * 3 * 2);

  // A warm second pass costs nothing.
  run_query(q, cat, *rig.service, cfg);
  CHECK(rig.backend->calls() - calls_before == 18);
}

TEST_CASE("catalog insertion order does not change the retrieved set") {
  auto s = load_scenario("golden");
  const auto base = run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config());

  auto reversed_images = s.manifest.images;
  std::reverse(reversed_images.begin(), reversed_images.end());
  Catalog reversed_cat = build_catalog(reversed_images, *s.rig.service);
  const auto mq = s.manifest.queries[0];
  Query q = make_query(mq.id, {mq.ref_id, "images/" + mq.ref_id + ".png"}, mq.text);
  const auto flipped = run_query(q, reversed_cat, *s.rig.service, golden_config());

  CHECK(base.top_k_ids == flipped.top_k_ids);  // scores are all distinct
  CHECK(base.full_ranking == flipped.full_ranking);
}

TEST_CASE("golden benchmark reaches perfect recall and is reproducible") {
  auto dir = make_temp_dir("xr_pipe");
  auto s = load_scenario("golden");
  BenchmarkOptions opts;
  opts.run_dir = (dir / "run1").string();
  opts.trace_candidates = true;
  const auto report = run_benchmark(s.manifest, s.catalog, *s.rig.service, golden_config(), opts);

  CHECK(report.metrics.at("R@1") == doctest::Approx(1.0));
  CHECK(report.metrics.at("R@5") == doctest::Approx(1.0));
  CHECK(report.metrics.at("R_subset@1") == doctest::Approx(1.0));
  CHECK(report.metadata.at("n_failed") == 0);
  for (const auto& row : report.per_query) {
    CHECK(row.status == "ok");
    CHECK(row.best_target_rank == 1);
  }

  // Identical second run: same metrics, byte-identical traces sans timings.
  auto s2 = load_scenario("golden");
  BenchmarkOptions opts2 = opts;
  opts2.run_dir = (dir / "run2").string();
  const auto report2 =
      run_benchmark(s2.manifest, s2.catalog, *s2.rig.service, golden_config(), opts2);
  CHECK(report2.metrics == report.metrics);
  for (const auto& q : s.manifest.queries) {
    const auto t1 = trace_without_timings(dir / "run1" / "traces" / (q.id + ".jsonl"));
    const auto t2 = trace_without_timings(dir / "run2" / "traces" / (q.id + ".jsonl"));
    CHECK(t1 == t2);
    CHECK(!t1.empty());
  }
  CHECK(fs::exists(dir / "run1" / "run.json"));
}

TEST_CASE("distractor scenario demotes the target that fails one question") {
  auto s = load_scenario("distractor");
  PipelineConfig cfg = golden_config();
  const auto trace = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);

  // g05 answers all six cells correctly; the target g03 misses one.
  CHECK(trace.top_k_ids[0] == "g05");
  CHECK(trace.top_k_ids[1] == "g03");

  const auto report = run_benchmark(s.manifest, s.catalog, *s.rig.service, cfg, {});
  // Planted hits across the three queries at k=1: {0, 1, 1}.
  CHECK(report.metrics.at("R@1") == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("failed queries are isolated and counted") {
  auto dir = make_temp_dir("xr_pipe");
  auto s = load_scenario("golden");
  Manifest with_bad = s.manifest;
  with_bad.queries.push_back({"qbad", "g01", "totally unscripted request", {"g02"}, {}});

  BenchmarkOptions opts;
  opts.fail_threshold = 0.5;
  const auto report =
      run_benchmark(with_bad, s.catalog, *s.rig.service, golden_config(), opts);
  CHECK(report.metadata.at("n_failed") == 1);
  CHECK(report.metrics.at("R@1") == doctest::Approx(1.0));  // over the three sound queries
  CHECK(report.per_query.back().status != "ok");

  BenchmarkOptions strict;
  strict.fail_threshold = 0.10;
  CHECK_THROWS_AS(run_benchmark(with_bad, s.catalog, *s.rig.service, golden_config(), strict),
                  BackendError);
}

TEST_CASE("query-parallel benchmark matches the sequential one") {
  auto s = load_scenario("golden");
  const auto sequential = run_benchmark(s.manifest, s.catalog, *s.rig.service, golden_config(), {});
  BenchmarkOptions par;
  par.query_parallelism = 4;
  auto s2 = load_scenario("golden");
  const auto parallel = run_benchmark(s2.manifest, s2.catalog, *s2.rig.service, golden_config(), par);
  CHECK(sequential.metrics == parallel.metrics);
}

TEST_CASE("disabling every modality is rejected") {
  auto s = load_scenario("golden");
  RunOptions options;
  options.switches = {true, true, true, true};
  CHECK_THROWS_AS(run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config(), options),
                  ConfigError);
  options.switches = {true, true, false, false};
  CHECK_THROWS_AS(run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config(), options),
                  ConfigError);
  CHECK_THROWS_AS(
      make_ablation_variants(golden_config(), {true, true, true, true}, {}, {}, {}, {}),
      ConfigError);
}

TEST_CASE("similarity-only ablation keeps the coarse order") {
  auto s = load_scenario("golden");
  RunOptions options;
  options.switches.disable_text_q = true;
  options.switches.disable_vision_q = true;
  const auto trace =
      run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config(), options);
  CHECK(trace.question_set.size() == 0);
  CHECK(trace.top_k_ids ==
        std::vector<std::string>(trace.shortlist_ids.begin(), trace.shortlist_ids.begin() + 5));
}

TEST_CASE("adding the text similarity signal never hurts the planted target") {
  auto s = load_scenario("golden");
  RunOptions vision_only;
  vision_only.switches.disable_text_sim = true;
  const auto without_text =
      run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config(), vision_only);
  const auto with_text = run_query(query_of(s, 0), s.catalog, *s.rig.service, golden_config());
  const std::string target = s.manifest.queries[0].targets[0];
  CHECK(without_text.top_k_ids[0] == target);
  CHECK(with_text.top_k_ids[0] == target);
}

TEST_CASE("lambda sweep produces the three hand-computed orderings") {
  auto s = load_scenario("lambda");
  PipelineConfig cfg;
  cfg.k = 3;
  cfg.k_prime = 3;
  cfg.n_questions = 3;

  cfg.lambda = 1.0;
  auto text_only = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);
  CHECK(text_only.top_k_ids == std::vector<std::string>{"L0", "L1", "L2"});

  cfg.lambda = 0.0;
  auto vision_only = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);
  CHECK(vision_only.top_k_ids == std::vector<std::string>{"L2", "L1", "L0"});

  cfg.lambda = 0.15;
  auto fused = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);
  CHECK(fused.top_k_ids == std::vector<std::string>{"L1", "L2", "L0"});
}

TEST_CASE("ablation grid runs labeled variants") {
  auto s = load_scenario("lambda");
  PipelineConfig cfg;
  cfg.k = 3;
  cfg.k_prime = 3;

  const auto grid = make_ablation_variants(cfg, {}, {0.0, 0.15, 1.0}, {}, {}, {});
  REQUIRE(grid.size() == 3);
  CHECK(grid[0].label.find("lambda=") != std::string::npos);

  const auto reports = ablate(s.manifest, s.catalog, *s.rig.service, grid, {});
  REQUIRE(reports.size() == 3);
  // Target L2 is top-1 only under the vision-leaning settings.
  CHECK(reports[0].second.metrics.at("R@1") == doctest::Approx(1.0));   // lambda = 0
  CHECK(reports[1].second.metrics.at("R@1") == doctest::Approx(0.0));   // lambda = 0.15
  CHECK(reports[2].second.metrics.at("R@1") == doctest::Approx(0.0));   // lambda = 1
  for (const auto& [label, report] : reports)
    CHECK(report.metadata.at("label").get<std::string>() == label);
}

TEST_CASE("sweep variant construction covers every axis") {
  PipelineConfig cfg;
  const auto grid = make_ablation_variants(cfg, {}, {0.1}, {10.0, 60.0}, {20}, {1, 3});
  CHECK(grid.size() == 6);
  const auto k_variant = grid[3];
  CHECK(k_variant.cfg.k_prime == 20);
  CHECK(k_variant.cfg.k <= k_variant.cfg.k_prime);
}

TEST_CASE("conjunctive verify mode scores the modality intersection") {
  auto s = load_scenario("distractor");
  PipelineConfig cfg = golden_config();
  cfg.verify_mode = VerifyMode::conjunctive;
  const auto trace = run_query(query_of(s, 0), s.catalog, *s.rig.service, cfg);
  // Target g03 fails one text cell, so only two questions pass both
  // modalities; g05 passes all three.
  const auto pos_of = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(trace.shortlist_ids.begin(),
                                              trace.shortlist_ids.end(), id) -
                                    trace.shortlist_ids.begin());
  };
  CHECK(trace.fine.final_scores[pos_of("g05")] > trace.fine.final_scores[pos_of("g03")]);
  CHECK(trace.top_k_ids[0] == "g05");
}
