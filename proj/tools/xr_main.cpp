#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xr/agents.hpp"
#include "xr/datasets.hpp"
#include "xr/domain.hpp"
#include "xr/errors.hpp"
#include "xr/http_backend.hpp"
#include "xr/pipeline.hpp"
#include "xr/stats.hpp"

namespace fs = std::filesystem;
using namespace xr;

namespace {

struct BackendFlags {
  std::string mock_script;
  std::string cache_path;
  std::string chat_model;
  std::string embed_model;
  std::string prompt_dir;
  double mock_noise = 0.0;
  std::uint64_t seed = 0;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& flags) {
  cmd->add_option("--mock", flags.mock_script,
                  "Mock scenario file; omits the network entirely");
  cmd->add_option("--cache", flags.cache_path, "Persistent response cache file");
  cmd->add_option("--chat-model", flags.chat_model, "Model name sent to the chat endpoint");
  cmd->add_option("--embed-model", flags.embed_model, "Model name sent to the embedding endpoint");
  cmd->add_option("--prompts", flags.prompt_dir, "Directory of prompt template overrides");
  cmd->add_option("--mock-noise", flags.mock_noise,
                  "Gaussian sigma applied to scripted embeddings (mock only)");
  cmd->add_option("--seed", flags.seed, "Run seed, recorded in reports and noise keys");
}

struct ConfigFlags {
  std::string config_path;
  PipelineConfig values;
  std::string fusion = "rrf";
  std::string verify_mode = "independent";
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--lambda", flags.values.lambda, "Similarity fusion weight")
      ->capture_default_str();
  cmd->add_option("--z", flags.values.z, "Rank fusion smoothing constant")->capture_default_str();
  cmd->add_option("--k", flags.values.k, "Final retrieved set size")->capture_default_str();
  cmd->add_option("--k-prime", flags.values.k_prime, "Coarse shortlist size")
      ->capture_default_str();
  cmd->add_option("--n-questions", flags.values.n_questions, "Verification questions per query")
      ->capture_default_str();
  cmd->add_option("--temperature", flags.values.temperature, "Backend decode temperature")
      ->capture_default_str();
  cmd->add_option("--top-p", flags.values.top_p, "Backend nucleus sampling parameter")
      ->capture_default_str();
  cmd->add_option("--max-inflight", flags.values.max_inflight,
                  "Concurrent backend requests per run")
      ->capture_default_str();
  cmd->add_option("--fusion", flags.fusion, "Rank fusion mode: rrf or sum")
      ->capture_default_str();
  cmd->add_option("--verify-mode", flags.verify_mode,
                  "Verification scoring: independent or conjunctive")
      ->capture_default_str();
}

PipelineConfig resolve_config(const CLI::App* cmd, const ConfigFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config_path.empty()) cfg = load_config_file(flags.config_path);
  if (cmd->count("--lambda")) cfg.lambda = flags.values.lambda;
  if (cmd->count("--z")) cfg.z = flags.values.z;
  if (cmd->count("--k")) cfg.k = flags.values.k;
  if (cmd->count("--k-prime")) cfg.k_prime = flags.values.k_prime;
  if (cmd->count("--n-questions")) cfg.n_questions = flags.values.n_questions;
  if (cmd->count("--temperature")) cfg.temperature = flags.values.temperature;
  if (cmd->count("--top-p")) cfg.top_p = flags.values.top_p;
  if (cmd->count("--max-inflight")) cfg.max_inflight = flags.values.max_inflight;
  if (cmd->count("--fusion")) cfg.fusion = parse_fusion_mode(flags.fusion);
  if (cmd->count("--verify-mode")) cfg.verify_mode = parse_verify_mode(flags.verify_mode);
  return validate_config(cfg);
}

struct Runtime {
  std::shared_ptr<Backend> backend;
  std::shared_ptr<ResponseCache> cache;
  std::unique_ptr<AgentService> service;
};

Runtime make_runtime(const BackendFlags& flags, const PipelineConfig& cfg) {
  Runtime rt;
  if (!flags.mock_script.empty()) {
    auto mock = std::make_shared<MockBackend>(flags.mock_script);
    if (flags.mock_noise != 0.0) mock->set_noise(flags.mock_noise, flags.seed);
    rt.backend = mock;
  } else {
    HttpBackendOptions opts = HttpBackendOptions::from_env();
    if (!flags.chat_model.empty()) opts.chat_model = flags.chat_model;
    if (!flags.embed_model.empty()) opts.embed_model = flags.embed_model;
    if (!flags.prompt_dir.empty()) opts.prompt_dir = flags.prompt_dir;
    opts.max_inflight = cfg.max_inflight;
    rt.backend = std::make_shared<HttpBackend>(std::move(opts));
  }
  rt.cache = flags.cache_path.empty() ? std::make_shared<ResponseCache>()
                                      : std::make_shared<ResponseCache>(flags.cache_path);
  rt.service = std::make_unique<AgentService>(
      rt.backend, DecodeParams{cfg.temperature, cfg.top_p}, rt.cache);
  return rt;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    const std::string tok = csv.substr(start, comma == std::string::npos ? std::string::npos
                                                                         : comma - start);
    if (!tok.empty()) out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  for (double v : parse_doubles(csv)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

void emit_report(const EvalReport& report, const std::string& report_path) {
  if (report_path.empty()) {
    std::cout << report.to_table();
    return;
  }
  save_report(report, report_path);
  const fs::path table_path = fs::path(report_path).replace_extension(".txt");
  std::ofstream table(table_path);
  table << report.to_table();
  std::cerr << "[xr] report written to " << report_path << "\n";
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int cmd_ingest(const std::string& dataset, const std::string& raw, const std::string& out) {
  adapt_upstream(dataset_kind_from_string(dataset), raw, out);
  const Manifest m = load_manifest(out);
  std::cerr << "[xr] " << out << ": " << m.images.size() << " images, " << m.queries.size()
            << " queries\n";
  return 0;
}

int cmd_embed(const std::string& manifest_path, const std::string& catalog_path,
              const BackendFlags& backend_flags, const PipelineConfig& cfg) {
  const Manifest manifest = load_manifest(manifest_path);
  Runtime rt = make_runtime(backend_flags, cfg);
  const Catalog catalog = build_catalog(manifest.images, *rt.service);
  save_catalog(catalog, catalog_path);
  std::cerr << "[xr] catalog " << catalog_path << ": " << catalog.size() << " entries, dim "
            << catalog.dim << ", " << rt.backend->calls() << " backend calls\n";
  return 0;
}

int cmd_run(const std::string& manifest_path, const std::string& catalog_path,
            const BackendFlags& backend_flags, const PipelineConfig& cfg,
            const BenchmarkOptions& options, const std::string& report_path) {
  const Manifest manifest = load_manifest(manifest_path);
  const Catalog catalog = load_catalog(catalog_path);
  Runtime rt = make_runtime(backend_flags, cfg);
  const EvalReport report = run_benchmark(manifest, catalog, *rt.service, cfg, options);
  emit_report(report, report_path);
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& manifest_path,
             const std::string& report_path) {
  const Manifest manifest = load_manifest(manifest_path);
  std::map<std::string, std::vector<std::string>> rankings;
  const fs::path traces = fs::path(run_dir) / "traces";
  if (!fs::is_directory(traces)) throw IoError("no traces directory under " + run_dir);
  for (const auto& entry : fs::directory_iterator(traces)) {
    if (entry.path().extension() != ".jsonl") continue;
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.find("\"kind\":\"result\"") == std::string::npos) continue;
      const auto rec = nlohmann::json::parse(line);
      rankings[rec.at("query_id").get<std::string>()] =
          rec.at("full_ranking").get<std::vector<std::string>>();
    }
  }
  if (rankings.empty()) throw InputError("no result records found under " + run_dir);
  EvalReport report = evaluate_rankings(manifest, rankings);
  report.metadata["run_dir"] = run_dir;
  emit_report(report, report_path);
  return 0;
}

int cmd_ablate_series(const std::string& series_dir, const std::string& metric,
                      std::string against) {
  const auto series = load_series_dir(series_dir);
  if (against.empty()) {
    // Default comparison base: the series with the highest mean.
    double best = -1.0;
    for (const auto& s : series) {
      const double mean = summarize(s).at(metric).mean;
      if (mean > best) {
        best = mean;
        against = s.label;
      }
    }
  }
  std::cout << comparison_table(series, against, metric);
  return 0;
}

int cmd_ablate(const std::string& manifest_path, const std::string& catalog_path,
               const BackendFlags& backend_flags, const PipelineConfig& cfg,
               const AblationSwitches& switches, const std::string& out_dir,
               const std::vector<double>& lambda_sweep, const std::vector<double>& z_sweep,
               const std::vector<std::size_t>& kp_sweep, const std::vector<std::size_t>& nq_sweep,
               const BenchmarkOptions& base_options) {
  const Manifest manifest = load_manifest(manifest_path);
  const Catalog catalog = load_catalog(catalog_path);
  Runtime rt = make_runtime(backend_flags, cfg);
  const auto grid = make_ablation_variants(cfg, switches, lambda_sweep, z_sweep, kp_sweep, nq_sweep);
  BenchmarkOptions options = base_options;
  options.run_dir = out_dir;
  const auto reports = ablate(manifest, catalog, *rt.service, grid, options);
  fs::create_directories(out_dir);
  for (const auto& [label, report] : reports) {
    save_report(report, (fs::path(out_dir) / ("report_" + label + ".json")).string());
    std::cout << "== " << label << "\n" << report.to_table() << "\n";
  }
  return 0;
}

int cmd_trace_dump(const std::string& run_dir, const std::string& query_id, bool full) {
  const fs::path traces = fs::path(run_dir) / "traces";
  if (!fs::is_directory(traces)) throw IoError("no traces directory under " + run_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(traces))
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    if (!query_id.empty() && path.stem() != query_id) continue;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      const auto rec = nlohmann::json::parse(line);
      const std::string kind = rec.value("kind", "");
      if (kind == "query") {
        std::cout << "query " << rec.at("query_id").get<std::string>() << "\n";
      } else if (kind == "imagination") {
        std::cout << "  c_t: " << rec.at("c_t").get<std::string>() << "\n"
                  << "  c_v: " << rec.at("c_v").get<std::string>() << "\n";
      } else if (kind == "question_set") {
        const auto& qs = rec.at("questions");
        const auto& exp = rec.at("expected");
        for (std::size_t i = 0; i < qs.size(); ++i)
          std::cout << "  q" << i << ": " << qs[i].get<std::string>() << " ["
                    << (exp[i].get<bool>() ? "true" : "false") << "]\n";
      } else if (kind == "result") {
        std::cout << "  top_k:";
        for (const auto& id : rec.at("top_k")) std::cout << " " << id.get<std::string>();
        std::cout << "\n";
      } else if (full && (kind == "coarse" || kind == "fine")) {
        std::cout << "  " << line << "\n";
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image retrieval pipeline: imagination, coarse filtering, fine filtering"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert upstream benchmark annotations");
  std::string ingest_dataset, ingest_raw, ingest_out;
  ingest->add_option("--dataset", ingest_dataset,
                     "cirr | circo | fashioniq_shirt | fashioniq_dress | fashioniq_toptee")
      ->required();
  ingest->add_option("--raw", ingest_raw, "Upstream annotation directory")->required();
  ingest->add_option("--out", ingest_out, "Output manifest path")->required();

  // embed
  auto* embed = app.add_subcommand("embed", "Caption and embed a manifest's images");
  std::string embed_manifest, embed_catalog;
  BackendFlags embed_backend;
  ConfigFlags embed_cfg;
  embed->add_option("--manifest", embed_manifest)->required();
  embed->add_option("--catalog", embed_catalog, "Output catalog file")->required();
  add_backend_flags(embed, embed_backend);
  add_config_flags(embed, embed_cfg);

  // run
  auto* run = app.add_subcommand("run", "Run a benchmark end to end");
  std::string run_manifest, run_catalog, run_out, run_report, run_label = "xr";
  bool run_trace = false, run_bypass = false;
  double run_fail_threshold = 0.10;
  std::size_t run_parallelism = 1;
  BackendFlags run_backend;
  ConfigFlags run_cfg;
  AblationSwitches run_switches;
  run->add_option("--manifest", run_manifest)->required();
  run->add_option("--catalog", run_catalog)->required();
  run->add_option("--out", run_out, "Run directory for traces and run.json");
  run->add_option("--report-path", run_report, "Report JSON path (stdout table when omitted)");
  run->add_option("--label", run_label, "Run label recorded in the report")
      ->capture_default_str();
  run->add_flag("--trace", run_trace, "Write per-candidate coarse/fine trace records");
  run->add_flag("--bypass-select", run_bypass, "Feed all candidates into fine filtering");
  run->add_option("--fail-threshold", run_fail_threshold,
                  "Abort when more than this fraction of queries fail")
      ->capture_default_str();
  run->add_option("--query-parallelism", run_parallelism, "Concurrent queries")
      ->capture_default_str();
  run->add_flag("--disable-text-sim", run_switches.disable_text_sim);
  run->add_flag("--disable-vision-sim", run_switches.disable_vision_sim);
  run->add_flag("--disable-text-q", run_switches.disable_text_q);
  run->add_flag("--disable-vision-q", run_switches.disable_vision_q);
  add_backend_flags(run, run_backend);
  add_config_flags(run, run_cfg);

  // eval
  auto* eval = app.add_subcommand("eval", "Recompute metrics from a run's traces");
  std::string eval_run, eval_manifest, eval_report;
  eval->add_option("--run", eval_run, "Run directory")->required();
  eval->add_option("--manifest", eval_manifest)->required();
  eval->add_option("--report-path", eval_report);

  // ablate
  auto* abl = app.add_subcommand("ablate", "Ablation grid over one benchmark, or series stats");
  std::string abl_manifest, abl_catalog, abl_out, abl_series, abl_metric = "R@1", abl_against;
  std::string abl_lambda, abl_z, abl_kp, abl_nq;
  BackendFlags abl_backend;
  ConfigFlags abl_cfg;
  AblationSwitches abl_switches;
  double abl_fail_threshold = 0.10;
  abl->add_option("--manifest", abl_manifest);
  abl->add_option("--catalog", abl_catalog);
  abl->add_option("--out", abl_out, "Directory for per-variant reports");
  abl->add_option("--series", abl_series, "Directory of report JSON files to compare");
  abl->add_option("--metric", abl_metric, "Metric key for --series comparisons")
      ->capture_default_str();
  abl->add_option("--against", abl_against, "Baseline label for --series (default: best mean)");
  abl->add_option("--sweep-lambda", abl_lambda, "Comma-separated lambda values");
  abl->add_option("--sweep-z", abl_z, "Comma-separated z values");
  abl->add_option("--sweep-k-prime", abl_kp, "Comma-separated shortlist sizes");
  abl->add_option("--sweep-n-questions", abl_nq, "Comma-separated question counts");
  abl->add_option("--fail-threshold", abl_fail_threshold)->capture_default_str();
  abl->add_flag("--disable-text-sim", abl_switches.disable_text_sim);
  abl->add_flag("--disable-vision-sim", abl_switches.disable_vision_sim);
  abl->add_flag("--disable-text-q", abl_switches.disable_text_q);
  abl->add_flag("--disable-vision-q", abl_switches.disable_vision_q);
  add_backend_flags(abl, abl_backend);
  add_config_flags(abl, abl_cfg);

  // trace-dump
  auto* dump = app.add_subcommand("trace-dump", "Human-readable view of run traces");
  std::string dump_run, dump_query;
  bool dump_full = false;
  dump->add_option("--run", dump_run, "Run directory")->required();
  dump->add_option("--query", dump_query, "Restrict to one query id");
  dump->add_flag("--full", dump_full, "Include per-candidate records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_dataset, ingest_raw, ingest_out);
    if (*embed) {
      const PipelineConfig cfg = resolve_config(embed, embed_cfg);
      return cmd_embed(embed_manifest, embed_catalog, embed_backend, cfg);
    }
    if (*run) {
      const PipelineConfig cfg = resolve_config(run, run_cfg);
      BenchmarkOptions options;
      options.run.switches = run_switches;
      options.run.bypass_select = run_bypass;
      options.run_dir = run_out;
      options.trace_candidates = run_trace;
      options.fail_threshold = run_fail_threshold;
      options.label = run_label;
      options.seed = run_backend.seed;
      options.query_parallelism = run_parallelism;
      return cmd_run(run_manifest, run_catalog, run_backend, cfg, options, run_report);
    }
    if (*eval) return cmd_eval(eval_run, eval_manifest, eval_report);
    if (*abl) {
      if (!abl_series.empty()) return cmd_ablate_series(abl_series, abl_metric, abl_against);
      if (abl_manifest.empty() || abl_catalog.empty() || abl_out.empty())
        throw ConfigError("ablate needs --manifest, --catalog and --out (or --series)");
      const PipelineConfig cfg = resolve_config(abl, abl_cfg);
      BenchmarkOptions options;
      options.fail_threshold = abl_fail_threshold;
      options.seed = abl_backend.seed;
      return cmd_ablate(abl_manifest, abl_catalog, abl_backend, cfg, abl_switches, abl_out,
                        parse_doubles(abl_lambda), parse_doubles(abl_z), parse_sizes(abl_kp),
                        parse_sizes(abl_nq), options);
    }
    if (*dump) return cmd_trace_dump(dump_run, dump_query, dump_full);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
