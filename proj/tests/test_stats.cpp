#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "xr/errors.hpp"
#include "xr/stats.hpp"

using namespace xr;
using xr::test::make_temp_dir;

namespace {

EvalReport run_with(double value, const std::string& label, std::uint64_t seed) {
  EvalReport r;
  r.metrics = {{"R@50", value}};
  r.metadata = {{"label", label}, {"seed", seed}};
  return r;
}

RunSeries series_from(const std::string& label, const std::vector<double>& values) {
  RunSeries s;
  s.label = label;
  for (std::size_t i = 0; i < values.size(); ++i)
    s.runs.push_back(run_with(values[i], label, i));
  return s;
}

}  // namespace

TEST_CASE("summarize computes sample statistics") {
  const auto s = series_from("m", {57.1, 57.2, 57.2});
  const auto stats = summarize(s).at("R@50");
  CHECK(stats.mean == doctest::Approx(57.1667).epsilon(1e-4));
  CHECK(stats.stddev == doctest::Approx(0.0577).epsilon(1e-2));
}

TEST_CASE("identical runs have zero spread") {
  const auto stats = summarize(series_from("m", {42.0, 42.0, 42.0})).at("R@50");
  CHECK(stats.mean == doctest::Approx(42.0));
  CHECK(stats.stddev == 0.0);
}

TEST_CASE("a single run is too few") {
  CHECK_THROWS_AS(summarize(series_from("m", {42.0})), TooFewRuns);
}

TEST_CASE("summarize is permutation invariant") {
  std::mt19937_64 rng(113);
  std::vector<double> values{55.0, 55.5, 56.1, 54.8, 55.9, 55.2};
  const auto base = summarize(series_from("m", values)).at("R@50");
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(values.begin(), values.end(), rng);
    const auto shuffled = summarize(series_from("m", values)).at("R@50");
    CHECK(shuffled.mean == doctest::Approx(base.mean).epsilon(1e-12));
    CHECK(shuffled.stddev == doctest::Approx(base.stddev).epsilon(1e-12));
  }
}

TEST_CASE("uniform dominance over ten pairs is the classic 1/1024") {
  std::vector<double> ours, base;
  for (int i = 0; i < 10; ++i) {
    base.push_back(50.0 + 0.05 * i);
    ours.push_back(base.back() + 0.5 + 0.01 * i);
  }
  const auto rec = compare(series_from("ours", ours), series_from("base", base), "R@50");
  CHECK(rec.wilcoxon_p == doctest::Approx(1.0 / 1024.0).epsilon(1e-12));
  CHECK(rec.reject_wilcoxon);
  CHECK(rec.reject_t);
}

TEST_CASE("comparing a series against itself yields no evidence") {
  const auto s = series_from("same", {42.0, 42.5, 41.8, 42.1});
  const auto rec = compare(s, s, "R@50");
  CHECK(rec.degenerate);
  CHECK(!rec.reject_t);
  CHECK(!rec.reject_wilcoxon);
}

TEST_CASE("an appendix-scale gap rejects the null") {
  std::mt19937_64 rng(127);
  std::normal_distribution<double> n1(0.0, 0.07), n2(0.0, 0.23);
  std::vector<double> ours(10), base(10);
  for (int i = 0; i < 10; ++i) {
    ours[i] = 57.16 + n1(rng);
    base[i] = 49.06 + n2(rng);
  }
  const auto rec = compare(series_from("ours", ours), series_from("cirevl", base), "R@50");
  CHECK(rec.reject_t);
  CHECK(rec.reject_wilcoxon);
  CHECK(rec.t_p < 1e-6);
}

TEST_CASE("unpaired series are rejected") {
  CHECK_THROWS_AS(compare(series_from("a", {1.0, 2.0, 3.0}), series_from("b", {1.0, 2.0}), "R@50"),
                  UnpairedRuns);
  CHECK_THROWS_AS(compare(series_from("a", {1.0}), series_from("b", {1.0}), "R@50"), TooFewRuns);
  CHECK_THROWS_AS(compare(series_from("a", {1.0, 2.0}), series_from("b", {1.0, 2.0}), "mystery"),
                  InputError);
}

TEST_CASE("series load from a report directory grouped by label") {
  auto dir = make_temp_dir("xr_stats");
  int file_idx = 0;
  for (const auto& label : {"ours", "baseline"}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      // Unequal per-seed jitter keeps the paired differences non-degenerate.
      const double v = (label == std::string("ours") ? 57.0 + 0.10 * double(seed)
                                                     : 49.0 + 0.13 * double(seed));
      save_report(run_with(v, label, seed),
                  (dir / ("report_" + std::to_string(file_idx++) + ".json")).string());
    }
  }
  const auto series = load_series_dir(dir.string());
  REQUIRE(series.size() == 2);
  // Alphabetical grouping: baseline first.
  CHECK(series[0].label == "baseline");
  CHECK(series[0].runs.size() == 6);
  CHECK(series[1].label == "ours");

  const auto table = comparison_table(series, "ours", "R@50");
  CHECK(table.find("baseline") != std::string::npos);
  CHECK(table.find("reject") != std::string::npos);
  CHECK_THROWS_AS(comparison_table(series, "absent", "R@50"), InputError);
}
