// Regenerates the mock fixtures under fixtures/. The scenario constants
// below are load-bearing: the golden pipeline tests pin byte-exact traces
// produced from these scripts, so rerun the full test suite after touching
// anything here.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xr/agents.hpp"
#include "xr/domain.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kCatalogSize = 12;
constexpr std::size_t kQuestions = 3;

std::string image_id(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "g%02zu", i);
  return buf;
}

std::string caption_text(std::size_t i) {
  return "a scene featuring object " + std::to_string(i) + " beside a wall";
}

std::vector<double> image_vec(std::size_t i) {
  std::vector<double> v(kCatalogSize, 0.0);
  v[i] = 1.0;
  return v;
}

std::vector<double> caption_vec(std::size_t i) {
  std::vector<double> v(kCatalogSize, 0.0);
  v[i] = 0.9;
  v[(i + 1) % kCatalogSize] = 0.1;
  return v;
}

// Imagination embedding: peak on the planted target, strictly increasing
// floor elsewhere so every candidate score is distinct.
std::vector<double> peaked_vec(std::size_t target, double floor_step,
                               double distractor_peak = 0.0, std::size_t distractor = 0) {
  std::vector<double> v(kCatalogSize, 0.0);
  for (std::size_t j = 0; j < kCatalogSize; ++j) v[j] = floor_step * static_cast<double>(j + 1);
  v[target] = 1.0;
  if (distractor_peak > 0.0) v[distractor] = distractor_peak;
  return v;
}

struct GoldenQuery {
  std::string id;
  std::size_t ref;
  std::size_t target;
  std::string t_m;
  std::vector<std::string> subset;  // empty = none
};

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void chat(xr::AgentKind kind, std::vector<std::string> inputs, const std::string& response) {
    out_ << json{{"kind", xr::to_string(kind)}, {"inputs", inputs}, {"response", response}}.dump()
         << '\n';
  }
  void embed_text(const std::string& text, const std::vector<double>& raw) {
    out_ << json{{"kind", "embed_text"}, {"inputs", {text}}, {"response", json(raw).dump()}}.dump()
         << '\n';
  }
  void embed_image(const std::string& id, const std::vector<double>& raw) {
    out_ << json{{"kind", "embed_image"}, {"inputs", {id}}, {"response", json(raw).dump()}}.dump()
         << '\n';
  }

 private:
  std::ofstream out_;
};

void write_catalog_records(Writer& w) {
  for (std::size_t i = 0; i < kCatalogSize; ++i) {
    w.chat(xr::AgentKind::caption, {image_id(i)}, caption_text(i));
    w.embed_image(image_id(i), image_vec(i));
    w.embed_text(caption_text(i), caption_vec(i));
  }
}

void write_manifest(const fs::path& path, const std::vector<GoldenQuery>& queries) {
  std::ofstream out(path);
  out << json{{"kind", "dataset"}, {"name", "custom"}}.dump() << '\n';
  for (std::size_t i = 0; i < kCatalogSize; ++i) {
    out << json{{"kind", "image"},
                {"id", image_id(i)},
                {"uri", "images/" + image_id(i) + ".png"}}
               .dump()
        << '\n';
  }
  for (const auto& q : queries) {
    json rec{{"kind", "query"},
             {"id", q.id},
             {"ref", image_id(q.ref)},
             {"text", q.t_m},
             {"targets", {image_id(q.target)}}};
    if (!q.subset.empty()) rec["subset"] = q.subset;
    out << rec.dump() << '\n';
  }
}

struct QuestionSpec {
  std::string statement;
  bool expected;
};

std::vector<QuestionSpec> questions_for(const GoldenQuery& q) {
  const std::string t = std::to_string(q.target);
  return {{"The scene centers object " + t, true},
          {"The scene around object " + t + " is empty", false},
          {"Object " + t + " is enlarged", true}};
}

std::string question_reply(const std::vector<QuestionSpec>& qs) {
  std::string reply;
  for (const auto& spec : qs)
    reply += spec.statement + " :: " + (spec.expected ? "true" : "false") + "\n";
  return reply;
}

std::string c_t_text(const GoldenQuery& q) {
  return "an imagined scene centered on object " + std::to_string(q.target);
}
std::string c_v_text(const GoldenQuery& q) {
  return "a photographed scene showing object " + std::to_string(q.target) + " clearly";
}
std::vector<std::string> edits_for(const GoldenQuery& q) {
  const std::string t = std::to_string(q.target);
  return {"recolor object " + t, "enlarge object " + t};
}
std::vector<xr::AttributeFlag> attrs_for(const GoldenQuery& q) {
  return {{"object " + std::to_string(q.target), true}, {"clutter", false}};
}

// Scripts one query end to end. wrong_text_cells marks (candidate, question)
// text-verifier cells that answer the negation of the expected answer;
// correct_candidates answer everything correctly; everyone else is wrong on
// every cell.
void write_query_records(Writer& w, const GoldenQuery& q,
                         const std::vector<std::size_t>& correct_candidates,
                         double floor_step_t, double floor_step_v, double distractor_peak = 0.0,
                         std::size_t distractor = 0,
                         const std::vector<std::pair<std::size_t, std::size_t>>& wrong_text_cells = {}) {
  const auto edits = edits_for(q);
  const auto attrs = attrs_for(q);
  const auto qs = questions_for(q);

  std::string imagine_text_reply;
  for (const auto& e : edits) imagine_text_reply += e + "\n";
  imagine_text_reply += "---\n" + c_t_text(q);
  w.chat(xr::AgentKind::text_imagination, {q.t_m, caption_text(q.ref)}, imagine_text_reply);

  std::string imagine_vision_reply;
  for (const auto& a : attrs)
    imagine_vision_reply += a.attribute + (a.present ? ": present" : ": absent") + "\n";
  imagine_vision_reply += "---\n" + c_v_text(q);
  w.chat(xr::AgentKind::vision_imagination, {q.t_m, image_id(q.ref)}, imagine_vision_reply);

  w.embed_text(c_t_text(q), peaked_vec(q.target, floor_step_t, distractor_peak, distractor));
  w.embed_text(c_v_text(q), peaked_vec(q.target, floor_step_v, distractor_peak, distractor));

  w.chat(xr::AgentKind::question_gen,
         {q.t_m, xr::join_edits(edits), xr::join_attributes(attrs), std::to_string(kQuestions)},
         question_reply(qs));

  for (std::size_t cand = 0; cand < kCatalogSize; ++cand) {
    const bool correct = std::find(correct_candidates.begin(), correct_candidates.end(), cand) !=
                         correct_candidates.end();
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      bool text_verdict = correct ? qs[qi].expected : !qs[qi].expected;
      for (const auto& [wc, wq] : wrong_text_cells)
        if (wc == cand && wq == qi) text_verdict = !qs[qi].expected;
      const bool vision_verdict = correct ? qs[qi].expected : !qs[qi].expected;
      w.chat(xr::AgentKind::text_verifier, {caption_text(cand), qs[qi].statement},
             text_verdict ? "true" : "false");
      w.chat(xr::AgentKind::vision_verifier, {qs[qi].statement, image_id(cand)},
             vision_verdict ? "true" : "false");
    }
  }
}

void make_golden(const fs::path& dir) {
  fs::create_directories(dir);
  const std::vector<GoldenQuery> queries = {
      {"q1", 0, 3, "recolor object three and make it larger",
       {"g01", "g02", "g03", "g05", "g07", "g09"}},
      {"q2", 4, 7, "replace the object with number seven",
       {"g03", "g06", "g07", "g08", "g10", "g11"}},
      {"q3", 8, 11, "move object eleven outdoors", {}},
  };
  write_manifest(dir / "manifest.jsonl", queries);
  Writer w(dir / "mock_script.jsonl");
  write_catalog_records(w);
  for (const auto& q : queries)
    write_query_records(w, q, {q.target}, 0.001, 0.002);
}

void make_distractor(const fs::path& dir) {
  fs::create_directories(dir);
  const std::vector<GoldenQuery> queries = {
      {"qd", 0, 3, "recolor object three and make it larger", {}},
      {"qa", 6, 1, "emphasize object one", {}},
      {"qb", 9, 2, "emphasize object two", {}},
  };
  write_manifest(dir / "manifest.jsonl", queries);
  Writer w(dir / "mock_script.jsonl");
  write_catalog_records(w);
  // qd: candidate g05 is a near-miss in similarity but answers every
  // question correctly, while the target fails one text cell (question 2).
  write_query_records(w, queries[0], {queries[0].target, 5}, 0.001, 0.002, 0.95, 5, {{3, 2}});
  write_query_records(w, queries[1], {queries[1].target}, 0.001, 0.002);
  write_query_records(w, queries[2], {queries[2].target}, 0.001, 0.002);
}

// Three-candidate scenario whose text and vision similarities disagree, used
// by the lambda-sweep tests. All candidates pass every question, so the
// final order follows the normalized fused similarity alone.
void make_lambda(const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  manifest << json{{"kind", "dataset"}, {"name", "custom"}}.dump() << '\n';
  for (int i = 0; i < 3; ++i) {
    manifest << json{{"kind", "image"},
                     {"id", "L" + std::to_string(i)},
                     {"uri", "images/L" + std::to_string(i) + ".png"}}
                    .dump()
             << '\n';
  }
  manifest << json{{"kind", "query"},
                   {"id", "lq"},
                   {"ref", "L0"},
                   {"text", "shift the emphasis"},
                   {"targets", {"L2"}}}
                  .dump()
           << '\n';
  manifest.close();

  Writer w(dir / "mock_script.jsonl");
  for (int i = 0; i < 3; ++i) {
    const std::string id = "L" + std::to_string(i);
    const std::string cap = "lambda caption " + std::to_string(i);
    std::vector<double> basis(4, 0.0);
    basis[static_cast<std::size_t>(i)] = 1.0;
    w.chat(xr::AgentKind::caption, {id}, cap);
    w.embed_image(id, basis);
    w.embed_text(cap, basis);
  }
  // Identical norms so the convex combination keeps hand-computable ratios:
  // text sims ~ (1.0, 0.9, 0.0), vision sims ~ (0.0, 0.55, 0.6).
  w.chat(xr::AgentKind::text_imagination, {"shift the emphasis", "lambda caption 0"},
         "emphasize differently\n---\nlambda target text");
  w.chat(xr::AgentKind::vision_imagination, {"shift the emphasis", "L0"},
         "emphasis: present\n---\nlambda target vision");
  w.embed_text("lambda target text", {1.0, 0.9, 0.0, 0.3});
  w.embed_text("lambda target vision", {0.0, 0.55, 0.6, 1.1124297730643494});

  const std::vector<QuestionSpec> qs = {{"The emphasis moved", true},
                                        {"The scene is unchanged", false},
                                        {"The subject is visible", true}};
  w.chat(xr::AgentKind::question_gen,
         {"shift the emphasis", "emphasize differently", "emphasis=present", "3"},
         question_reply(qs));
  for (int cand = 0; cand < 3; ++cand) {
    const std::string id = "L" + std::to_string(cand);
    const std::string cap = "lambda caption " + std::to_string(cand);
    for (const auto& spec : qs) {
      w.chat(xr::AgentKind::text_verifier, {cap, spec.statement},
             spec.expected ? "true" : "false");
      w.chat(xr::AgentKind::vision_verifier, {spec.statement, id},
             spec.expected ? "true" : "false");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? argv[1] : "fixtures";
  make_golden(out / "golden");
  make_distractor(out / "distractor");
  make_lambda(out / "lambda");
  std::cout << "fixtures written under " << out << "\n";
  return 0;
}
