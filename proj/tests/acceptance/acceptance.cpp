// One PASS/FAIL line per acceptance criterion. Exit status 1 when any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "scimine/cli.hpp"
#include "scimine/error.hpp"
#include "scimine/evaluation.hpp"
#include "scimine/latex_corpus.hpp"
#include "scimine/llm_bridge.hpp"
#include "scimine/pipeline.hpp"
#include "scimine/serialize.hpp"
#include "scimine/synth.hpp"
#include "scimine/table_extract.hpp"
#include "scimine/text_extract.hpp"
#include "test_support.hpp"

using namespace scimine;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = "failed: " + what;
    ok = ok && cond;
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << v;
  return o.str();
}

// ---------------------------------------------------------------------------
// shared generators

TableGrid random_grid(std::mt19937_64& rng) {
  size_t y = 1 + rng() % 6, z = 1 + rng() % 6;
  std::vector<std::vector<std::string>> rows(y, std::vector<std::string>(z));
  for (auto& r : rows)
    for (auto& c : r) c = rng() % 5 == 0 ? "" : "c" + std::to_string(rng() % 100);
  return TableGrid::from_rows("cap", rows);
}

Entity table_entity(const TableGrid& g, size_t i, size_t j, EntityType t, std::string id = "") {
  Entity e;
  e.id = std::move(id);
  e.anchor = TableAnchor{0, i, j, 0, g.at(i, j).size()};
  e.type = t;
  e.surface = g.text(i, j);
  return e;
}

Entity text_entity(std::string surface, EntityType t) {
  Entity e;
  e.anchor = TextAnchor{0, 0, text::split_ws(surface).size()};
  e.type = t;
  e.surface = std::move(surface);
  return e;
}

struct LatexFixture {
  std::string name;
  std::string tex;
  Json expected;
};

std::vector<LatexFixture> latex_fixtures() {
  std::vector<LatexFixture> out;
  for (const auto& e : fs::directory_iterator(testsupport::fixtures() + "/latex")) {
    if (e.path().extension() != ".tex") continue;
    auto exp = e.path();
    exp.replace_extension(".expected.json");
    out.push_back({e.path().stem().string(), text::read_file(e.path().string()),
                   parse_json(text::read_file(exp.string()))});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

const std::set<std::string> kPredefined = {"Task", "Dataset", "Metric", "Model", "Method", "Setting", "Score"};

// ---------------------------------------------------------------------------
// criteria

Outcome metric_oracle() {
  Outcome o;
  testsupport::RandomSets rs(4242);
  for (int k = 0; k < 200; ++k) {
    auto g = rs.entities(12), p = rs.entities(12);
    auto s = score_ner(g, p);
    size_t m = testsupport::max_matching(g, p, testsupport::same_entity);
    o.expect(s.tp == m && s.fp == p.size() - m && s.fn == g.size() - m, "NER pair " + std::to_string(k));
    auto gr = rs.relations(10), pr = rs.relations(10);
    auto r = score_re(gr, pr);
    size_t mr = testsupport::max_matching(gr, pr, testsupport::same_relation);
    o.expect(r.tp == mr && r.fp == pr.size() - mr && r.fn == gr.size() - mr, "RE pair " + std::to_string(k));
  }
  if (o.ok) o.detail = "200 pairs, (tp, fp, fn) identical";
  return o;
}

Outcome worked_metrics() {
  Outcome o;
  auto ent = [](size_t s, size_t l, size_t r, std::string t) { return ScoredEntity{"d", TextAnchor{s, l, r}, t}; };
  auto ner = score_ner({ent(0, 0, 1, "Model"), ent(0, 2, 3, "Task")},
                       {ent(0, 0, 1, "Model"), ent(0, 2, 3, "Method"), ent(1, 0, 1, "Task")});
  o.expect(std::abs(ner.precision - 1.0 / 3) < 1e-12, "NER P");
  o.expect(std::abs(ner.recall - 0.5) < 1e-12, "NER R");
  o.expect(std::abs(ner.f1 - 0.4) < 1e-12, "NER F1");

  auto rel = [](size_t r1, size_t c1, size_t r2, size_t c2) {
    return ScoredRelation{"d", 0, TableAnchor{0, r1, c1, 0, 1}, TableAnchor{0, r2, c2, 0, 1}, "Model", "Score"};
  };
  auto re = score_re({rel(1, 0, 1, 1), rel(2, 0, 2, 1), rel(3, 0, 3, 1), rel(0, 1, 1, 1)},
                     {rel(1, 1, 1, 0), rel(2, 0, 2, 1), rel(3, 0, 3, 1), rel(4, 0, 4, 1), rel(0, 1, 4, 1)});
  o.expect(std::abs(re.precision - 0.6) < 1e-12, "RE P");
  o.expect(std::abs(re.recall - 0.75) < 1e-12, "RE R");
  o.expect(std::abs(re.f1 - 0.6666666667) < 1e-9, "RE F1");
  if (o.ok)
    o.detail = "NER P=" + fmt(ner.precision) + " R=" + fmt(ner.recall) + " F1=" + fmt(ner.f1) + "; RE F1=" +
               fmt(re.f1, 10);
  return o;
}

Outcome prompt_bytes() {
  Outcome o;
  struct Case {
    LlmTask task;
    int shots;
    bool score;
    std::string file;
    std::string slot;
  };
  std::vector<Case> cases = {
      {LlmTask::TextNer, 1, true, "text_ner_1shot", "[S]"},
      {LlmTask::TextNer, 2, true, "text_ner_2shot", "[S]"},
      {LlmTask::TableNer, 1, true, "table_ner_1shot_score", "[T]"},
      {LlmTask::TableNer, 2, true, "table_ner_2shot_score", "[T]"},
      {LlmTask::TableNer, 1, false, "table_ner_1shot_noscore", "[T]"},
      {LlmTask::TableNer, 2, false, "table_ner_2shot_noscore", "[T]"},
      {LlmTask::TableRe, 1, true, "table_re_1shot", "[T]"},
      {LlmTask::TableRe, 2, true, "table_re_2shot", "[T]"},
  };
  for (const auto& c : cases) {
    auto golden = text::read_file(testsupport::golden() + "/prompts/" + c.file + ".txt");
    o.expect(build_prompt(c.task, c.shots, c.slot, c.score).text == golden, c.file);
  }
  if (o.ok) o.detail = "8 prompts byte-identical";
  return o;
}

Outcome statement_law() {
  Outcome o;
  std::mt19937_64 rng(616);
  for (int k = 0; k < 50; ++k) {
    auto g = random_grid(rng);
    for (auto mode : {ScoreMode::WithScore, ScoreMode::WithoutScore})
      o.expect(gen_ner_statements(g, mode).size() == g.rows * g.cols * table_labels(mode).size(), "NER count");
  }
  size_t same_type = 0, pairs_total = 0;
  for (int k = 0; k < 1000; ++k) {
    auto g = random_grid(rng);
    std::vector<Entity> ents;
    for (size_t i = 0; i < g.rows; ++i)
      for (size_t j = 0; j < g.cols; ++j)
        if (rng() % 2) ents.push_back(table_entity(g, i, j, kAllEntityTypes[rng() % 7], "e" + std::to_string(ents.size())));
    size_t cross = 0;
    for (size_t a = 0; a < ents.size(); ++a)
      for (size_t b = a + 1; b < ents.size(); ++b) cross += ents[a].type != ents[b].type;
    auto pairs = candidate_pairs(ents);
    o.expect(pairs.size() == cross, "candidate pairs");
    o.expect(gen_re_statements(g, pairs).size() == cross, "RE count");
    for (auto [x, y] : pairs) same_type += x->type == y->type;
    pairs_total += pairs.size();
  }
  o.expect(same_type == 0, "same-type pair generated");
  if (o.ok) o.detail = "50 grids, 1000 entity sets, " + std::to_string(pairs_total) + " pairs, 0 same-type";
  return o;
}

Outcome parser_fixtures() {
  Outcome o;
  auto fixtures = latex_fixtures();
  o.expect(fixtures.size() >= 20, "at least 20 fixtures");
  size_t tables = 0;
  for (const auto& f : fixtures) {
    auto doc = parse_latex(f.name, f.tex);
    const auto& exp = f.expected["tables"];
    if (doc.tables.size() != exp.size()) {
      o.expect(false, f.name + " table count");
      continue;
    }
    for (size_t t = 0; t < exp.size(); ++t, ++tables) {
      const auto& g = doc.tables[t];
      o.expect(g.rows == exp[t]["rows"].get<size_t>() && g.cols == exp[t]["cols"].get<size_t>(), f.name + " dims");
      if (!exp[t]["caption"].is_null()) o.expect(g.caption == exp[t]["caption"].get<std::string>(), f.name + " caption");
      if (g.rows != exp[t]["rows"].get<size_t>() || g.cols != exp[t]["cols"].get<size_t>()) continue;
      for (size_t i = 0; i < g.rows; ++i)
        for (size_t j = 0; j < g.cols; ++j)
          o.expect(g.text(i, j) == exp[t]["cells"][i][j].get<std::string>(), f.name + " cell text");
    }
  }
  size_t variants = 0, crashes = 0;
  for (const auto& f : fixtures)
    for (size_t k = 1; k <= 22 && variants < 500; ++k, ++variants) {
      try {
        auto doc = parse_latex("fuzz", std::string_view(f.tex).substr(0, f.tex.size() * k / 23));
        for (const auto& g : doc.tables) crashes += g.cells.size() != g.rows * g.cols;
      } catch (...) {
        ++crashes;
      }
    }
  o.expect(variants == 500, "500 truncated variants");
  o.expect(crashes == 0, "truncated variant crashed");
  if (o.ok)
    o.detail = std::to_string(fixtures.size()) + " fixtures, " + std::to_string(tables) + " tables; " +
               std::to_string(variants) + " truncations, 0 crashes";
  return o;
}

Outcome flatten_round_trip() {
  Outcome o;
  size_t cells = 0;
  for (const auto& f : latex_fixtures()) {
    auto doc = parse_latex(f.name, f.tex);
    for (const auto& g : doc.tables) {
      auto flat = flatten_table(g);
      for (size_t i = 0; i < g.rows; ++i)
        for (size_t j = 0; j < g.cols; ++j, ++cells)
          o.expect(std::string(flat.slice(i, j)) == g.text(i, j), f.name + " slice");
    }
  }
  if (o.ok) o.detail = std::to_string(cells) + " cells reproduced";
  return o;
}

Outcome guiding_invariant() {
  Outcome o;
  std::mt19937_64 rng(619);
  const std::vector<std::string> surfaces = {"BERT", "GLUE", "the ResNet", "ResNet model", "SQuAD", "F1", "LSTM",
                                             "accuracy", "Image Segmentation", "image segmentation"};
  size_t retyped = 0;
  for (int d = 0; d < 100; ++d) {
    std::map<std::string, EntityType> text_type;
    std::vector<Entity> text;
    for (int k = 0; k < 8; ++k) {
      const auto& s = surfaces[rng() % surfaces.size()];
      auto key = normalize_surface(s);
      if (!text_type.count(key)) text_type[key] = kTextEntityTypes[rng() % 5];
      text.push_back(text_entity(s, text_type[key]));
    }
    std::vector<std::vector<std::string>> rows(3, std::vector<std::string>(3));
    for (auto& r : rows)
      for (auto& c : r) c = surfaces[rng() % surfaces.size()];
    auto g = TableGrid::from_rows("", rows);
    std::vector<Entity> table;
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) table.push_back(table_entity(g, i, j, kAllEntityTypes[rng() % 7]));
    auto guided = apply_label_guiding(text, table);
    for (size_t k = 0; k < guided.size(); ++k) retyped += guided[k].type != table[k].type;

    // Independent check: surface -> set of types across both modalities.
    std::map<std::string, std::set<EntityType>> seen;
    for (const auto& e : text) seen[normalize_surface(e.surface)].insert(e.type);
    for (const auto& e : guided) {
      if (e.type == EntityType::Score || e.type == EntityType::Setting) continue;
      auto key = normalize_surface(e.surface);
      if (seen.count(key)) seen[key].insert(e.type);
    }
    for (const auto& [k, types] : seen) o.expect(types.size() == 1, "surface '" + k + "' carries two types");
    o.expect(apply_label_guiding(text, guided) == guided, "guiding not idempotent");
  }
  if (o.ok) o.detail = "100 documents, " + std::to_string(retyped) + " cells retyped, idempotent";
  return o;
}

struct RoundScores {
  TaskScores r1, r2;
};

RoundScores run_rounds(const std::string& tag) {
  SynthOptions so;  // 200 terms, 10 seeds, 30 added, 10 test
  auto corpus = make_synthetic_corpus(so);
  if (corpus.truth.size() != 50 || corpus.vocab.size() != 200) throw Error(ErrorCode::InvalidArgument, "corpus shape");
  auto root = testsupport::temp_dir("acceptance_rounds_" + tag);
  auto ws = Workspace::init(root);
  seed_workspace(ws, corpus);
  advance_round(ws);
  auto test = corpus.partition(PartitionName::Test);
  auto score = [&](int round) {
    auto ex = ws.load_extractors(round);
    GazetteerTextBackend tb(ex.text);
    HeuristicTableBackend hb(ex.table);
    auto r = run_stage1(parsed_only(test), tb, hb);
    return evaluate(test, r.docs).overall;
  };
  RoundScores out;
  out.r1 = score(1);
  run_round(ws, PartitionName::Added, 1);
  for (const auto& truth : corpus.partition(PartitionName::Added)) oracle_review(ws, truth);
  advance_round(ws);
  out.r2 = score(2);
  fs::remove_all(root);
  return out;
}

Outcome round_monotonicity() {
  Outcome o;
  auto a = run_rounds("a");
  auto b = run_rounds("b");
  double text_gain = 100 * (a.r2.text_ner.f1 - a.r1.text_ner.f1);
  double table_gain = 100 * (a.r2.table_ner.f1 - a.r1.table_ner.f1);
  o.expect(text_gain >= 10, "text NER gain " + fmt(text_gain, 1) + " < 10");
  o.expect(table_gain >= 10, "table NER gain " + fmt(table_gain, 1) + " < 10");
  auto same = [](const TaskScores& x, const TaskScores& y) {
    return x.text_ner.f1 == y.text_ner.f1 && x.table_ner.f1 == y.table_ner.f1 && x.table_re.f1 == y.table_re.f1;
  };
  o.expect(same(a.r1, b.r1) && same(a.r2, b.r2), "rerun differs");
  o.detail = (o.ok ? "" : o.detail + "; ") + "text NER " + fmt(100 * a.r1.text_ner.f1, 1) + " -> " +
             fmt(100 * a.r2.text_ner.f1, 1) + " (+" + fmt(text_gain, 1) + "), table NER " +
             fmt(100 * a.r1.table_ner.f1, 1) + " -> " + fmt(100 * a.r2.table_ner.f1, 1) + " (+" +
             fmt(table_gain, 1) + "), table RE " + fmt(100 * a.r1.table_re.f1, 1) + " -> " +
             fmt(100 * a.r2.table_re.f1, 1) + ", deterministic";
  return o;
}

Outcome score_fraction() {
  Outcome o;
  auto docs = make_score_corpus(100, 60);
  auto counts = entity_counts(docs);
  size_t total = 0;
  for (auto [t, n] : counts) total += n;
  o.expect(total == 100 && counts[EntityType::Score] == 60, "corpus construction");
  double f = entity_distribution(docs).at(EntityType::Score);
  o.expect(f == 0.6, "fraction " + fmt(f, 6));
  std::ostringstream printed;
  printed << std::fixed << std::setprecision(3) << f;
  o.expect(printed.str() == "0.600", "printed fraction");
  if (o.ok) o.detail = "Score fraction " + printed.str();
  return o;
}

Outcome without_score() {
  Outcome o;
  SynthOptions so;
  so.setting_column = true;
  auto corpus = make_synthetic_corpus(so);
  auto train = corpus.partition(PartitionName::Seeds);
  for (auto& d : corpus.partition(PartitionName::Added)) train.push_back(d);
  auto ex = train_extractors(train);
  auto test = corpus.partition(PartitionName::Test);

  auto table_types = [](const AnnotatedDocument& d) {
    std::map<std::pair<std::string, std::string>, EntityType> m;
    for (const auto& e : d.entities)
      if (is_table(e.anchor)) m[{d.doc.doc_id, anchor_key(e.anchor)}] = e.type;
    return m;
  };
  std::map<std::pair<std::string, std::string>, EntityType> gold, with, without;
  std::vector<ScoredEntity> gold_rest, pred_with, pred_without;
  for (const auto& g : test) {
    GazetteerTextBackend tb(ex.text);
    HeuristicTableBackend hb(ex.table);
    StageOptions a, b;
    b.table.mode = ScoreMode::WithoutScore;
    auto pw = annotate_document(g.doc, tb, hb, a);
    auto pn = annotate_document(g.doc, tb, hb, b);
    gold.merge(table_types(g));
    with.merge(table_types(pw));
    without.merge(table_types(pn));
    for (auto& e : scored_entities(g, EntityScope::Table))
      if (e.type != "Score") gold_rest.push_back(e);
    for (auto& e : scored_entities(pw, EntityScope::Table)) pred_with.push_back(e);
    for (auto& e : scored_entities(pn, EntityScope::Table)) pred_without.push_back(e);
  }
  size_t unaffected = 0, changed_cells = 0;
  auto get = [](const auto& m, const auto& k) -> std::optional<EntityType> {
    auto it = m.find(k);
    return it == m.end() ? std::nullopt : std::optional<EntityType>(it->second);
  };
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto* m : {&gold, &with, &without})
    for (const auto& [k, v] : *m) keys.insert(k);
  for (const auto& k : keys) {
    auto g = get(gold, k), w = get(with, k), n = get(without, k);
    o.expect(n != EntityType::Score, "Score predicted without Score");
    if (g == EntityType::Score || w == EntityType::Score) {
      changed_cells += w != n;
      continue;
    }
    ++unaffected;
    o.expect(w == n, "non-Score cell " + k.second + " changed");
  }
  auto rw = score_ner(gold_rest, pred_with);
  auto rn = score_ner(gold_rest, pred_without);
  o.expect(rn.recall > rw.recall, "recall did not improve");
  o.detail = (o.ok ? "" : o.detail + "; ") + std::to_string(unaffected) + " non-Score cells unchanged, " +
             std::to_string(changed_cells) + " Score-related cells changed; non-Score recall " + fmt(rw.recall) +
             " -> " + fmt(rn.recall);
  return o;
}

// Per-boundary oracle for the error categories.
ErrorCounts oracle_errors(const std::vector<ScoredEntity>& gold, const std::vector<ScoredEntity>& pred) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::map<std::string, long>> g, p;
  for (const auto& e : gold) g[{e.doc, anchor_key(e.anchor)}][e.type]++;
  for (const auto& e : pred) p[{e.doc, anchor_key(e.anchor)}][e.type]++;
  std::set<Key> keys;
  for (const auto& [k, v] : g) keys.insert(k);
  for (const auto& [k, v] : p) keys.insert(k);
  ErrorCounts out;
  for (const auto& k : keys) {
    auto gk = g[k], pk = p[k];
    long left = 0, def = 0, undef = 0;
    for (auto& [t, n] : gk) {
      long exact = std::min(n, pk.count(t) ? pk[t] : 0L);
      left += n - exact;
      if (pk.count(t)) pk[t] -= exact;
    }
    for (const auto& [t, n] : pk) (kPredefined.count(t) ? def : undef) += n;
    long u = std::min(left, undef);
    long inc = std::min(left - u, def);
    out.undefined_type += u;
    out.incorrect_type += inc;
    out.missing += left - u - inc;
    out.unannotated += def + undef - u - inc;
  }
  return out;
}

Outcome error_partition() {
  Outcome o;
  testsupport::RandomSets rs(623);
  size_t errors = 0;
  for (int k = 0; k < 100; ++k) {
    auto g = rs.entities(10), p = rs.entities(10, true);
    auto s = score_ner(g, p);
    auto c = categorize_errors(g, p, kPredefined);
    o.expect(c == oracle_errors(g, p), "oracle mismatch");
    o.expect(s.fn == c.missing + c.incorrect_type + c.undefined_type, "fn identity");
    o.expect(s.fp == c.unannotated + c.incorrect_type + c.undefined_type, "fp identity");
    o.expect(s.fp + s.fn == c.missing + c.unannotated + 2 * (c.incorrect_type + c.undefined_type), "fp+fn identity");
    errors += s.fp + s.fn;
  }
  if (o.ok) o.detail = "100 pairs, " + std::to_string(errors) + " fp+fn reconciled";
  return o;
}

class CountingText : public TextBackend {
 public:
  std::string name() const override { return "count"; }
  std::vector<Entity> extract(const ParsedDocument&) override { return {}; }
};

Outcome speed_harness() {
  Outcome o;
  // Exact accounting with a deterministic clock.
  std::vector<std::string> sents(320, "we measure speed here");
  auto doc = testsupport::doc_from_sentences("speed", sents);
  doc.tables.push_back(TableGrid::from_rows("", {{"System", "F1"}, {"BERT", "92.2"}}));
  CountingText ct;
  HeuristicTableBackend hb;
  double now = 0;
  auto fake = measure_speed({doc}, ct, hb, 32, [&] { return now += 0.5; });
  o.expect(fake.text_batches == 10 && fake.sentences == 320, "fake-clock batches");
  o.expect(fake.text_per_s && *fake.text_per_s == 320 / fake.text_seconds, "fake-clock rate");

  // The command on the synthetic corpus.
  auto root = testsupport::temp_dir("acceptance_speed");
  std::ostringstream out, err;
  auto gold = (root / "gold").string();
  o.expect(run_cli({"synth", "--gold-out", gold}, out, err) == 0, "synth");
  auto report = (root / "report.json").string();
  std::ostringstream eout;
  int code = run_cli({"evaluate", "--gold", (fs::path(gold) / "test").string(), "--speed", "--report", report}, eout, err);
  o.expect(code == 0, "evaluate --speed exit " + std::to_string(code) + " " + err.str());
  if (code == 0) {
    auto text = eout.str();
    o.expect(text.find("sent/s") != std::string::npos && text.find("table/s") != std::string::npos, "rates printed");
    auto sp = parse_json(text::read_file(report))["speed"];
    size_t sentences = sp["sentences"], tables = sp["tables"];
    o.expect(sp["batch_size"] == 32, "batch size");
    o.expect(sp["text_batches"] == (sentences + 31) / 32, "text batches");
    o.expect(sp["table_batches"] == (tables + 31) / 32, "table batches");
    double ts = sp["text_seconds"], ns = sp["table_ner_seconds"];
    o.expect(sp["text"].is_number() && sp["text"].get<double>() == sentences / ts, "sentences/s = items/seconds");
    o.expect(sp["table_ner"].is_number() && sp["table_ner"].get<double>() == tables / ns, "tables/s = items/seconds");
    o.expect(sp["text"].is_number() && sp["text"].get<double>() > 0 && sp["table_ner"].get<double>() > 0 &&
                 sp["table_re"].get<double>() > 0,
             "throughput > 0");
    if (o.ok)
      o.detail = std::to_string(sentences) + " sentences in " + std::to_string(size_t(sp["text_batches"])) +
                 " batches, " + std::to_string(tables) + " tables; " + fmt(sp["text"].get<double>(), 0) + " sent/s, " +
                 fmt(sp["table_ner"].get<double>(), 0) + " table/s";
  }
  fs::remove_all(root);
  return o;
}

std::string fuzz_response(std::mt19937_64& rng) {
  static const std::vector<std::string> seeds = {
      "[['BERT', 'Model'], ['GLUE', 'Dataset']]",
      "{'Task': [], 'Dataset': ['QQP'], 'Model': ['bertbase'], 'Method': [], 'Metric': ['F1'], 'Setting': None}",
      "{['#1 Ensemble - nlnet':'91.7', 'Human': '82.3']}",
      "None",
      "[]"};
  static const std::string alphabet = "[]{}'\":, \\abcXYZ\n\t0123456789BERTModel";
  std::string s;
  switch (rng() % 4) {
    case 0:
      for (size_t k = 0, n = rng() % 80; k < n; ++k) s += static_cast<char>(rng() % 256);
      break;
    case 1: {
      const auto& base = seeds[rng() % seeds.size()];
      s = base.substr(0, rng() % (base.size() + 1));
      break;
    }
    case 2:
      s = seeds[rng() % seeds.size()];
      for (int k = 0; k < 4 && !s.empty(); ++k) s[rng() % s.size()] = alphabet[rng() % alphabet.size()];
      break;
    default:
      for (size_t k = 0, n = rng() % 60; k < n; ++k) s += alphabet[rng() % alphabet.size()];
  }
  return s;
}

Outcome llm_parsers() {
  Outcome o;
  auto doc = testsupport::doc_from_sentences("t", {"We fine-tune BERT on GLUE"});
  auto glue = TableGrid::from_rows(
      "", {{"System", "MNLI-(m/mm)", "QQP", "QNLI", "SST-2", "CoLA", "STS-B", "MRPC", "RTE", "Average"},
           {"", "392k", "363k", "108k", "67k", "8.5k", "5.7k", "3.5k", "2.5k", "-"},
           {"Pre-OpenAI SOTA", "80.6/80.1", "66.1", "82.3", "93.2", "35.0", "81.0", "86.0", "61.7", "74.0"},
           {"OpenAI GPT", "82.1/81.4", "70.3", "87.4", "91.3", "45.4", "80.0", "82.3", "56.0", "75.1"},
           {"bertbase", "84.6/83.4", "71.2", "90.5", "93.5", "52.1", "85.8", "88.9", "66.4", "79.6"}});
  auto squad = TableGrid::from_rows("", {{"System", "Dev", "Dev", "Test", "Test"},
                                         {"", "EM", "F1", "EM", "F1"},
                                         {"Human", "-", "-", "82.3", "91.2"},
                                         {"#1 Ensemble - nlnet", "-", "-", "86.0", "91.7"},
                                         {"#2 Ensemble - QANet", "-", "-", "84.5", "90.5"},
                                         {"bertbase(Single)", "80.8", "88.5", "-", "-"}});
  std::mt19937_64 rng(625);
  size_t thrown = 0;
  for (int k = 0; k < 300; ++k) {
    auto s = fuzz_response(rng);
    try {
      parse_text_ner(s, doc, {0});
      parse_table_ner(s, glue, 0);
      parse_table_re(s, glue);
    } catch (...) {
      ++thrown;
    }
  }
  o.expect(thrown == 0, std::to_string(thrown) + " fuzz cases threw");

  auto text = parse_text_ner("[['BERT','Model'],['GLUE','Dataset']]", doc, {0});
  o.expect(text.entities.size() == 2 && text.issues.empty(), "text NER example");
  if (text.entities.size() == 2) {
    o.expect(std::get<TextAnchor>(text.entities[0].anchor) == TextAnchor{0, 2, 3} &&
                 text.entities[0].type == EntityType::Model,
             "BERT span");
    o.expect(std::get<TextAnchor>(text.entities[1].anchor) == TextAnchor{0, 4, 5} &&
                 text.entities[1].type == EntityType::Dataset,
             "GLUE span");
  }
  auto person = parse_text_ner("[['Danqi Chen','Person']]", doc, {0});
  o.expect(person.entities.empty() && person.count(ResponseIssue::Kind::UndefinedType) == 1, "Person example");

  auto table = parse_table_ner("{'Model': ['bertbase'], 'Dataset': ['QQP'], 'Metric': [], 'Setting': None}", glue, 0);
  std::map<Coord, EntityType> at;
  for (const auto& e : table.entities) {
    auto a = std::get<TableAnchor>(e.anchor);
    at[{a.row, a.col}] = e.type;
  }
  o.expect(at == std::map<Coord, EntityType>{{{4, 0}, EntityType::Model}, {{0, 2}, EntityType::Dataset}},
           "table NER example");
  auto re = parse_table_re("{['#1 Ensemble - nlnet':'91.7']}", squad);
  o.expect(re.relations == std::vector<std::pair<Coord, Coord>>{{{3, 0}, {3, 4}}}, "table RE example");
  if (o.ok) o.detail = "300 fuzz cases total; text/table NER/RE and Person examples exact";
  return o;
}

struct Criterion {
  std::string name;
  double limit_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"metric oracle equivalence", 5, metric_oracle},
      {"worked metric examples", 0, worked_metrics},
      {"prompt byte-exactness", 1, prompt_bytes},
      {"statement-count law", 0, statement_law},
      {"latex parser fixtures", 0, parser_fixtures},
      {"flattening round trip", 0, flatten_round_trip},
      {"label-guiding invariant", 0, guiding_invariant},
      {"round monotonicity", 60, round_monotonicity},
      {"score-distribution report", 0, score_fraction},
      {"without-Score mode", 0, without_score},
      {"error categories reconcile", 0, error_partition},
      {"speed harness", 0, speed_harness},
      {"LLM response parsers", 0, llm_parsers},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.ok = false;
      o.detail += "; over time limit";
    }
    std::string budget = c.limit_s > 0 ? " < " + fmt(c.limit_s, 0) + " s" : "";
    std::cout << (o.ok ? "PASS" : "FAIL") << "  " << c.name << "  [" << o.detail << "]  (" << fmt(secs, 3) << " s"
              << budget << ")\n";
    failed += !o.ok;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
