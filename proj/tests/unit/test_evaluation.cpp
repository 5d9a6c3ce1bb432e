#include <doctest.h>

#include <cmath>
#include <set>

#include "scimine/error.hpp"
#include "scimine/evaluation.hpp"
#include "scimine/synth.hpp"
#include "test_support.hpp"

using namespace scimine;
using testsupport::max_matching;

namespace {

ScoredEntity ent(std::string doc, size_t s, size_t l, size_t r, std::string type) {
  return {std::move(doc), TextAnchor{s, l, r}, std::move(type)};
}

ScoredRelation rel(size_t r1, size_t c1, size_t r2, size_t c2) {
  ScoredRelation r;
  r.doc = "d";
  r.a = TableAnchor{0, r1, c1, 0, 1};
  r.b = TableAnchor{0, r2, c2, 0, 1};
  r.type_a = "Model";
  r.type_b = "Score";
  return r;
}

const std::set<std::string> kPredefined = {"Task", "Dataset", "Metric", "Model", "Method", "Setting", "Score"};

// Per-boundary oracle: after exact matches, min(|gold|, |pred|) pairs share a
// boundary; undefined-type predictions are paired first.
ErrorCounts oracle_errors(const std::vector<ScoredEntity>& gold, const std::vector<ScoredEntity>& pred) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::map<std::string, long>> g, p;
  for (const auto& e : gold) g[{e.doc, anchor_key(e.anchor)}][e.type]++;
  for (const auto& e : pred) p[{e.doc, anchor_key(e.anchor)}][e.type]++;
  ErrorCounts out;
  std::set<Key> keys;
  for (const auto& [k, v] : g) keys.insert(k);
  for (const auto& [k, v] : p) keys.insert(k);
  for (const auto& k : keys) {
    auto gk = g[k], pk = p[k];
    long gl = 0, pl_def = 0, pl_undef = 0;
    for (auto& [t, n] : gk) {
      long exact = std::min(n, pk.count(t) ? pk[t] : 0L);
      gl += n - exact;
      if (pk.count(t)) pk[t] -= exact;
    }
    for (const auto& [t, n] : pk) (kPredefined.count(t) ? pl_def : pl_undef) += n;
    long undef = std::min(gl, pl_undef);
    long incorrect = std::min(gl - undef, pl_def);
    out.undefined_type += undef;
    out.incorrect_type += incorrect;
    out.missing += gl - undef - incorrect;
    out.unannotated += pl_def + pl_undef - undef - incorrect;
  }
  return out;
}

class CountingText : public TextBackend {
 public:
  std::string name() const override { return "count"; }
  std::vector<Entity> extract(const ParsedDocument& doc) override {
    calls.push_back(doc.sentence_count());
    return {};
  }
  std::vector<size_t> calls;
};

}  // namespace

TEST_CASE("worked NER example") {
  std::vector<ScoredEntity> gold = {ent("d", 0, 0, 1, "Model"), ent("d", 0, 2, 3, "Task")};
  std::vector<ScoredEntity> pred = {ent("d", 0, 0, 1, "Model"), ent("d", 0, 2, 3, "Method"), ent("d", 1, 0, 1, "Task")};
  auto s = score_ner(gold, pred);
  CHECK(s.tp == 1);
  CHECK(s.fp == 2);
  CHECK(s.fn == 1);
  CHECK(s.precision == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(s.recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(s.f1 - 0.4) < 1e-12);

  auto same = score_ner({gold[0]}, {gold[0]});
  CHECK(same.f1 == 1.0);
}

TEST_CASE("worked RE example") {
  std::vector<ScoredRelation> gold = {rel(1, 0, 1, 1), rel(2, 0, 2, 1), rel(3, 0, 3, 1), rel(0, 1, 1, 1)};
  std::vector<ScoredRelation> pred = {rel(1, 1, 1, 0), rel(2, 0, 2, 1), rel(3, 0, 3, 1), rel(4, 0, 4, 1),
                                      rel(0, 1, 4, 1)};
  auto s = score_re(gold, pred);
  CHECK(s.tp == 3);
  CHECK(std::abs(s.precision - 0.6) < 1e-12);
  CHECK(std::abs(s.recall - 0.75) < 1e-12);
  CHECK(std::abs(s.f1 - 2 * 0.45 / 1.35) < 1e-9);
  CHECK(std::abs(s.f1 - 0.6666666667) < 1e-9);

  std::swap(pred[0].type_a, pred[0].type_b);
  pred[1].type_a = "Method";
  CHECK(score_re(gold, pred).tp == 3);
  CHECK(score_re(gold, pred, true).tp == 2);
}

TEST_CASE("empty sets score zero without dividing by zero") {
  auto s = score_ner({}, {});
  CHECK(s.precision == 0);
  CHECK(s.f1 == 0);
}

TEST_CASE("scores agree with a bipartite-matching oracle") {
  testsupport::RandomSets rs(1234);
  for (int k = 0; k < 200; ++k) {
    auto g = rs.entities(12), p = rs.entities(12);
    auto s = score_ner(g, p);
    size_t m = max_matching(g, p, testsupport::same_entity);
    CHECK(s.tp == m);
    CHECK(s.fp == p.size() - m);
    CHECK(s.fn == g.size() - m);
    auto gr = rs.relations(10), pr = rs.relations(10);
    auto r = score_re(gr, pr);
    size_t mr = max_matching(gr, pr, testsupport::same_relation);
    CHECK(r.tp == mr);
    CHECK(r.fp == pr.size() - mr);
    CHECK(r.fn == gr.size() - mr);
  }
}

TEST_CASE("error categories") {
  std::vector<ScoredEntity> gold = {ent("d", 0, 0, 1, "Method")};
  auto person = categorize_errors(gold, {ent("d", 0, 0, 1, "Person")}, kPredefined);
  CHECK(person == ErrorCounts{0, 0, 0, 1, 0});
  CHECK(categorize_errors(gold, gold, kPredefined) == ErrorCounts{});

  std::vector<ScoredEntity> g3 = {ent("d", 0, 0, 1, "Task"), ent("d", 0, 2, 3, "Model"), ent("d", 1, 0, 2, "Dataset"),
                                  ent("d", 1, 3, 4, "Metric")};
  std::vector<ScoredEntity> p3 = {ent("d", 0, 0, 1, "Task"), ent("d", 0, 2, 3, "Method")};
  CHECK(categorize_errors(g3, p3, kPredefined) == ErrorCounts{2, 0, 1, 0, 0});
  CHECK(categorize_errors(g3, p3, kPredefined, 3).others == 3);
}

TEST_CASE("error categories reconcile with fp and fn") {
  testsupport::RandomSets rs(77);
  for (int k = 0; k < 100; ++k) {
    auto g = rs.entities(10), p = rs.entities(10, true);
    auto s = score_ner(g, p);
    auto c = categorize_errors(g, p, kPredefined);
    CHECK(c == oracle_errors(g, p));
    CHECK(s.fn == c.missing + c.incorrect_type + c.undefined_type);
    CHECK(s.fp == c.unannotated + c.incorrect_type + c.undefined_type);
    CHECK(s.fp + s.fn == c.missing + c.unannotated + 2 * (c.incorrect_type + c.undefined_type));
  }
}

TEST_CASE("entity distribution") {
  auto docs = make_score_corpus(100, 60);
  auto dist = entity_distribution(docs);
  CHECK(dist.at(EntityType::Score) == 0.6);
  double sum = 0;
  for (auto [t, f] : dist) sum += f;
  CHECK(sum == doctest::Approx(1.0));
  size_t total = 0;
  for (auto [t, n] : entity_counts(docs)) total += n;
  CHECK(total == 100);
  CHECK_THROWS_AS(entity_distribution({}), Error);
  auto one = make_score_corpus(1, 0);
  size_t nonzero = 0;
  for (auto [t, f] : entity_distribution(one))
    if (f > 0) {
      ++nonzero;
      CHECK(f == 1.0);
    }
  CHECK(nonzero == 1);
}

TEST_CASE("speed accounting with a fake clock") {
  std::vector<std::string> sents(320, "we test speed here");
  auto doc = testsupport::doc_from_sentences("speed", sents);
  doc.tables.push_back(TableGrid::from_rows("", {{"System", "F1"}, {"BERT", "92.2"}}));
  doc.tables.push_back(TableGrid::from_rows("", {{"System", "EM"}, {"GPT", "80.1"}}));
  CountingText text;
  HeuristicTableBackend table;
  double now = 0;
  Clock clock = [&] { return now += 0.25; };
  auto r = measure_speed({doc}, text, table, 32, clock);
  CHECK(r.batch_size == 32);
  CHECK(r.sentences == 320);
  CHECK(r.text_batches == 10);
  CHECK(text.calls.size() == 11);  // warm-up plus ten batches
  for (size_t n : text.calls) CHECK(n == 32);
  CHECK(r.text_seconds == 0.25);
  REQUIRE(r.text_per_s);
  CHECK(*r.text_per_s == 320 / r.text_seconds);
  CHECK(r.tables == 2);
  CHECK(r.table_batches == 1);
  REQUIRE(r.table_ner_per_s);
  CHECK(*r.table_ner_per_s == 2 / r.table_ner_seconds);
  REQUIRE(r.table_re_per_s);
  CHECK(*r.table_re_per_s > 0);

  auto none = measure_speed({}, text, table, 32, clock);
  CHECK_FALSE(none.text_per_s);
  CHECK_FALSE(none.table_ner_per_s);
  CHECK_FALSE(none.table_re_per_s);
}

TEST_CASE("evaluation report over domains") {
  SynthOptions o;
  o.seeds = 2;
  o.added = 0;
  o.test = 6;
  auto corpus = make_synthetic_corpus(o);
  auto gold = corpus.partition(PartitionName::Test);
  auto pred = gold;
  for (auto& d : pred) {
    d.entities.erase(std::remove_if(d.entities.begin(), d.entities.end(),
                                    [](const Entity& e) { return e.type == EntityType::Task; }),
                     d.entities.end());
  }
  auto rep = evaluate(gold, pred);
  CHECK(rep.overall.table_re.f1 == 1.0);
  CHECK(rep.overall.text_ner.precision == 1.0);
  CHECK(rep.overall.text_ner.recall < 1.0);
  CHECK(rep.per_domain.size() == 3);
  double mean = 0;
  for (const auto& [dom, s] : rep.per_domain) mean += s.text_ner.f1;
  CHECK(rep.macro.text_ner.f1 == doctest::Approx(mean / 3));
  REQUIRE(rep.text_errors);
  CHECK(rep.text_errors->missing == rep.overall.text_ner.fn);
  auto j = rep.to_json();
  for (auto key : {"per_task", "per_domain", "macro_over_domains", "errors", "entity_distribution"})
    CHECK(j.contains(key));
  CHECK(rep.render_text().find("Macro") != std::string::npos);

  auto partial = evaluate(gold, {});
  CHECK(partial.overall.text_ner.tp == 0);
  CHECK(partial.overall.text_ner.fn == rep.overall.text_ner.tp + rep.overall.text_ner.fn);
}
