#include "scimine/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "scimine/error.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

namespace {

// mt19937_64 output is fixed by the standard; distributions are not, so draws
// go through plain modulo.
struct Rng {
  std::mt19937_64 g;
  explicit Rng(uint64_t seed) : g(seed) {}
  size_t below(size_t n) { return n ? static_cast<size_t>(g() % n) : 0; }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
  /// k distinct indices from [0, n), in draw order.
  std::vector<size_t> sample(size_t n, size_t k) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    k = std::min(k, n);
    for (size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + below(n - i)]);
    idx.resize(k);
    return idx;
  }
};

std::string pseudo_word(Rng& rng, size_t syllables) {
  static const std::string cons = "bdfgklmnprstvz";
  static const std::string vow = "aeiou";
  std::string w;
  for (size_t s = 0; s < syllables; ++s) {
    w += cons[rng.below(cons.size())];
    w += vow[rng.below(vow.size())];
  }
  if (rng.below(2)) w += "rn"[rng.below(2)];
  return w;
}

std::string capitalized(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

std::string make_surface(Rng& rng, EntityType t) {
  static const std::vector<std::string> task_heads = {"parsing", "tagging", "retrieval", "detection",
                                                      "segmentation", "translation", "ranking", "linking"};
  static const std::vector<std::string> method_heads = {"pooling", "alignment", "sampling", "encoding",
                                                        "attention", "regularization", "distillation"};
  static const std::vector<std::string> metric_heads = {"accuracy", "recall", "error", "gain", "rate"};
  switch (t) {
    case EntityType::Task: return pseudo_word(rng, 2) + " " + rng.pick(task_heads);
    case EntityType::Dataset: return capitalized(pseudo_word(rng, 2)) + (rng.below(2) ? "Bank" : "-" + std::to_string(10 + rng.below(90)));
    case EntityType::Metric: return pseudo_word(rng, 2) + " " + rng.pick(metric_heads);
    case EntityType::Model: return capitalized(pseudo_word(rng, 3));
    case EntityType::Method: return pseudo_word(rng, 2) + " " + rng.pick(method_heads);
    default: return pseudo_word(rng, 2);
  }
}

std::vector<SynthTerm> make_vocab(Rng& rng, size_t size) {
  std::vector<SynthTerm> vocab;
  std::set<std::string> seen;
  size_t per = size / kTextEntityTypes.size();
  for (size_t k = 0; k < kTextEntityTypes.size(); ++k) {
    EntityType t = kTextEntityTypes[k];
    size_t want = per + (k < size % kTextEntityTypes.size() ? 1 : 0);
    for (size_t n = 0; n < want;) {
      std::string s = make_surface(rng, t);
      if (!seen.insert(normalize_surface(s)).second) continue;
      vocab.push_back({s, t});
      ++n;
    }
  }
  return vocab;
}

struct Builder {
  AnnotatedDocument a;
  std::vector<Sentence> sentences;

  void add_sentence(const std::vector<std::pair<std::string, const SynthTerm*>>& parts) {
    Sentence s;
    size_t idx = sentences.size();
    for (const auto& [literal, term] : parts) {
      if (term) {
        auto words = text::split_ws(term->surface);
        Entity e;
        e.anchor = TextAnchor{idx, s.size(), s.size() + words.size()};
        e.type = term->type;
        e.surface = term->surface;
        e.provenance = Provenance::Reviewed;
        a.entities.push_back(e);
        s.insert(s.end(), words.begin(), words.end());
      } else {
        auto words = text::split_ws(literal);
        s.insert(s.end(), words.begin(), words.end());
      }
    }
    sentences.push_back(std::move(s));
  }
};

std::string score_text(Rng& rng) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%zu.%zu", 50 + rng.below(50), rng.below(10));
  return buf;
}

using Part = std::pair<std::string, const SynthTerm*>;
Part lit(const std::string& s) { return {s, nullptr}; }
Part term(const SynthTerm& t) { return {"", &t}; }

AnnotatedDocument make_paper(Rng& rng, const std::string& id, Domain domain, const std::vector<SynthTerm>& vocab,
                             const SynthOptions& o) {
  std::vector<const SynthTerm*> systems_pool, datasets, metrics, tasks;
  for (const auto& t : vocab) {
    if (t.type == EntityType::Model || t.type == EntityType::Method) systems_pool.push_back(&t);
    if (t.type == EntityType::Dataset) datasets.push_back(&t);
    if (t.type == EntityType::Metric) metrics.push_back(&t);
    if (t.type == EntityType::Task) tasks.push_back(&t);
  }
  auto draw = [&](const std::vector<const SynthTerm*>& pool, size_t k) {
    std::vector<const SynthTerm*> out;
    for (size_t i : rng.sample(pool.size(), k)) out.push_back(pool[i]);
    return out;
  };
  auto sys = draw(systems_pool, o.systems);
  auto ds = draw(datasets, o.datasets);
  auto ms = draw(metrics, o.metrics);
  auto ts = draw(tasks, o.tasks);

  Builder b;
  b.a.doc.doc_id = id;
  b.a.doc.domain = domain;
  static const std::vector<std::string> fillers = {
      "the results are summarized in the tables below",
      "training details follow common practice",
      "we leave a broader study to future work",
      "all experiments use the same random seeds",
      "this section describes the experimental setup",
      "the appendix lists further implementation details",
      "we thank the reviewers for their comments",
      "code and data will be released upon publication"};
  for (const auto* t : ts) b.add_sentence({lit("we study"), term(*t), lit("in this work")});
  for (const auto* d : ds) b.add_sentence({lit("experiments are run on"), term(*d), lit("with the official splits")});
  for (size_t k = 0; k < sys.size(); ++k) {
    const auto* s = sys[k];
    const auto* t = ts[k % ts.size()];
    if (s->type == EntityType::Model)
      b.add_sentence({lit("the"), term(*s), lit("system is trained for"), term(*t)});
    else
      b.add_sentence({lit("we apply"), term(*s), lit("to improve"), term(*t)});
  }
  for (const auto* m : ms) b.add_sentence({lit("performance is reported in"), term(*m)});
  for (size_t k = 0; k < o.filler_sentences; ++k) b.add_sentence({lit(rng.pick(fillers))});
  // Interleave: keep the first sentence, shuffle the rest deterministically.
  std::vector<size_t> order(b.sentences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 2; --i) std::swap(order[i - 1], order[1 + rng.below(i - 1)]);
  std::vector<size_t> pos(order.size());
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  Paragraph para(order.size());
  for (size_t i = 0; i < order.size(); ++i) para[i] = b.sentences[order[i]];
  for (auto& e : b.a.entities) std::get<TextAnchor>(e.anchor).sentence = pos[std::get<TextAnchor>(e.anchor).sentence];
  std::stable_sort(b.a.entities.begin(), b.a.entities.end(), [](const Entity& x, const Entity& y) {
    return std::get<TextAnchor>(x.anchor) < std::get<TextAnchor>(y.anchor);
  });
  b.a.doc.sections.push_back(Section{"Introduction", 1, {para}});

  // Result tables: one over metrics, one over datasets.
  auto add_table = [&](const std::string& corner, const std::vector<const SynthTerm*>& columns,
                       const std::string& caption) {
    size_t t = b.a.doc.tables.size();
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {corner};
    for (const auto* c : columns) header.push_back(c->surface);
    if (o.setting_column) header.push_back("batch");
    rows.push_back(header);
    static const std::vector<std::string> batches = {"16", "32", "64", "128"};
    for (const auto* s : sys) {
      std::vector<std::string> row = {s->surface};
      for (size_t c = 0; c < columns.size(); ++c) row.push_back(score_text(rng));
      if (o.setting_column) row.push_back(rng.pick(batches));
      rows.push_back(row);
    }
    b.a.doc.tables.push_back(TableGrid::from_rows(caption, rows));
    const auto& grid = b.a.doc.tables.back();
    auto add_cell = [&](size_t i, size_t j, EntityType type) {
      Entity e;
      e.anchor = TableAnchor{t, i, j, 0, grid.at(i, j).size()};
      e.type = type;
      e.surface = grid.text(i, j);
      e.provenance = Provenance::Reviewed;
      b.a.entities.push_back(e);
    };
    for (size_t j = 0; j < columns.size(); ++j) add_cell(0, j + 1, columns[j]->type);
    for (size_t i = 0; i < sys.size(); ++i) {
      add_cell(i + 1, 0, sys[i]->type);
      for (size_t j = 0; j < columns.size(); ++j) add_cell(i + 1, j + 1, EntityType::Score);
      if (o.setting_column) add_cell(i + 1, columns.size() + 1, EntityType::Setting);
    }
  };
  add_table("System", ms, "Main results on " + ds.front()->surface);
  add_table("System", ds, "Results per dataset");

  // Ids, then relations: every Score links to its row head and its column head.
  for (size_t k = 0; k < b.a.entities.size(); ++k) b.a.entities[k].id = "e" + std::to_string(k + 1);
  std::map<std::tuple<size_t, size_t, size_t>, const Entity*> at;
  for (const auto& e : b.a.entities)
    if (auto* ta = std::get_if<TableAnchor>(&e.anchor)) at[{ta->table, ta->row, ta->col}] = &e;
  for (const auto& [key, e] : at) {
    if (e->type != EntityType::Score) continue;
    auto [t, i, j] = key;
    for (auto k : {std::make_tuple(t, i, size_t{0}), std::make_tuple(t, size_t{0}, j)}) {
      auto it = at.find(k);
      if (it != at.end() && it->second->type != EntityType::Score)
        b.a.relations.push_back(make_relation(e->id, it->second->id, t, Provenance::Reviewed));
    }
  }
  b.a.review_state = ReviewState::Gold;
  return b.a;
}

}  // namespace

std::vector<AnnotatedDocument> SynthCorpus::partition(PartitionName name) const {
  std::vector<AnnotatedDocument> out;
  const auto* p = manifest.find(name);
  if (!p) return out;
  std::set<std::string> ids(p->doc_ids.begin(), p->doc_ids.end());
  for (const auto& d : truth)
    if (ids.count(d.doc.doc_id)) out.push_back(d);
  return out;
}

SynthCorpus make_synthetic_corpus(const SynthOptions& o) {
  Rng rng(o.seed);
  SynthCorpus c;
  c.vocab = make_vocab(rng, o.vocab_size);
  size_t n = 0;
  auto add_part = [&](PartitionName name, size_t count) {
    CorpusPartition p;
    p.name = name;
    p.expected_size = count;
    for (size_t k = 0; k < count; ++k) {
      char id[32];
      std::snprintf(id, sizeof id, "synth.%04zu", ++n);
      Domain d = Domain::CS;
      if (name == PartitionName::Test) d = k % 3 == 0 ? Domain::CS : (k % 3 == 1 ? Domain::STAT : Domain::EESS);
      c.truth.push_back(make_paper(rng, id, d, c.vocab, o));
      p.doc_ids.push_back(id);
      p.domains[id] = d;
    }
    c.manifest.partitions.push_back(std::move(p));
  };
  add_part(PartitionName::Seeds, o.seeds);
  add_part(PartitionName::Added, o.added);
  add_part(PartitionName::Test, o.test);
  return c;
}

std::vector<AnnotatedDocument> make_score_corpus(size_t total, size_t score, uint64_t seed) {
  if (score > total) throw Error(ErrorCode::InvalidArgument, "score count exceeds total");
  Rng rng(seed);
  std::vector<EntityType> types;
  for (size_t k = 0; k < score; ++k) types.push_back(EntityType::Score);
  static const std::vector<EntityType> others = {EntityType::Model,  EntityType::Method, EntityType::Dataset,
                                                 EntityType::Metric, EntityType::Task,   EntityType::Setting};
  for (size_t k = 0; k < total - score; ++k) types.push_back(others[k % others.size()]);
  // Spread over papers of at most 25 entities, each a one-row-per-entity table.
  std::vector<AnnotatedDocument> docs;
  for (size_t start = 0, n = 0; start < types.size(); start += 25, ++n) {
    size_t end = std::min(types.size(), start + 25);
    std::vector<std::vector<std::string>> rows;
    for (size_t k = start; k < end; ++k)
      rows.push_back({types[k] == EntityType::Score ? score_text(rng) : pseudo_word(rng, 3)});
    AnnotatedDocument a;
    a.doc.doc_id = "score." + std::to_string(n + 1);
    a.doc.domain = Domain::CS;
    a.doc.tables.push_back(TableGrid::from_rows("scores", rows));
    for (size_t k = start; k < end; ++k) {
      Entity e;
      e.id = "e" + std::to_string(k - start + 1);
      e.anchor = TableAnchor{0, k - start, 0, 0, 1};
      e.type = types[k];
      e.surface = a.doc.tables[0].text(k - start, 0);
      e.provenance = Provenance::Reviewed;
      a.entities.push_back(e);
    }
    a.review_state = ReviewState::Gold;
    docs.push_back(std::move(a));
  }
  return docs;
}

std::vector<ParsedDocument> parsed_only(const std::vector<AnnotatedDocument>& docs) {
  std::vector<ParsedDocument> out;
  for (const auto& d : docs) out.push_back(d.doc);
  return out;
}

void seed_workspace(const Workspace& ws, const SynthCorpus& corpus) {
  for (const auto& d : corpus.truth) ws.put_parsed(d.doc);
  ws.set_partitions(corpus.manifest);
  for (const auto& d : corpus.partition(PartitionName::Seeds)) {
    ws.put_annotations(d);
    ws.put_task(ReviewTask{d.doc.doc_id, std::nullopt, TaskStatus::Done, d.version, 0, d.doc.domain});
  }
}

AnnotatedDocument oracle_review(const Workspace& ws, const AnnotatedDocument& truth, const std::string& reviewer) {
  const std::string& id = truth.doc.doc_id;
  claim_task(ws, id, reviewer);
  auto current = ws.get_annotations(id);
  if (!current) throw Error(ErrorCode::NotFound, "no annotations for " + id);
  auto corrections = diff_annotations(*current, truth);
  if (!corrections.empty()) submit_corrections(ws, id, current->version, corrections, reviewer);
  return complete_task(ws, id, reviewer);
}

}  // namespace scimine
