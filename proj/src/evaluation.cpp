#include "scimine/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>
#include <tuple>

#include "scimine/error.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

PRF PRF::from_counts(size_t tp, size_t fp, size_t fn) {
  PRF p;
  p.tp = tp;
  p.fp = fp;
  p.fn = fn;
  p.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  p.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
  return p;
}

PRF& PRF::operator+=(const PRF& o) {
  *this = from_counts(tp + o.tp, fp + o.fp, fn + o.fn);
  return *this;
}

namespace {

template <class Key>
PRF multiset_match(const std::vector<Key>& gold, const std::vector<Key>& pred) {
  std::map<Key, size_t> g;
  for (const auto& k : gold) ++g[k];
  size_t tp = 0;
  for (const auto& k : pred) {
    auto it = g.find(k);
    if (it != g.end() && it->second > 0) {
      --it->second;
      ++tp;
    }
  }
  return PRF::from_counts(tp, pred.size() - tp, gold.size() - tp);
}

using EntityKey = std::tuple<std::string, std::string, std::string>;

EntityKey key_of(const ScoredEntity& e) { return {e.doc, anchor_key(e.anchor), e.type}; }

std::tuple<std::string, size_t, std::string, std::string, std::string, std::string> key_of(
    const ScoredRelation& r, bool strict) {
  auto a = anchor_key(r.a), b = anchor_key(r.b);
  std::string ta = strict ? r.type_a : "", tb = strict ? r.type_b : "";
  if (std::tie(b, tb) < std::tie(a, ta)) {
    std::swap(a, b);
    std::swap(ta, tb);
  }
  return {r.doc, r.table, a, b, ta, tb};
}

}  // namespace

PRF score_ner(const std::vector<ScoredEntity>& gold, const std::vector<ScoredEntity>& pred) {
  std::vector<EntityKey> g, p;
  for (const auto& e : gold) g.push_back(key_of(e));
  for (const auto& e : pred) p.push_back(key_of(e));
  return multiset_match(g, p);
}

PRF score_re(const std::vector<ScoredRelation>& gold, const std::vector<ScoredRelation>& pred, bool strict_types) {
  using K = decltype(key_of(gold.front(), false));
  std::vector<K> g, p;
  for (const auto& r : gold) g.push_back(key_of(r, strict_types));
  for (const auto& r : pred) p.push_back(key_of(r, strict_types));
  return multiset_match(g, p);
}

std::vector<ScoredEntity> scored_entities(const AnnotatedDocument& doc, EntityScope scope) {
  std::vector<ScoredEntity> out;
  for (const auto& e : doc.entities) {
    bool t = is_table(e.anchor);
    if ((scope == EntityScope::Text && t) || (scope == EntityScope::Table && !t)) continue;
    out.push_back({doc.doc.doc_id, e.anchor, std::string(to_string(e.type))});
  }
  return out;
}

std::vector<ScoredRelation> scored_relations(const AnnotatedDocument& doc) {
  std::vector<ScoredRelation> out;
  for (const auto& r : doc.relations) {
    const Entity* a = doc.find_entity(r.e1);
    const Entity* b = doc.find_entity(r.e2);
    if (!a || !b) continue;
    out.push_back({doc.doc.doc_id, r.table, a->anchor, b->anchor, std::string(to_string(a->type)),
                   std::string(to_string(b->type))});
  }
  return out;
}

// ---------------------------------------------------------------------------

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  missing += o.missing;
  unannotated += o.unannotated;
  incorrect_type += o.incorrect_type;
  undefined_type += o.undefined_type;
  others += o.others;
  return *this;
}

ErrorCounts categorize_errors(const std::vector<ScoredEntity>& gold, const std::vector<ScoredEntity>& pred,
                              const std::set<std::string>& predefined, size_t parse_issues) {
  // Exact matches first, as in scoring.
  std::map<EntityKey, size_t> g;
  for (const auto& e : gold) ++g[key_of(e)];
  std::vector<const ScoredEntity*> left_pred;
  for (const auto& e : pred) {
    auto it = g.find(key_of(e));
    if (it != g.end() && it->second > 0)
      --it->second;
    else
      left_pred.push_back(&e);
  }
  // Leftover gold per boundary.
  std::map<std::pair<std::string, std::string>, size_t> gold_by_boundary;
  size_t gold_left = 0;
  for (const auto& [k, n] : g) {
    gold_by_boundary[{std::get<0>(k), std::get<1>(k)}] += n;
    gold_left += n;
  }
  // Defined types pair first so the result is independent of input order.
  std::sort(left_pred.begin(), left_pred.end(), [&](const ScoredEntity* a, const ScoredEntity* b) {
    bool da = predefined.count(a->type) > 0, db = predefined.count(b->type) > 0;
    return std::make_tuple(a->doc, anchor_key(a->anchor), !da, a->type) <
           std::make_tuple(b->doc, anchor_key(b->anchor), !db, b->type);
  });
  ErrorCounts c;
  for (const auto* p : left_pred) {
    auto it = gold_by_boundary.find({p->doc, anchor_key(p->anchor)});
    if (it != gold_by_boundary.end() && it->second > 0) {
      --it->second;
      --gold_left;
      if (predefined.count(p->type))
        ++c.incorrect_type;
      else
        ++c.undefined_type;
    } else {
      ++c.unannotated;
    }
  }
  c.missing = gold_left;
  c.others = parse_issues;
  return c;
}

std::map<EntityType, size_t> entity_counts(const std::vector<AnnotatedDocument>& docs) {
  std::map<EntityType, size_t> counts;
  for (const auto& d : docs)
    for (const auto& e : d.entities)
      if (is_table(e.anchor)) ++counts[e.type];
  return counts;
}

std::map<EntityType, double> entity_distribution(const std::vector<AnnotatedDocument>& docs) {
  auto counts = entity_counts(docs);
  size_t total = 0;
  for (const auto& [t, n] : counts) total += n;
  if (total == 0) throw Error(ErrorCode::EmptyCorpus, "no table entities to count");
  std::map<EntityType, double> out;
  for (auto t : kAllEntityTypes) out[t] = static_cast<double>(counts[t]) / static_cast<double>(total);
  return out;
}

// ---------------------------------------------------------------------------

Clock steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

std::string hardware_description() {
  std::string model;
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      auto colon = line.find(':');
      if (colon != std::string::npos) model = std::string(text::trim(line.substr(colon + 1)));
      break;
    }
  }
  if (model.empty()) model = "unknown CPU";
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

namespace {

std::optional<double> rate(size_t items, double seconds) {
  if (items == 0 || !(seconds > 0)) return std::nullopt;
  return static_cast<double>(items) / seconds;
}

}  // namespace

SpeedRecord measure_speed(const std::vector<ParsedDocument>& docs, TextBackend& text, TableBackend& table,
                          size_t batch, const Clock& clock_in, const TableExtractOptions& options) {
  Clock clock = clock_in ? clock_in : steady_clock_seconds();
  SpeedRecord r;
  r.batch_size = std::max<size_t>(1, batch);
  r.hardware = hardware_description();

  // Sentence batches become small synthetic documents.
  std::vector<ParsedDocument> text_batches;
  ParsedDocument cur;
  size_t in_cur = 0;
  auto flush = [&] {
    if (in_cur == 0) return;
    text_batches.push_back(std::move(cur));
    cur = ParsedDocument{};
    in_cur = 0;
  };
  for (const auto& d : docs)
    for (const auto* s : d.sentences()) {
      if (cur.sections.empty()) {
        cur.doc_id = "batch" + std::to_string(text_batches.size());
        cur.sections.push_back(Section{"", 1, {Paragraph{}}});
      }
      cur.sections[0].paragraphs[0].push_back(*s);
      ++r.sentences;
      if (++in_cur == r.batch_size) flush();
    }
  flush();
  r.text_batches = text_batches.size();

  std::vector<const TableGrid*> tables;
  for (const auto& d : docs)
    for (const auto& t : d.tables) tables.push_back(&t);
  r.tables = tables.size();
  r.table_batches = (tables.size() + r.batch_size - 1) / r.batch_size;

  if (!text_batches.empty()) {
    text.extract(text_batches.front());  // warm-up
    double t0 = clock();
    for (const auto& b : text_batches) text.extract(b);
    r.text_seconds = clock() - t0;
  }

  if (!tables.empty()) {
    auto labels = table_labels(options.mode);
    std::vector<FlatTable> flats;
    std::vector<std::vector<Coord>> coords(tables.size());
    for (size_t k = 0; k < tables.size(); ++k) {
      flats.push_back(flatten_table(*tables[k]));
      for (size_t i = 0; i < tables[k]->rows; ++i)
        for (size_t j = 0; j < tables[k]->cols; ++j)
          if (!tables[k]->at(i, j).empty()) coords[k].push_back({i, j});
    }
    table.ner_probs(*tables[0], flats[0], coords[0], labels);  // warm-up
    std::vector<std::vector<std::vector<double>>> probs(tables.size());
    double t0 = clock();
    for (size_t k = 0; k < tables.size(); ++k) probs[k] = table.ner_probs(*tables[k], flats[k], coords[k], labels);
    r.table_ner_seconds = clock() - t0;

    // Relation inputs come from the NER output above and are built outside the timed region.
    std::vector<std::vector<std::pair<Coord, Coord>>> pairs(tables.size());
    std::vector<std::map<Coord, EntityType>> types(tables.size());
    for (size_t k = 0; k < tables.size(); ++k) {
      std::vector<Entity> ents;
      for (size_t c = 0; c < coords[k].size(); ++c) {
        const auto& p = probs[k][c];
        size_t best = std::max_element(p.begin(), p.end()) - p.begin();
        auto t = parse_entity_type(labels[best]);
        if (!t) continue;
        Entity e;
        e.id = "c" + std::to_string(c);
        e.anchor = TableAnchor{0, coords[k][c].first, coords[k][c].second, 0, 1};
        e.type = *t;
        types[k][coords[k][c]] = *t;
        ents.push_back(std::move(e));
      }
      for (auto [a, b] : candidate_pairs(ents)) {
        const auto& x = std::get<TableAnchor>(a->anchor);
        const auto& y = std::get<TableAnchor>(b->anchor);
        pairs[k].push_back({{x.row, x.col}, {y.row, y.col}});
      }
    }
    table.re_probs(*tables[0], flats[0], pairs[0], types[0]);  // warm-up
    t0 = clock();
    for (size_t k = 0; k < tables.size(); ++k)
      if (!pairs[k].empty()) table.re_probs(*tables[k], flats[k], pairs[k], types[k]);
    r.table_re_seconds = clock() - t0;
  }

  r.text_per_s = rate(r.sentences, r.text_seconds);
  r.table_ner_per_s = rate(r.tables, r.table_ner_seconds);
  r.table_re_per_s = rate(r.tables, r.table_re_seconds);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

Json prf_json(const PRF& p) {
  return Json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
              {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
}

Json tasks_json(const TaskScores& t) {
  return Json{{"text_ner", prf_json(t.text_ner)}, {"table_ner", prf_json(t.table_ner)},
              {"table_re", prf_json(t.table_re)}};
}

Json errors_json(const ErrorCounts& e) {
  return Json{{"missing", e.missing},
              {"unannotated", e.unannotated},
              {"incorrect_type", e.incorrect_type},
              {"undefined_type", e.undefined_type},
              {"others", e.others}};
}

Json opt_num(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

}  // namespace

Json EvalReport::to_json() const {
  Json j;
  j["hardware"] = hardware;
  j["per_task"] = tasks_json(overall);
  Json dom = Json::object();
  for (const auto& [d, t] : per_domain) dom[std::string(to_string(d))] = tasks_json(t);
  j["per_domain"] = std::move(dom);
  j["macro_over_domains"] = tasks_json(macro);
  if (speed) {
    j["speed"] = Json{{"batch_size", speed->batch_size},
                      {"sentences", speed->sentences},
                      {"tables", speed->tables},
                      {"text_batches", speed->text_batches},
                      {"table_batches", speed->table_batches},
                      {"text_seconds", speed->text_seconds},
                      {"table_ner_seconds", speed->table_ner_seconds},
                      {"table_re_seconds", speed->table_re_seconds},
                      {"text", opt_num(speed->text_per_s)},
                      {"table_ner", opt_num(speed->table_ner_per_s)},
                      {"table_re", opt_num(speed->table_re_per_s)},
                      {"hardware", speed->hardware}};
  } else {
    j["speed"] = nullptr;
  }
  Json errs = Json::object();
  if (text_errors) errs["text_ner"] = errors_json(*text_errors);
  if (table_errors) errs["table_ner"] = errors_json(*table_errors);
  j["errors"] = std::move(errs);
  Json dist = Json::object();
  for (const auto& [t, f] : entity_distribution) dist[std::string(to_string(t))] = f;
  j["entity_distribution"] = std::move(dist);
  return j;
}

std::string EvalReport::render_text() const {
  std::string out;
  char buf[256];
  if (!hardware.empty()) out += "# hardware: " + hardware + "\n";
  std::snprintf(buf, sizeof buf, "%-10s | %-20s | %-20s | %-20s\n", "", "Text NER", "Table NER", "Table RE");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10s | %6s %6s %6s | %6s %6s %6s | %6s %6s %6s\n", "", "P", "R", "F1", "P",
                "R", "F1", "P", "R", "F1");
  out += buf;
  auto row = [&](const std::string& name, const TaskScores& t) {
    std::snprintf(buf, sizeof buf, "%-10s | %6.1f %6.1f %6.1f | %6.1f %6.1f %6.1f | %6.1f %6.1f %6.1f\n",
                  name.c_str(), 100 * t.text_ner.precision, 100 * t.text_ner.recall, 100 * t.text_ner.f1,
                  100 * t.table_ner.precision, 100 * t.table_ner.recall, 100 * t.table_ner.f1,
                  100 * t.table_re.precision, 100 * t.table_re.recall, 100 * t.table_re.f1);
    out += buf;
  };
  row("Overall", overall);
  for (const auto& [d, t] : per_domain) row(std::string(to_string(d)), t);
  if (per_domain.size() > 1) row("Macro", macro);
  if (speed) {
    auto fmt = [](const std::optional<double>& v) {
      if (!v) return std::string("n/a");
      char b[64];
      std::snprintf(b, sizeof b, "%.1f", *v);
      return std::string(b);
    };
    out += "\nspeed (batch " + std::to_string(speed->batch_size) + "): text NER " + fmt(speed->text_per_s) +
           " sent/s, table NER " + fmt(speed->table_ner_per_s) + " table/s, table RE " +
           fmt(speed->table_re_per_s) + " table/s\n";
  }
  auto err_line = [&](const char* name, const ErrorCounts& e) {
    std::snprintf(buf, sizeof buf,
                  "%s errors: missing %zu, unannotated %zu, incorrect type %zu, undefined type %zu, others %zu\n",
                  name, e.missing, e.unannotated, e.incorrect_type, e.undefined_type, e.others);
    out += buf;
  };
  if (text_errors || table_errors) out += "\n";
  if (text_errors) err_line("text NER", *text_errors);
  if (table_errors) err_line("table NER", *table_errors);
  if (!entity_distribution.empty()) {
    out += "\ntable entity distribution:";
    for (const auto& [t, f] : entity_distribution) {
      std::snprintf(buf, sizeof buf, " %s %.3f", std::string(to_string(t)).c_str(), f);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

EvalReport evaluate(const std::vector<AnnotatedDocument>& gold, const std::vector<AnnotatedDocument>& pred,
                    const EvalOptions& options) {
  std::map<std::string, const AnnotatedDocument*> by_id;
  for (const auto& p : pred) by_id[p.doc.doc_id] = &p;
  std::set<std::string> predefined = options.predefined;
  if (predefined.empty())
    for (auto t : kAllEntityTypes) predefined.insert(std::string(to_string(t)));

  struct Bucket {
    std::vector<ScoredEntity> gt, pt, gtab, ptab;
    std::vector<ScoredRelation> gr, pr;
  };
  Bucket all;
  std::map<Domain, Bucket> domains;
  auto append = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
  for (const auto& g : gold) {
    const AnnotatedDocument* p = by_id.count(g.doc.doc_id) ? by_id[g.doc.doc_id] : nullptr;
    for (Bucket* b : {&all, &domains[g.doc.domain]}) {
      append(b->gt, scored_entities(g, EntityScope::Text));
      append(b->gtab, scored_entities(g, EntityScope::Table));
      append(b->gr, scored_relations(g));
      if (p) {
        append(b->pt, scored_entities(*p, EntityScope::Text));
        append(b->ptab, scored_entities(*p, EntityScope::Table));
        append(b->pr, scored_relations(*p));
      }
    }
  }
  auto score = [&](const Bucket& b) {
    return TaskScores{score_ner(b.gt, b.pt), score_ner(b.gtab, b.ptab), score_re(b.gr, b.pr, options.strict_re_types)};
  };
  EvalReport r;
  r.overall = score(all);
  if (options.per_domain) {
    for (const auto& [d, b] : domains) r.per_domain[d] = score(b);
    if (!r.per_domain.empty()) {
      auto mean = [&](auto pick) {
        PRF m;
        for (const auto& [d, t] : r.per_domain) {
          const PRF& p = pick(t);
          m.tp += p.tp;
          m.fp += p.fp;
          m.fn += p.fn;
          m.precision += p.precision;
          m.recall += p.recall;
          m.f1 += p.f1;
        }
        double n = static_cast<double>(r.per_domain.size());
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
        return m;
      };
      r.macro.text_ner = mean([](const TaskScores& t) -> const PRF& { return t.text_ner; });
      r.macro.table_ner = mean([](const TaskScores& t) -> const PRF& { return t.table_ner; });
      r.macro.table_re = mean([](const TaskScores& t) -> const PRF& { return t.table_re; });
    }
  }
  if (options.errors) {
    r.text_errors = categorize_errors(all.gt, all.pt, predefined);
    r.table_errors = categorize_errors(all.gtab, all.ptab, predefined);
  }
  try {
    r.entity_distribution = entity_distribution(gold);
  } catch (const Error&) {
  }
  r.hardware = hardware_description();
  return r;
}

}  // namespace scimine
