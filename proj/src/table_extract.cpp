#include "scimine/table_extract.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "scimine/error.hpp"
#include "scimine/serialize.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

std::string_view FlatTable::slice(size_t i, size_t j) const {
  auto it = coord_spans.find({i, j});
  if (it == coord_spans.end()) return {};
  return std::string_view(text).substr(it->second.first, it->second.second - it->second.first);
}

FlatTable flatten_table(const TableGrid& grid) {
  FlatTable f;
  f.text = grid.caption;
  f.text += ' ';
  f.text += kCapMarker;
  for (size_t i = 0; i < grid.rows; ++i) {
    if (i > 0) {
      f.text += ' ';
      f.text += kRowMarker;
    }
    for (size_t j = 0; j < grid.cols; ++j) {
      if (j > 0) {
        f.text += ' ';
        f.text += kSepMarker;
      }
      f.text += ' ';
      size_t b = f.text.size();
      f.text += grid.text(i, j);
      f.coord_spans[{i, j}] = {b, f.text.size()};
    }
  }
  return f;
}

std::vector<std::string> table_labels(ScoreMode mode) {
  std::vector<std::string> out;
  for (auto t : kAllEntityTypes) {
    if (mode == ScoreMode::WithoutScore && t == EntityType::Score) continue;
    out.emplace_back(to_string(t));
  }
  out.emplace_back(kNoneLabel);
  return out;
}

std::string ner_statement(const std::string& cell_text, size_t i, size_t j, const std::string& label) {
  return "The entity type of the cell " + cell_text + ", in row " + std::to_string(i) + ", column " +
         std::to_string(j) + " is " + label + ".";
}

std::string re_statement(const std::string& a_text, Coord a, const std::string& b_text, Coord b) {
  return "Whether the cell " + a_text + ", located in row " + std::to_string(a.first + 1) + ", column " +
         std::to_string(a.second + 1) + ", has a relation with the cell " + b_text + ", located in row " +
         std::to_string(b.first + 1) + ", column " + std::to_string(b.second + 1) + ", or not?";
}

std::vector<PromptInstance> gen_ner_statements(const TableGrid& grid, ScoreMode mode) {
  auto flat = std::make_shared<const FlatTable>(flatten_table(grid));
  auto labels = table_labels(mode);
  std::vector<PromptInstance> out;
  out.reserve(grid.rows * grid.cols * labels.size());
  for (size_t i = 0; i < grid.rows; ++i)
    for (size_t j = 0; j < grid.cols; ++j) {
      std::string cell = grid.text(i, j);
      for (const auto& lab : labels) {
        PromptInstance p;
        p.statement = ner_statement(cell, i + 1, j + 1, lab);
        p.table = flat;
        p.cell = {i, j};
        p.label = lab;
        p.candidates = labels;
        out.push_back(std::move(p));
      }
    }
  return out;
}

namespace {

Coord coord_of(const Entity& e) {
  const auto& a = std::get<TableAnchor>(e.anchor);
  return {a.row, a.col};
}

bool canonical_less(const Entity& a, const Entity& b) {
  const auto& x = std::get<TableAnchor>(a.anchor);
  const auto& y = std::get<TableAnchor>(b.anchor);
  return std::tie(x.row, x.col, x.l, x.r, a.id) < std::tie(y.row, y.col, y.l, y.r, b.id);
}

}  // namespace

std::vector<std::pair<const Entity*, const Entity*>> candidate_pairs(const std::vector<Entity>& entities) {
  std::vector<const Entity*> sorted;
  for (const auto& e : entities)
    if (is_table(e.anchor)) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const Entity* a, const Entity* b) { return canonical_less(*a, *b); });
  std::vector<std::pair<const Entity*, const Entity*>> out;
  for (size_t a = 0; a < sorted.size(); ++a)
    for (size_t b = a + 1; b < sorted.size(); ++b)
      if (sorted[a]->type != sorted[b]->type) out.emplace_back(sorted[a], sorted[b]);
  return out;
}

std::vector<PromptInstance> gen_re_statements(
    const TableGrid& grid, const std::vector<std::pair<const Entity*, const Entity*>>& pairs) {
  auto flat = std::make_shared<const FlatTable>(flatten_table(grid));
  std::vector<PromptInstance> out;
  out.reserve(pairs.size());
  for (auto [x, y] : pairs) {
    if (canonical_less(*y, *x)) std::swap(x, y);
    PromptInstance p;
    p.cell = coord_of(*x);
    p.other = coord_of(*y);
    p.statement = re_statement(grid.text(p.cell.first, p.cell.second), p.cell,
                               grid.text(p.other->first, p.other->second), *p.other);
    p.table = flat;
    p.candidates = {"0", "1"};
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

bool guidable(const Entity& e) { return e.type != EntityType::Score && e.type != EntityType::Setting; }

std::map<std::string, EntityType> dominant_text_types(const std::vector<Entity>& text_entities) {
  std::map<std::string, GazetteerEntry> counts;
  for (const auto& e : text_entities)
    if (!is_table(e.anchor) && is_text_type(e.type)) counts[normalize_surface(e.surface)].counts[e.type]++;
  std::map<std::string, EntityType> out;
  for (const auto& [k, v] : counts)
    if (!k.empty()) out[k] = v.dominant();
  return out;
}

}  // namespace

std::vector<Entity> apply_label_guiding(const std::vector<Entity>& text_entities,
                                        const std::vector<Entity>& table_entities) {
  auto dom = dominant_text_types(text_entities);
  std::vector<Entity> out = table_entities;
  for (auto& e : out) {
    if (!guidable(e)) continue;
    auto it = dom.find(normalize_surface(e.surface));
    if (it != dom.end()) e.type = it->second;
  }
  return out;
}

std::vector<std::string> guiding_violations(const std::vector<Entity>& text_entities,
                                            const std::vector<Entity>& table_entities) {
  auto dom = dominant_text_types(text_entities);
  std::set<std::string> bad;
  for (const auto& e : table_entities) {
    if (!guidable(e)) continue;
    auto key = normalize_surface(e.surface);
    auto it = dom.find(key);
    if (it != dom.end() && it->second != e.type) bad.insert(key);
  }
  return {bad.begin(), bad.end()};
}

std::vector<Inconsistency> structure_diagnostics(const TableGrid& grid, const std::vector<Entity>& entities,
                                                 size_t min_types) {
  std::map<size_t, std::map<EntityType, size_t>> rows, cols;
  for (const auto& e : entities) {
    auto* a = std::get_if<TableAnchor>(&e.anchor);
    if (!a || a->row >= grid.rows || a->col >= grid.cols) continue;
    if (a->col > 0) rows[a->row][e.type]++;
    if (a->row > 0) cols[a->col][e.type]++;
  }
  std::vector<Inconsistency> out;
  for (const auto& [i, m] : rows)
    if (m.size() >= min_types) out.push_back({Inconsistency::Axis::Row, i, m});
  for (const auto& [j, m] : cols)
    if (m.size() >= min_types) out.push_back({Inconsistency::Axis::Col, j, m});
  return out;
}

// ---------------------------------------------------------------------------

bool is_score_text(std::string_view s) {
  static const std::regex re(R"(^\d+(\.\d+)?(/\d+(\.\d+)?)?$)");
  return std::regex_match(s.begin(), s.end(), re);
}

namespace {

const std::set<std::string>& metric_lexicon() {
  static const std::set<std::string> s = {
      "f1",       "f1-score", "f-score", "f-measure", "accuracy", "acc", "acc.",  "precision",
      "recall",   "bleu",     "rouge",   "rouge-l",   "rouge-1",  "rouge-2",  "em",  "exact match",
      "auc",      "roc-auc",  "map",     "mrr",       "ppl",      "perplexity", "wer", "cer",
      "psnr",     "ssim",     "mae",     "rmse",      "mse",      "ndcg",     "hits@1", "hits@10",
      "top-1",    "top-5",    "iou",     "miou",      "p",        "r",        "prec.", "rec."};
  return s;
}

}  // namespace

std::optional<EntityType> HeuristicTableBackend::classify(const TableGrid& grid, size_t i, size_t j,
                                                          bool allow_score) const {
  std::string cell = grid.text(i, j);
  if (cell.empty()) return std::nullopt;
  if (allow_score && is_score_text(cell)) return EntityType::Score;
  auto lower = text::to_lower(cell);
  if (auto t = g_.lookup(lower)) return t;
  if (auto t = g_.lookup(normalize_surface(cell))) return t;
  if (metric_lexicon_ && (i == 0 || j == 0) && metric_lexicon().count(lower)) return EntityType::Metric;
  return std::nullopt;
}

std::vector<std::vector<double>> HeuristicTableBackend::ner_probs(const TableGrid& grid, const FlatTable&,
                                                                  const std::vector<Coord>& coords,
                                                                  const std::vector<std::string>& labels) {
  std::vector<std::vector<double>> out;
  out.reserve(coords.size());
  size_t none_idx = std::find(labels.begin(), labels.end(), kNoneLabel) - labels.begin();
  bool allow_score = std::find(labels.begin(), labels.end(), to_string(EntityType::Score)) != labels.end();
  for (auto [i, j] : coords) {
    std::vector<double> p(labels.size(), 0.0);
    size_t hit = none_idx;
    if (auto t = classify(grid, i, j, allow_score)) {
      auto it = std::find(labels.begin(), labels.end(), to_string(*t));
      if (it != labels.end()) hit = it - labels.begin();
    }
    if (hit < p.size()) p[hit] = 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> HeuristicTableBackend::re_probs(const TableGrid&, const FlatTable&,
                                                    const std::vector<std::pair<Coord, Coord>>& pairs,
                                                    const std::map<Coord, EntityType>& types) {
  std::vector<double> out;
  out.reserve(pairs.size());
  auto type_at = [&](Coord c) -> std::optional<EntityType> {
    auto it = types.find(c);
    if (it == types.end()) return std::nullopt;
    return it->second;
  };
  for (auto [a, b] : pairs) {
    double p = 0.0;
    for (int flip = 0; flip < 2 && p == 0.0; ++flip) {
      Coord head = flip ? b : a, score = flip ? a : b;
      if (type_at(score) != EntityType::Score) continue;
      auto ht = type_at(head);
      if (!ht || *ht == EntityType::Score) continue;
      bool row_header = head.second == 0 && head.first == score.first && score.second > 0;
      bool col_header = head.first == 0 && head.second == score.second && score.first > 0;
      if (row_header || col_header) p = 1.0;
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

RemoteTableBackend::RemoteTableBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.post) cfg_.post = default_http_post(cfg_.timeout_seconds);
  while (!cfg_.endpoint.empty() && cfg_.endpoint.back() == '/') cfg_.endpoint.pop_back();
}

std::string RemoteTableBackend::call(const std::string& path, const std::string& body) {
  std::pair<int, std::string> res;
  try {
    res = cfg_.post(cfg_.endpoint + path, body, {});
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendUnavailable, e.what());
  }
  if (res.first >= 500 || res.first == 404)
    throw Error(ErrorCode::BackendUnavailable, "table extractor returned HTTP " + std::to_string(res.first));
  if (res.first != 200)
    throw Error(ErrorCode::BackendProtocol, "table extractor returned HTTP " + std::to_string(res.first));
  return res.second;
}

namespace {

Json parse_reply(const std::string& body) {
  try {
    Json j = parse_json(body);
    if (!j.is_object() || !j.contains("probs") || !j["probs"].is_array())
      throw Error(ErrorCode::BackendProtocol, "response lacks a probs array");
    return j;
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendProtocol, e.what());
  }
}

double as_prob(const Json& v) {
  if (!v.is_number()) throw Error(ErrorCode::BackendProtocol, "probability is not a number");
  return v.get<double>();
}

}  // namespace

std::vector<std::vector<double>> RemoteTableBackend::ner_probs(const TableGrid&, const FlatTable& flat,
                                                               const std::vector<Coord>& coords,
                                                               const std::vector<std::string>& labels) {
  Json c = Json::array();
  for (auto [i, j] : coords) c.push_back({i, j});
  Json req{{"flat_table", flat.text}, {"coords", std::move(c)}, {"labels", labels}};
  Json reply = parse_reply(call("/v1/table/ner", dump(req)));
  std::vector<std::string> reply_labels = labels;
  if (auto it = reply.find("labels"); it != reply.end()) {
    if (!it->is_array()) throw Error(ErrorCode::BackendProtocol, "labels is not an array");
    reply_labels.clear();
    for (const auto& l : *it) {
      if (!l.is_string()) throw Error(ErrorCode::BackendProtocol, "label is not a string");
      auto s = l.get<std::string>();
      if (std::find(labels.begin(), labels.end(), s) == labels.end())
        throw Error(ErrorCode::BackendProtocol, "type outside the schema: " + s);
      reply_labels.push_back(s);
    }
  }
  const auto& probs = reply["probs"];
  if (probs.size() != coords.size()) throw Error(ErrorCode::BackendProtocol, "probs length differs from coords");
  std::vector<std::vector<double>> out;
  for (const auto& row : probs) {
    if (!row.is_array() || row.size() != reply_labels.size())
      throw Error(ErrorCode::BackendProtocol, "probability row has the wrong width");
    std::vector<double> p(labels.size(), 0.0);
    for (size_t k = 0; k < row.size(); ++k) {
      size_t idx = std::find(labels.begin(), labels.end(), reply_labels[k]) - labels.begin();
      p[idx] = as_prob(row[k]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> RemoteTableBackend::re_probs(const TableGrid&, const FlatTable& flat,
                                                 const std::vector<std::pair<Coord, Coord>>& pairs,
                                                 const std::map<Coord, EntityType>&) {
  Json p = Json::array();
  for (auto [a, b] : pairs) p.push_back({{a.first, a.second}, {b.first, b.second}});
  Json req{{"flat_table", flat.text}, {"pairs", std::move(p)}};
  Json reply = parse_reply(call("/v1/table/re", dump(req)));
  const auto& probs = reply["probs"];
  if (probs.size() != pairs.size()) throw Error(ErrorCode::BackendProtocol, "probs length differs from pairs");
  std::vector<double> out;
  for (const auto& v : probs) out.push_back(as_prob(v));
  return out;
}

// ---------------------------------------------------------------------------

TableExtraction extract_table(const TableGrid& grid, size_t table_idx, const std::vector<Entity>& text_entities,
                              TableBackend& backend, const TableExtractOptions& options) {
  TableExtraction out;
  FlatTable flat = flatten_table(grid);
  auto labels = table_labels(options.mode);
  std::vector<Coord> coords;
  for (size_t i = 0; i < grid.rows; ++i)
    for (size_t j = 0; j < grid.cols; ++j)
      if (!grid.at(i, j).empty()) coords.push_back({i, j});
  if (coords.empty()) return out;

  auto probs = backend.ner_probs(grid, flat, coords, labels);
  if (probs.size() != coords.size()) throw Error(ErrorCode::BackendProtocol, "backend returned wrong row count");
  std::vector<Entity> ents;
  for (size_t k = 0; k < coords.size(); ++k) {
    const auto& p = probs[k];
    if (p.size() != labels.size()) throw Error(ErrorCode::BackendProtocol, "backend returned wrong label count");
    size_t best = std::max_element(p.begin(), p.end()) - p.begin();
    if (labels[best] == kNoneLabel) continue;
    auto t = parse_entity_type(labels[best]);
    if (!t) throw Error(ErrorCode::BackendProtocol, "type outside the schema: " + labels[best]);
    auto [i, j] = coords[k];
    Entity e;
    e.anchor = TableAnchor{table_idx, i, j, 0, grid.at(i, j).size()};
    e.type = *t;
    e.surface = grid.text(i, j);
    e.provenance = Provenance::Auto;
    ents.push_back(std::move(e));
  }
  if (options.label_guiding) ents = apply_label_guiding(text_entities, ents);

  // Temporary ids so candidate pairs are canonical.
  for (size_t k = 0; k < ents.size(); ++k) ents[k].id = "c" + std::to_string(k);
  auto pairs = candidate_pairs(ents);
  std::vector<std::pair<Coord, Coord>> cpairs;
  std::map<Coord, EntityType> types;
  for (const auto& e : ents) types[coord_of(e)] = e.type;
  for (auto [a, b] : pairs) cpairs.emplace_back(coord_of(*a), coord_of(*b));
  if (!cpairs.empty()) {
    auto rp = backend.re_probs(grid, flat, cpairs, types);
    if (rp.size() != cpairs.size()) throw Error(ErrorCode::BackendProtocol, "backend returned wrong pair count");
    for (size_t k = 0; k < cpairs.size(); ++k)
      if (rp[k] >= options.re_threshold) out.relations.push_back(cpairs[k]);
  }
  for (auto& e : ents) e.id.clear();
  out.entities = std::move(ents);
  return out;
}

std::string export_table_training(const std::vector<AnnotatedDocument>& docs, bool relations, ScoreMode mode) {
  std::string out;
  for (const auto& d : docs) {
    for (size_t t = 0; t < d.doc.tables.size(); ++t) {
      const auto& grid = d.doc.tables[t];
      FlatTable flat = flatten_table(grid);
      std::vector<Entity> ents;
      for (const auto& e : d.entities)
        if (auto* a = std::get_if<TableAnchor>(&e.anchor); a && a->table == t) ents.push_back(e);
      if (!relations) {
        auto labels = table_labels(mode);
        std::map<Coord, std::string> gold;
        for (const auto& e : ents) {
          if (mode == ScoreMode::WithoutScore && e.type == EntityType::Score) continue;
          gold.emplace(coord_of(e), std::string(to_string(e.type)));
        }
        for (const auto& inst : gen_ner_statements(grid, mode)) {
          auto it = gold.find(inst.cell);
          std::string pos = it == gold.end() ? kNoneLabel : it->second;
          Json neg = Json::array();
          for (const auto& l : labels)
            if (l != pos) neg.push_back(l);
          out += dump(Json{{"kind", "table_ner"}, {"doc_id", d.doc.doc_id}, {"table", t},
                           {"statement", inst.statement}, {"flat_table", flat.text},
                           {"positive", pos}, {"negatives", std::move(neg)}});
          out += '\n';
        }
      } else {
        std::set<std::pair<std::string, std::string>> gold;
        for (const auto& r : d.relations)
          if (r.table == t) gold.insert({r.e1, r.e2});
        auto pairs = candidate_pairs(ents);
        auto inst = gen_re_statements(grid, pairs);
        for (size_t k = 0; k < pairs.size(); ++k) {
          auto key = std::minmax(pairs[k].first->id, pairs[k].second->id);
          bool pos = gold.count({key.first, key.second}) > 0;
          out += dump(Json{{"kind", "table_re"}, {"doc_id", d.doc.doc_id}, {"table", t},
                           {"statement", inst[k].statement}, {"flat_table", flat.text},
                           {"positive", pos ? "1" : "0"}, {"negatives", Json::array({pos ? "0" : "1"})}});
          out += '\n';
        }
      }
    }
  }
  return out;
}

}  // namespace scimine
