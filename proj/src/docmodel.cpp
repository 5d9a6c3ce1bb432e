#include "scimine/docmodel.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "scimine/error.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Task: return "Task";
    case EntityType::Dataset: return "Dataset";
    case EntityType::Metric: return "Metric";
    case EntityType::Model: return "Model";
    case EntityType::Method: return "Method";
    case EntityType::Setting: return "Setting";
    case EntityType::Score: return "Score";
  }
  return "?";
}

std::optional<EntityType> parse_entity_type(std::string_view s) {
  for (auto t : kAllEntityTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

bool is_text_type(EntityType t) { return t != EntityType::Setting && t != EntityType::Score; }

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Auto: return "auto";
    case Provenance::Mapped: return "mapped";
    case Provenance::Llm: return "llm";
    case Provenance::Reviewed: return "reviewed";
  }
  return "?";
}

std::optional<Provenance> parse_provenance(std::string_view s) {
  for (auto p : {Provenance::Auto, Provenance::Mapped, Provenance::Llm, Provenance::Reviewed})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::string_view to_string(ReviewState s) {
  switch (s) {
    case ReviewState::Unreviewed: return "unreviewed";
    case ReviewState::InReview: return "in_review";
    case ReviewState::Gold: return "gold";
  }
  return "?";
}

std::optional<ReviewState> parse_review_state(std::string_view s) {
  for (auto r : {ReviewState::Unreviewed, ReviewState::InReview, ReviewState::Gold})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::string_view to_string(Severity s) { return s == Severity::Error ? "ERROR" : "WARNING"; }

bool is_table(const Anchor& a) { return std::holds_alternative<TableAnchor>(a); }

std::string anchor_key(const Anchor& a) {
  char buf[128];
  if (auto* t = std::get_if<TextAnchor>(&a))
    std::snprintf(buf, sizeof buf, "s%zu:%zu-%zu", t->sentence, t->l, t->r);
  else {
    const auto& c = std::get<TableAnchor>(a);
    std::snprintf(buf, sizeof buf, "t%zu:%zu,%zu:%zu-%zu", c.table, c.row, c.col, c.l, c.r);
  }
  return buf;
}

TableRelation make_relation(std::string a, std::string b, size_t table, Provenance p) {
  if (b < a) std::swap(a, b);
  return TableRelation{std::move(a), std::move(b), table, p};
}

const Entity* AnnotatedDocument::find_entity(std::string_view id) const {
  for (const auto& e : entities)
    if (e.id == id) return &e;
  return nullptr;
}

std::string AnnotatedDocument::next_entity_id() const {
  size_t next = 1;
  for (const auto& e : entities) {
    if (e.id.size() < 2 || e.id[0] != 'e') continue;
    try {
      size_t pos = 0;
      size_t n = std::stoull(e.id.substr(1), &pos);
      if (pos == e.id.size() - 1) next = std::max(next, n + 1);
    } catch (...) {
    }
  }
  return "e" + std::to_string(next);
}

std::optional<std::vector<std::string>> resolve_anchor(const ParsedDocument& doc,
                                                       const Anchor& anchor) {
  const std::vector<std::string>* words = nullptr;
  size_t l = 0, r = 0;
  if (auto* t = std::get_if<TextAnchor>(&anchor)) {
    auto sents = doc.sentences();
    if (t->sentence >= sents.size()) return std::nullopt;
    words = sents[t->sentence];
    l = t->l;
    r = t->r;
  } else {
    const auto& c = std::get<TableAnchor>(anchor);
    if (c.table >= doc.tables.size()) return std::nullopt;
    const auto& g = doc.tables[c.table];
    if (c.row >= g.rows || c.col >= g.cols) return std::nullopt;
    words = &g.at(c.row, c.col);
    l = c.l;
    r = c.r;
  }
  if (!(l < r && r <= words->size())) return std::nullopt;
  return std::vector<std::string>(words->begin() + l, words->begin() + r);
}

std::optional<std::string> anchor_surface(const ParsedDocument& doc, const Anchor& anchor) {
  auto w = resolve_anchor(doc, anchor);
  if (!w) return std::nullopt;
  return text::join(*w, " ");
}

Entity make_entity(const ParsedDocument& doc, std::string id, const Anchor& anchor,
                   EntityType type, Provenance provenance) {
  Entity e;
  e.id = std::move(id);
  e.anchor = anchor;
  e.type = type;
  e.surface = anchor_surface(doc, anchor).value_or("");
  e.provenance = provenance;
  return e;
}

// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& determiners() {
  static const std::set<std::string> s = {"the", "a", "an", "this", "its", "these", "such"};
  return s;
}

const std::set<std::string>& generic_heads() {
  static const std::set<std::string> s = {"network", "networks", "neural", "model"};
  return s;
}

const std::set<std::string>& vague_terms() {
  static const std::set<std::string> s = {"neural network", "neural networks",
                                          "encoder-decoder architecture",
                                          "natural language processing"};
  return s;
}

bool is_generic(const std::string& w) { return generic_heads().count(text::to_lower(w)) > 0; }

}  // namespace

std::string normalize_surface(std::string_view s) {
  auto words = text::split_ws(text::to_lower(s));
  bool changed = true;
  while (changed) {
    changed = false;
    while (words.size() > 1 && determiners().count(words.front())) {
      words.erase(words.begin());
      changed = true;
    }
    if (words.size() > 1 && generic_heads().count(words.back())) {
      words.pop_back();
      changed = true;
    }
    if (words.size() > 1 && generic_heads().count(words.front())) {
      words.erase(words.begin());
      changed = true;
    }
  }
  return text::join(words, " ");
}

std::string trim_generic_heads(std::string_view s) {
  auto words = text::split_ws(s);
  size_t b = 0, e = words.size();
  while (e - b > 1 && is_generic(words[e - 1])) --e;
  while (e - b > 1 && is_generic(words[b])) ++b;
  if (b == 0 && e == words.size()) return "";
  return text::join(std::vector<std::string>(words.begin() + b, words.begin() + e), " ");
}

ValidationReport validate(const AnnotatedDocument& doc) {
  ValidationReport out;
  auto add = [&](std::string rule, Severity sev, const std::string& id, std::optional<Anchor> a,
                 std::string msg, std::string sugg = "") {
    out.push_back(Finding{std::move(rule), sev, id, std::move(a), std::move(msg), std::move(sugg)});
  };

  std::map<std::string, int> id_count;
  for (const auto& e : doc.entities) ++id_count[e.id];

  for (const auto& e : doc.entities) {
    if (id_count[e.id] > 1) add("duplicate_id", Severity::Error, e.id, e.anchor, "entity id used more than once");
    auto surface = anchor_surface(doc.doc, e.anchor);
    if (!surface) {
      add("anchor", Severity::Error, e.id, e.anchor, "anchor does not resolve: " + anchor_key(e.anchor));
    } else if (*surface != e.surface) {
      add("surface", Severity::Error, e.id, e.anchor,
          "surface '" + e.surface + "' differs from anchored words '" + *surface + "'");
    }
    if (!is_table(e.anchor) && !is_text_type(e.type))
      add("modality", Severity::Error, e.id, e.anchor,
          std::string(to_string(e.type)) + " is only allowed in tables");

    auto words = text::split_ws(e.surface);
    if (words.size() > 1 && determiners().count(text::to_lower(words.front()))) {
      std::vector<std::string> rest(words.begin() + 1, words.end());
      add("rule7", Severity::Warning, e.id, e.anchor,
          "span starts with determiner '" + words.front() + "'", text::join(rest, " "));
    }
    if (auto trimmed = trim_generic_heads(e.surface); !trimmed.empty())
      add("rule4", Severity::Warning, e.id, e.anchor, "generic head word at span edge", trimmed);
    if (vague_terms().count(text::collapse_ws(text::to_lower(e.surface))))
      add("rule5", Severity::Warning, e.id, e.anchor, "vague term '" + e.surface + "'");
  }

  for (const auto& r : doc.relations) {
    std::string key = r.e1 + "|" + r.e2;
    const Entity* a = doc.find_entity(r.e1);
    const Entity* b = doc.find_entity(r.e2);
    if (!a || !b) {
      add("relation_endpoint", Severity::Error, key, std::nullopt, "relation endpoint missing");
      continue;
    }
    if (!is_table(a->anchor) || !is_table(b->anchor)) {
      add("relation_endpoint", Severity::Error, key, std::nullopt, "relation endpoint is not a table entity");
      continue;
    }
    if (std::get<TableAnchor>(a->anchor).table != r.table ||
        std::get<TableAnchor>(b->anchor).table != r.table)
      add("cross_table", Severity::Error, key, std::nullopt, "relation endpoints are not both in table " + std::to_string(r.table));
    if (a->type == b->type)
      add("rule8", Severity::Error, key, std::nullopt,
          "relation between two " + std::string(to_string(a->type)) + " entities");
    if (a->id == b->id)
      add("relation_endpoint", Severity::Error, key, std::nullopt, "relation links an entity to itself");
  }

  std::sort(out.begin(), out.end());
  return out;
}

bool has_errors(const ValidationReport& report) {
  return std::any_of(report.begin(), report.end(),
                     [](const Finding& f) { return f.severity == Severity::Error; });
}

// ---------------------------------------------------------------------------

std::string_view to_string(PartitionName p) {
  switch (p) {
    case PartitionName::Seeds: return "seeds";
    case PartitionName::Added: return "added";
    case PartitionName::Test: return "test";
    case PartitionName::Large: return "large";
  }
  return "?";
}

std::optional<PartitionName> parse_partition_name(std::string_view s) {
  for (auto p : {PartitionName::Seeds, PartitionName::Added, PartitionName::Test, PartitionName::Large})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

const CorpusPartition* PartitionManifest::find(PartitionName name) const {
  for (const auto& p : partitions)
    if (p.name == name) return &p;
  return nullptr;
}

void PartitionManifest::check_disjoint() const {
  std::map<std::string, PartitionName> seen;
  for (const auto& p : partitions)
    for (const auto& id : p.doc_ids) {
      auto [it, fresh] = seen.emplace(id, p.name);
      if (!fresh && it->second != p.name)
        throw Error(ErrorCode::InvalidArgument, "document " + id + " is in partitions " +
                                                    std::string(to_string(it->second)) + " and " +
                                                    std::string(to_string(p.name)));
    }
}

std::string StatsTable::render() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "documents        %zu\n"
                "sentences        %.1f\n"
                "words            %.1f\n"
                "tables           %.1f\n"
                "cells            %.1f\n"
                "text entities    %.1f\n"
                "table entities   %.1f\n"
                "table relations  %.1f\n",
                documents, sentences, words, tables, cells, text_entities, table_entities,
                table_relations);
  return buf;
}

StatsTable corpus_stats(std::span<const AnnotatedDocument> docs) {
  StatsTable st;
  st.documents = docs.size();
  if (docs.empty()) return st;
  for (const auto& d : docs) {
    st.sentences += d.doc.sentence_count();
    st.words += d.doc.word_count();
    st.tables += d.doc.tables.size();
    for (const auto& t : d.doc.tables) st.cells += t.rows * t.cols;
    for (const auto& e : d.entities) (is_table(e.anchor) ? st.table_entities : st.text_entities) += 1;
    st.table_relations += d.relations.size();
  }
  double n = static_cast<double>(docs.size());
  for (double* v : {&st.sentences, &st.words, &st.tables, &st.cells, &st.text_entities,
                    &st.table_entities, &st.table_relations})
    *v /= n;
  return st;
}

StatsTable corpus_stats(const CorpusPartition& partition, const DocumentLookup& lookup) {
  std::vector<AnnotatedDocument> docs;
  docs.reserve(partition.doc_ids.size());
  for (const auto& id : partition.doc_ids) {
    auto d = lookup(id);
    if (!d) throw Error(ErrorCode::MissingDocument, "document not in store: " + id);
    docs.push_back(std::move(*d));
  }
  return corpus_stats(std::span<const AnnotatedDocument>(docs));
}

}  // namespace scimine
