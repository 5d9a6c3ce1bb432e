#include "scimine/serialize.hpp"

#include "scimine/error.hpp"

namespace scimine {

namespace {

template <class T>
T req(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::ParseFailure, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("bad field '") + key + "': " + e.what());
  }
}

template <class T>
T opt(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("bad field '") + key + "': " + e.what());
  }
}

Json words_json(const std::vector<std::string>& w) { return Json(w); }

}  // namespace

std::string dump(const Json& j, int indent) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("invalid JSON: ") + e.what());
  }
}

Json to_json(const TableGrid& g) {
  Json cells = Json::array();
  for (size_t i = 0; i < g.rows; ++i) {
    Json row = Json::array();
    for (size_t j = 0; j < g.cols; ++j) row.push_back(words_json(g.at(i, j)));
    cells.push_back(std::move(row));
  }
  Json merged = Json::array();
  for (const auto& m : g.merged)
    merged.push_back({{"row", m.row}, {"col", m.col}, {"row_span", m.row_span}, {"col_span", m.col_span}});
  return Json{{"caption", g.caption},
              {"rows", g.rows},
              {"cols", g.cols},
              {"cells", std::move(cells)},
              {"merged_regions", std::move(merged)}};
}

TableGrid table_from_json(const Json& j) {
  TableGrid g;
  g.caption = req<std::string>(j, "caption");
  g.rows = req<size_t>(j, "rows");
  g.cols = req<size_t>(j, "cols");
  const auto& cells = j.at("cells");
  if (!cells.is_array() || cells.size() != g.rows)
    throw Error(ErrorCode::ParseFailure, "table cells do not match row count");
  for (const auto& row : cells) {
    if (!row.is_array() || row.size() != g.cols)
      throw Error(ErrorCode::ParseFailure, "table row does not match column count");
    for (const auto& c : row) g.cells.push_back(c.get<Cell>());
  }
  if (auto it = j.find("merged_regions"); it != j.end())
    for (const auto& m : *it)
      g.merged.push_back(MergedRegion{req<size_t>(m, "row"), req<size_t>(m, "col"),
                                      req<size_t>(m, "row_span"), req<size_t>(m, "col_span")});
  return g;
}

Json to_json(const ParsedDocument& doc) {
  Json sections = Json::array();
  for (const auto& s : doc.sections) {
    Json paras = Json::array();
    for (const auto& p : s.paragraphs) {
      Json sents = Json::array();
      for (const auto& sent : p) sents.push_back(words_json(sent));
      paras.push_back(std::move(sents));
    }
    sections.push_back({{"title", s.title}, {"depth", s.depth}, {"paragraphs", std::move(paras)}});
  }
  Json tables = Json::array();
  for (const auto& t : doc.tables) tables.push_back(to_json(t));
  return Json{{"schema", kParsedDocumentSchema},
              {"doc_id", doc.doc_id},
              {"domain_tag", std::string(to_string(doc.domain))},
              {"sections", std::move(sections)},
              {"tables", std::move(tables)},
              {"diagnostics", doc.diagnostics}};
}

ParsedDocument parsed_document_from_json(const Json& j) {
  ParsedDocument doc;
  doc.doc_id = req<std::string>(j, "doc_id");
  auto tag = opt<std::string>(j, "domain_tag", "OTHER");
  auto d = parse_domain(tag);
  if (!d) throw Error(ErrorCode::ParseFailure, "unknown domain tag " + tag);
  doc.domain = *d;
  for (const auto& s : j.at("sections")) {
    Section sec;
    sec.title = req<std::string>(s, "title");
    sec.depth = opt<int>(s, "depth", 1);
    for (const auto& p : s.at("paragraphs")) sec.paragraphs.push_back(p.get<Paragraph>());
    doc.sections.push_back(std::move(sec));
  }
  for (const auto& t : j.at("tables")) doc.tables.push_back(table_from_json(t));
  doc.diagnostics = opt<std::vector<std::string>>(j, "diagnostics", {});
  return doc;
}

Json to_json(const Anchor& a) {
  if (auto* t = std::get_if<TextAnchor>(&a))
    return Json{{"kind", "text"}, {"s", t->sentence}, {"l", t->l}, {"r", t->r}};
  const auto& c = std::get<TableAnchor>(a);
  return Json{{"kind", "table"}, {"t", c.table}, {"i", c.row}, {"j", c.col}, {"l", c.l}, {"r", c.r}};
}

Anchor anchor_from_json(const Json& j) {
  auto kind = req<std::string>(j, "kind");
  if (kind == "text") return TextAnchor{req<size_t>(j, "s"), req<size_t>(j, "l"), req<size_t>(j, "r")};
  if (kind == "table")
    return TableAnchor{req<size_t>(j, "t"), req<size_t>(j, "i"), req<size_t>(j, "j"),
                       req<size_t>(j, "l"), req<size_t>(j, "r")};
  throw Error(ErrorCode::ParseFailure, "unknown anchor kind " + kind);
}

Json to_json(const Entity& e) {
  return Json{{"id", e.id},
              {"anchor", to_json(e.anchor)},
              {"etype", std::string(to_string(e.type))},
              {"surface", e.surface},
              {"provenance", std::string(to_string(e.provenance))}};
}

Entity entity_from_json(const Json& j) {
  Entity e;
  e.id = req<std::string>(j, "id");
  e.anchor = anchor_from_json(j.at("anchor"));
  auto t = req<std::string>(j, "etype");
  auto et = parse_entity_type(t);
  if (!et) throw Error(ErrorCode::ParseFailure, "unknown entity type " + t);
  e.type = *et;
  e.surface = opt<std::string>(j, "surface", "");
  auto p = parse_provenance(opt<std::string>(j, "provenance", "auto"));
  if (!p) throw Error(ErrorCode::ParseFailure, "unknown provenance");
  e.provenance = *p;
  return e;
}

Json to_json(const TableRelation& r) {
  return Json{{"e1", r.e1}, {"e2", r.e2}, {"table_idx", r.table},
              {"provenance", std::string(to_string(r.provenance))}};
}

TableRelation relation_from_json(const Json& j) {
  auto p = parse_provenance(opt<std::string>(j, "provenance", "auto"));
  if (!p) throw Error(ErrorCode::ParseFailure, "unknown provenance");
  return make_relation(req<std::string>(j, "e1"), req<std::string>(j, "e2"),
                       req<size_t>(j, "table_idx"), *p);
}

Json to_json(const AnnotatedDocument& d) {
  Json ents = Json::array();
  for (const auto& e : d.entities) ents.push_back(to_json(e));
  Json rels = Json::array();
  for (const auto& r : d.relations) rels.push_back(to_json(r));
  return Json{{"schema", kAnnotationsSchema},
              {"doc_id", d.doc.doc_id},
              {"round_tag", d.round},
              {"review_state", std::string(to_string(d.review_state))},
              {"version", d.version},
              {"stages", d.stages},
              {"doc", to_json(d.doc)},
              {"entities", std::move(ents)},
              {"relations", std::move(rels)}};
}

AnnotatedDocument annotated_document_from_json(const Json& j) {
  AnnotatedDocument d;
  d.doc = parsed_document_from_json(j.at("doc"));
  d.round = opt<int>(j, "round_tag", 0);
  auto rs = parse_review_state(opt<std::string>(j, "review_state", "unreviewed"));
  if (!rs) throw Error(ErrorCode::ParseFailure, "unknown review state");
  d.review_state = *rs;
  d.version = opt<uint64_t>(j, "version", 0);
  d.stages = opt<std::vector<std::string>>(j, "stages", {});
  for (const auto& e : j.at("entities")) d.entities.push_back(entity_from_json(e));
  for (const auto& r : j.at("relations")) d.relations.push_back(relation_from_json(r));
  return d;
}

Json to_json(const Finding& f) {
  return Json{{"rule_id", f.rule_id},
              {"severity", std::string(to_string(f.severity))},
              {"entity", f.entity_id},
              {"anchor", f.anchor ? to_json(*f.anchor) : Json()},
              {"message", f.message},
              {"suggestion", f.suggestion}};
}

Json to_json(const ValidationReport& report) {
  Json a = Json::array();
  for (const auto& f : report) a.push_back(to_json(f));
  return a;
}

Json to_json(const PartitionManifest& m) {
  Json out = Json::object();
  for (const auto& p : m.partitions) {
    Json domains = Json::object();
    for (const auto& [id, d] : p.domains) domains[id] = std::string(to_string(d));
    Json entry{{"doc_ids", p.doc_ids}, {"domains", std::move(domains)}};
    if (p.expected_size) entry["expected_size"] = *p.expected_size;
    out[std::string(to_string(p.name))] = std::move(entry);
  }
  return out;
}

PartitionManifest partition_manifest_from_json(const Json& j) {
  PartitionManifest m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto name = parse_partition_name(it.key());
    if (!name) throw Error(ErrorCode::ParseFailure, "unknown partition " + it.key());
    CorpusPartition p;
    p.name = *name;
    p.doc_ids = req<std::vector<std::string>>(*it, "doc_ids");
    if (auto d = it->find("domains"); d != it->end())
      for (auto di = d->begin(); di != d->end(); ++di) {
        auto dom = parse_domain(di.value().get<std::string>());
        if (!dom) throw Error(ErrorCode::ParseFailure, "unknown domain tag");
        p.domains[di.key()] = *dom;
      }
    if (auto e = it->find("expected_size"); e != it->end() && !e->is_null())
      p.expected_size = e->get<size_t>();
    m.partitions.push_back(std::move(p));
  }
  m.check_disjoint();
  return m;
}

Json to_json(const StatsTable& s) {
  return Json{{"documents", s.documents},         {"sentences", s.sentences},
              {"words", s.words},                 {"tables", s.tables},
              {"cells", s.cells},                 {"text_entities", s.text_entities},
              {"table_entities", s.table_entities}, {"table_relations", s.table_relations}};
}

std::string to_jsonl(const std::vector<AnnotatedDocument>& docs) {
  std::string out;
  for (const auto& d : docs) {
    out += dump(to_json(d));
    out += '\n';
  }
  return out;
}

std::vector<AnnotatedDocument> annotations_from_jsonl(std::string_view text) {
  std::vector<AnnotatedDocument> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    bool blank = true;
    for (char c : line) blank = blank && (c == ' ' || c == '\t' || c == '\r');
    if (blank) continue;
    out.push_back(annotated_document_from_json(parse_json(line)));
  }
  return out;
}

}  // namespace scimine
