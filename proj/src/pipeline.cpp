#include "scimine/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "scimine/error.hpp"
#include "scimine/parallel.hpp"
#include "scimine/text_util.hpp"

namespace fs = std::filesystem;

namespace scimine {

// ---------------------------------------------------------------------------
// Corrections

std::string_view to_string(Correction::Op op) {
  switch (op) {
    case Correction::Op::Add: return "add";
    case Correction::Op::Remove: return "remove";
    case Correction::Op::Retype: return "retype";
    case Correction::Op::Respan: return "respan";
    case Correction::Op::AddRel: return "add_rel";
    case Correction::Op::RemoveRel: return "remove_rel";
  }
  return "add";
}

Json to_json(const Correction& c) {
  Json j;
  j["op"] = std::string(to_string(c.op));
  if (!c.id.empty()) j["id"] = c.id;
  if (c.anchor) j["anchor"] = to_json(*c.anchor);
  if (c.type) j["etype"] = std::string(to_string(*c.type));
  if (!c.e1.empty()) j["e1"] = c.e1;
  if (!c.e2.empty()) j["e2"] = c.e2;
  return j;
}

Correction correction_from_json(const Json& j) {
  auto bad = [](const std::string& m) { return Error(ErrorCode::InvalidCorrection, m); };
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) throw bad("correction needs an op");
  static const std::map<std::string, Correction::Op> ops = {
      {"add", Correction::Op::Add},         {"remove", Correction::Op::Remove},
      {"retype", Correction::Op::Retype},   {"respan", Correction::Op::Respan},
      {"add_rel", Correction::Op::AddRel},  {"remove_rel", Correction::Op::RemoveRel}};
  auto it = ops.find(j["op"].get<std::string>());
  if (it == ops.end()) throw bad("unknown op " + j["op"].get<std::string>());
  Correction c;
  c.op = it->second;
  try {
    if (j.contains("id")) c.id = j["id"].get<std::string>();
    if (j.contains("anchor")) c.anchor = anchor_from_json(j["anchor"]);
    if (j.contains("etype")) {
      auto t = parse_entity_type(j["etype"].get<std::string>());
      if (!t) throw bad("unknown entity type " + j["etype"].get<std::string>());
      c.type = t;
    }
    if (j.contains("e1")) c.e1 = j["e1"].get<std::string>();
    if (j.contains("e2")) c.e2 = j["e2"].get<std::string>();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidCorrection) throw;
    throw bad(e.what());
  } catch (const std::exception& e) {
    throw bad(e.what());
  }
  using Op = Correction::Op;
  bool need_id = c.op == Op::Remove || c.op == Op::Retype || c.op == Op::Respan;
  if (need_id && c.id.empty()) throw bad(std::string(to_string(c.op)) + " needs an id");
  if ((c.op == Op::Add || c.op == Op::Respan) && !c.anchor) throw bad(std::string(to_string(c.op)) + " needs an anchor");
  if ((c.op == Op::Add || c.op == Op::Retype) && !c.type) throw bad(std::string(to_string(c.op)) + " needs an etype");
  if ((c.op == Op::AddRel || c.op == Op::RemoveRel) && (c.e1.empty() || c.e2.empty()))
    throw bad(std::string(to_string(c.op)) + " needs e1 and e2");
  return c;
}

namespace {

Error invalid(const std::string& m) { return Error(ErrorCode::InvalidCorrection, m); }

Entity* find_mut(AnnotatedDocument& d, const std::string& id) {
  for (auto& e : d.entities)
    if (e.id == id) return &e;
  return nullptr;
}

}  // namespace

AnnotatedDocument apply_corrections(const AnnotatedDocument& doc, const std::vector<Correction>& corrections) {
  AnnotatedDocument d = doc;
  using Op = Correction::Op;
  for (size_t k = 0; k < corrections.size(); ++k) {
    const auto& c = corrections[k];
    std::string where = "correction " + std::to_string(k) + " (" + std::string(to_string(c.op)) + "): ";
    switch (c.op) {
      case Op::Add: {
        if (!c.anchor || !c.type) throw invalid(where + "anchor and etype required");
        std::string id = c.id.empty() ? d.next_entity_id() : c.id;
        if (d.find_entity(id)) throw invalid(where + "id " + id + " already exists");
        if (!resolve_anchor(d.doc, *c.anchor)) throw invalid(where + "anchor does not resolve");
        d.entities.push_back(make_entity(d.doc, id, *c.anchor, *c.type, Provenance::Reviewed));
        break;
      }
      case Op::Remove: {
        auto it = std::find_if(d.entities.begin(), d.entities.end(), [&](const Entity& e) { return e.id == c.id; });
        if (it == d.entities.end()) throw invalid(where + "no entity " + c.id);
        d.entities.erase(it);
        std::erase_if(d.relations, [&](const TableRelation& r) { return r.e1 == c.id || r.e2 == c.id; });
        break;
      }
      case Op::Retype: {
        Entity* e = find_mut(d, c.id);
        if (!e || !c.type) throw invalid(where + "no entity " + c.id);
        e->type = *c.type;
        e->provenance = Provenance::Reviewed;
        break;
      }
      case Op::Respan: {
        Entity* e = find_mut(d, c.id);
        if (!e || !c.anchor) throw invalid(where + "no entity " + c.id);
        auto surface = anchor_surface(d.doc, *c.anchor);
        if (!surface) throw invalid(where + "anchor does not resolve");
        e->anchor = *c.anchor;
        e->surface = *surface;
        e->provenance = Provenance::Reviewed;
        break;
      }
      case Op::AddRel: {
        const Entity* a = d.find_entity(c.e1);
        const Entity* b = d.find_entity(c.e2);
        if (!a || !b) throw invalid(where + "unknown endpoint");
        if (c.e1 == c.e2) throw invalid(where + "self relation");
        auto* ta = std::get_if<TableAnchor>(&a->anchor);
        auto* tb = std::get_if<TableAnchor>(&b->anchor);
        if (!ta || !tb) throw invalid(where + "relations link table entities only");
        if (ta->table != tb->table) throw invalid(where + "endpoints lie in different tables");
        if (a->type == b->type)
          throw invalid(where + "rule8: entities of the same type " + std::string(to_string(a->type)) +
                        " cannot be related");
        auto rel = make_relation(c.e1, c.e2, ta->table, Provenance::Reviewed);
        for (const auto& r : d.relations)
          if (r.e1 == rel.e1 && r.e2 == rel.e2) throw invalid(where + "relation already present");
        d.relations.push_back(std::move(rel));
        break;
      }
      case Op::RemoveRel: {
        auto key = make_relation(c.e1, c.e2, 0);
        auto it = std::find_if(d.relations.begin(), d.relations.end(),
                               [&](const TableRelation& r) { return r.e1 == key.e1 && r.e2 == key.e2; });
        if (it == d.relations.end()) throw invalid(where + "no such relation");
        d.relations.erase(it);
        break;
      }
    }
  }
  auto report = validate(d);
  if (has_errors(report)) {
    std::string msg = "result fails validation:";
    for (const auto& f : report)
      if (f.severity == Severity::Error) msg += " " + f.rule_id + "(" + f.entity_id + ")";
    throw invalid(msg);
  }
  return d;
}

AnnotatedDocument merge_review(const AnnotatedDocument& doc, uint64_t expected_version,
                               const std::vector<Correction>& corrections, bool finalize) {
  if (expected_version != doc.version)
    throw Error(ErrorCode::StaleVersion, "version " + std::to_string(expected_version) + " is stale; current is " +
                                             std::to_string(doc.version));
  AnnotatedDocument d = apply_corrections(doc, corrections);
  d.version = doc.version + 1;
  if (finalize) {
    d.review_state = ReviewState::Gold;
    for (auto& e : d.entities) e.provenance = Provenance::Reviewed;
    for (auto& r : d.relations) r.provenance = Provenance::Reviewed;
  } else {
    d.review_state = ReviewState::InReview;
  }
  return d;
}

std::vector<Correction> diff_annotations(const AnnotatedDocument& from, const AnnotatedDocument& to) {
  using Op = Correction::Op;
  std::vector<Correction> out;
  // Entity matching by anchor, same type preferred.
  std::map<std::string, std::string> to_of_from, from_of_to;
  std::vector<bool> to_used(to.entities.size(), false);
  std::vector<const Entity*> unmatched_from;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& e : from.entities) {
      if (to_of_from.count(e.id)) continue;
      for (size_t k = 0; k < to.entities.size(); ++k) {
        const auto& t = to.entities[k];
        if (to_used[k] || t.anchor != e.anchor || (pass == 0 && t.type != e.type)) continue;
        to_used[k] = true;
        to_of_from[e.id] = t.id;
        from_of_to[t.id] = e.id;
        break;
      }
    }
  }
  auto anchor_of = [](const AnnotatedDocument& d, const std::string& id) {
    const Entity* e = d.find_entity(id);
    return e ? anchor_key(e->anchor) : std::string();
  };
  auto pair_key = [](std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return a + "|" + b;
  };
  std::set<std::string> to_pairs;
  for (const auto& r : to.relations) to_pairs.insert(pair_key(anchor_of(to, r.e1), anchor_of(to, r.e2)));
  std::set<std::string> kept_pairs;
  for (const auto& r : from.relations) {
    std::string k = pair_key(anchor_of(from, r.e1), anchor_of(from, r.e2));
    bool endpoints_kept = to_of_from.count(r.e1) && to_of_from.count(r.e2);
    if (endpoints_kept && to_pairs.count(k) && !kept_pairs.count(k)) {
      kept_pairs.insert(k);
      continue;
    }
    Correction c;
    c.op = Op::RemoveRel;
    c.e1 = r.e1;
    c.e2 = r.e2;
    out.push_back(c);
  }
  for (const auto& e : from.entities) {
    auto it = to_of_from.find(e.id);
    if (it == to_of_from.end()) {
      Correction c;
      c.op = Op::Remove;
      c.id = e.id;
      out.push_back(c);
    } else if (const Entity* t = to.find_entity(it->second); t && t->type != e.type) {
      Correction c;
      c.op = Op::Retype;
      c.id = e.id;
      c.type = t->type;
      out.push_back(c);
    }
  }
  // New ids continue after the largest numeric id in `from`.
  AnnotatedDocument scratch;
  scratch.entities = from.entities;
  std::map<std::string, std::string> id_in_result = from_of_to;
  for (size_t k = 0; k < to.entities.size(); ++k) {
    if (to_used[k]) continue;
    const auto& t = to.entities[k];
    Correction c;
    c.op = Op::Add;
    c.id = scratch.next_entity_id();
    c.anchor = t.anchor;
    c.type = t.type;
    scratch.entities.push_back(Entity{c.id, t.anchor, t.type, t.surface, t.provenance});
    id_in_result[t.id] = c.id;
    out.push_back(c);
  }
  for (const auto& r : to.relations) {
    std::string k = pair_key(anchor_of(to, r.e1), anchor_of(to, r.e2));
    if (kept_pairs.count(k)) {
      kept_pairs.erase(k);
      continue;
    }
    Correction c;
    c.op = Op::AddRel;
    c.e1 = id_in_result[r.e1];
    c.e2 = id_in_result[r.e2];
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 1

namespace {

// `stage` names the step in progress so failures can be attributed.
AnnotatedDocument annotate_tracked(const ParsedDocument& doc, TextBackend& text, TableBackend& table,
                                   const StageOptions& options, std::string& stage) {
  stage = "text_ner";
  AnnotatedDocument a;
  a.doc = doc;
  a.round = options.round;
  a.entities = extract_text(doc, text);
  for (auto& e : a.entities) e.provenance = Provenance::Auto;
  assign_ids(a);
  a.stages.push_back("text_ner");

  stage = "table_ner";
  std::vector<Entity> text_entities = a.entities;
  std::vector<TableExtraction> per_table;
  for (size_t t = 0; t < doc.tables.size(); ++t)
    per_table.push_back(extract_table(doc.tables[t], t, text_entities, table, options.table));
  a.stages.push_back("table_ner");
  if (options.table.label_guiding) a.stages.push_back("label_guiding");

  for (size_t t = 0; t < per_table.size(); ++t) {
    auto& x = per_table[t];
    std::map<Coord, std::string> id_at;
    for (auto& e : x.entities) {
      e.id = a.next_entity_id();
      const auto& ta = std::get<TableAnchor>(e.anchor);
      id_at[{ta.row, ta.col}] = e.id;
      a.entities.push_back(e);
    }
    for (auto [c1, c2] : x.relations)
      a.relations.push_back(make_relation(id_at.at(c1), id_at.at(c2), t, Provenance::Auto));
  }
  a.stages.push_back("table_re");
  return a;
}

}  // namespace

AnnotatedDocument annotate_document(const ParsedDocument& doc, TextBackend& text, TableBackend& table,
                                    const StageOptions& options) {
  std::string stage;
  return annotate_tracked(doc, text, table, options, stage);
}

StageResult run_stage1(const std::vector<ParsedDocument>& docs, TextBackend& text, TableBackend& table,
                       const StageOptions& options) {
  std::vector<std::optional<AnnotatedDocument>> out(docs.size());
  std::vector<std::optional<DocError>> errs(docs.size());
  std::vector<double> secs(docs.size(), 0.0);
  parallel_for(docs.size(), options.workers, [&](size_t i) {
    auto t0 = std::chrono::steady_clock::now();
    std::string stage;
    try {
      out[i] = annotate_tracked(docs[i], text, table, options, stage);
    } catch (const Error& e) {
      errs[i] = DocError{docs[i].doc_id, stage, std::string(to_string(e.code())) + ": " + e.what()};
    } catch (const std::exception& e) {
      errs[i] = DocError{docs[i].doc_id, stage, e.what()};
    }
    secs[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  StageResult r;
  for (size_t i = 0; i < docs.size(); ++i) {
    r.seconds[docs[i].doc_id] = secs[i];
    if (out[i]) r.docs.push_back(std::move(*out[i]));
    if (errs[i]) r.errors.push_back(std::move(*errs[i]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rounds and extractor snapshots

Json to_json(const Round& r) {
  Json snaps = Json::object();
  for (const auto& [k, v] : r.extractor_snapshots) snaps[k] = v;
  return Json{{"index", r.index},
              {"train_doc_ids", r.train_doc_ids},
              {"produced_gold", r.produced_gold},
              {"extractor_snapshots", std::move(snaps)}};
}

Round round_from_json(const Json& j) {
  try {
    Round r;
    r.index = j.at("index").get<int>();
    r.train_doc_ids = j.at("train_doc_ids").get<std::vector<std::string>>();
    r.produced_gold = j.at("produced_gold").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("extractor_snapshots").items()) r.extractor_snapshots[k] = v.get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("round record: ") + e.what());
  }
}

Json to_json(const Gazetteer& g) {
  Json entries = Json::object();
  for (const auto& [surface, entry] : g.entries) {
    Json counts = Json::object();
    for (const auto& [t, n] : entry.counts) counts[std::string(to_string(t))] = n;
    entries[surface] = std::move(counts);
  }
  Json links = Json::object();
  for (const auto& [s, l] : g.abbrev_links) links[s] = l;
  return Json{{"schema", "gazetteer.v1"}, {"entries", std::move(entries)}, {"abbrev_links", std::move(links)}};
}

Gazetteer gazetteer_from_json(const Json& j) {
  Gazetteer g;
  try {
    for (const auto& [surface, counts] : j.at("entries").items())
      for (const auto& [t, n] : counts.items()) {
        auto type = parse_entity_type(t);
        if (!type) throw Error(ErrorCode::ParseFailure, "gazetteer type " + t);
        g.entries[surface].counts[*type] = n.get<size_t>();
      }
    for (const auto& [s, l] : j.at("abbrev_links").items()) g.abbrev_links[s] = l.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("gazetteer: ") + e.what());
  }
  return g;
}

std::map<std::string, std::string> Extractors::snapshots() const {
  return {{"text_gazetteer", text::sha256_hex(dump(to_json(text)))},
          {"table_gazetteer", text::sha256_hex(dump(to_json(table)))}};
}

Extractors train_extractors(const std::vector<AnnotatedDocument>& gold) {
  return Extractors{train_gazetteer(gold, Modality::Text), train_gazetteer(gold, Modality::Table)};
}

// ---------------------------------------------------------------------------
// Workspace

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Pending: return "pending";
    case TaskStatus::InProgress: return "in_progress";
    case TaskStatus::Done: return "done";
  }
  return "pending";
}

std::optional<TaskStatus> parse_task_status(std::string_view s) {
  for (auto t : {TaskStatus::Pending, TaskStatus::InProgress, TaskStatus::Done})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

Json to_json(const ReviewTask& t) {
  return Json{{"doc_id", t.doc_id},
              {"assigned_to", t.assigned_to ? Json(*t.assigned_to) : Json()},
              {"status", std::string(to_string(t.status))},
              {"version", t.version},
              {"round", t.round},
              {"domain_tag", std::string(to_string(t.domain))}};
}

namespace {

ReviewTask task_from_json(const Json& j) {
  ReviewTask t;
  t.doc_id = j.at("doc_id").get<std::string>();
  if (!j.at("assigned_to").is_null()) t.assigned_to = j["assigned_to"].get<std::string>();
  t.status = parse_task_status(j.at("status").get<std::string>()).value_or(TaskStatus::Pending);
  t.version = j.at("version").get<uint64_t>();
  t.round = j.at("round").get<int>();
  t.domain = parse_domain(j.value("domain_tag", "OTHER")).value_or(Domain::OTHER);
  return t;
}

std::vector<fs::path> files_with_ext(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void append_line(const fs::path& p, const std::string& line) {
  std::ofstream out(p, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + p.string());
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed: " + p.string());
}

std::vector<Json> read_jsonl(const fs::path& p) {
  std::vector<Json> out;
  if (!fs::exists(p)) return out;
  std::ifstream in(p, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(parse_json(line));
  }
  return out;
}

void write_annotation_file(const Workspace& ws, const AnnotatedDocument& doc) {
  text::write_file_atomic((ws.annotations_dir() / (safe_doc_filename(doc.doc.doc_id) + ".jsonl")).string(),
                          dump(to_json(doc)) + "\n");
}

}  // namespace

std::string safe_doc_filename(const std::string& doc_id) {
  std::string out;
  for (char c : doc_id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  if (out.empty() || out[0] == '.') out = "_" + out;
  return out;
}

Workspace Workspace::init(const fs::path& root) {
  for (const char* d : {"parsed", "annotations", "reviews", "reviews/tasks", "rounds"}) fs::create_directories(root / d);
  return Workspace(root);
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  for (const char* d : {"parsed", "annotations", "reviews", "rounds"})
    if (!fs::is_directory(root_ / d)) throw Error(ErrorCode::NotFound, root_.string() + " is not a workspace");
  fs::create_directories(root_ / "reviews" / "tasks");
}

void Workspace::put_parsed(const ParsedDocument& doc) const {
  text::write_file_atomic((parsed_dir() / (safe_doc_filename(doc.doc_id) + ".json")).string(),
                          dump(to_json(doc)) + "\n");
}

std::optional<ParsedDocument> Workspace::get_parsed(const std::string& doc_id) const {
  auto p = parsed_dir() / (safe_doc_filename(doc_id) + ".json");
  if (!fs::exists(p)) return std::nullopt;
  return parsed_document_from_json(parse_json(text::read_file(p.string())));
}

std::vector<std::string> Workspace::parsed_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : files_with_ext(parsed_dir(), ".json"))
    ids.push_back(parse_json(text::read_file(p.string())).at("doc_id").get<std::string>());
  return ids;
}

void Workspace::put_annotations(const AnnotatedDocument& doc) const {
  write_annotation_file(*this, doc);
  append_event(Json{{"event", "snapshot"}, {"doc_id", doc.doc.doc_id}, {"doc", to_json(doc)}});
}

std::optional<AnnotatedDocument> Workspace::get_annotations(const std::string& doc_id) const {
  auto p = annotations_dir() / (safe_doc_filename(doc_id) + ".jsonl");
  if (!fs::exists(p)) return std::nullopt;
  auto docs = annotations_from_jsonl(text::read_file(p.string()));
  if (docs.empty()) return std::nullopt;
  return docs.front();
}

std::vector<std::string> Workspace::annotated_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : files_with_ext(annotations_dir(), ".jsonl")) {
    auto docs = annotations_from_jsonl(text::read_file(p.string()));
    if (!docs.empty()) ids.push_back(docs.front().doc.doc_id);
  }
  return ids;
}

std::vector<AnnotatedDocument> Workspace::gold_documents() const {
  std::vector<AnnotatedDocument> out;
  for (const auto& p : files_with_ext(annotations_dir(), ".jsonl"))
    for (auto& d : annotations_from_jsonl(text::read_file(p.string())))
      if (d.review_state == ReviewState::Gold) out.push_back(std::move(d));
  return out;
}

PartitionManifest Workspace::partitions() const {
  auto p = root_ / "partitions.json";
  if (!fs::exists(p)) return {};
  return partition_manifest_from_json(parse_json(text::read_file(p.string())));
}

void Workspace::set_partitions(const PartitionManifest& m) const {
  m.check_disjoint();
  text::write_file_atomic((root_ / "partitions.json").string(), dump(to_json(m), 2) + "\n");
}

std::vector<Round> Workspace::rounds() const {
  auto p = rounds_dir() / "rounds.json";
  std::vector<Round> out;
  if (!fs::exists(p)) return out;
  for (const auto& j : parse_json(text::read_file(p.string()))) out.push_back(round_from_json(j));
  return out;
}

void Workspace::append_round(const Round& r) const {
  auto all = rounds();
  if (!all.empty() && r.index != all.back().index + 1)
    throw Error(ErrorCode::InvalidArgument, "round " + std::to_string(r.index) + " does not follow " +
                                                std::to_string(all.back().index));
  all.push_back(r);
  Json arr = Json::array();
  for (const auto& x : all) arr.push_back(to_json(x));
  text::write_file_atomic((rounds_dir() / "rounds.json").string(), dump(arr, 2) + "\n");
}

Extractors Workspace::load_extractors(int round) const {
  auto dir = rounds_dir() / ("round" + std::to_string(round));
  if (!fs::exists(dir / "text_gazetteer.json"))
    throw Error(ErrorCode::NotFound, "no extractors for round " + std::to_string(round));
  return Extractors{gazetteer_from_json(parse_json(text::read_file((dir / "text_gazetteer.json").string()))),
                    gazetteer_from_json(parse_json(text::read_file((dir / "table_gazetteer.json").string())))};
}

std::vector<ReviewTask> Workspace::tasks() const {
  std::vector<ReviewTask> out;
  for (const auto& p : files_with_ext(reviews_dir() / "tasks", ".json"))
    out.push_back(task_from_json(parse_json(text::read_file(p.string()))));
  return out;
}

std::optional<ReviewTask> Workspace::task(const std::string& doc_id) const {
  auto p = reviews_dir() / "tasks" / (safe_doc_filename(doc_id) + ".json");
  if (!fs::exists(p)) return std::nullopt;
  return task_from_json(parse_json(text::read_file(p.string())));
}

void Workspace::put_task(const ReviewTask& t) const {
  text::write_file_atomic((reviews_dir() / "tasks" / (safe_doc_filename(t.doc_id) + ".json")).string(),
                          dump(to_json(t)) + "\n");
}

void Workspace::append_event(const Json& event) const {
  std::lock_guard<std::mutex> lock(*log_mu_);
  append_line(reviews_dir() / "events.jsonl", dump(event));
}

std::vector<Json> Workspace::events() const {
  std::lock_guard<std::mutex> lock(*log_mu_);
  return read_jsonl(reviews_dir() / "events.jsonl");
}

void Workspace::log_error(const DocError& e) const {
  std::lock_guard<std::mutex> lock(*log_mu_);
  append_line(root_ / "errors.jsonl", dump(Json{{"doc_id", e.doc_id}, {"stage", e.stage}, {"message", e.message}}));
}

std::vector<DocError> Workspace::errors() const {
  std::vector<DocError> out;
  for (const auto& j : read_jsonl(root_ / "errors.jsonl"))
    out.push_back({j.value("doc_id", ""), j.value("stage", ""), j.value("message", "")});
  return out;
}

// ---------------------------------------------------------------------------

StageResult run_round(const Workspace& ws, PartitionName partition, int round, const RunOptions& options) {
  auto manifest = ws.partitions();
  const CorpusPartition* part = manifest.find(partition);
  if (!part) throw Error(ErrorCode::NotFound, "no partition " + std::string(to_string(partition)));

  std::vector<ParsedDocument> todo;
  StageResult result;
  for (const auto& id : part->doc_ids) {
    if (auto existing = ws.get_annotations(id)) {
      if (existing->review_state != ReviewState::Unreviewed || existing->round == round) continue;
    }
    auto parsed = ws.get_parsed(id);
    if (!parsed) {
      DocError e{id, "load", "missing_document: no parsed document"};
      ws.log_error(e);
      result.errors.push_back(e);
      continue;
    }
    if (auto it = part->domains.find(id); it != part->domains.end()) parsed->domain = it->second;
    todo.push_back(std::move(*parsed));
  }

  std::unique_ptr<TextBackend> text;
  std::unique_ptr<TableBackend> table;
  Extractors ex;
  bool need_gaz = options.text_backend == "gazetteer" || options.table_backend == "heuristic";
  if (need_gaz && !todo.empty()) ex = ws.load_extractors(round);
  RemoteConfig rc;
  rc.endpoint = options.endpoint;
  if (options.text_backend == "gazetteer")
    text = std::make_unique<GazetteerTextBackend>(ex.text);
  else if (options.text_backend == "remote")
    text = std::make_unique<RemoteTextBackend>(rc);
  else
    throw Error(ErrorCode::InvalidArgument, "unknown text backend " + options.text_backend);
  if (options.table_backend == "heuristic")
    table = std::make_unique<HeuristicTableBackend>(ex.table);
  else if (options.table_backend == "remote")
    table = std::make_unique<RemoteTableBackend>(rc);
  else
    throw Error(ErrorCode::InvalidArgument, "unknown table backend " + options.table_backend);

  StageOptions so = options.stage;
  so.round = round;
  auto r = run_stage1(todo, *text, *table, so);
  for (const auto& d : r.docs) {
    ws.put_annotations(d);
    ws.put_task(ReviewTask{d.doc.doc_id, std::nullopt, TaskStatus::Pending, d.version, round, d.doc.domain});
  }
  for (const auto& e : r.errors) ws.log_error(e);
  result.docs = std::move(r.docs);
  result.errors.insert(result.errors.end(), r.errors.begin(), r.errors.end());
  result.seconds = std::move(r.seconds);
  return result;
}

Round advance_round(const Workspace& ws) {
  auto rounds = ws.rounds();
  auto manifest = ws.partitions();
  std::set<std::string> held_out;
  if (const auto* test = manifest.find(PartitionName::Test)) held_out.insert(test->doc_ids.begin(), test->doc_ids.end());

  std::vector<std::string> train = rounds.empty() ? std::vector<std::string>{} : rounds.back().train_doc_ids;
  std::set<std::string> in_train(train.begin(), train.end());
  auto gold = ws.gold_documents();
  std::vector<std::string> fresh;
  for (const auto& d : gold)
    if (!in_train.count(d.doc.doc_id) && !held_out.count(d.doc.doc_id)) fresh.push_back(d.doc.doc_id);
  std::sort(fresh.begin(), fresh.end());
  if (fresh.empty()) throw Error(ErrorCode::NoNewGold, "no new gold documents since the last round");
  train.insert(train.end(), fresh.begin(), fresh.end());
  in_train.insert(fresh.begin(), fresh.end());

  std::vector<AnnotatedDocument> train_docs;
  for (auto& d : gold)
    if (in_train.count(d.doc.doc_id)) train_docs.push_back(std::move(d));
  std::sort(train_docs.begin(), train_docs.end(),
            [](const AnnotatedDocument& a, const AnnotatedDocument& b) { return a.doc.doc_id < b.doc.doc_id; });

  Round r;
  r.index = rounds.empty() ? 1 : rounds.back().index + 1;
  r.train_doc_ids = train;
  r.produced_gold = fresh;
  Extractors ex = train_extractors(train_docs);
  r.extractor_snapshots = ex.snapshots();

  auto dir = ws.rounds_dir() / ("round" + std::to_string(r.index));
  fs::create_directories(dir);
  text::write_file_atomic((dir / "text_gazetteer.json").string(), dump(to_json(ex.text)) + "\n");
  text::write_file_atomic((dir / "table_gazetteer.json").string(), dump(to_json(ex.table)) + "\n");
  text::write_file_atomic((dir / "text_ner.jsonl").string(), export_text_training(train_docs, "pipeline"));
  text::write_file_atomic((dir / "table_ner.jsonl").string(),
                          export_table_training(train_docs, false, ScoreMode::WithScore));
  text::write_file_atomic((dir / "table_re.jsonl").string(),
                          export_table_training(train_docs, true, ScoreMode::WithScore));
  ws.append_round(r);
  return r;
}

// ---------------------------------------------------------------------------
// Review tasks

namespace {

ReviewTask task_or_default(const Workspace& ws, const AnnotatedDocument& d) {
  if (auto t = ws.task(d.doc.doc_id)) return *t;
  ReviewTask t;
  t.doc_id = d.doc.doc_id;
  t.status = d.review_state == ReviewState::Gold ? TaskStatus::Done : TaskStatus::Pending;
  t.version = d.version;
  t.round = d.round;
  t.domain = d.doc.domain;
  return t;
}

AnnotatedDocument require_doc(const Workspace& ws, const std::string& doc_id) {
  auto d = ws.get_annotations(doc_id);
  if (!d) throw Error(ErrorCode::NotFound, "no annotations for " + doc_id);
  return *d;
}

AnnotatedDocument reopened(const AnnotatedDocument& d) {
  AnnotatedDocument r = d;
  r.review_state = ReviewState::InReview;
  r.version = d.version + 1;
  return r;
}

}  // namespace

ReviewTask claim_task(const Workspace& ws, const std::string& doc_id, const std::string& reviewer) {
  auto d = require_doc(ws, doc_id);
  auto t = task_or_default(ws, d);
  if (t.status == TaskStatus::Done) throw Error(ErrorCode::TaskConflict, doc_id + " is done; reopen it first");
  if (t.status == TaskStatus::InProgress) {
    if (t.assigned_to == reviewer) return t;
    throw Error(ErrorCode::TaskConflict, doc_id + " is claimed by " + t.assigned_to.value_or("?"));
  }
  t.status = TaskStatus::InProgress;
  t.assigned_to = reviewer;
  t.version = d.version;
  ws.append_event(Json{{"event", "claim"}, {"doc_id", doc_id}, {"reviewer", reviewer}});
  ws.put_task(t);
  return t;
}

namespace {

void require_claim(const ReviewTask& t, const std::string& reviewer) {
  if (t.status != TaskStatus::InProgress || t.assigned_to != reviewer)
    throw Error(ErrorCode::TaskConflict, t.doc_id + " is not claimed by " + reviewer);
}

}  // namespace

AnnotatedDocument submit_corrections(const Workspace& ws, const std::string& doc_id, uint64_t version,
                                     const std::vector<Correction>& corrections, const std::string& reviewer) {
  auto d = require_doc(ws, doc_id);
  auto t = task_or_default(ws, d);
  require_claim(t, reviewer);
  auto merged = merge_review(d, version, corrections, false);
  Json cs = Json::array();
  for (const auto& c : corrections) cs.push_back(to_json(c));
  ws.append_event(Json{{"event", "corrections"},
                       {"doc_id", doc_id},
                       {"reviewer", reviewer},
                       {"version", version},
                       {"corrections", std::move(cs)}});
  write_annotation_file(ws, merged);
  t.version = merged.version;
  ws.put_task(t);
  return merged;
}

AnnotatedDocument complete_task(const Workspace& ws, const std::string& doc_id, const std::string& reviewer) {
  auto d = require_doc(ws, doc_id);
  auto t = task_or_default(ws, d);
  require_claim(t, reviewer);
  auto merged = merge_review(d, d.version, {}, true);
  ws.append_event(Json{{"event", "complete"}, {"doc_id", doc_id}, {"reviewer", reviewer}, {"version", d.version}});
  write_annotation_file(ws, merged);
  t.status = TaskStatus::Done;
  t.version = merged.version;
  ws.put_task(t);
  return merged;
}

ReviewTask reopen_task(const Workspace& ws, const std::string& doc_id, const std::string& reviewer) {
  auto d = require_doc(ws, doc_id);
  auto t = task_or_default(ws, d);
  if (t.status != TaskStatus::Done) throw Error(ErrorCode::TaskConflict, doc_id + " is not done");
  auto r = reopened(d);
  ws.append_event(Json{{"event", "reopen"}, {"doc_id", doc_id}, {"reviewer", reviewer}, {"version", d.version}});
  write_annotation_file(ws, r);
  t.status = TaskStatus::InProgress;
  t.assigned_to = reviewer;
  t.version = r.version;
  ws.put_task(t);
  return t;
}

std::map<std::string, AnnotatedDocument> replay_events(const Workspace& ws) {
  std::map<std::string, AnnotatedDocument> docs;
  for (const auto& ev : ws.events()) {
    std::string kind = ev.value("event", "");
    std::string id = ev.value("doc_id", "");
    if (kind == "snapshot") {
      docs[id] = annotated_document_from_json(ev.at("doc"));
      continue;
    }
    auto it = docs.find(id);
    if (it == docs.end()) {
      if (kind == "claim") continue;
      throw Error(ErrorCode::ParseFailure, "event for unknown document " + id);
    }
    if (kind == "corrections") {
      std::vector<Correction> cs;
      for (const auto& c : ev.at("corrections")) cs.push_back(correction_from_json(c));
      it->second = merge_review(it->second, ev.at("version").get<uint64_t>(), cs, false);
    } else if (kind == "complete") {
      it->second = merge_review(it->second, ev.at("version").get<uint64_t>(), {}, true);
    } else if (kind == "reopen") {
      it->second = reopened(it->second);
    }
  }
  return docs;
}

}  // namespace scimine
