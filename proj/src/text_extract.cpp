#include "scimine/text_extract.hpp"

#include <algorithm>
#include <set>

#include "scimine/error.hpp"
#include "scimine/parallel.hpp"
#include "scimine/serialize.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

std::vector<ContextWindow> build_windows(const ParsedDocument& doc, size_t budget,
                                         std::vector<std::string>* diagnostics) {
  auto sents = doc.sentences();
  std::vector<ContextWindow> out;
  out.reserve(sents.size());
  for (size_t c = 0; c < sents.size(); ++c) {
    ContextWindow w;
    w.doc_id = doc.doc_id;
    w.center = c;
    w.word_budget = budget;
    w.words = sents[c]->size();
    size_t lo = c, hi = c;  // inclusive
    if (w.words > budget) {
      w.over_budget = true;
      if (diagnostics)
        diagnostics->push_back("sentence " + std::to_string(c) + " has " + std::to_string(w.words) +
                               " words, over the budget of " + std::to_string(budget));
    } else {
      bool left_open = lo > 0, right_open = hi + 1 < sents.size();
      while (left_open || right_open) {
        if (left_open) {
          size_t n = sents[lo - 1]->size();
          if (w.words + n <= budget) {
            w.words += n;
            --lo;
            left_open = lo > 0;
          } else {
            left_open = false;
          }
        }
        if (right_open) {
          size_t n = sents[hi + 1]->size();
          if (w.words + n <= budget) {
            w.words += n;
            ++hi;
            right_open = hi + 1 < sents.size();
          } else {
            right_open = false;
          }
        }
      }
    }
    for (size_t s = lo; s <= hi; ++s) w.sentences.push_back(s);
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SourceSchema s) { return s == SourceSchema::SciERC ? "SciERC" : "SciREX"; }

std::optional<SourceSchema> parse_source_schema(std::string_view s) {
  auto l = text::to_lower(s);
  if (l == "scierc") return SourceSchema::SciERC;
  if (l == "scirex") return SourceSchema::SciREX;
  return std::nullopt;
}

LabelMapSpec LabelMapSpec::for_schema(SourceSchema s) {
  LabelMapSpec spec;
  spec.source = s;
  if (s == SourceSchema::SciERC) {
    spec.mapping = {{"Task", EntityType::Task},
                    {"Metric", EntityType::Metric},
                    {"Method", EntityType::Method},
                    {"Material", std::nullopt},
                    {"OtherScientificTerm", std::nullopt},
                    {"Generic", std::nullopt}};
  } else {
    // SciREX calls its dataset mentions "Material".
    spec.mapping = {{"Task", EntityType::Task},
                    {"Dataset", EntityType::Dataset},
                    {"Material", EntityType::Dataset},
                    {"Metric", EntityType::Metric},
                    {"Method", EntityType::Method}};
  }
  return spec;
}

std::vector<Entity> map_labels(const ExternalDocument& ext, const LabelMapSpec& spec, bool strict,
                               std::vector<std::string>* warnings) {
  std::vector<Entity> out;
  for (const auto& span : ext.spans) {
    auto it = spec.mapping.find(span.type);
    if (it == spec.mapping.end()) {
      std::string msg = "unknown " + std::string(to_string(spec.source)) + " type '" + span.type + "'";
      if (strict) throw Error(ErrorCode::UnknownSourceType, msg);
      if (warnings) warnings->push_back(msg);
      continue;
    }
    if (!it->second) continue;
    Anchor a = TextAnchor{span.sentence, span.l, span.r};
    if (!resolve_anchor(ext.doc, a)) {
      if (warnings) warnings->push_back("span does not resolve: " + anchor_key(a));
      continue;
    }
    out.push_back(make_entity(ext.doc, "", a, *it->second, Provenance::Mapped));
  }
  return out;
}

std::vector<ExternalDocument> load_scierc_jsonl(std::string_view text) {
  std::vector<ExternalDocument> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    Json j = parse_json(line);
    ExternalDocument ext;
    ext.doc.doc_id = j.value("doc_key", std::string("doc") + std::to_string(out.size()));
    Section sec;
    Paragraph para;
    std::vector<size_t> starts;
    size_t offset = 0;
    for (const auto& s : j.at("sentences")) {
      starts.push_back(offset);
      para.push_back(s.get<Sentence>());
      offset += para.back().size();
    }
    sec.paragraphs.push_back(std::move(para));
    ext.doc.sections.push_back(std::move(sec));
    if (auto ner = j.find("ner"); ner != j.end()) {
      for (size_t si = 0; si < ner->size() && si < starts.size(); ++si) {
        for (const auto& m : (*ner)[si]) {
          size_t b = m.at(0).get<size_t>(), e = m.at(1).get<size_t>();
          if (b < starts[si] || e < b) continue;
          ext.spans.push_back({si, b - starts[si], e - starts[si] + 1, m.at(2).get<std::string>()});
        }
      }
    }
    out.push_back(std::move(ext));
  }
  return out;
}

// ---------------------------------------------------------------------------

EntityType GazetteerEntry::dominant() const {
  EntityType best = EntityType::Task;
  size_t best_n = 0;
  for (auto t : kAllEntityTypes) {  // fixed order breaks ties
    auto it = counts.find(t);
    size_t n = it == counts.end() ? 0 : it->second;
    if (n > best_n) {
      best = t;
      best_n = n;
    }
  }
  return best;
}

size_t GazetteerEntry::total() const {
  size_t n = 0;
  for (const auto& [t, c] : counts) n += c;
  return n;
}

void Gazetteer::add(const std::string& surface, EntityType type, size_t count) {
  auto key = normalize_surface(surface);
  if (key.empty()) return;
  entries[key].counts[type] += count;
}

std::optional<EntityType> Gazetteer::lookup(const std::string& surface) const {
  if (auto it = entries.find(surface); it != entries.end()) return it->second.dominant();
  if (auto a = abbrev_links.find(surface); a != abbrev_links.end())
    if (auto it = entries.find(a->second); it != entries.end()) return it->second.dominant();
  return std::nullopt;
}

size_t Gazetteer::max_key_words() const {
  size_t m = 0;
  for (const auto& [k, v] : entries) m = std::max(m, text::split_ws(k).size());
  for (const auto& [k, v] : abbrev_links) m = std::max(m, text::split_ws(k).size());
  return m;
}

std::vector<std::tuple<size_t, size_t, EntityType>> Gazetteer::match(
    const std::vector<std::string>& words) const {
  std::vector<std::tuple<size_t, size_t, EntityType>> out;
  size_t maxw = max_key_words();
  std::vector<std::string> lower;
  lower.reserve(words.size());
  for (const auto& w : words) lower.push_back(text::to_lower(w));
  size_t i = 0;
  while (i < lower.size()) {
    size_t found = 0;
    EntityType type{};
    std::string key;
    for (size_t n = std::min(maxw, lower.size() - i); n >= 1 && !found; --n) {
      key.clear();
      for (size_t k = i; k < i + n; ++k) {
        if (k > i) key += ' ';
        key += lower[k];
      }
      if (auto t = lookup(key)) {
        found = n;
        type = *t;
      }
    }
    if (found) {
      out.emplace_back(i, i + found, type);
      i += found;
    } else {
      ++i;
    }
  }
  return out;
}

namespace {

const std::set<std::string>& initialism_stopwords() {
  static const std::set<std::string> s = {"of", "the", "and", "for", "a", "an", "in", "on", "to", "with", "by"};
  return s;
}

std::string letters_of(const std::string& long_form, bool split_hyphens) {
  std::string out;
  for (const auto& w : text::split_ws(text::to_lower(long_form))) {
    if (initialism_stopwords().count(w)) continue;
    std::vector<std::string> parts;
    if (split_hyphens) {
      std::string cur;
      for (char c : w) {
        if (c == '-') {
          if (!cur.empty()) parts.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!cur.empty()) parts.push_back(cur);
    } else {
      parts.push_back(w);
    }
    for (const auto& p : parts)
      if (!p.empty()) out += p[0];
  }
  return out;
}

}  // namespace

std::string initialism(const std::string& long_form) { return letters_of(long_form, true); }

bool is_initialism_of(const std::string& short_form, const std::string& long_form) {
  auto s = text::to_lower(short_form);
  if (s.size() < 2) return false;
  return s == letters_of(long_form, true) || s == letters_of(long_form, false);
}

Gazetteer train_gazetteer(const std::vector<AnnotatedDocument>& gold, Modality modality) {
  Gazetteer g;
  size_t used = 0;
  for (const auto& d : gold) {
    if (d.review_state != ReviewState::Gold) continue;
    ++used;
    auto sents = d.doc.sentences();
    for (const auto& e : d.entities) {
      bool table = is_table(e.anchor);
      if ((modality == Modality::Table) != table) continue;
      if (table && e.type == EntityType::Score) continue;
      g.add(e.surface, e.type);
      if (table) continue;
      // "LONG ( SHORT )" right after the span
      const auto& a = std::get<TextAnchor>(e.anchor);
      if (a.sentence >= sents.size()) continue;
      const auto& words = *sents[a.sentence];
      if (a.r + 2 < words.size() && words[a.r] == "(" && words[a.r + 2] == ")" &&
          is_initialism_of(words[a.r + 1], e.surface)) {
        auto long_key = normalize_surface(e.surface);
        auto short_key = text::to_lower(words[a.r + 1]);
        if (!g.entries.count(short_key)) g.abbrev_links[short_key] = long_key;
      }
    }
  }
  if (used == 0) throw Error(ErrorCode::EmptyTrainingSet, "no gold documents to train from");
  // A surface annotated in its own right wins over an abbreviation link.
  for (auto it = g.abbrev_links.begin(); it != g.abbrev_links.end();)
    it = g.entries.count(it->first) ? g.abbrev_links.erase(it) : std::next(it);
  return g;
}

// ---------------------------------------------------------------------------

std::vector<Entity> GazetteerTextBackend::extract(const ParsedDocument& doc) {
  std::vector<Entity> out;
  auto sents = doc.sentences();
  for (size_t s = 0; s < sents.size(); ++s)
    for (auto [l, r, t] : g_.match(*sents[s])) {
      if (!is_text_type(t)) continue;
      out.push_back(make_entity(doc, "", TextAnchor{s, l, r}, t, Provenance::Auto));
    }
  return out;
}

RemoteTextBackend::RemoteTextBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.post) cfg_.post = default_http_post(cfg_.timeout_seconds);
  while (!cfg_.endpoint.empty() && cfg_.endpoint.back() == '/') cfg_.endpoint.pop_back();
  if (cfg_.batch_size == 0) cfg_.batch_size = 1;
}

std::vector<Entity> RemoteTextBackend::extract(const ParsedDocument& doc) {
  auto windows = build_windows(doc, cfg_.word_budget);
  auto sents = doc.sentences();
  size_t batches = (windows.size() + cfg_.batch_size - 1) / cfg_.batch_size;
  std::vector<std::vector<Entity>> per_batch(batches);
  parallel_for(batches, cfg_.max_in_flight, [&](size_t b) {
    size_t lo = b * cfg_.batch_size, hi = std::min(windows.size(), lo + cfg_.batch_size);
    Json req{{"windows", Json::array()}};
    for (size_t w = lo; w < hi; ++w) {
      Json sl = Json::array();
      size_t center = 0;
      for (size_t k = 0; k < windows[w].sentences.size(); ++k) {
        size_t s = windows[w].sentences[k];
        if (s == windows[w].center) center = k;
        sl.push_back(*sents[s]);
      }
      req["windows"].push_back({{"sentences", std::move(sl)}, {"center", center}});
    }
    std::pair<int, std::string> res;
    try {
      res = cfg_.post(cfg_.endpoint + "/v1/extract/text", dump(req), {});
    } catch (const Error& e) {
      throw Error(ErrorCode::BackendUnavailable, e.what());
    }
    if (res.first >= 500 || res.first == 404)
      throw Error(ErrorCode::BackendUnavailable, "text extractor returned HTTP " + std::to_string(res.first));
    if (res.first != 200)
      throw Error(ErrorCode::BackendProtocol, "text extractor returned HTTP " + std::to_string(res.first));
    Json body;
    try {
      body = parse_json(res.second);
    } catch (const Error& e) {
      throw Error(ErrorCode::BackendProtocol, e.what());
    }
    if (!body.is_object() || !body.contains("entities") || !body["entities"].is_array())
      throw Error(ErrorCode::BackendProtocol, "response lacks an entities array");
    for (const auto& item : body["entities"]) {
      try {
        size_t s = item.at("s").get<size_t>(), l = item.at("l").get<size_t>(), r = item.at("r").get<size_t>();
        auto tname = item.at("type").get<std::string>();
        auto t = parse_entity_type(tname);
        if (!t || !is_text_type(*t)) throw Error(ErrorCode::BackendProtocol, "type outside the schema: " + tname);
        if (s >= hi - lo) throw Error(ErrorCode::BackendProtocol, "window index out of range");
        Anchor a = TextAnchor{windows[lo + s].center, l, r};
        if (!resolve_anchor(doc, a)) throw Error(ErrorCode::BackendProtocol, "span out of range: " + anchor_key(a));
        per_batch[b].push_back(make_entity(doc, "", a, *t, Provenance::Auto));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BackendProtocol, std::string("malformed entity: ") + e.what());
      }
    }
  });
  std::vector<Entity> out;
  for (auto& v : per_batch)
    for (auto& e : v) out.push_back(std::move(e));
  return out;
}

std::vector<Entity> extract_text(const ParsedDocument& doc, TextBackend& backend) {
  return backend.extract(doc);
}

void assign_ids(AnnotatedDocument& doc) {
  size_t next = std::stoull(doc.next_entity_id().substr(1));
  for (auto& e : doc.entities)
    if (e.id.empty()) e.id = "e" + std::to_string(next++);
}

std::string export_text_training(const std::vector<AnnotatedDocument>& docs, const std::string& origin,
                                 size_t budget) {
  std::string out;
  for (const auto& d : docs) {
    auto sents = d.doc.sentences();
    std::vector<std::vector<const Entity*>> by_sentence(sents.size());
    for (const auto& e : d.entities)
      if (auto* a = std::get_if<TextAnchor>(&e.anchor); a && a->sentence < sents.size())
        by_sentence[a->sentence].push_back(&e);
    for (const auto& w : build_windows(d.doc, budget)) {
      Json tokens = Json::array();
      Json ents = Json::array();
      size_t offset = 0;
      for (size_t s : w.sentences) {
        for (const auto& tok : *sents[s]) tokens.push_back(tok);
        if (s == w.center)
          for (const auto* e : by_sentence[s]) {
            const auto& a = std::get<TextAnchor>(e->anchor);
            ents.push_back({{"l", offset + a.l}, {"r", offset + a.r}, {"type", std::string(to_string(e->type))}});
          }
        offset += sents[s]->size();
      }
      Json rec{{"origin", origin}, {"doc_id", d.doc.doc_id}, {"center", w.center},
               {"tokens", std::move(tokens)}, {"entities", std::move(ents)}};
      out += dump(rec);
      out += '\n';
    }
  }
  return out;
}

}  // namespace scimine
