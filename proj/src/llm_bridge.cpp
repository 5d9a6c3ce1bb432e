#include "scimine/llm_bridge.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <thread>

#include "prompt_templates.hpp"
#include "scimine/error.hpp"
#include "scimine/parallel.hpp"
#include "scimine/serialize.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

std::string_view to_string(LlmTask t) {
  switch (t) {
    case LlmTask::TextNer: return "text_ner";
    case LlmTask::TableNer: return "table_ner";
    case LlmTask::TableRe: return "table_re";
  }
  return "?";
}

std::optional<LlmTask> parse_llm_task(std::string_view s) {
  std::string k(s);
  std::replace(k.begin(), k.end(), '-', '_');
  for (auto t : {LlmTask::TextNer, LlmTask::TableNer, LlmTask::TableRe})
    if (to_string(t) == k) return t;
  return std::nullopt;
}

std::string_view to_string(ResponseIssue::Kind k) {
  switch (k) {
    case ResponseIssue::Kind::Malformed: return "malformed";
    case ResponseIssue::Kind::UndefinedType: return "undefined_type";
    case ResponseIssue::Kind::Truncated: return "truncated";
    case ResponseIssue::Kind::Ambiguous: return "ambiguous";
  }
  return "?";
}

size_t ParsedResponse::count(ResponseIssue::Kind k) const {
  return std::count_if(issues.begin(), issues.end(), [k](const ResponseIssue& i) { return i.kind == k; });
}

std::string py_quote(std::string_view s) {
  bool has_single = s.find('\'') != std::string_view::npos;
  bool has_double = s.find('"') != std::string_view::npos;
  char q = has_single && !has_double ? '"' : '\'';
  std::string out(1, q);
  for (char c : s) {
    if (c == '\\' || c == q) out += '\\';
    out += c;
  }
  out += q;
  return out;
}

std::string render_sentences(const std::vector<const Sentence*>& sentences) {
  std::string out;
  for (const auto* s : sentences) {
    if (s->empty()) continue;
    if (!out.empty()) out += ' ';
    out += text::join(*s, " ");
  }
  return out;
}

std::string render_table_payload(const TableGrid& grid) {
  std::string out = "[";
  for (size_t i = 0; i < grid.rows; ++i) {
    if (i) out += ", ";
    out += '[';
    for (size_t j = 0; j < grid.cols; ++j) {
      if (j) out += ", ";
      out += py_quote(grid.text(i, j));
    }
    out += ']';
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Tolerant reader for Python-literal-ish answers

namespace {

struct Value {
  enum class Kind { List, Dict, Pair, Str, Bare } kind = Kind::Bare;
  std::string s;
  std::vector<Value> items;

  bool scalar() const { return kind == Kind::Str || kind == Kind::Bare; }
  bool is_none() const {
    if (kind != Kind::Bare) return false;
    auto l = text::to_lower(s);
    return l == "none" || l == "null" || l.empty();
  }
};

size_t quote_len(std::string_view src, size_t p) {
  if (p >= src.size()) return 0;
  char c = src[p];
  if (c == '\'' || c == '"' || c == '`') return 1;
  if (static_cast<unsigned char>(c) == 0xE2 && p + 2 < src.size() &&
      static_cast<unsigned char>(src[p + 1]) == 0x80) {
    unsigned char d = static_cast<unsigned char>(src[p + 2]);
    if (d == 0x98 || d == 0x99 || d == 0x9C || d == 0x9D) return 3;
  }
  return 0;
}

bool is_delim(char c) { return c == ',' || c == ']' || c == '}' || c == ':'; }

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  bool truncated = false;
  bool malformed = false;

  size_t find_start(const char* openers) const {
    return src_.find_first_of(openers);
  }

  Value read_at(size_t p) {
    pos_ = p;
    return value(0);
  }

 private:
  void ws() {
    while (pos_ < src_.size() && text::is_space(src_[pos_])) ++pos_;
  }

  bool at_end() const { return pos_ >= src_.size(); }

  Value str() {
    Value v;
    v.kind = Value::Kind::Str;
    pos_ += quote_len(src_, pos_);
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size()) {
        v.s += src_[pos_ + 1];
        pos_ += 2;
        continue;
      }
      if (size_t q = quote_len(src_, pos_)) {
        size_t after = pos_ + q;
        while (after < src_.size() && text::is_space(src_[after])) ++after;
        if (after >= src_.size() || is_delim(src_[after])) {
          pos_ += q;
          return v;
        }
      }
      v.s += c;
      ++pos_;
    }
    truncated = true;
    return v;
  }

  Value bare() {
    Value v;
    size_t b = pos_;
    while (pos_ < src_.size() && !is_delim(src_[pos_]) && src_[pos_] != '[' && src_[pos_] != '{' &&
           !quote_len(src_, pos_))
      ++pos_;
    v.s = std::string(text::trim(src_.substr(b, pos_ - b)));
    return v;
  }

  Value container(char open, int depth) {
    Value v;
    v.kind = open == '[' ? Value::Kind::List : Value::Kind::Dict;
    char close = open == '[' ? ']' : '}';
    ++pos_;
    for (;;) {
      ws();
      if (at_end()) {
        truncated = true;
        return v;
      }
      char c = src_[pos_];
      if (c == close) {
        ++pos_;
        return v;
      }
      if (c == ']' || c == '}') {  // mismatched closer: treat as ours
        malformed = true;
        ++pos_;
        return v;
      }
      if (c == ',') {
        ++pos_;
        continue;
      }
      if (c == ':') {  // stray colon
        malformed = true;
        ++pos_;
        continue;
      }
      size_t before = pos_;
      Value item = value(depth + 1);
      ws();
      if (!at_end() && src_[pos_] == ':') {
        ++pos_;
        Value rhs = value(depth + 1);
        Value pair;
        pair.kind = Value::Kind::Pair;
        pair.items.push_back(std::move(item));
        pair.items.push_back(std::move(rhs));
        v.items.push_back(std::move(pair));
      } else {
        v.items.push_back(std::move(item));
      }
      if (pos_ == before) ++pos_;  // always make progress
    }
  }

  Value value(int depth) {
    ws();
    if (at_end()) {
      truncated = true;
      return Value{};
    }
    char c = src_[pos_];
    if ((c == '[' || c == '{') && depth < 64) return container(c, depth);
    if (c == '[' || c == '{') {
      malformed = true;
      ++pos_;
      return Value{};
    }
    if (quote_len(src_, pos_)) return str();
    return bare();
  }

  std::string_view src_;
  size_t pos_ = 0;
};

std::string fragment_of(std::string_view s) {
  std::string f(s.substr(0, 120));
  return f;
}

bool none_like(std::string_view response) {
  auto t = text::to_lower(text::trim(response));
  return t.empty() || t == "none" || t == "none." || t == "null" || t == "[]" || t == "{}";
}

/// Top-level value starting at the first opener, or nullopt when the answer has none.
std::optional<Value> read_top(std::string_view response, ParsedResponse& out) {
  if (none_like(response)) return std::nullopt;
  Reader r(response);
  size_t start = r.find_start("[{");
  if (start == std::string_view::npos) {
    auto lower = text::to_lower(response);
    if (lower.find("none") == std::string::npos)
      out.issues.push_back({ResponseIssue::Kind::Malformed, fragment_of(response)});
    return std::nullopt;
  }
  // "None" before any bracket means the model declined.
  auto head = text::to_lower(response.substr(0, start));
  if (text::trim(head) == "none") return std::nullopt;
  Value v = r.read_at(start);
  if (r.truncated) out.issues.push_back({ResponseIssue::Kind::Truncated, fragment_of(response.substr(start))});
  if (r.malformed) out.issues.push_back({ResponseIssue::Kind::Malformed, fragment_of(response.substr(start))});
  return v;
}

std::string flat_text(const Value& v) {
  if (v.scalar()) return std::string(text::trim(v.s));
  std::string out;
  for (const auto& i : v.items) {
    if (!out.empty()) out += ' ';
    out += flat_text(i);
  }
  return out;
}

std::optional<EntityType> type_named(const std::string& raw) {
  auto t = std::string(text::trim(raw));
  if (auto e = parse_entity_type(t)) return e;
  auto lower = text::to_lower(t);
  for (auto et : kAllEntityTypes)
    if (text::to_lower(to_string(et)) == lower) return et;
  return std::nullopt;
}

std::vector<Coord> cells_matching(const TableGrid& grid, const std::string& surface) {
  std::vector<Coord> out;
  auto want = text::collapse_ws(surface);
  if (want.empty()) return out;
  for (size_t i = 0; i < grid.rows; ++i)
    for (size_t j = 0; j < grid.cols; ++j)
      if (grid.text(i, j) == want) out.push_back({i, j});
  return out;
}

}  // namespace

ParsedResponse parse_text_ner(std::string_view response) {
  ParsedResponse out;
  auto top = read_top(response, out);
  if (!top) return out;
  std::vector<const Value*> elems;
  if (top->kind == Value::Kind::List && top->items.size() == 2 && top->items[0].scalar() && top->items[1].scalar())
    elems.push_back(&*top);
  else
    for (const auto& i : top->items) elems.push_back(&i);
  for (const Value* e : elems) {
    if ((e->kind == Value::Kind::List || e->kind == Value::Kind::Pair) && e->items.size() >= 2 &&
        e->items[0].scalar() && e->items[1].scalar()) {
      out.items.emplace_back(std::string(text::trim(e->items[0].s)), std::string(text::trim(e->items[1].s)));
    } else if (e->kind == Value::Kind::List && e->items.empty()) {
      continue;
    } else {
      out.issues.push_back({ResponseIssue::Kind::Malformed, flat_text(*e)});
    }
  }
  return out;
}

ParsedResponse parse_text_ner(std::string_view response, const ParsedDocument& doc,
                              const std::vector<size_t>& sentence_ids) {
  ParsedResponse out = parse_text_ner(response);
  auto sents = doc.sentences();
  std::set<std::tuple<std::string, size_t, size_t>> consumed;
  for (const auto& [surface, tname] : out.items) {
    auto type = type_named(tname);
    if (!type || !is_text_type(*type)) {
      out.issues.push_back({ResponseIssue::Kind::UndefinedType, surface + ", " + tname});
      continue;
    }
    auto needle = tokenize_words(surface);
    if (needle.empty()) {
      out.issues.push_back({ResponseIssue::Kind::Malformed, surface});
      continue;
    }
    auto lower_needle = needle;
    for (auto& w : lower_needle) w = text::to_lower(w);
    std::optional<TextAnchor> hit;
    for (int pass = 0; pass < 2 && !hit; ++pass) {
      for (size_t s : sentence_ids) {
        if (s >= sents.size() || hit) continue;
        const auto& words = *sents[s];
        for (size_t l = 0; l + needle.size() <= words.size() && !hit; ++l) {
          bool eq = true;
          for (size_t k = 0; k < needle.size() && eq; ++k)
            eq = pass == 0 ? words[l + k] == needle[k] : text::to_lower(words[l + k]) == lower_needle[k];
          if (!eq) continue;
          auto key = std::make_tuple(text::join(lower_needle, " "), s, l);
          if (consumed.count(key)) continue;
          consumed.insert(key);
          hit = TextAnchor{s, l, l + needle.size()};
        }
      }
    }
    if (!hit) {
      out.issues.push_back({ResponseIssue::Kind::Malformed, "not found: " + surface});
      continue;
    }
    out.entities.push_back(make_entity(doc, "", *hit, *type, Provenance::Llm));
  }
  return out;
}

ParsedResponse parse_table_ner(std::string_view response, const TableGrid& grid, size_t table_idx,
                               bool include_score) {
  ParsedResponse out;
  auto top = read_top(response, out);
  if (!top) return out;
  const Value* dict = &*top;
  if (dict->kind == Value::Kind::List)
    for (const auto& i : dict->items)
      if (i.kind == Value::Kind::Dict) {
        dict = &i;
        break;
      }
  std::set<std::pair<Coord, EntityType>> seen;
  for (const auto& entry : dict->items) {
    if (entry.kind != Value::Kind::Pair || !entry.items[0].scalar()) {
      out.issues.push_back({ResponseIssue::Kind::Malformed, flat_text(entry)});
      continue;
    }
    std::string key(text::trim(entry.items[0].s));
    const Value& list = entry.items[1];
    std::vector<std::string> surfaces;
    if (list.kind == Value::Kind::List) {
      for (const auto& s : list.items) {
        if (s.scalar() && !s.is_none()) surfaces.emplace_back(text::trim(s.s));
        else if (!s.scalar()) out.issues.push_back({ResponseIssue::Kind::Malformed, flat_text(s)});
      }
    } else if (list.scalar() && !list.is_none()) {
      surfaces.emplace_back(text::trim(list.s));
    }
    auto type = type_named(key);
    bool allowed = type && (include_score || *type != EntityType::Score);
    for (const auto& surface : surfaces) out.items.emplace_back(surface, key);
    if (!allowed) {
      for (const auto& surface : surfaces)
        out.issues.push_back({ResponseIssue::Kind::UndefinedType, surface + ", " + key});
      continue;
    }
    for (const auto& surface : surfaces) {
      auto cells = cells_matching(grid, surface);
      if (cells.empty()) {
        out.issues.push_back({ResponseIssue::Kind::Malformed, "no cell: " + surface});
        continue;
      }
      if (cells.size() > 1) out.issues.push_back({ResponseIssue::Kind::Ambiguous, surface});
      for (auto c : cells) {
        if (!seen.insert({c, *type}).second) continue;
        Entity e;
        e.anchor = TableAnchor{table_idx, c.first, c.second, 0, grid.at(c.first, c.second).size()};
        e.type = *type;
        e.surface = grid.text(c.first, c.second);
        e.provenance = Provenance::Llm;
        out.entities.push_back(std::move(e));
      }
    }
  }
  return out;
}

namespace {

void collect_pairs(const Value& v, int depth, std::vector<std::pair<std::string, std::string>>& out,
                   std::vector<ResponseIssue>& issues) {
  for (const auto& i : v.items) {
    if (i.kind == Value::Kind::Pair) {
      if (i.items[0].scalar() && i.items[1].scalar())
        out.emplace_back(std::string(text::trim(i.items[0].s)), std::string(text::trim(i.items[1].s)));
      else
        issues.push_back({ResponseIssue::Kind::Malformed, flat_text(i)});
    } else if (i.kind == Value::Kind::List && depth >= 0 && i.items.size() == 2 && i.items[0].scalar() &&
               i.items[1].scalar()) {
      out.emplace_back(std::string(text::trim(i.items[0].s)), std::string(text::trim(i.items[1].s)));
    } else if (i.kind == Value::Kind::List || i.kind == Value::Kind::Dict) {
      collect_pairs(i, depth + 1, out, issues);
    } else if (!i.is_none()) {
      issues.push_back({ResponseIssue::Kind::Malformed, flat_text(i)});
    }
  }
}

}  // namespace

ParsedResponse parse_table_re(std::string_view response, const TableGrid& grid) {
  ParsedResponse out;
  auto top = read_top(response, out);
  if (!top) return out;
  collect_pairs(*top, 0, out.items, out.issues);
  std::set<std::pair<Coord, Coord>> seen;
  for (const auto& [a, b] : out.items) {
    auto ca = cells_matching(grid, a), cb = cells_matching(grid, b);
    if (ca.empty() || cb.empty()) {
      out.issues.push_back({ResponseIssue::Kind::Malformed, "no cell: " + (ca.empty() ? a : b)});
      continue;
    }
    if (ca.size() * cb.size() > 1) out.issues.push_back({ResponseIssue::Kind::Ambiguous, a + ": " + b});
    for (auto x : ca)
      for (auto y : cb) {
        if (x == y) continue;
        auto p = x < y ? std::make_pair(x, y) : std::make_pair(y, x);
        if (seen.insert(p).second) out.relations.push_back(p);
      }
  }
  return out;
}

std::string render_text_ner_answer(const std::vector<std::pair<std::string, std::string>>& items) {
  std::string out = "[";
  for (size_t k = 0; k < items.size(); ++k) {
    if (k) out += ", ";
    out += "[" + py_quote(items[k].first) + ", " + py_quote(items[k].second) + "]";
  }
  return out + "]";
}

namespace {

const std::vector<EntityType>& question_key_order() {
  static const std::vector<EntityType> v = {EntityType::Task,   EntityType::Dataset, EntityType::Model,
                                            EntityType::Method, EntityType::Metric,  EntityType::Setting};
  return v;
}

std::vector<EntityType> table_type_set(bool include_score) {
  std::vector<EntityType> v = {EntityType::Task,    EntityType::Model,  EntityType::Method,
                               EntityType::Dataset, EntityType::Metric, EntityType::Setting};
  if (include_score) v.push_back(EntityType::Score);
  return v;
}

}  // namespace

std::string render_table_ner_answer(const std::map<EntityType, std::vector<std::string>>& by_type,
                                    bool include_score) {
  auto keys = question_key_order();
  if (include_score) keys.push_back(EntityType::Score);
  std::string out = "{";
  for (size_t k = 0; k < keys.size(); ++k) {
    if (k) out += ", ";
    out += py_quote(to_string(keys[k])) + ": [";
    auto it = by_type.find(keys[k]);
    if (it != by_type.end())
      for (size_t i = 0; i < it->second.size(); ++i) {
        if (i) out += ", ";
        out += py_quote(it->second[i]);
      }
    out += "]";
  }
  return out + "}";
}

std::string render_table_re_answer(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out = "{[";
  for (size_t k = 0; k < pairs.size(); ++k) {
    if (k) out += ", ";
    out += py_quote(pairs[k].first) + ":" + py_quote(pairs[k].second);
  }
  return out + "]}";
}

// ---------------------------------------------------------------------------
// Prompt assembly

namespace {

constexpr const char* kTwoDemos = "Here are two demonstrations:";
constexpr const char* kOneDemo = "Here is one demonstration:";

std::string quoted_list(const std::vector<EntityType>& types) {
  std::string out;
  for (size_t k = 0; k < types.size(); ++k) {
    if (k) out += ", ";
    out += "'" + std::string(to_string(types[k])) + "'";
  }
  return out;
}

std::string table_ner_question(bool include_score) {
  std::string keys;
  auto order = question_key_order();
  if (include_score) order.push_back(EntityType::Score);
  for (size_t k = 0; k < order.size(); ++k) {
    if (k) keys += ", ";
    keys += "'" + std::string(to_string(order[k])) + "': [list of entities]";
  }
  return "Question: Please extract the named entity from the given table and output a JSON object that "
         "contains the following: {" + keys + "}. If no entities are presented in any categories keep it None.";
}

// Score cells of a demonstration table, row-major.
std::string demo_scores(const char* table) {
  Reader r(table);
  Value v = r.read_at(0);
  std::vector<std::string> scores;
  for (const auto& row : v.items)
    for (const auto& cell : row.items)
      if (cell.scalar() && is_score_text(cell.s)) scores.push_back(cell.s);
  std::string out;
  for (size_t k = 0; k < scores.size(); ++k) {
    if (k) out += ", ";
    out += "'" + scores[k] + "'";
  }
  return out;
}

std::string demo_answer_with_score(const char* answer, const char* table) {
  std::string a(answer);
  a.pop_back();  // closing brace
  return a + ", 'Score': [" + demo_scores(table) + "]}";
}

std::string join_blocks(const std::vector<std::string>& blocks) {
  std::string out;
  for (size_t k = 0; k < blocks.size(); ++k) {
    if (k) out += "\n\n";
    out += blocks[k];
  }
  return out;
}

}  // namespace

PromptBundle build_prompt(LlmTask task, int shots, const std::string& payload, bool include_score,
                          const PromptOptions& options) {
  if (shots != 1 && shots != 2)
    throw Error(ErrorCode::InvalidArgument, "shots must be 1 or 2, got " + std::to_string(shots));
  using namespace prompts;
  PromptBundle b;
  b.task = task;
  b.shots = shots;
  b.include_score = task == LlmTask::TableNer && include_score;
  std::vector<std::string> blocks;
  const char* demo_phrase = shots == 2 ? kTwoDemos : kOneDemo;

  switch (task) {
    case LlmTask::TextNer: {
      blocks = {kTextNerIntro, demo_phrase};
      const char* sents[] = {kTextNerDemo1Sentences, kTextNerDemo2Sentences};
      const char* answers[] = {kTextNerDemo1Answer, kTextNerDemo2Answer};
      for (int d = 0; d < shots; ++d) {
        blocks.push_back(kTextNerTypeSet);
        blocks.push_back(std::string("Sentences: ") + sents[d]);
        blocks.push_back(kTextNerQuestion);
        blocks.push_back(std::string("Entities: ") + answers[d]);
      }
      blocks.push_back(kTextNerTypeSet);
      blocks.push_back("Sentences: " + payload);
      blocks.push_back(kTextNerQuestion);
      blocks.push_back("Entities:");
      break;
    }
    case LlmTask::TableNer: {
      auto types = table_type_set(b.include_score);
      std::string type_set = "Given type set: [" + quoted_list(types) + "].";
      // The published query block drops the closing quote after Method.
      std::string query_type_set = type_set;
      query_type_set.replace(query_type_set.find("'Method'"), 8, "'Method");
      std::string question = table_ner_question(b.include_score);
      blocks.push_back("Considering " + std::to_string(types.size()) + " entity types including " +
                       quoted_list(types) + ".");
      blocks.push_back(demo_phrase);
      const char* tables[] = {kTableNerDemo1Table, kTableNerDemo2Table};
      const char* answers[] = {kTableNerDemo1Answer, kTableNerDemo2Answer};
      for (int d = 0; d < shots; ++d) {
        blocks.push_back(type_set);
        blocks.push_back(std::string("Table: ") + tables[d]);
        blocks.push_back(question);
        blocks.push_back("Entities: " + (b.include_score ? demo_answer_with_score(answers[d], tables[d])
                                                          : std::string(answers[d])));
      }
      blocks.push_back(query_type_set);
      blocks.push_back("Table: " + payload);
      blocks.push_back(question);
      blocks.push_back("Entities:");
      break;
    }
    case LlmTask::TableRe: {
      const std::string question =
          "Question: Please extract all relations from the given table and output a JSON object that contains "
          "the following: {[cell: cell]}. If no relations are presented keep it None.";
      std::string query_question = question;
      query_question.replace(query_question.find("and output"), 10, "and n output");
      blocks = {kTableReIntro, demo_phrase};
      const char* tables[] = {kTableReDemo1Table, kTableReDemo2Table};
      const char* answers[] = {kTableReDemo1Answer, kTableReDemo2Answer};
      for (int d = 0; d < shots; ++d) {
        blocks.push_back(std::string("Table: ") + tables[d]);
        blocks.push_back(question);
        blocks.push_back(std::string("Relations: ") + answers[d]);
      }
      blocks.push_back("Table: " + payload);
      blocks.push_back(query_question);
      blocks.push_back("Entities:");
      break;
    }
  }
  b.text = join_blocks(blocks);
  if (b.text.size() > options.max_prompt_chars)
    throw Error(ErrorCode::PayloadTooLarge, "prompt has " + std::to_string(b.text.size()) +
                                                " characters, budget is " + std::to_string(options.max_prompt_chars));
  return b;
}

// ---------------------------------------------------------------------------
// Chat client

ChatConfig ChatConfig::from_env() {
  ChatConfig c;
  if (const char* v = std::getenv("SCIMINE_LLM_URL")) c.base_url = v;
  if (const char* v = std::getenv("SCIMINE_LLM_KEY")) c.api_key = v;
  if (const char* v = std::getenv("SCIMINE_LLM_MODEL")) c.model = v;
  return c;
}

ChatClient::ChatClient(ChatConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.post) cfg_.post = default_http_post(cfg_.timeout_seconds);
  while (!cfg_.base_url.empty() && cfg_.base_url.back() == '/') cfg_.base_url.pop_back();
}

void ChatClient::throttle() {
  if (cfg_.requests_per_second <= 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / cfg_.requests_per_second));
  }
  std::this_thread::sleep_until(slot);
}

std::string ChatClient::complete(const std::string& prompt) {
  if (cfg_.base_url.empty()) throw Error(ErrorCode::BackendUnavailable, "no chat endpoint configured (SCIMINE_LLM_URL)");
  Json req{{"model", cfg_.model},
           {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
           {"temperature", 0}};
  std::string body = dump(req);
  Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + cfg_.api_key);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << std::min(attempt - 1, 10)));
    throttle();
    std::pair<int, std::string> res;
    try {
      res = cfg_.post(cfg_.base_url + "/chat/completions", body, headers);
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    if (res.first == 429 || res.first >= 500) {
      last_error = "HTTP " + std::to_string(res.first);
      continue;
    }
    if (res.first != 200)
      throw Error(ErrorCode::BackendUnavailable, "chat endpoint returned HTTP " + std::to_string(res.first));
    try {
      Json j = parse_json(res.second);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::BackendProtocol, std::string("unexpected chat reply: ") + e.what());
    }
  }
  throw Error(ErrorCode::BackendUnavailable, "chat endpoint failed after retries: " + last_error);
}

std::vector<std::string> ChatClient::complete_all(const std::vector<std::string>& prompts) {
  std::vector<std::string> out(prompts.size());
  parallel_for(prompts.size(), cfg_.max_in_flight, [&](size_t i) { out[i] = complete(prompts[i]); });
  return out;
}

namespace {

void merge_into(ParsedResponse& dst, ParsedResponse&& src) {
  for (auto& e : src.entities) dst.entities.push_back(std::move(e));
  for (auto& r : src.relations) dst.relations.push_back(r);
  for (auto& i : src.items) dst.items.push_back(std::move(i));
  for (auto& i : src.issues) dst.issues.push_back(std::move(i));
}

}  // namespace

ParsedResponse llm_extract_text(const ParsedDocument& doc, ChatClient& client, const LlmExtractOptions& o) {
  auto sents = doc.sentences();
  size_t group = std::max<size_t>(1, o.sentences_per_prompt);
  std::vector<std::vector<size_t>> groups;
  std::vector<std::string> prompts;
  for (size_t s = 0; s < sents.size(); s += group) {
    std::vector<size_t> ids;
    std::vector<const Sentence*> ptrs;
    for (size_t k = s; k < std::min(sents.size(), s + group); ++k) {
      ids.push_back(k);
      ptrs.push_back(sents[k]);
    }
    prompts.push_back(build_prompt(LlmTask::TextNer, o.shots, render_sentences(ptrs), false, o.prompt).text);
    groups.push_back(std::move(ids));
  }
  auto replies = client.complete_all(prompts);
  ParsedResponse out;
  for (size_t g = 0; g < groups.size(); ++g) merge_into(out, parse_text_ner(replies[g], doc, groups[g]));
  return out;
}

ParsedResponse llm_extract_table_ner(const TableGrid& grid, size_t table_idx, ChatClient& client,
                                     const LlmExtractOptions& o) {
  auto prompt = build_prompt(LlmTask::TableNer, o.shots, render_table_payload(grid), o.include_score, o.prompt);
  return parse_table_ner(client.complete(prompt.text), grid, table_idx, o.include_score);
}

ParsedResponse llm_extract_table_re(const TableGrid& grid, ChatClient& client, const LlmExtractOptions& o) {
  auto prompt = build_prompt(LlmTask::TableRe, o.shots, render_table_payload(grid), false, o.prompt);
  return parse_table_re(client.complete(prompt.text), grid);
}

std::vector<Entity> LlmTextBackend::extract(const ParsedDocument& doc) {
  return llm_extract_text(doc, client_, opts_).entities;
}

}  // namespace scimine
