#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scimine/docmodel.hpp"
#include "scimine/http.hpp"

namespace scimine {

inline constexpr size_t kDefaultWordBudget = 512;

struct ContextWindow {
  std::string doc_id;
  size_t center = 0;              // global sentence index
  std::vector<size_t> sentences;  // contiguous, ascending
  size_t word_budget = kDefaultWordBudget;
  size_t words = 0;
  bool over_budget = false;  // the center alone exceeds the budget
};

/// One window per sentence, grown one neighbour at a time, left then right,
/// until the next neighbour on both sides would overflow the budget.
std::vector<ContextWindow> build_windows(const ParsedDocument& doc,
                                         size_t budget = kDefaultWordBudget,
                                         std::vector<std::string>* diagnostics = nullptr);

// ---------------------------------------------------------------------------
// Label mapping

enum class SourceSchema { SciERC, SciREX };
std::string_view to_string(SourceSchema s);
std::optional<SourceSchema> parse_source_schema(std::string_view s);

struct LabelMapSpec {
  SourceSchema source = SourceSchema::SciERC;
  /// Source type -> target type, or nullopt for DROP. Types absent here are unknown.
  std::map<std::string, std::optional<EntityType>> mapping;

  static LabelMapSpec for_schema(SourceSchema s);
};

struct ExternalSpan {
  size_t sentence = 0;  // global sentence index
  size_t l = 0;
  size_t r = 0;  // half-open
  std::string type;
};

struct ExternalDocument {
  ParsedDocument doc;
  std::vector<ExternalSpan> spans;
};

/// Strict mode throws UnknownSourceType; lenient mode skips and records a warning.
std::vector<Entity> map_labels(const ExternalDocument& ext, const LabelMapSpec& spec,
                               bool strict = false, std::vector<std::string>* warnings = nullptr);

/// SciERC-style JSONL: doc_key, sentences, ner (document-level inclusive token offsets).
std::vector<ExternalDocument> load_scierc_jsonl(std::string_view text);

// ---------------------------------------------------------------------------
// Gazetteer

struct GazetteerEntry {
  std::map<EntityType, size_t> counts;
  EntityType dominant() const;
  size_t total() const;
};

struct Gazetteer {
  std::map<std::string, GazetteerEntry> entries;  // normalized surface -> counts
  std::map<std::string, std::string> abbrev_links;  // short form -> long form (both normalized)

  void add(const std::string& surface, EntityType type, size_t count = 1);
  /// Type of a lower-cased surface, following abbreviation links.
  std::optional<EntityType> lookup(const std::string& surface) const;
  bool empty() const { return entries.empty(); }

  /// Longest-match, leftmost-first scan. Returns (l, r, type) half-open spans.
  std::vector<std::tuple<size_t, size_t, EntityType>> match(const std::vector<std::string>& words) const;
  size_t max_key_words() const;
};

/// Initials of the content words of `long_form`, hyphenated parts counted separately.
std::string initialism(const std::string& long_form);
bool is_initialism_of(const std::string& short_form, const std::string& long_form);

enum class Modality { Text, Table };

/// Gold documents only. Table modality skips Score (matched by pattern instead).
Gazetteer train_gazetteer(const std::vector<AnnotatedDocument>& gold, Modality modality = Modality::Text);

// ---------------------------------------------------------------------------
// Backends

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string name() const = 0;
  /// Entities with empty ids; the caller assigns ids.
  virtual std::vector<Entity> extract(const ParsedDocument& doc) = 0;
};

class GazetteerTextBackend : public TextBackend {
 public:
  explicit GazetteerTextBackend(Gazetteer g) : g_(std::move(g)) {}
  std::string name() const override { return "gazetteer"; }
  std::vector<Entity> extract(const ParsedDocument& doc) override;
  const Gazetteer& gazetteer() const { return g_; }

 private:
  Gazetteer g_;
};

struct RemoteConfig {
  std::string endpoint;  // base URL, e.g. http://127.0.0.1:8000
  size_t batch_size = 32;
  size_t max_in_flight = 4;
  size_t word_budget = kDefaultWordBudget;
  int timeout_seconds = 60;
  HttpPost post;  // defaults to default_http_post
};

/// POST /v1/extract/text. Response entity `s` is the window's position in the
/// request batch; l/r index the window's center sentence.
class RemoteTextBackend : public TextBackend {
 public:
  explicit RemoteTextBackend(RemoteConfig cfg);
  std::string name() const override { return "remote"; }
  std::vector<Entity> extract(const ParsedDocument& doc) override;

 private:
  RemoteConfig cfg_;
};

std::vector<Entity> extract_text(const ParsedDocument& doc, TextBackend& backend);

/// Assigns "e<N>" ids to entities lacking one, continuing from the largest id present.
void assign_ids(AnnotatedDocument& doc);

/// JSONL records {origin, doc_id, tokens, entities:[{l,r,type}]}, one per window.
std::string export_text_training(const std::vector<AnnotatedDocument>& docs, const std::string& origin,
                                 size_t budget = kDefaultWordBudget);

}  // namespace scimine
