#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scimine/latex_corpus.hpp"

namespace scimine {

enum class EntityType { Task, Dataset, Metric, Model, Method, Setting, Score };

inline constexpr std::array<EntityType, 7> kAllEntityTypes = {
    EntityType::Task,   EntityType::Dataset, EntityType::Metric, EntityType::Model,
    EntityType::Method, EntityType::Setting, EntityType::Score};
inline constexpr std::array<EntityType, 5> kTextEntityTypes = {
    EntityType::Task, EntityType::Dataset, EntityType::Metric, EntityType::Model,
    EntityType::Method};

std::string_view to_string(EntityType t);
std::optional<EntityType> parse_entity_type(std::string_view s);
/// Setting and Score only occur in tables.
bool is_text_type(EntityType t);

enum class Provenance { Auto, Mapped, Llm, Reviewed };
std::string_view to_string(Provenance p);
std::optional<Provenance> parse_provenance(std::string_view s);

/// Half-open word range [l, r) in a sentence (global 0-based sentence index).
struct TextAnchor {
  size_t sentence = 0;
  size_t l = 0;
  size_t r = 0;
  auto operator<=>(const TextAnchor&) const = default;
};

/// Half-open word range inside table cell (row, col).
struct TableAnchor {
  size_t table = 0;
  size_t row = 0;
  size_t col = 0;
  size_t l = 0;
  size_t r = 0;
  auto operator<=>(const TableAnchor&) const = default;
};

using Anchor = std::variant<TextAnchor, TableAnchor>;

bool is_table(const Anchor& a);
std::string anchor_key(const Anchor& a);

struct Entity {
  std::string id;
  Anchor anchor;
  EntityType type = EntityType::Task;
  std::string surface;
  Provenance provenance = Provenance::Auto;

  bool operator==(const Entity&) const = default;
};

/// Unordered pair, stored with e1 < e2.
struct TableRelation {
  std::string e1;
  std::string e2;
  size_t table = 0;
  Provenance provenance = Provenance::Auto;

  bool operator==(const TableRelation&) const = default;
};

TableRelation make_relation(std::string a, std::string b, size_t table,
                            Provenance p = Provenance::Auto);

enum class ReviewState { Unreviewed, InReview, Gold };
std::string_view to_string(ReviewState s);
std::optional<ReviewState> parse_review_state(std::string_view s);

struct AnnotatedDocument {
  ParsedDocument doc;
  std::vector<Entity> entities;
  std::vector<TableRelation> relations;
  int round = 0;
  ReviewState review_state = ReviewState::Unreviewed;
  uint64_t version = 0;
  /// Pipeline stages applied, in order (e.g. text_ner, table_ner, label_guiding).
  std::vector<std::string> stages;

  const Entity* find_entity(std::string_view id) const;
  std::string next_entity_id() const;

  bool operator==(const AnnotatedDocument&) const = default;
};

/// Words covered by an anchor, or nullopt when it does not resolve.
std::optional<std::vector<std::string>> resolve_anchor(const ParsedDocument& doc,
                                                       const Anchor& anchor);
std::optional<std::string> anchor_surface(const ParsedDocument& doc, const Anchor& anchor);

/// Builds an entity with its surface derived from the document.
Entity make_entity(const ParsedDocument& doc, std::string id, const Anchor& anchor,
                   EntityType type, Provenance provenance = Provenance::Auto);

// ---------------------------------------------------------------------------
// Guideline validation

enum class Severity { Error, Warning };
std::string_view to_string(Severity s);

struct Finding {
  std::string rule_id;
  Severity severity = Severity::Warning;
  std::string entity_id;  // or "e1|e2" for relation findings
  std::optional<Anchor> anchor;
  std::string message;
  std::string suggestion;

  auto operator<=>(const Finding&) const = default;
};

using ValidationReport = std::vector<Finding>;

/// Rule ids: "anchor", "surface", "modality", "relation_endpoint", "cross_table",
/// "rule8" (errors); "rule4", "rule5", "rule7" (warnings). Output is sorted.
ValidationReport validate(const AnnotatedDocument& doc);
bool has_errors(const ValidationReport& report);

/// Case-folds, strips leading determiners and generic head words at the edges,
/// and collapses whitespace. Idempotent.
std::string normalize_surface(std::string_view s);

/// Surface with generic head words ("network", "model", ...) trimmed from the
/// edges, original case kept. Empty when nothing would be trimmed.
std::string trim_generic_heads(std::string_view s);

// ---------------------------------------------------------------------------
// Partitions and statistics

enum class PartitionName { Seeds, Added, Test, Large };
std::string_view to_string(PartitionName p);
std::optional<PartitionName> parse_partition_name(std::string_view s);

struct CorpusPartition {
  PartitionName name = PartitionName::Seeds;
  std::vector<std::string> doc_ids;
  std::map<std::string, Domain> domains;  // doc_id -> domain tag
  std::optional<size_t> expected_size;
};

struct PartitionManifest {
  std::vector<CorpusPartition> partitions;

  const CorpusPartition* find(PartitionName name) const;
  /// Throws InvalidArgument when a doc id appears in two partitions.
  void check_disjoint() const;
};

struct StatsTable {
  size_t documents = 0;
  double sentences = 0;
  double words = 0;
  double tables = 0;
  double cells = 0;
  double text_entities = 0;
  double table_entities = 0;
  double table_relations = 0;

  std::string render() const;
};

using DocumentLookup = std::function<std::optional<AnnotatedDocument>(const std::string& doc_id)>;

/// Per-paper means over the partition. Throws MissingDocument for absent ids.
StatsTable corpus_stats(const CorpusPartition& partition, const DocumentLookup& lookup);
StatsTable corpus_stats(std::span<const AnnotatedDocument> docs);

}  // namespace scimine
