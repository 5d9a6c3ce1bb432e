#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scimine/docmodel.hpp"
#include "scimine/http.hpp"
#include "scimine/text_extract.hpp"

namespace scimine {

using Coord = std::pair<size_t, size_t>;  // 0-based (row, col)

struct FlatTable {
  std::string text;
  std::map<Coord, std::pair<size_t, size_t>> coord_spans;  // [begin, end) byte offsets

  std::string_view slice(size_t i, size_t j) const;
};

inline constexpr const char* kCapMarker = "[CAP]";
inline constexpr const char* kSepMarker = "[SEP]";
inline constexpr const char* kRowMarker = "[ROW]";

/// "<caption> [CAP] c11 [SEP] c12 ... [ROW] c21 [SEP] ..."
FlatTable flatten_table(const TableGrid& grid);

enum class ScoreMode { WithScore, WithoutScore };

inline constexpr const char* kNoneLabel = "None";

/// Γ ∪ {None} in fixed type order; WithoutScore drops Score.
std::vector<std::string> table_labels(ScoreMode mode);

struct PromptInstance {
  std::string statement;
  std::shared_ptr<const FlatTable> table;
  Coord cell{};
  std::optional<Coord> other;  // second cell for relation statements
  std::string label;           // label named in the statement (NER) or empty (RE)
  std::optional<std::string> positive;
  std::vector<std::string> negatives;
  std::vector<std::string> candidates;
};

std::string ner_statement(const std::string& cell_text, size_t i, size_t j, const std::string& label);
std::string re_statement(const std::string& a_text, Coord a, const std::string& b_text, Coord b);

/// One instance per (cell, label), cells row-major, labels in table_labels order.
std::vector<PromptInstance> gen_ner_statements(const TableGrid& grid, ScoreMode mode);

/// Unordered cross-type pairs, each pair in canonical order (row-major lower
/// coordinate first, then id).
std::vector<std::pair<const Entity*, const Entity*>> candidate_pairs(const std::vector<Entity>& entities);

std::vector<PromptInstance> gen_re_statements(
    const TableGrid& grid, const std::vector<std::pair<const Entity*, const Entity*>>& pairs);

/// Overwrites table entity types with the dominant text type of the same
/// normalized surface. Score and Setting entities are left alone.
std::vector<Entity> apply_label_guiding(const std::vector<Entity>& text_entities,
                                        const std::vector<Entity>& table_entities);

/// Surfaces whose guidable table entities disagree with the text's dominant type.
std::vector<std::string> guiding_violations(const std::vector<Entity>& text_entities,
                                            const std::vector<Entity>& table_entities);

struct Inconsistency {
  enum class Axis { Row, Col } axis = Axis::Row;
  size_t index = 0;
  std::map<EntityType, size_t> types;

  bool operator==(const Inconsistency&) const = default;
};

/// Rows ignore column 0 and columns ignore row 0 (header cells).
std::vector<Inconsistency> structure_diagnostics(const TableGrid& grid, const std::vector<Entity>& entities,
                                                 size_t min_types = 3);

// ---------------------------------------------------------------------------
// Backends

class TableBackend {
 public:
  virtual ~TableBackend() = default;
  virtual std::string name() const = 0;
  /// probs[k][l] for coords[k] and labels[l].
  virtual std::vector<std::vector<double>> ner_probs(const TableGrid& grid, const FlatTable& flat,
                                                     const std::vector<Coord>& coords,
                                                     const std::vector<std::string>& labels) = 0;
  /// Relation probability per pair. `types` carries the current cell types.
  virtual std::vector<double> re_probs(const TableGrid& grid, const FlatTable& flat,
                                       const std::vector<std::pair<Coord, Coord>>& pairs,
                                       const std::map<Coord, EntityType>& types) = 0;
};

/// Score by number pattern, other types by table gazetteer, relations between
/// header entities (column 0 of the row, row 0 of the column) and Score cells.
class HeuristicTableBackend : public TableBackend {
 public:
  explicit HeuristicTableBackend(Gazetteer g = {}, bool metric_lexicon = true)
      : g_(std::move(g)), metric_lexicon_(metric_lexicon) {}
  std::string name() const override { return "heuristic"; }
  std::vector<std::vector<double>> ner_probs(const TableGrid&, const FlatTable&, const std::vector<Coord>&,
                                             const std::vector<std::string>&) override;
  std::vector<double> re_probs(const TableGrid&, const FlatTable&, const std::vector<std::pair<Coord, Coord>>&,
                               const std::map<Coord, EntityType>&) override;
  /// Without Score, numeric cells fall through to the gazetteer.
  std::optional<EntityType> classify(const TableGrid& grid, size_t i, size_t j, bool allow_score = true) const;
  const Gazetteer& gazetteer() const { return g_; }

 private:
  Gazetteer g_;
  bool metric_lexicon_;
};

bool is_score_text(std::string_view s);

/// POST /v1/table/ner and /v1/table/re. Coordinates on the wire are 0-based.
class RemoteTableBackend : public TableBackend {
 public:
  explicit RemoteTableBackend(RemoteConfig cfg);
  std::string name() const override { return "remote"; }
  std::vector<std::vector<double>> ner_probs(const TableGrid&, const FlatTable&, const std::vector<Coord>&,
                                             const std::vector<std::string>&) override;
  std::vector<double> re_probs(const TableGrid&, const FlatTable&, const std::vector<std::pair<Coord, Coord>>&,
                               const std::map<Coord, EntityType>&) override;

 private:
  std::string call(const std::string& path, const std::string& body);
  RemoteConfig cfg_;
};

struct TableExtractOptions {
  ScoreMode mode = ScoreMode::WithScore;
  double re_threshold = 0.5;
  bool label_guiding = true;
};

struct TableExtraction {
  std::vector<Entity> entities;  // empty ids
  std::vector<std::pair<Coord, Coord>> relations;
};

/// NER (argmax, None dropped), label guiding, then RE over candidate pairs.
TableExtraction extract_table(const TableGrid& grid, size_t table_idx, const std::vector<Entity>& text_entities,
                              TableBackend& backend, const TableExtractOptions& options = {});

/// JSONL prompt instances {kind, doc_id, table, statement, flat_table, positive, negatives}.
std::string export_table_training(const std::vector<AnnotatedDocument>& docs, bool relations, ScoreMode mode);

}  // namespace scimine
