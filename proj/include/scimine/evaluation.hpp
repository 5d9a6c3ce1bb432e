#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scimine/docmodel.hpp"
#include "scimine/serialize.hpp"
#include "scimine/table_extract.hpp"
#include "scimine/text_extract.hpp"

namespace scimine {

struct PRF {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  static PRF from_counts(size_t tp, size_t fp, size_t fn);
  PRF& operator+=(const PRF& o);
};

/// Type is a free string so predictions outside the schema can be scored.
struct ScoredEntity {
  std::string doc;
  Anchor anchor;
  std::string type;
};

struct ScoredRelation {
  std::string doc;
  size_t table = 0;
  Anchor a;
  Anchor b;
  std::string type_a;
  std::string type_b;
};

/// Exact (doc, anchor, type) matching; each gold matched at most once.
PRF score_ner(const std::vector<ScoredEntity>& gold, const std::vector<ScoredEntity>& pred);
/// (doc, table, unordered anchor pair); types only compared when strict_types.
PRF score_re(const std::vector<ScoredRelation>& gold, const std::vector<ScoredRelation>& pred,
             bool strict_types = false);

enum class EntityScope { Text, Table, All };
std::vector<ScoredEntity> scored_entities(const AnnotatedDocument& doc, EntityScope scope);
std::vector<ScoredRelation> scored_relations(const AnnotatedDocument& doc);

// ---------------------------------------------------------------------------

struct ErrorCounts {
  size_t missing = 0;
  size_t unannotated = 0;
  size_t incorrect_type = 0;
  size_t undefined_type = 0;
  size_t others = 0;

  ErrorCounts& operator+=(const ErrorCounts& o);
  bool operator==(const ErrorCounts&) const = default;
};

/// After exact matches are removed, a prediction sharing its boundary with a
/// leftover gold entity is one type error (incorrect_type when its type is in
/// `predefined`, undefined_type otherwise). Leftover gold is missing; leftover
/// predictions are unannotated. So fn = missing + incorrect + undefined and
/// fp = unannotated + incorrect + undefined. `others` carries parse issues.
ErrorCounts categorize_errors(const std::vector<ScoredEntity>& gold, const std::vector<ScoredEntity>& pred,
                              const std::set<std::string>& predefined, size_t parse_issues = 0);

/// Fractions of table entity types. Throws EmptyCorpus.
std::map<EntityType, double> entity_distribution(const std::vector<AnnotatedDocument>& docs);
std::map<EntityType, size_t> entity_counts(const std::vector<AnnotatedDocument>& docs);

// ---------------------------------------------------------------------------

struct SpeedRecord {
  size_t batch_size = 32;
  size_t sentences = 0;
  size_t tables = 0;
  size_t text_batches = 0;
  size_t table_batches = 0;
  double text_seconds = 0;
  double table_ner_seconds = 0;
  double table_re_seconds = 0;
  std::optional<double> text_per_s;       // sentences / s
  std::optional<double> table_ner_per_s;  // tables / s
  std::optional<double> table_re_per_s;   // tables / s
  std::string hardware;
};

/// Monotonic seconds.
using Clock = std::function<double()>;
Clock steady_clock_seconds();
std::string hardware_description();

/// A warm-up batch per task runs before timing starts. Rates are absent when
/// there are no items or no measurable time.
SpeedRecord measure_speed(const std::vector<ParsedDocument>& docs, TextBackend& text, TableBackend& table,
                          size_t batch = 32, const Clock& clock = {}, const TableExtractOptions& options = {});

// ---------------------------------------------------------------------------

struct TaskScores {
  PRF text_ner;
  PRF table_ner;
  PRF table_re;
};

struct EvalOptions {
  bool per_domain = true;
  bool errors = true;
  bool strict_re_types = false;
  std::set<std::string> predefined;  // defaults to the seven schema types
};

struct EvalReport {
  TaskScores overall;
  std::map<Domain, TaskScores> per_domain;
  TaskScores macro;  // unweighted mean over domains present
  std::optional<SpeedRecord> speed;
  std::optional<ErrorCounts> text_errors;
  std::optional<ErrorCounts> table_errors;
  std::map<EntityType, double> entity_distribution;
  std::string hardware;

  Json to_json() const;
  std::string render_text() const;
};

/// Pred documents are paired with gold by doc id; absent predictions score as empty.
EvalReport evaluate(const std::vector<AnnotatedDocument>& gold, const std::vector<AnnotatedDocument>& pred,
                    const EvalOptions& options = {});

}  // namespace scimine
