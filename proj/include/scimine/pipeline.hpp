#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "scimine/docmodel.hpp"
#include "scimine/serialize.hpp"
#include "scimine/table_extract.hpp"
#include "scimine/text_extract.hpp"

namespace scimine {

// ---------------------------------------------------------------------------
// Corrections and merging

struct Correction {
  enum class Op { Add, Remove, Retype, Respan, AddRel, RemoveRel } op = Op::Add;
  std::string id;  // add (optional), remove, retype, respan
  std::optional<Anchor> anchor;
  std::optional<EntityType> type;
  std::string e1, e2;  // add_rel, remove_rel

  bool operator==(const Correction&) const = default;
};

std::string_view to_string(Correction::Op op);
Json to_json(const Correction& c);
/// Throws InvalidCorrection on malformed input.
Correction correction_from_json(const Json& j);

/// Applies corrections in order. Touched entities and relations become
/// `reviewed`. Throws InvalidCorrection when a correction does not apply or
/// the result fails validation.
AnnotatedDocument apply_corrections(const AnnotatedDocument& doc, const std::vector<Correction>& corrections);

/// Optimistic merge: StaleVersion unless `expected_version` equals doc.version.
/// The result has version + 1; with `finalize` it becomes gold and every
/// annotation is marked reviewed.
AnnotatedDocument merge_review(const AnnotatedDocument& doc, uint64_t expected_version,
                               const std::vector<Correction>& corrections, bool finalize = true);

/// Corrections that turn `from` into `to` (same parsed document). Used by the
/// simulated reviewer and for diffing.
std::vector<Correction> diff_annotations(const AnnotatedDocument& from, const AnnotatedDocument& to);

// ---------------------------------------------------------------------------
// Stage 1

struct StageOptions {
  TableExtractOptions table;
  size_t workers = 1;
  int round = 1;
};

struct DocError {
  std::string doc_id;
  std::string stage;
  std::string message;
};

struct StageResult {
  std::vector<AnnotatedDocument> docs;  // input order, failed docs omitted
  std::vector<DocError> errors;
  std::map<std::string, double> seconds;  // per-doc wall time
};

/// Text NER, then per table NER, label guiding and RE. Stage names are logged
/// on the document in that order.
AnnotatedDocument annotate_document(const ParsedDocument& doc, TextBackend& text, TableBackend& table,
                                    const StageOptions& options = {});

/// Backends must tolerate concurrent calls when workers > 1.
StageResult run_stage1(const std::vector<ParsedDocument>& docs, TextBackend& text, TableBackend& table,
                       const StageOptions& options = {});

// ---------------------------------------------------------------------------
// Rounds

struct Round {
  int index = 1;
  std::vector<std::string> train_doc_ids;
  std::vector<std::string> produced_gold;
  std::map<std::string, std::string> extractor_snapshots;  // name -> sha256

  bool operator==(const Round&) const = default;
};

Json to_json(const Round& r);
Round round_from_json(const Json& j);

Json to_json(const Gazetteer& g);
Gazetteer gazetteer_from_json(const Json& j);

struct Extractors {
  Gazetteer text;
  Gazetteer table;
  std::map<std::string, std::string> snapshots() const;
};

/// Both gazetteers trained on `gold`.
Extractors train_extractors(const std::vector<AnnotatedDocument>& gold);

// ---------------------------------------------------------------------------
// Workspace: parsed/, annotations/, reviews/, rounds/ under one root.

enum class TaskStatus { Pending, InProgress, Done };
std::string_view to_string(TaskStatus s);
std::optional<TaskStatus> parse_task_status(std::string_view s);

struct ReviewTask {
  std::string doc_id;
  std::optional<std::string> assigned_to;
  TaskStatus status = TaskStatus::Pending;
  uint64_t version = 0;
  int round = 0;
  Domain domain = Domain::OTHER;
};

Json to_json(const ReviewTask& t);

class Workspace {
 public:
  /// Creates the directory layout if needed.
  static Workspace init(const std::filesystem::path& root);
  /// Throws NotFound when `root` is not a workspace.
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path parsed_dir() const { return root_ / "parsed"; }
  std::filesystem::path annotations_dir() const { return root_ / "annotations"; }
  std::filesystem::path reviews_dir() const { return root_ / "reviews"; }
  std::filesystem::path rounds_dir() const { return root_ / "rounds"; }

  void put_parsed(const ParsedDocument& doc) const;
  std::optional<ParsedDocument> get_parsed(const std::string& doc_id) const;
  std::vector<std::string> parsed_ids() const;

  void put_annotations(const AnnotatedDocument& doc) const;
  std::optional<AnnotatedDocument> get_annotations(const std::string& doc_id) const;
  std::vector<std::string> annotated_ids() const;
  std::vector<AnnotatedDocument> gold_documents() const;

  PartitionManifest partitions() const;
  void set_partitions(const PartitionManifest& m) const;

  std::vector<Round> rounds() const;
  void append_round(const Round& r) const;
  Extractors load_extractors(int round) const;

  std::vector<ReviewTask> tasks() const;
  std::optional<ReviewTask> task(const std::string& doc_id) const;
  void put_task(const ReviewTask& t) const;

  void append_event(const Json& event) const;
  std::vector<Json> events() const;
  void log_error(const DocError& e) const;
  std::vector<DocError> errors() const;

 private:
  std::filesystem::path root_;
  std::shared_ptr<std::mutex> log_mu_ = std::make_shared<std::mutex>();
};

std::string safe_doc_filename(const std::string& doc_id);

struct RunOptions {
  std::string text_backend = "gazetteer";  // gazetteer | remote
  std::string table_backend = "heuristic";  // heuristic | remote
  std::string endpoint;                     // for remote backends
  StageOptions stage;
};

/// Annotates the partition with the round's extractors and opens review
/// tasks. Gold and in-review documents are left untouched; already annotated
/// documents of the same round are skipped, so an interrupted run can resume.
StageResult run_round(const Workspace& ws, PartitionName partition, int round, const RunOptions& options = {});

/// First call opens round 1 from all gold documents. Later calls append the
/// gold documents not yet in the train set. Retrains and snapshots the
/// extractors and writes training exports under rounds/round<N>/.
/// Throws NoNewGold.
Round advance_round(const Workspace& ws);

/// Task helpers shared by the CLI and the review service.
ReviewTask claim_task(const Workspace& ws, const std::string& doc_id, const std::string& reviewer);
AnnotatedDocument submit_corrections(const Workspace& ws, const std::string& doc_id, uint64_t version,
                                     const std::vector<Correction>& corrections, const std::string& reviewer);
AnnotatedDocument complete_task(const Workspace& ws, const std::string& doc_id, const std::string& reviewer);
ReviewTask reopen_task(const Workspace& ws, const std::string& doc_id, const std::string& reviewer);

/// Rebuilds annotation state from parsed documents plus the event log.
std::map<std::string, AnnotatedDocument> replay_events(const Workspace& ws);

}  // namespace scimine
