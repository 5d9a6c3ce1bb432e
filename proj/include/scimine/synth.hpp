#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scimine/docmodel.hpp"
#include "scimine/pipeline.hpp"

namespace scimine {

struct SynthTerm {
  std::string surface;
  EntityType type = EntityType::Task;
};

struct SynthOptions {
  uint64_t seed = 20240501;
  size_t vocab_size = 200;  // split evenly over the five text types
  size_t seeds = 10;
  size_t added = 30;
  size_t test = 10;
  // Terms drawn per paper.
  size_t systems = 4;  // Model or Method, the rows of the result tables
  size_t datasets = 2;
  size_t metrics = 2;
  size_t tasks = 2;
  size_t filler_sentences = 6;
  /// Adds a numeric Setting column ("batch" sizes) to result tables.
  bool setting_column = false;
};

struct SynthCorpus {
  std::vector<SynthTerm> vocab;
  std::vector<AnnotatedDocument> truth;  // gold annotations, seeds then added then test
  PartitionManifest manifest;

  std::vector<AnnotatedDocument> partition(PartitionName name) const;
};

/// Deterministic for a given seed. Seeds and added papers are CS; test papers
/// mix CS, STAT and EESS.
SynthCorpus make_synthetic_corpus(const SynthOptions& options = {});

/// Documents whose tables hold exactly `total` entities, `score` of them Score.
std::vector<AnnotatedDocument> make_score_corpus(size_t total, size_t score, uint64_t seed = 7);

/// Parsed documents stripped of annotations.
std::vector<ParsedDocument> parsed_only(const std::vector<AnnotatedDocument>& docs);

/// Writes parsed documents and the partition manifest, and stores the seed
/// papers as gold.
void seed_workspace(const Workspace& ws, const SynthCorpus& corpus);

/// Simulated expert: claims the task, submits the diff against `truth` and completes it.
AnnotatedDocument oracle_review(const Workspace& ws, const AnnotatedDocument& truth,
                                const std::string& reviewer = "oracle");

}  // namespace scimine
