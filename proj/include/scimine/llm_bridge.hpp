#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "scimine/docmodel.hpp"
#include "scimine/http.hpp"
#include "scimine/table_extract.hpp"

namespace scimine {

enum class LlmTask { TextNer, TableNer, TableRe };
std::string_view to_string(LlmTask t);
std::optional<LlmTask> parse_llm_task(std::string_view s);  // accepts text-ner / text_ner etc.

struct PromptBundle {
  LlmTask task = LlmTask::TextNer;
  int shots = 2;
  bool include_score = false;
  std::string text;
};

struct PromptOptions {
  size_t max_prompt_chars = 32768;
};

/// Query payload renderings: sentences joined by spaces, tables as a Python
/// list of row lists (['System', 'F1'], ...).
std::string render_sentences(const std::vector<const Sentence*>& sentences);
std::string render_table_payload(const TableGrid& grid);
std::string py_quote(std::string_view s);

/// `payload` is the already-rendered query ([S] or [T] slot). Throws
/// PayloadTooLarge and InvalidArgument (shots outside 1..2).
PromptBundle build_prompt(LlmTask task, int shots, const std::string& payload, bool include_score = true,
                          const PromptOptions& options = {});

// ---------------------------------------------------------------------------
// Response parsing

struct ResponseIssue {
  enum class Kind { Malformed, UndefinedType, Truncated, Ambiguous } kind = Kind::Malformed;
  std::string fragment;

  bool operator==(const ResponseIssue&) const = default;
};
std::string_view to_string(ResponseIssue::Kind k);

struct ParsedResponse {
  std::vector<Entity> entities;                    // empty ids, provenance llm
  std::vector<std::pair<Coord, Coord>> relations;  // table RE, canonical order
  std::vector<std::pair<std::string, std::string>> items;  // raw (surface, type) or (cell, cell)
  std::vector<ResponseIssue> issues;

  size_t count(ResponseIssue::Kind k) const;
};

/// Text NER answer "[[name, type], ...]" located in the query sentences
/// (global indices `sentence_ids` of `doc`).
ParsedResponse parse_text_ner(std::string_view response, const ParsedDocument& doc,
                              const std::vector<size_t>& sentence_ids);
/// Raw pairs only, no locating.
ParsedResponse parse_text_ner(std::string_view response);

/// Table NER answer "{'Type': [cells], ...}" mapped onto `grid` (table index `table_idx`).
ParsedResponse parse_table_ner(std::string_view response, const TableGrid& grid, size_t table_idx,
                               bool include_score = true);
/// Table RE answer "{['cellA':'cellB', ...]}" mapped onto coordinate pairs.
ParsedResponse parse_table_re(std::string_view response, const TableGrid& grid);

std::string render_text_ner_answer(const std::vector<std::pair<std::string, std::string>>& items);
std::string render_table_ner_answer(const std::map<EntityType, std::vector<std::string>>& by_type,
                                    bool include_score);
std::string render_table_re_answer(const std::vector<std::pair<std::string, std::string>>& pairs);

// ---------------------------------------------------------------------------
// Chat-completion client

struct ChatConfig {
  std::string base_url;
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  double requests_per_second = 0;  // 0 = unlimited
  size_t max_in_flight = 4;
  int max_retries = 3;
  int backoff_ms = 500;
  int timeout_seconds = 120;
  HttpPost post;

  /// SCIMINE_LLM_URL, SCIMINE_LLM_KEY, SCIMINE_LLM_MODEL.
  static ChatConfig from_env();
};

class ChatClient {
 public:
  explicit ChatClient(ChatConfig cfg);
  /// Throws BackendUnavailable after exhausting retries, BackendProtocol on a
  /// reply without choices[0].message.content.
  std::string complete(const std::string& prompt);
  std::vector<std::string> complete_all(const std::vector<std::string>& prompts);
  const ChatConfig& config() const { return cfg_; }

 private:
  void throttle();
  ChatConfig cfg_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

struct LlmExtractOptions {
  int shots = 2;
  bool include_score = true;
  size_t sentences_per_prompt = 4;
  PromptOptions prompt;
};

/// Text NER over consecutive sentence groups.
ParsedResponse llm_extract_text(const ParsedDocument& doc, ChatClient& client, const LlmExtractOptions& o = {});
ParsedResponse llm_extract_table_ner(const TableGrid& grid, size_t table_idx, ChatClient& client,
                                     const LlmExtractOptions& o = {});
ParsedResponse llm_extract_table_re(const TableGrid& grid, ChatClient& client, const LlmExtractOptions& o = {});

class LlmTextBackend : public TextBackend {
 public:
  LlmTextBackend(ChatConfig cfg, LlmExtractOptions o = {}) : client_(std::move(cfg)), opts_(o) {}
  std::string name() const override { return "llm"; }
  std::vector<Entity> extract(const ParsedDocument& doc) override;

 private:
  ChatClient client_;
  LlmExtractOptions opts_;
};

}  // namespace scimine
