#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scimine {

enum class Domain { CS, STAT, EESS, PHYSICS, MATH, OTHER };

std::string_view to_string(Domain d);
std::optional<Domain> parse_domain(std::string_view s);

using Sentence = std::vector<std::string>;
using Paragraph = std::vector<Sentence>;

struct Section {
  std::string title;
  int depth = 1;  // 1 = section, 2 = subsection
  std::vector<Paragraph> paragraphs;

  bool operator==(const Section&) const = default;
};

using Cell = std::vector<std::string>;

struct MergedRegion {
  size_t row = 0;
  size_t col = 0;
  size_t row_span = 1;
  size_t col_span = 1;

  bool operator==(const MergedRegion&) const = default;
};

/// Rectangular table with row-major cells. Merged cells are replicated into
/// every coordinate they cover; `merged` keeps the original extents.
struct TableGrid {
  std::string caption;
  size_t rows = 0;
  size_t cols = 0;
  std::vector<Cell> cells;
  std::vector<MergedRegion> merged;

  const Cell& at(size_t i, size_t j) const { return cells[i * cols + j]; }
  Cell& at(size_t i, size_t j) { return cells[i * cols + j]; }
  std::string text(size_t i, size_t j) const;

  static TableGrid from_rows(std::string caption,
                             const std::vector<std::vector<std::string>>& rows);

  bool operator==(const TableGrid&) const = default;
};

struct ParsedDocument {
  std::string doc_id;
  Domain domain = Domain::OTHER;
  std::vector<Section> sections;
  std::vector<TableGrid> tables;
  std::vector<std::string> diagnostics;

  /// Sentences in document order; index = global 0-based sentence id.
  std::vector<const Sentence*> sentences() const;
  size_t sentence_count() const;
  size_t word_count() const;

  bool operator==(const ParsedDocument&) const = default;
};

struct SourceArchive {
  std::string arxiv_id;
  std::map<std::string, std::string> files;  // path -> raw bytes
  std::string main_tex;
};

bool is_valid_arxiv_id(std::string_view id);

/// Root file: the .tex containing \documentclass; ties broken by size then path.
std::optional<std::string> detect_main_tex(const std::map<std::string, std::string>& files);

SourceArchive archive_from_files(std::string arxiv_id, std::map<std::string, std::string> files);
SourceArchive archive_from_tex(std::string arxiv_id, std::string tex);
SourceArchive load_archive_dir(std::string arxiv_id, const std::string& dir);

// gzip / tar helpers used by the fetch cache.
std::string gunzip(std::string_view data);
std::string gzip(std::string_view data);
std::map<std::string, std::string> untar(std::string_view data);
std::string make_tar(const std::map<std::string, std::string>& files);
/// Decodes an e-print payload: tar.gz, or a gzipped lone .tex file.
std::map<std::string, std::string> unpack_eprint(std::string_view payload);

struct ParseOptions {
  Domain domain = Domain::OTHER;
  int max_include_depth = 8;
  bool clean_tables = true;
};

/// Never throws on malformed LaTeX: problems are reported in `diagnostics`.
ParsedDocument parse_document(const SourceArchive& archive, const ParseOptions& options = {});
ParsedDocument parse_latex(std::string_view doc_id, std::string_view tex,
                           const ParseOptions& options = {});

TableGrid clean_table(const TableGrid& grid);
std::string clean_cell_text(std::string_view raw);

/// Plain rendering of running LaTeX text: markup stripped, inline math kept
/// verbatim (whitespace removed) as one word.
std::string render_text(std::string_view latex);

/// Whitespace tokens with leading/trailing punctuation split off.
std::vector<std::string> tokenize_words(std::string_view plain);
std::vector<Sentence> split_sentences(std::string_view plain);

struct FetchOptions {
  std::string base_url = "https://arxiv.org";
  int timeout_seconds = 60;
};

/// HTTP GET hook: returns (status, body). Throws scimine::Error(Network) on transport failure.
using HttpGet = std::function<std::pair<int, std::string>(const std::string& url)>;

HttpGet default_http_get(const FetchOptions& options);

/// Fetches `<base_url>/e-print/<id>` into `<cache_dir>/<id>/source.tar.gz` and
/// extracts it to `<cache_dir>/<id>/src/`. Cached ids never touch the network.
SourceArchive fetch_source(const std::string& arxiv_id, const std::string& cache_dir,
                           const FetchOptions& options, const HttpGet& get);
SourceArchive fetch_source(const std::string& arxiv_id, const std::string& cache_dir,
                           const FetchOptions& options = {});

}  // namespace scimine
