#include <unistd.h>

#include <filesystem>
#include <regex>
#include <string>

#include "latex_markup.hpp"
#include "scimine/error.hpp"
#include "scimine/latex_corpus.hpp"
#include "scimine/text_util.hpp"

#include "httplib.h"

namespace fs = std::filesystem;

namespace scimine {

bool is_valid_arxiv_id(std::string_view id) {
  static const std::regex modern(R"(\d{4}\.\d{4,5}(v\d+)?)");
  static const std::regex legacy(R"([a-z\-]+(\.[A-Z]{2})?/\d{7}(v\d+)?)");
  std::string s(id);
  return std::regex_match(s, modern) || std::regex_match(s, legacy);
}

std::optional<std::string> detect_main_tex(const std::map<std::string, std::string>& files) {
  std::optional<std::string> best;
  size_t best_size = 0;
  bool best_has_class = false;
  for (const auto& [path, body] : files) {
    if (fs::path(path).extension() != ".tex") continue;
    bool has_class = latex::strip_comments(body).find("\\documentclass") != std::string::npos;
    bool better = !best || (has_class && !best_has_class) ||
                  (has_class == best_has_class && body.size() > best_size);
    if (better) {
      best = path;
      best_size = body.size();
      best_has_class = has_class;
    }
  }
  return best;
}

SourceArchive archive_from_files(std::string arxiv_id, std::map<std::string, std::string> files) {
  SourceArchive a;
  a.arxiv_id = std::move(arxiv_id);
  a.files = std::move(files);
  a.main_tex = detect_main_tex(a.files).value_or("");
  return a;
}

SourceArchive archive_from_tex(std::string arxiv_id, std::string tex) {
  return archive_from_files(std::move(arxiv_id), {{"main.tex", std::move(tex)}});
}

SourceArchive load_archive_dir(std::string arxiv_id, const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), dir).generic_string()] = text::read_file(entry.path().string());
  }
  return archive_from_files(std::move(arxiv_id), std::move(files));
}

namespace {

std::optional<std::string> resolve_include(const SourceArchive& a, const fs::path& base,
                                           std::string name) {
  name = std::string(text::trim(name));
  std::vector<fs::path> candidates;
  for (const auto& root : {base, fs::path()}) {
    candidates.push_back((root / name).lexically_normal());
    candidates.push_back((root / (name + ".tex")).lexically_normal());
  }
  for (const auto& c : candidates) {
    auto it = a.files.find(c.generic_string());
    if (it != a.files.end()) return it->second;
  }
  return std::nullopt;
}

std::string expand_includes(const SourceArchive& a, const fs::path& base, std::string_view src,
                            int depth, const ParseOptions& options,
                            std::vector<std::string>& diags) {
  std::string text = latex::strip_comments(src);
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    size_t hit = std::string::npos;
    std::string_view which;
    for (std::string_view tok : {"\\input", "\\include", "\\subfile"}) {
      size_t p = text.find(tok, i);
      while (p != std::string::npos && p + tok.size() < text.size() &&
             latex::is_letter(text[p + tok.size()]))
        p = text.find(tok, p + 1);
      if (p < hit) {
        hit = p;
        which = tok;
      }
    }
    if (hit == std::string::npos) break;
    out.append(text, i, hit - i);
    size_t j = hit + which.size();
    std::string name;
    if (auto g = latex::read_group(text, j)) {
      name = std::string(*g);
    } else {
      j = latex::skip_spaces(text, j);
      while (j < text.size() && !text::is_space(text[j]) && text[j] != '\\') name += text[j++];
    }
    i = j;
    if (name.empty()) continue;
    if (depth >= options.max_include_depth) {
      diags.push_back("include depth limit reached at " + name);
      continue;
    }
    auto body = resolve_include(a, base, name);
    if (!body) {
      diags.push_back("missing include: " + name);
      continue;
    }
    out += '\n';
    out += expand_includes(a, base, *body, depth + 1, options, diags);
    out += '\n';
  }
  if (i < text.size()) out.append(text, i, std::string::npos);
  return out;
}

}  // namespace

ParsedDocument parse_document(const SourceArchive& archive, const ParseOptions& options) {
  auto it = archive.files.find(archive.main_tex);
  if (it == archive.files.end()) {
    ParsedDocument doc;
    doc.doc_id = archive.arxiv_id;
    doc.domain = options.domain;
    doc.diagnostics.push_back("parse failure: main tex file not found: " + archive.main_tex);
    return doc;
  }
  std::vector<std::string> diags;
  fs::path base = fs::path(archive.main_tex).parent_path();
  std::string expanded = expand_includes(archive, base, it->second, 0, options, diags);
  ParsedDocument doc = parse_latex(archive.arxiv_id, expanded, options);
  doc.diagnostics.insert(doc.diagnostics.begin(), diags.begin(), diags.end());
  return doc;
}

// ---------------------------------------------------------------------------
// Fetch cache

HttpGet default_http_get(const FetchOptions& options) {
  return [options](const std::string& url) -> std::pair<int, std::string> {
    // url = scheme://host[:port]/path
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(origin);
    client.set_follow_location(true);
    client.set_connection_timeout(options.timeout_seconds, 0);
    client.set_read_timeout(options.timeout_seconds, 0);
    client.set_default_headers({{"User-Agent", "scimine/0.1"}});
    auto res = client.Get(path);
    if (!res) throw Error(ErrorCode::Network, "GET " + url + ": " + httplib::to_string(res.error()));
    return {res->status, res->body};
  };
}

SourceArchive fetch_source(const std::string& arxiv_id, const std::string& cache_dir,
                           const FetchOptions& options, const HttpGet& get) {
  if (!is_valid_arxiv_id(arxiv_id))
    throw Error(ErrorCode::NotFound, "not an arXiv identifier: " + arxiv_id);
  fs::path dir = fs::path(cache_dir) / arxiv_id;
  fs::path archive = dir / "source.tar.gz";
  fs::path src_dir = dir / "src";
  if (!fs::exists(archive)) {
    auto [status, body] = get(options.base_url + "/e-print/" + arxiv_id);
    if (status == 404 || status == 410) throw Error(ErrorCode::NotFound, "no such paper: " + arxiv_id);
    if (status != 200) throw Error(ErrorCode::Network, "HTTP status " + std::to_string(status));
    auto files = unpack_eprint(body);  // throws NoSource for PDF-only submissions
    // Normalise to tar.gz so the cache layout is uniform.
    std::string normalized = body;
    bool is_tar_gz = false;
    if (body.size() > 2 && static_cast<unsigned char>(body[0]) == 0x1f) {
      std::string raw = gunzip(body);
      is_tar_gz = raw.size() >= 263 && raw.compare(257, 5, "ustar") == 0;
    }
    if (!is_tar_gz) normalized = gzip(make_tar(files));
    fs::create_directories(dir);
    fs::path tmp_src = dir / ("src.tmp." + std::to_string(::getpid()));
    fs::remove_all(tmp_src);
    for (const auto& [path, content] : files) text::write_file_atomic((tmp_src / path).string(), content);
    fs::remove_all(src_dir);
    fs::rename(tmp_src, src_dir);
    text::write_file_atomic(archive.string(), normalized);
  }
  auto files = untar(gunzip(text::read_file(archive.string())));
  return archive_from_files(arxiv_id, std::move(files));
}

SourceArchive fetch_source(const std::string& arxiv_id, const std::string& cache_dir,
                           const FetchOptions& options) {
  return fetch_source(arxiv_id, cache_dir, options, default_http_get(options));
}

}  // namespace scimine
