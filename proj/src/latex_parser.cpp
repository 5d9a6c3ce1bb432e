#include <algorithm>
#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <unordered_set>

#include "latex_markup.hpp"
#include "scimine/latex_corpus.hpp"
#include "scimine/text_util.hpp"

namespace scimine {

namespace {

using latex::match_brace;
using latex::read_command;
using latex::read_group;
using latex::read_optional;
using latex::skip_spaces;
constexpr auto npos = std::string_view::npos;

}  // namespace

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::CS: return "CS";
    case Domain::STAT: return "STAT";
    case Domain::EESS: return "EESS";
    case Domain::PHYSICS: return "PHYSICS";
    case Domain::MATH: return "MATH";
    case Domain::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::optional<Domain> parse_domain(std::string_view s) {
  auto up = std::string(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto d : {Domain::CS, Domain::STAT, Domain::EESS, Domain::PHYSICS, Domain::MATH,
                 Domain::OTHER})
    if (to_string(d) == up) return d;
  return std::nullopt;
}

std::string TableGrid::text(size_t i, size_t j) const { return text::join(at(i, j)); }

TableGrid TableGrid::from_rows(std::string caption,
                               const std::vector<std::vector<std::string>>& rows) {
  TableGrid g;
  g.caption = std::move(caption);
  g.rows = rows.size();
  for (const auto& r : rows) g.cols = std::max(g.cols, r.size());
  g.cells.resize(g.rows * g.cols);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) g.at(i, j) = text::split_ws(rows[i][j]);
  return g;
}

std::vector<const Sentence*> ParsedDocument::sentences() const {
  std::vector<const Sentence*> out;
  for (const auto& sec : sections)
    for (const auto& para : sec.paragraphs)
      for (const auto& sent : para) out.push_back(&sent);
  return out;
}

size_t ParsedDocument::sentence_count() const {
  size_t n = 0;
  for (const auto& sec : sections)
    for (const auto& para : sec.paragraphs) n += para.size();
  return n;
}

size_t ParsedDocument::word_count() const {
  size_t n = 0;
  for (const auto& sec : sections)
    for (const auto& para : sec.paragraphs)
      for (const auto& sent : para) n += sent.size();
  return n;
}

// ---------------------------------------------------------------------------
// Words and sentences

namespace {

bool is_leading_punct(char c) { return c == '(' || c == '[' || c == '{' || c == '"' || c == '`' || c == '\''; }
bool is_trailing_punct(char c) {
  return c == ')' || c == ']' || c == '}' || c == '"' || c == '\'' || c == ',' || c == ';' ||
         c == ':' || c == '!' || c == '?';
}

void split_token(std::string_view tok, std::vector<std::string>& out) {
  size_t math_first = tok.find('$');
  if (math_first == npos && tok.rfind("\\(", 0) == 0) math_first = 0;
  size_t begin = 0;
  size_t end = tok.size();
  size_t lead_limit = math_first == npos ? end : math_first;
  while (begin < lead_limit && is_leading_punct(tok[begin])) {
    out.emplace_back(1, tok[begin]);
    ++begin;
  }
  size_t trail_limit = begin;
  if (math_first != npos) {
    size_t last = tok.rfind('$');
    if (last == npos || last < math_first) last = tok.rfind(')');
    trail_limit = last == npos ? begin : last + 1;
  }
  std::vector<std::string> trailing;
  while (end > std::max(begin, trail_limit) && is_trailing_punct(tok[end - 1])) {
    trailing.emplace_back(1, tok[end - 1]);
    --end;
  }
  if (end > begin) out.emplace_back(tok.substr(begin, end - begin));
  for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(*it);
}

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> abbrev = {
      "al.",   "fig.", "figs.", "eq.",  "eqs.", "e.g.",    "i.e.",  "cf.",  "vs.",
      "sec.",  "tab.", "no.",   "dr.",  "mr.",  "ms.",     "prof.", "ref.", "refs.",
      "st.",   "jr.",  "resp.", "approx.", "viz.", "w.r.t.", "et.", "ch.", "app.",
      "alg.",  "thm.", "def.",  "lem.", "prop.", "eqn.", "vol.", "pp.", "ed.", "eds."};
  return abbrev;
}

bool ends_sentence(std::string_view tok) {
  // Strip closing quotes/brackets that may follow the terminator.
  while (!tok.empty() && (tok.back() == ')' || tok.back() == '"' || tok.back() == '\''))
    tok.remove_suffix(1);
  if (tok.empty()) return false;
  char last = tok.back();
  if (last != '.' && last != '?' && last != '!') return false;
  if (last == '.') {
    if (abbreviations().count(text::to_lower(tok))) return false;
    // Initials such as "J."
    if (tok.size() == 2 && std::isupper(static_cast<unsigned char>(tok[0]))) return false;
  }
  return true;
}

bool starts_capital(std::string_view tok) {
  while (!tok.empty() && is_leading_punct(tok.front())) tok.remove_prefix(1);
  return text::starts_with_upper(tok);
}

Sentence finish_sentence(std::vector<std::string>& raw) {
  Sentence words;
  if (raw.empty()) return words;
  std::string& last = raw.back();
  // Drop the sentence terminator (possibly before closing brackets/quotes).
  size_t k = last.size();
  while (k > 0 && (last[k - 1] == ')' || last[k - 1] == '"' || last[k - 1] == '\'')) --k;
  if (k > 0 && (last[k - 1] == '.' || last[k - 1] == '?' || last[k - 1] == '!') &&
      !(k == last.size() && last.find('$') != npos && last.back() == '$')) {
    last.erase(k - 1, 1);
  }
  for (const auto& tok : raw)
    if (!tok.empty()) split_token(tok, words);
  raw.clear();
  return words;
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view plain) {
  std::vector<std::string> out;
  for (const auto& tok : text::split_ws(text::strip_control(plain))) split_token(tok, out);
  return out;
}

std::vector<Sentence> split_sentences(std::string_view plain) {
  std::string clean;
  clean.reserve(plain.size());
  for (char c : plain) clean += (static_cast<unsigned char>(c) < 0x20 || c == 0x7f) ? ' ' : c;
  auto tokens = text::split_ws(clean);
  std::vector<Sentence> out;
  std::vector<std::string> cur;
  for (size_t i = 0; i < tokens.size(); ++i) {
    cur.push_back(tokens[i]);
    bool last = i + 1 == tokens.size();
    if (last || (ends_sentence(tokens[i]) && starts_capital(tokens[i + 1]))) {
      auto s = finish_sentence(cur);
      if (!s.empty()) out.push_back(std::move(s));
    }
  }
  return out;
}

std::string render_text(std::string_view latex_src) {
  return text::collapse_ws(latex::render_markup(latex_src, latex::MathMode::Verbatim));
}

std::string clean_cell_text(std::string_view raw) {
  return text::collapse_ws(
      text::strip_control(latex::render_markup(raw, latex::MathMode::Flatten)));
}

// ---------------------------------------------------------------------------
// Tables

namespace {

bool is_tabular_name(std::string_view n) {
  return n == "tabular" || n == "tabular*" || n == "tabularx" || n == "tabulary";
}
bool is_table_float(std::string_view n) {
  return n == "table" || n == "table*" || n == "longtable" || n == "sidewaystable" ||
         n == "sidewaystable*" || n == "wraptable" || n == "subtable" || n == "threeparttable";
}
bool is_skipped_env(std::string_view n) {
  static const std::set<std::string_view> skip = {
      "figure",       "figure*",      "equation",   "equation*",  "align",      "align*",
      "gather",       "gather*",      "multline",   "multline*",  "eqnarray",   "eqnarray*",
      "displaymath",  "math",         "flalign",    "flalign*",   "alignat",    "alignat*",
      "split",        "thebibliography", "comment", "verbatim",   "verbatim*",  "lstlisting",
      "minted",       "algorithm",    "algorithm*", "algorithmic", "algorithmic*",
      "tikzpicture",  "wrapfigure",   "subfigure",  "picture",    "filecontents",
      "filecontents*", "references",  "acks",       "CCSXML",     "dmath",      "subequations"};
  return skip.count(n) > 0;
}

/// Finds `\end{name}` matching a `\begin{name}` whose body starts at `from`.
/// Returns the index of the backslash of `\end`, or npos.
size_t find_env_end(std::string_view s, size_t from, std::string_view name, size_t* after) {
  int depth = 1;
  std::string begin_tok = "\\begin{" + std::string(name) + "}";
  std::string end_tok = "\\end{" + std::string(name) + "}";
  size_t i = from;
  while (i < s.size()) {
    size_t b = s.find(begin_tok, i);
    size_t e = s.find(end_tok, i);
    if (e == npos) return npos;
    if (b != npos && b < e) {
      ++depth;
      i = b + begin_tok.size();
      continue;
    }
    if (--depth == 0) {
      if (after) *after = e + end_tok.size();
      return e;
    }
    i = e + end_tok.size();
  }
  return npos;
}

struct RawCell {
  std::string content;
  size_t colspan = 1;
  long rowspan = 1;  // negative: spans upward
};

// Strips rule commands (\hline, \cmidrule(lr){2-4}, ...) anywhere in a row.
std::string strip_rules(std::string_view row) {
  static const std::set<std::string_view> rules0 = {"hline", "toprule", "midrule", "bottomrule",
                                                    "morecmidrules", "hdashline", "Xhline",
                                                    "endfirsthead", "endhead", "endfoot",
                                                    "endlastfoot"};
  static const std::set<std::string_view> rules1 = {"cline", "hhline", "cdashline", "rowcolor",
                                                    "noalign", "arrayrulecolor"};
  std::string out;
  size_t i = 0;
  while (i < row.size()) {
    if (row[i] == '\\' && i + 1 < row.size() && latex::is_letter(row[i + 1])) {
      size_t end = 0;
      auto name = read_command(row, i, end);
      if (rules0.count(name) || name == "addlinespace") {
        size_t j = end;
        if (name == "Xhline") read_group(row, j);
        read_optional(row, j);
        i = j;
        continue;
      }
      if (name == "cmidrule" || name == "cmidrule*") {
        size_t j = skip_spaces(row, end);
        if (j < row.size() && row[j] == '(') {
          size_t close = row.find(')', j);
          if (close != npos) j = close + 1;
        }
        read_optional(row, j);
        read_group(row, j);
        i = j;
        continue;
      }
      if (rules1.count(name)) {
        size_t j = end;
        read_optional(row, j);
        read_group(row, j);
        i = j;
        continue;
      }
      if (name == "specialrule") {
        size_t j = end;
        for (int k = 0; k < 3; ++k) read_group(row, j);
        i = j;
        continue;
      }
      out.append(row.substr(i, end - i));
      i = end;
      continue;
    }
    if (row[i] == '\\' && i + 1 < row.size()) {
      out += row[i];
      out += row[i + 1];
      i += 2;
      continue;
    }
    out += row[i++];
  }
  return out;
}

// Splits at top-level separators. `row_mode` splits on \\ (rows), otherwise on & (cells).
std::vector<std::string> split_top(std::string_view s, bool row_mode) {
  std::vector<std::string> parts;
  std::string cur;
  int brace = 0;
  int env = 0;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      if (s.compare(i, 7, "\\begin{") == 0) ++env;
      if (s.compare(i, 5, "\\end{") == 0 && env > 0) --env;
      bool row_break = s[i + 1] == '\\' || s.compare(i, 15, "\\tabularnewline") == 0 ||
                       (s.compare(i, 3, "\\cr") == 0 &&
                        (i + 3 >= s.size() || !latex::is_letter(s[i + 3])));
      if (row_mode && row_break && brace == 0 && env == 0) {
        parts.push_back(cur);
        cur.clear();
        size_t j = i + (s[i + 1] == '\\' ? 2 : (s[i + 1] == 't' ? 15 : 3));
        if (j < s.size() && s[j] == '*') ++j;
        size_t k = skip_spaces(s, j);
        if (k < s.size() && s[k] == '[') {
          size_t close = latex::match_bracket(s, k);
          if (close != npos) j = close + 1;
        }
        i = j;
        continue;
      }
      cur += c;
      cur += s[i + 1];
      i += 2;
      continue;
    }
    if (c == '{') ++brace;
    if (c == '}' && brace > 0) --brace;
    if (!row_mode && c == '&' && brace == 0 && env == 0) {
      parts.push_back(cur);
      cur.clear();
      ++i;
      continue;
    }
    cur += c;
    ++i;
  }
  parts.push_back(cur);
  return parts;
}

RawCell parse_cell(std::string_view raw) {
  RawCell cell;
  std::string_view s = text::trim(raw);
  for (int guard = 0; guard < 4; ++guard) {
    if (s.rfind("\\multicolumn", 0) == 0) {
      size_t i = 12;
      auto n = read_group(s, i);
      auto colspec = read_group(s, i);
      auto content = read_group(s, i);
      if (!n || !colspec || !content) break;
      try {
        long span = std::stol(std::string(text::trim(*n)));
        if (span >= 1 && span <= 512) cell.colspan = static_cast<size_t>(span);
      } catch (...) {
      }
      std::string_view rest = text::trim(s.substr(std::min(i, s.size())));
      if (!rest.empty()) {
        cell.content = std::string(*content) + " " + std::string(rest);
        return cell;
      }
      s = text::trim(*content);
      continue;
    }
    if (s.rfind("\\multirow", 0) == 0) {
      size_t i = 9;
      read_optional(s, i);
      auto n = read_group(s, i);
      read_optional(s, i);
      auto width = read_group(s, i);
      read_optional(s, i);
      auto content = read_group(s, i);
      if (!n || !width || !content) break;
      try {
        long span = std::stol(std::string(text::trim(*n)));
        if (span != 0 && span >= -512 && span <= 512) cell.rowspan = span;
      } catch (...) {
      }
      std::string_view rest = text::trim(s.substr(std::min(i, s.size())));
      if (!rest.empty()) {
        cell.content = std::string(*content) + " " + std::string(rest);
        return cell;
      }
      s = text::trim(*content);
      continue;
    }
    break;
  }
  cell.content = std::string(s);
  return cell;
}

std::vector<std::string> cell_words(std::string_view content) {
  return text::split_ws(text::strip_control(content));
}

}  // namespace

namespace detail {

TableGrid parse_tabular_body(std::string_view body, std::string caption) {
  std::vector<std::vector<RawCell>> rows;
  for (const auto& row_src : split_top(body, true)) {
    std::string row = strip_rules(row_src);
    if (text::trim(row).empty()) continue;
    std::vector<RawCell> cells;
    for (const auto& c : split_top(row, false)) cells.push_back(parse_cell(c));
    rows.push_back(std::move(cells));
  }

  TableGrid g;
  g.caption = std::move(caption);
  if (rows.empty()) {
    g.rows = 1;
    g.cols = 1;
    g.cells.resize(1);
    return g;
  }

  struct Placed {
    size_t row, col;
    RawCell cell;
  };
  std::vector<Placed> placed;
  size_t cols = 1;
  for (size_t r = 0; r < rows.size(); ++r) {
    size_t c = 0;
    for (auto& cell : rows[r]) {
      placed.push_back({r, c, cell});
      c += cell.colspan;
    }
    cols = std::max(cols, c);
  }
  g.rows = rows.size();
  g.cols = cols;
  g.cells.assign(g.rows * g.cols, Cell{});
  std::vector<bool> filled(g.rows * g.cols, false);

  for (const auto& p : placed) {
    auto words = cell_words(p.cell.content);
    for (size_t k = 0; k < p.cell.colspan && p.col + k < cols; ++k) {
      g.at(p.row, p.col + k) = words;
      filled[p.row * cols + p.col + k] = !words.empty();
    }
  }
  // Multirow replication into the (empty) cells the span covers.
  for (const auto& p : placed) {
    if (p.cell.rowspan == 1 && p.cell.colspan == 1) continue;
    auto words = cell_words(p.cell.content);
    long span = p.cell.rowspan;
    long first = span > 0 ? static_cast<long>(p.row) : static_cast<long>(p.row) + span + 1;
    long last = span > 0 ? static_cast<long>(p.row) + span - 1 : static_cast<long>(p.row);
    first = std::max(0L, first);
    last = std::min(static_cast<long>(g.rows) - 1, last);
    for (long r = first; r <= last; ++r) {
      for (size_t k = 0; k < p.cell.colspan && p.col + k < cols; ++k) {
        size_t idx = static_cast<size_t>(r) * cols + p.col + k;
        if (!filled[idx]) {
          g.cells[idx] = words;
          filled[idx] = !words.empty();
        }
      }
    }
    size_t colspan = std::min(p.cell.colspan, cols - p.col);
    g.merged.push_back({static_cast<size_t>(first), p.col,
                        static_cast<size_t>(last - first + 1), colspan});
  }
  std::sort(g.merged.begin(), g.merged.end(), [](const MergedRegion& a, const MergedRegion& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  return g;
}

}  // namespace detail

TableGrid clean_table(const TableGrid& grid) {
  TableGrid out;
  out.caption = grid.caption;
  out.cols = grid.cols;
  std::vector<long> new_index(grid.rows, -1);
  std::vector<Cell> kept;
  for (size_t i = 0; i < grid.rows; ++i) {
    std::vector<Cell> row;
    bool any = false;
    for (size_t j = 0; j < grid.cols; ++j) {
      auto words = text::split_ws(clean_cell_text(text::join(grid.at(i, j))));
      any = any || !words.empty();
      row.push_back(std::move(words));
    }
    if (!any) continue;
    new_index[i] = static_cast<long>(out.rows++);
    for (auto& c : row) kept.push_back(std::move(c));
  }
  if (out.rows == 0) {
    out.rows = 1;
    out.cols = std::max<size_t>(grid.cols, 1);
    out.cells.assign(out.cols, Cell{});
    return out;
  }
  out.cells = std::move(kept);
  for (const auto& m : grid.merged) {
    long first = -1;
    size_t count = 0;
    for (size_t r = m.row; r < m.row + m.row_span && r < grid.rows; ++r) {
      if (new_index[r] < 0) continue;
      if (first < 0) first = new_index[r];
      ++count;
    }
    if (count == 0) continue;
    if (count == 1 && m.col_span == 1) continue;
    out.merged.push_back({static_cast<size_t>(first), m.col, count, m.col_span});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Document structure

namespace {

class BlockParser {
 public:
  BlockParser(ParsedDocument& doc, const ParseOptions& options) : doc_(doc), options_(options) {}

  void run(std::string_view body) {
    size_t i = 0;
    while (i < body.size()) {
      char c = body[i];
      if (c == '\\' && i + 1 < body.size()) {
        i = command(body, i);
        continue;
      }
      if (c == '$') {
        bool display = i + 1 < body.size() && body[i + 1] == '$';
        std::string_view closer = display ? "$$" : "$";
        size_t close = latex::find_math_close(body, i + closer.size(), closer);
        if (close == npos) {
          diag(std::string("unterminated ") + (display ? "display" : "inline") + " math");
          if (!display) buffer_.append(body.substr(i));
          i = body.size();
          break;
        }
        if (!display) buffer_.append(body.substr(i, close + 1 - i));
        i = close + closer.size();
        continue;
      }
      if (c == '\n') {
        size_t j = i + 1;
        while (j < body.size() && (body[j] == ' ' || body[j] == '\t' || body[j] == '\r')) ++j;
        if (j < body.size() && body[j] == '\n') {
          flush();
          i = j + 1;
          continue;
        }
      }
      buffer_ += c;
      ++i;
    }
    flush();
    for (const auto& open : env_stack_) diag("unbalanced environment: " + open + " not closed");
  }

 private:
  void diag(std::string msg) { doc_.diagnostics.push_back(std::move(msg)); }

  Section& current_section() {
    if (doc_.sections.empty()) doc_.sections.push_back(Section{"", 1, {}});
    return doc_.sections.back();
  }

  void flush() {
    std::string plain = render_text(buffer_);
    buffer_.clear();
    auto sentences = split_sentences(plain);
    if (sentences.empty()) return;
    current_section().paragraphs.push_back(std::move(sentences));
  }

  void heading(std::string_view title_src, int depth) {
    flush();
    doc_.sections.push_back(
        Section{text::strip_control(render_text(title_src)), depth, {}});
  }

  void add_paragraph_heading(std::string_view title_src) {
    flush();
    buffer_ = std::string(title_src);
    flush();
  }

  size_t command(std::string_view s, size_t pos) {
    size_t end = 0;
    std::string_view name = read_command(s, pos, end);
    if (name.size() == 1 && !latex::is_letter(name[0])) {
      if (name == "[") {
        size_t close = latex::find_math_close(s, end, "\\]");
        if (close == npos) {
          diag("unterminated display math \\[");
          return s.size();
        }
        return close + 2;
      }
      if (name == "(") {
        size_t close = latex::find_math_close(s, end, "\\)");
        size_t stop = close == npos ? s.size() : close + 2;
        buffer_.append(s.substr(pos, stop - pos));
        return stop;
      }
      buffer_.append(s.substr(pos, end - pos));
      return end;
    }
    if (name == "section" || name == "section*" || name == "chapter" || name == "chapter*" ||
        name == "subsection" || name == "subsection*") {
      size_t i = end;
      read_optional(s, i);
      auto title = read_group(s, i);
      if (!title) {
        diag("heading without title");
        return end;
      }
      heading(*title, name.rfind("subsection", 0) == 0 ? 2 : 1);
      return i;
    }
    if (name == "subsubsection" || name == "subsubsection*" || name == "paragraph" ||
        name == "paragraph*") {
      size_t i = end;
      read_optional(s, i);
      if (auto title = read_group(s, i)) add_paragraph_heading(*title);
      return i;
    }
    if (name == "item") {
      flush();
      size_t i = end;
      read_optional(s, i);
      return i;
    }
    if (name == "par") {
      flush();
      return end;
    }
    if (name == "bibliography" || name == "bibliographystyle") {
      size_t i = end;
      read_group(s, i);
      return i;
    }
    if (name == "begin") {
      size_t i = end;
      auto env = read_group(s, i);
      if (!env) {
        diag("\\begin without environment name");
        return end;
      }
      return begin_env(s, std::string(text::trim(*env)), pos, i);
    }
    if (name == "end") {
      size_t i = end;
      auto env = read_group(s, i);
      std::string env_name = env ? std::string(text::trim(*env)) : std::string();
      flush();
      if (!env_stack_.empty() && env_stack_.back() == env_name) {
        env_stack_.pop_back();
      } else if (env_name != "document") {
        diag("unbalanced environment: unexpected \\end{" + env_name + "}");
      }
      return i;
    }
    buffer_.append(s.substr(pos, end - pos));
    return end;
  }

  size_t begin_env(std::string_view s, const std::string& env, size_t pos, size_t body_start) {
    if (is_skipped_env(env)) {
      size_t after = 0;
      if (find_env_end(s, body_start, env, &after) == npos) {
        diag("unbalanced environment: " + env + " not closed");
        return s.size();
      }
      return after;
    }
    if (is_table_float(env) || is_tabular_name(env)) {
      flush();
      size_t after = 0;
      size_t close = find_env_end(s, body_start, env, &after);
      std::string_view content;
      if (close == npos) {
        diag("unbalanced environment: " + env + " not closed");
        content = s.substr(body_start);
        after = s.size();
      } else {
        content = s.substr(body_start, close - body_start);
      }
      if (is_tabular_name(env)) {
        tabular(env, content, "");
      } else {
        table_float(env, content);
      }
      return after;
    }
    flush();
    if (env == "abstract") {
      doc_.sections.push_back(Section{"Abstract", 1, {}});
    }
    size_t i = body_start;
    if (env == "minipage") {
      read_optional(s, i);
      read_group(s, i);
    }
    env_stack_.push_back(env);
    (void)pos;
    return i;
  }

  void table_float(const std::string& env, std::string_view content) {
    std::string caption;
    std::string body(content);
    // Captions may sit before or after the tabular.
    size_t cap = npos;
    for (size_t from = 0; (cap = body.find("\\caption", from)) != npos; from = cap + 1) {
      size_t end = cap + 8;
      if (end < body.size() && latex::is_letter(body[end])) continue;  // \captionsetup
      size_t i = end;
      if (i < body.size() && body[i] == '*') ++i;
      read_optional(body, i);
      auto text = read_group(body, i);
      if (!text) continue;
      if (caption.empty()) caption = text::strip_control(render_text(*text));
      if (env == "longtable") {
        size_t j = skip_spaces(body, i);
        if (body.compare(j, 2, "\\\\") == 0) i = j + 2;
      }
      body.erase(cap, i - cap);
      cap = cap == 0 ? 0 : cap - 1;
    }
    if (env == "longtable") {
      size_t i = 0;
      read_optional(body, i);
      read_group(body, i);
      tabular_body(strip_longtable_heads(body.substr(i)), caption);
      return;
    }
    bool found = false;
    size_t i = 0;
    while (i < body.size()) {
      size_t b = body.find("\\begin{", i);
      if (b == npos) break;
      size_t j = b + 6;
      auto name_sv = read_group(body, j);
      if (!name_sv) break;
      std::string name(text::trim(*name_sv));
      if (is_tabular_name(name)) {
        size_t after = 0;
        size_t close = find_env_end(body, j, name, &after);
        if (close == npos) {
          diag("unbalanced environment: " + name + " not closed");
          tabular(name, std::string_view(body).substr(j), caption);
          found = true;
          break;
        }
        tabular(name, std::string_view(body).substr(j, close - j), caption);
        found = true;
        i = after;
        continue;
      }
      i = j;
    }
    if (!found) diag("table without tabular content dropped: " + caption);
  }

  static std::string strip_longtable_heads(std::string body) {
    // Repeated head/foot blocks precede \endhead / \endfoot / \endlastfoot markers.
    bool has_first = body.find("\\endfirsthead") != npos;
    for (std::string_view marker : {"\\endlastfoot", "\\endfoot", "\\endhead"}) {
      if (marker == "\\endhead" && !has_first) continue;
      size_t m = body.find(marker);
      if (m == npos) continue;
      size_t prev = 0;
      for (std::string_view other : {"\\endfirsthead", "\\endhead", "\\endfoot"}) {
        if (other == marker) continue;
        size_t o = body.rfind(other, m);
        if (o != npos && o < m) prev = std::max(prev, o + other.size());
      }
      body.erase(prev, m + marker.size() - prev);
    }
    return body;
  }

  void tabular(const std::string& env, std::string_view content, const std::string& caption) {
    size_t i = 0;
    if (env == "tabular*" || env == "tabularx" || env == "tabulary") read_group(content, i);
    read_optional(content, i);
    if (!read_group(content, i)) diag("tabular without column specification");
    tabular_body(content.substr(std::min(i, content.size())), caption);
  }

  void tabular_body(std::string_view body, const std::string& caption) {
    TableGrid g = detail::parse_tabular_body(body, caption);
    doc_.tables.push_back(options_.clean_tables ? clean_table(g) : std::move(g));
  }

  ParsedDocument& doc_;
  const ParseOptions& options_;
  std::string buffer_;
  std::vector<std::string> env_stack_;
};

}  // namespace

ParsedDocument parse_latex(std::string_view doc_id, std::string_view tex,
                           const ParseOptions& options) {
  ParsedDocument doc;
  doc.doc_id = std::string(doc_id);
  doc.domain = options.domain;
  std::string src = latex::strip_comments(tex);
  std::string_view view(src);
  size_t begin = view.find("\\begin{document}");
  size_t end = view.find("\\end{document}");
  std::string_view body;
  if (begin == npos) {
    doc.diagnostics.push_back("no \\begin{document}; parsing whole input as body");
    body = view;
  } else {
    size_t start = begin + 16;
    if (end == npos || end < start) {
      doc.diagnostics.push_back("parse failure: missing \\end{document}");
      body = view.substr(start);
    } else {
      body = view.substr(start, end - start);
    }
  }
  BlockParser(doc, options).run(body);
  return doc;
}

}  // namespace scimine
