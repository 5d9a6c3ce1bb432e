#include "latex_markup.hpp"

#include <string>
#include <unordered_map>

#include "scimine/text_util.hpp"

namespace scimine::latex {

size_t skip_spaces(std::string_view s, size_t i) {
  while (i < s.size() && text::is_space(s[i])) ++i;
  return i;
}

size_t match_brace(std::string_view s, size_t open) {
  int depth = 0;
  for (size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

size_t match_bracket(std::string_view s, size_t open) {
  int brace = 0;
  int bracket = 0;
  for (size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '{') ++brace;
    if (c == '}') --brace;
    if (brace > 0) continue;
    if (c == '[') ++bracket;
    if (c == ']') {
      --bracket;
      if (bracket == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::string_view read_command(std::string_view s, size_t pos, size_t& end) {
  size_t i = pos + 1;
  if (i >= s.size()) {
    end = s.size();
    return {};
  }
  if (!is_letter(s[i])) {
    end = i + 1;
    return s.substr(i, 1);
  }
  size_t start = i;
  while (i < s.size() && is_letter(s[i])) ++i;
  if (i < s.size() && s[i] == '*') ++i;
  end = i;
  return s.substr(start, i - start);
}

std::optional<std::string_view> read_group(std::string_view s, size_t& i) {
  size_t j = skip_spaces(s, i);
  if (j >= s.size() || s[j] != '{') return std::nullopt;
  size_t close = match_brace(s, j);
  if (close == std::string_view::npos) {
    i = s.size();
    return s.substr(j + 1);
  }
  i = close + 1;
  return s.substr(j + 1, close - j - 1);
}

std::optional<std::string_view> read_optional(std::string_view s, size_t& i) {
  size_t j = skip_spaces(s, i);
  if (j >= s.size() || s[j] != '[') return std::nullopt;
  size_t close = match_bracket(s, j);
  if (close == std::string_view::npos) return std::nullopt;
  i = close + 1;
  return s.substr(j + 1, close - j - 1);
}

size_t find_math_close(std::string_view s, size_t from, std::string_view closer) {
  for (size_t i = from; i < s.size(); ++i) {
    if (s[i] == '\\') {
      if (closer.size() == 2 && closer[0] == '\\' && i + 1 < s.size() && s[i + 1] == closer[1])
        return i;
      ++i;
      continue;
    }
    if (closer.front() != '\\' && s.compare(i, closer.size(), closer) == 0) return i;
  }
  return std::string_view::npos;
}

std::string strip_comments(std::string_view src) {
  std::string out;
  out.reserve(src.size());
  size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (c == '\\' && i + 1 < src.size()) {
      out += c;
      out += src[i + 1];
      i += 2;
      continue;
    }
    if (c == '%') {
      // A comment also swallows its newline and the next line's indentation.
      while (i < src.size() && src[i] != '\n') ++i;
      if (i < src.size()) ++i;
      while (i < src.size() && (src[i] == ' ' || src[i] == '\t')) ++i;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

namespace {

enum class Kind { Drop, Keep, Literal, Frac };

struct CmdRule {
  Kind kind;
  int nargs = 0;
  int keep = -1;
  const char* literal = "";
};

const std::unordered_map<std::string_view, CmdRule>& command_table() {
  static const std::unordered_map<std::string_view, CmdRule> table = [] {
    std::unordered_map<std::string_view, CmdRule> t;
    auto drop = [&](std::initializer_list<std::string_view> names, int n) {
      for (auto nm : names) t[nm] = CmdRule{Kind::Drop, n};
    };
    auto keep = [&](std::initializer_list<std::string_view> names, int n, int k) {
      for (auto nm : names) t[nm] = CmdRule{Kind::Keep, n, k};
    };
    auto lit = [&](std::string_view nm, const char* value) {
      t[nm] = CmdRule{Kind::Literal, 0, -1, value};
    };
    drop({"cite", "cite*", "citep", "citep*", "citet", "citet*", "citealp", "citealt",
          "citeauthor", "citeyear", "citeyearpar", "nocite", "ref", "eqref", "autoref",
          "cref", "Cref", "pageref", "label", "footnote", "footnotetext", "thanks", "url",
          "includegraphics", "vspace", "vspace*", "hspace", "hspace*", "bibliography",
          "bibliographystyle", "color", "cline", "hhline", "phantom", "hphantom", "vphantom",
          "index", "pagestyle", "thispagestyle", "captionsetup", "caption", "documentclass",
          "usepackage", "RequirePackage", "title", "author", "date", "affiliation", "email",
          "address", "institute", "keywords", "tag", "input", "include", "subfile",
          "rowcolor", "cellcolor", "columncolor", "noalign", "arrayrulecolor", "linewidth",
          "graphicspath", "setcitestyle", "nolinkurl", "orcid", "icmlauthor",
          "icmlaffiliation", "icmlcorrespondingauthor", "icmltitle", "icmlkeywords"},
         1);
    drop({"setlength", "addtolength", "setcounter", "addtocounter", "newcommand",
          "renewcommand", "providecommand", "DeclareMathOperator", "rule", "newenvironment"},
         2);
    drop({"definecolor", "specialrule"}, 3);
    drop({"bf", "it", "em", "rm", "sf", "tt", "sc", "sl", "small", "footnotesize",
          "scriptsize", "tiny", "normalsize", "large", "Large", "LARGE", "huge", "Huge",
          "centering", "raggedright", "raggedleft", "noindent", "indent", "hline", "toprule",
          "midrule", "bottomrule", "cmidrule", "addlinespace", "morecmidrules", "smallskip",
          "medskip", "bigskip", "clearpage", "newpage", "cleardoublepage", "maketitle",
          "tableofcontents", "appendix", "relax", "protect", "hfill", "vfill", "bfseries",
          "itshape", "ttfamily", "scshape", "rmfamily", "sffamily", "mdseries", "upshape",
          "selectfont", "displaystyle", "textstyle", "scriptstyle", "xspace", "null", "strut",
          "leavevmode", "left", "right", "big", "Big", "bigl", "bigr", "Bigl", "Bigr",
          "bigg", "Bigg", "limits", "nonumber", "notag", "footnotemark", "printbibliography",
          "endfirsthead", "endhead", "endfoot", "endlastfoot", "tabularnewline", "hfil",
          "vfil", "allowbreak", "linebreak", "nolinebreak", "pagebreak", "sloppy", "par",
          "item", "centerline", "normalfont", "boldmath", "unboldmath", "mathstrut"},
         0);
    keep({"textbf", "textit", "emph", "texttt", "textsc", "textrm", "textsf", "textup",
          "textmd", "textsl", "textnormal", "underline", "uline", "mbox", "hbox", "text",
          "mathrm", "mathbf", "mathit", "mathsf", "mathtt", "mathcal", "mathbb", "mathfrak",
          "boldsymbol", "bm", "makecell", "textsubscript", "textsuperscript", "hl", "fbox",
          "shortstack", "operatorname", "ensuremath", "sout", "st", "uppercase",
          "MakeUppercase", "lowercase", "MakeLowercase", "textsuperscript", "mathbfit",
          "pmb", "overline", "widehat", "hat", "tilde", "widetilde", "vec", "bar", "dot",
          "ddot", "check", "acute", "grave", "breve", "c", "v", "u", "H", "k", "r", "b", "d",
          "t", "centerline", "ul", "smash", "tnote", "mathnormal"},
         1, 0);
    keep({"textcolor", "colorbox", "scalebox", "href", "parbox", "raisebox"}, 2, 1);
    keep({"fcolorbox", "resizebox", "multicolumn", "multirow"}, 3, 2);
    t["frac"] = CmdRule{Kind::Frac, 2};
    t["dfrac"] = CmdRule{Kind::Frac, 2};
    t["tfrac"] = CmdRule{Kind::Frac, 2};
    lit("ldots", "...");
    lit("dots", "...");
    lit("cdots", "...");
    lit("textellipsis", "...");
    lit("pm", "\xC2\xB1");
    lit("mp", "\xE2\x88\x93");
    lit("times", "\xC3\x97");
    lit("dagger", "\xE2\x80\xA0");
    lit("ddagger", "\xE2\x80\xA1");
    lit("dag", "\xE2\x80\xA0");
    lit("ddag", "\xE2\x80\xA1");
    lit("star", "*");
    lit("ast", "*");
    lit("cdot", "\xC2\xB7");
    lit("approx", "\xE2\x89\x88");
    lit("sim", "~");
    lit("leq", "\xE2\x89\xA4");
    lit("le", "\xE2\x89\xA4");
    lit("geq", "\xE2\x89\xA5");
    lit("ge", "\xE2\x89\xA5");
    lit("rightarrow", "\xE2\x86\x92");
    lit("to", "\xE2\x86\x92");
    lit("leftarrow", "\xE2\x86\x90");
    lit("uparrow", "\xE2\x86\x91");
    lit("downarrow", "\xE2\x86\x93");
    lit("checkmark", "\xE2\x9C\x93");
    lit("cmark", "\xE2\x9C\x93");
    lit("xmark", "\xE2\x9C\x97");
    lit("textasciitilde", "~");
    lit("textbackslash", "\\");
    lit("textbar", "|");
    lit("textless", "<");
    lit("textgreater", ">");
    lit("textendash", "-");
    lit("textemdash", "-");
    lit("textdegree", "\xC2\xB0");
    lit("degree", "\xC2\xB0");
    lit("infty", "\xE2\x88\x9E");
    lit("S", "\xC2\xA7");
    lit("LaTeX", "LaTeX");
    lit("TeX", "TeX");
    lit("quad", " ");
    lit("qquad", " ");
    lit("enspace", " ");
    lit("newline", " ");
    lit("cr", " ");
    lit("ss", "\xC3\x9F");
    lit("alpha", "\xCE\xB1");
    lit("beta", "\xCE\xB2");
    lit("gamma", "\xCE\xB3");
    lit("delta", "\xCE\xB4");
    lit("epsilon", "\xCE\xB5");
    lit("varepsilon", "\xCE\xB5");
    lit("theta", "\xCE\xB8");
    lit("lambda", "\xCE\xBB");
    lit("mu", "\xCE\xBC");
    lit("pi", "\xCF\x80");
    lit("rho", "\xCF\x81");
    lit("sigma", "\xCF\x83");
    lit("tau", "\xCF\x84");
    lit("phi", "\xCF\x86");
    lit("omega", "\xCF\x89");
    lit("Delta", "\xCE\x94");
    lit("Sigma", "\xCE\xA3");
    lit("Omega", "\xCE\xA9");
    lit("%", "%");
    lit("&", "&");
    lit("#", "#");
    lit("_", "_");
    lit("$", "$");
    lit("{", "{");
    lit("}", "}");
    lit(" ", " ");
    lit("\\", " ");
    for (auto nm : {",", ";", ":", "!", ">", "<", "-", "/", "@", ")", "]", "|"}) lit(nm, "");
    return t;
  }();
  return table;
}

bool is_accent(std::string_view name) {
  return name.size() == 1 && std::string_view("'`\"^~=.").find(name[0]) != std::string_view::npos;
}

bool is_tabular_env(std::string_view name) {
  return name == "tabular" || name == "tabular*" || name == "tabularx" || name == "tabulary" ||
         name == "array" || name == "longtable";
}

std::string remove_ws(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!text::is_space(c)) out += c;
  return out;
}

class Renderer {
 public:
  explicit Renderer(MathMode mode) : mode_(mode) {}

  std::string take() { return std::move(out_); }

  void render(std::string_view s, bool math, int depth = 0) {
    if (depth > 64) return;  // pathological nesting
    size_t i = 0;
    while (i < s.size()) {
      char c = s[i];
      if (c == '\\') {
        i = command(s, i, math, depth);
        continue;
      }
      if (c == '{') {
        size_t close = match_brace(s, i);
        if (close == std::string_view::npos) {
          render(s.substr(i + 1), math, depth + 1);
          return;
        }
        render(s.substr(i + 1, close - i - 1), math, depth + 1);
        i = close + 1;
        continue;
      }
      if (c == '}') {
        ++i;
        continue;
      }
      if (c == '$') {
        bool display = i + 1 < s.size() && s[i + 1] == '$';
        std::string_view closer = display ? "$$" : "$";
        i = math_span(s, i, closer.size(), closer, math, depth);
        continue;
      }
      if (math) {
        if (c == '^' || c == '_' || text::is_space(c) || c == '&') {
          ++i;
          continue;
        }
        out_ += c;
        ++i;
        continue;
      }
      if (c == '~') {
        out_ += ' ';
      } else if (c == '`') {
        if (i + 1 < s.size() && s[i + 1] == '`') {
          out_ += '"';
          ++i;
        } else {
          out_ += '\'';
        }
      } else if (c == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
        out_ += '"';
        ++i;
      } else if (c == '&') {
        out_ += ' ';
      } else {
        out_ += c;
      }
      ++i;
    }
  }

 private:
  // Handles inline or display math starting at `open` (delimiter width `width`).
  size_t math_span(std::string_view s, size_t open, size_t width, std::string_view closer,
                   bool math, int depth) {
    size_t start = open + width;
    size_t close = find_math_close(s, start, closer);
    size_t end = close == std::string_view::npos ? s.size() : close;
    size_t next = close == std::string_view::npos ? s.size() : close + closer.size();
    std::string_view body = start <= s.size() ? s.substr(start, end - start) : std::string_view{};
    if (math) {
      render(body, true, depth + 1);
    } else if (mode_ == MathMode::Verbatim) {
      out_ += s.substr(open, width);
      out_ += remove_ws(body);
      if (close != std::string_view::npos) out_ += closer;
    } else {
      render(body, true, depth + 1);
    }
    return next;
  }

  size_t skip_args(std::string_view s, size_t i, int n) {
    for (int k = 0; k < n; ++k) {
      i = skip_optionals(s, i);
      if (!read_group(s, i)) break;
    }
    return skip_optionals(s, i);
  }

  static size_t skip_optionals(std::string_view s, size_t i) {
    for (;;) {
      size_t j = skip_spaces(s, i);
      if (j < s.size() && s[j] == '[') {
        size_t close = match_bracket(s, j);
        if (close == std::string_view::npos) return i;
        i = close + 1;
        continue;
      }
      if (j < s.size() && s[j] == '(') {
        size_t close = s.find(')', j);
        if (close == std::string_view::npos || close - j > 16) return i;
        i = close + 1;
        continue;
      }
      return i;
    }
  }

  // Reads a macro argument: a brace group, or a single token when unbraced.
  std::optional<std::string_view> read_arg(std::string_view s, size_t& i) {
    if (auto g = read_group(s, i)) return g;
    size_t j = skip_spaces(s, i);
    if (j >= s.size() || s[j] == '}' || s[j] == '&') return std::nullopt;
    if (s[j] == '\\') {
      size_t end = 0;
      read_command(s, j, end);
      i = end;
      return s.substr(j, end - j);
    }
    i = j + 1;
    return s.substr(j, 1);
  }

  size_t command(std::string_view s, size_t pos, bool math, int depth) {
    size_t end = 0;
    std::string_view name = read_command(s, pos, end);
    if (name.empty()) return s.size();

    if (name == "(" || name == "[") {
      std::string_view closer = name == "(" ? "\\)" : "\\]";
      return math_span(s, pos, 2, closer, math, depth);
    }
    if (name == "\\") {
      size_t i = end;
      if (i < s.size() && s[i] == '*') ++i;
      if (auto o = read_optional(s, i); o) end = i;
      out_ += ' ';
      return end;
    }
    if (is_accent(name)) {
      size_t i = end;
      if (auto arg = read_arg(s, i)) render(*arg, math, depth + 1);
      return i;
    }
    if (name == "verb" || name == "verb*") {
      if (end >= s.size()) return s.size();
      char delim = s[end];
      size_t close = s.find(delim, end + 1);
      if (close == std::string_view::npos) close = s.size();
      out_ += s.substr(end + 1, close - end - 1);
      return close == s.size() ? close : close + 1;
    }
    if (name == "begin" || name == "end") {
      size_t i = end;
      auto env = read_group(s, i);
      if (name == "begin" && env && is_tabular_env(*env)) {
        i = skip_optionals(s, i);
        int groups = (*env == "tabular*" || *env == "tabularx" || *env == "tabulary") ? 2 : 1;
        i = skip_args(s, i, groups);
      }
      out_ += ' ';
      return i;
    }

    const auto& table = command_table();
    auto it = table.find(name);
    if (it == table.end()) {
      // Unknown macro: drop the name, keep any following groups as text.
      return end;
    }
    const CmdRule& rule = it->second;
    switch (rule.kind) {
      case Kind::Literal:
        out_ += rule.literal;
        return end;
      case Kind::Drop:
        return skip_args(s, end, rule.nargs);
      case Kind::Frac: {
        size_t i = end;
        auto num = read_arg(s, i);
        auto den = read_arg(s, i);
        if (num) render(*num, math, depth + 1);
        out_ += '/';
        if (den) render(*den, math, depth + 1);
        return i;
      }
      case Kind::Keep: {
        size_t i = end;
        for (int k = 0; k < rule.nargs; ++k) {
          i = skip_optionals(s, i);
          auto arg = read_arg(s, i);
          if (!arg) break;
          if (k == rule.keep) render(*arg, math, depth + 1);
        }
        return i;
      }
    }
    return end;
  }

  MathMode mode_;
  std::string out_;
};

}  // namespace

std::string render_markup(std::string_view src, MathMode mode) {
  Renderer r(mode);
  r.render(src, false);
  return r.take();
}

}  // namespace scimine::latex
