#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "scimine/docmodel.hpp"
#include "scimine/evaluation.hpp"
#include "scimine/text_util.hpp"

namespace testsupport {

inline std::string fixtures() { return SCIMINE_FIXTURES; }
inline std::string golden() { return SCIMINE_GOLDEN; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("scimine_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// One section, one paragraph, sentences given as space-separated words.
inline scimine::ParsedDocument doc_from_sentences(const std::string& id, const std::vector<std::string>& sentences) {
  scimine::ParsedDocument d;
  d.doc_id = id;
  d.domain = scimine::Domain::CS;
  scimine::Paragraph p;
  for (const auto& s : sentences) p.push_back(scimine::text::split_ws(s));
  d.sections.push_back(scimine::Section{"Body", 1, {p}});
  return d;
}

/// Maximum bipartite matching (Kuhn) between gold and pred items where
/// `same(g, p)` holds; returns the matching size.
template <class G, class P, class Eq>
size_t max_matching(const std::vector<G>& gold, const std::vector<P>& pred, Eq same) {
  std::vector<std::vector<size_t>> adj(pred.size());
  for (size_t p = 0; p < pred.size(); ++p)
    for (size_t g = 0; g < gold.size(); ++g)
      if (same(gold[g], pred[p])) adj[p].push_back(g);
  std::vector<long> owner(gold.size(), -1);
  std::function<bool(size_t, std::vector<bool>&)> augment = [&](size_t p, std::vector<bool>& seen) {
    for (size_t g : adj[p]) {
      if (seen[g]) continue;
      seen[g] = true;
      if (owner[g] < 0 || augment(static_cast<size_t>(owner[g]), seen)) {
        owner[g] = static_cast<long>(p);
        return true;
      }
    }
    return false;
  };
  size_t m = 0;
  for (size_t p = 0; p < pred.size(); ++p) {
    std::vector<bool> seen(gold.size(), false);
    if (augment(p, seen)) ++m;
  }
  return m;
}

inline bool same_entity(const scimine::ScoredEntity& a, const scimine::ScoredEntity& b) {
  return a.doc == b.doc && a.anchor == b.anchor && a.type == b.type;
}

inline bool same_relation(const scimine::ScoredRelation& a, const scimine::ScoredRelation& b) {
  if (a.doc != b.doc || a.table != b.table) return false;
  return (a.a == b.a && a.b == b.b) || (a.a == b.b && a.b == b.a);
}

/// Random entity sets over a small anchor space so collisions are common.
struct RandomSets {
  std::mt19937_64 rng;
  explicit RandomSets(uint64_t seed) : rng(seed) {}
  size_t below(size_t n) { return static_cast<size_t>(rng() % n); }

  scimine::Anchor anchor() {
    if (below(2)) return scimine::TextAnchor{below(3), below(3), 3 + below(2)};
    return scimine::TableAnchor{0, below(3), below(3), 0, 1 + below(2)};
  }
  std::string type(bool allow_undefined) {
    static const std::vector<std::string> types = {"Task", "Dataset", "Metric", "Model", "Method", "Setting", "Score"};
    if (allow_undefined && below(8) == 0) return below(2) ? "Person" : "Location";
    return types[below(types.size())];
  }
  std::vector<scimine::ScoredEntity> entities(size_t max, bool allow_undefined = false) {
    std::vector<scimine::ScoredEntity> out;
    size_t n = below(max + 1);
    for (size_t k = 0; k < n; ++k)
      out.push_back({below(2) ? "d1" : "d2", anchor(), type(allow_undefined)});
    return out;
  }
  std::vector<scimine::ScoredRelation> relations(size_t max) {
    std::vector<scimine::ScoredRelation> out;
    size_t n = below(max + 1);
    for (size_t k = 0; k < n; ++k) {
      scimine::ScoredRelation r;
      r.doc = below(2) ? "d1" : "d2";
      r.table = below(2);
      r.a = scimine::TableAnchor{r.table, below(3), below(2), 0, 1};
      r.b = scimine::TableAnchor{r.table, below(3), below(2), 0, 1};
      r.type_a = type(false);
      r.type_b = type(false);
      out.push_back(r);
    }
    return out;
  }
};

}  // namespace testsupport
