#include <doctest.h>

#include <atomic>
#include <set>
#include <sstream>

#include "scimine/error.hpp"
#include "scimine/serialize.hpp"
#include "scimine/text_extract.hpp"
#include "test_support.hpp"

using namespace scimine;

namespace {

ParsedDocument doc_of_lengths(const std::vector<size_t>& lengths) {
  std::vector<std::string> sents;
  for (size_t n : lengths) {
    std::string s;
    for (size_t k = 0; k < n; ++k) s += (k ? " w" : "w") + std::to_string(k);
    sents.push_back(s);
  }
  return testsupport::doc_from_sentences("win", sents);
}

// Independent greedy: alternate sides, a side stays closed once it overflows.
std::pair<size_t, size_t> oracle_window(const std::vector<size_t>& len, size_t c, size_t budget) {
  if (len[c] > budget) return {c, c};
  size_t lo = c, hi = c, used = len[c];
  bool left = true, right = true;
  while (left || right) {
    if (left) {
      if (lo == 0 || used + len[lo - 1] > budget) left = false;
      else used += len[--lo];
    }
    if (right) {
      if (hi + 1 == len.size() || used + len[hi + 1] > budget) right = false;
      else used += len[++hi];
    }
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("context window from the worked example") {
  auto doc = doc_of_lengths({100, 100, 100, 100, 100});
  auto w = build_windows(doc, 512);
  REQUIRE(w.size() == 5);
  CHECK(w[2].sentences == std::vector<size_t>{0, 1, 2, 3, 4});
  CHECK(w[2].words == 500);
  CHECK_FALSE(w[2].over_budget);
}

TEST_CASE("context windows match the greedy oracle on random documents") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<size_t> len(1 + rng() % 12);
    for (auto& n : len) n = 1 + rng() % 90;
    size_t budget = 20 + rng() % 200;
    auto doc = doc_of_lengths(len);
    std::vector<std::string> diags;
    auto ws = build_windows(doc, budget, &diags);
    REQUIRE(ws.size() == len.size());
    size_t over = 0;
    for (size_t c = 0; c < len.size(); ++c) {
      auto [lo, hi] = oracle_window(len, c, budget);
      std::vector<size_t> expect;
      size_t words = 0;
      for (size_t s = lo; s <= hi; ++s) {
        expect.push_back(s);
        words += len[s];
      }
      CHECK(ws[c].sentences == expect);
      CHECK(ws[c].words == words);
      CHECK(ws[c].over_budget == (len[c] > budget));
      if (len[c] > budget) ++over;
      else CHECK(words <= budget);
    }
    CHECK(diags.size() == over);
  }
}

TEST_CASE("label mapping") {
  auto pd = testsupport::doc_from_sentences("m", {"We evaluate on ImageNet with top-1 accuracy"});
  ExternalDocument ext{pd, {{0, 3, 4, "Material"}, {0, 5, 7, "Metric"}, {0, 0, 1, "Generic"}}};
  auto scierc = map_labels(ext, LabelMapSpec::for_schema(SourceSchema::SciERC));
  REQUIRE(scierc.size() == 1);
  CHECK(scierc[0].type == EntityType::Metric);
  CHECK(scierc[0].provenance == Provenance::Mapped);
  auto scirex = map_labels(ext, LabelMapSpec::for_schema(SourceSchema::SciREX), false);
  REQUIRE(scirex.size() == 2);
  CHECK(scirex[0].type == EntityType::Dataset);
  CHECK(scirex[0].surface == "ImageNet");

  ext.spans.push_back({0, 1, 2, "Gadget"});
  std::vector<std::string> warnings;
  CHECK(map_labels(ext, LabelMapSpec::for_schema(SourceSchema::SciERC), false, &warnings).size() == 1);
  CHECK(warnings.size() == 1);
  try {
    map_labels(ext, LabelMapSpec::for_schema(SourceSchema::SciERC), true);
    FAIL("strict mapping accepted an unknown type");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownSourceType);
  }
}

TEST_CASE("SciERC-style loader uses document-level inclusive offsets") {
  std::string line =
      R"({"doc_key":"x1","sentences":[["We","study","parsing"],["Parsing","uses","CKY","algorithm"]],)"
      R"("ner":[[[2,2,"Task"]],[[3,3,"Task"],[5,6,"Method"]]]})";
  auto docs = load_scierc_jsonl(line + "\n");
  REQUIRE(docs.size() == 1);
  REQUIRE(docs[0].spans.size() == 3);
  auto ents = map_labels(docs[0], LabelMapSpec::for_schema(SourceSchema::SciERC));
  REQUIRE(ents.size() == 3);
  CHECK(ents[0].surface == "parsing");
  CHECK(ents[2].surface == "CKY algorithm");
  CHECK(std::get<TextAnchor>(ents[2].anchor) == TextAnchor{1, 2, 4});
}

TEST_CASE("gazetteer matches agree with a brute-force n-gram scan") {
  Gazetteer g;
  g.add("image segmentation", EntityType::Task);
  g.add("ResNet", EntityType::Model);
  auto doc = testsupport::doc_from_sentences(
      "gz", {"ResNet is strong at image segmentation", "We skip segmentation here", "Image Segmentation with resnet"});
  GazetteerTextBackend backend(g);
  auto got = backend.extract(doc);

  std::set<std::tuple<size_t, size_t, size_t, std::string>> oracle;
  auto sents = doc.sentences();
  for (size_t s = 0; s < sents.size(); ++s)
    for (size_t l = 0; l < sents[s]->size(); ++l)
      for (size_t r = l + 1; r <= sents[s]->size(); ++r) {
        std::vector<std::string> w(sents[s]->begin() + l, sents[s]->begin() + r);
        auto key = normalize_surface(text::join(w, " "));
        if (key == "image segmentation") oracle.insert({s, l, r, "Task"});
        if (key == "resnet") oracle.insert({s, l, r, "Model"});
      }
  std::set<std::tuple<size_t, size_t, size_t, std::string>> mine;
  for (const auto& e : got) {
    auto a = std::get<TextAnchor>(e.anchor);
    mine.insert({a.sentence, a.l, a.r, std::string(to_string(e.type))});
  }
  CHECK(mine == oracle);
  CHECK(mine.size() == 4);
}

TEST_CASE("longest match wins") {
  Gazetteer g;
  g.add("BERT", EntityType::Model);
  g.add("BERT large", EntityType::Method);
  auto m = g.match({"we", "use", "BERT", "large", "and", "BERT"});
  REQUIRE(m.size() == 2);
  CHECK(m[0] == std::tuple<size_t, size_t, EntityType>{2, 4, EntityType::Method});
  CHECK(m[1] == std::tuple<size_t, size_t, EntityType>{5, 6, EntityType::Model});
}

TEST_CASE("trained gazetteer size equals distinct normalized gold surfaces") {
  std::vector<AnnotatedDocument> gold;
  std::set<std::string> surfaces;
  const char* vocab[] = {"BERT", "the BERT", "ResNet model", "resnet", "GLUE", "SQuAD", "image segmentation",
                         "F1", "accuracy", "Image  Segmentation", "LSTM", "Transformer"};
  std::mt19937_64 rng(5);
  for (int d = 0; d < 50; ++d) {
    std::vector<std::string> picks;
    for (int k = 0; k < 3; ++k) picks.push_back(vocab[rng() % std::size(vocab)]);
    auto pd = testsupport::doc_from_sentences("g" + std::to_string(d), picks);
    AnnotatedDocument ad;
    ad.doc = pd;
    ad.review_state = ReviewState::Gold;
    for (size_t s = 0; s < picks.size(); ++s) {
      auto n = text::split_ws(picks[s]).size();
      ad.entities.push_back(make_entity(pd, "e" + std::to_string(s + 1), TextAnchor{s, 0, n},
                                        kTextEntityTypes[rng() % kTextEntityTypes.size()]));
      surfaces.insert(normalize_surface(ad.entities.back().surface));
    }
    gold.push_back(ad);
  }
  auto g = train_gazetteer(gold);
  CHECK(g.entries.size() == surfaces.size());
  gold[0].review_state = ReviewState::InReview;
  CHECK_THROWS_AS(train_gazetteer({gold[0]}), Error);
}

TEST_CASE("abbreviation links follow parenthesized initialisms") {
  CHECK(initialism("Convolutional Neural Network") == "cnn");
  CHECK(initialism("Long Short-Term Memory") == "lstm");
  CHECK(is_initialism_of("LSTM", "long short-term memory"));
  auto pd = testsupport::doc_from_sentences("ab", {"We use Long Short-Term Memory ( LSTM ) here"});
  AnnotatedDocument ad;
  ad.doc = pd;
  ad.review_state = ReviewState::Gold;
  ad.entities.push_back(make_entity(pd, "e1", TextAnchor{0, 2, 5}, EntityType::Method));
  auto g = train_gazetteer({ad});
  CHECK(g.lookup("lstm") == EntityType::Method);
}

TEST_CASE("assign_ids continues after the largest id") {
  AnnotatedDocument d;
  d.doc = testsupport::doc_from_sentences("ids", {"a b c d"});
  d.entities.push_back(make_entity(d.doc, "e7", TextAnchor{0, 0, 1}, EntityType::Task));
  d.entities.push_back(make_entity(d.doc, "", TextAnchor{0, 1, 2}, EntityType::Task));
  d.entities.push_back(make_entity(d.doc, "", TextAnchor{0, 2, 3}, EntityType::Task));
  assign_ids(d);
  CHECK(d.entities[1].id == "e8");
  CHECK(d.entities[2].id == "e9");
}

TEST_CASE("remote text backend over a fake transport") {
  auto doc = testsupport::doc_from_sentences("r", {"BERT beats ELMo", "on GLUE", "and SQuAD too"});
  std::atomic<int> calls{0};
  RemoteConfig cfg;
  cfg.endpoint = "http://extractor.invalid/";
  cfg.batch_size = 2;
  cfg.post = [&](const std::string& url, const std::string& body, const Headers&) -> std::pair<int, std::string> {
    ++calls;
    CHECK(url == "http://extractor.invalid/v1/extract/text");
    auto req = parse_json(body);
    Json ents = Json::array();
    for (size_t s = 0; s < req["windows"].size(); ++s) {
      const auto& w = req["windows"][s];
      const auto& center = w["sentences"][w["center"].get<size_t>()];
      for (size_t k = 0; k < center.size(); ++k) {
        auto tok = center[k].get<std::string>();
        if (tok == "BERT") ents.push_back({{"s", s}, {"l", k}, {"r", k + 1}, {"type", "Model"}});
        if (tok == "GLUE" || tok == "SQuAD") ents.push_back({{"s", s}, {"l", k}, {"r", k + 1}, {"type", "Dataset"}});
      }
    }
    return {200, dump(Json{{"entities", ents}})};
  };
  RemoteTextBackend backend(cfg);
  auto ents = backend.extract(doc);
  CHECK(calls == 2);
  REQUIRE(ents.size() == 3);
  std::set<std::string> surfaces;
  for (const auto& e : ents) surfaces.insert(e.surface);
  CHECK(surfaces == std::set<std::string>{"BERT", "GLUE", "SQuAD"});

  auto code_with = [&](int status, std::string body) {
    RemoteConfig c = cfg;
    c.post = [=](const std::string&, const std::string&, const Headers&) -> std::pair<int, std::string> {
      return {status, body};
    };
    try {
      RemoteTextBackend(c).extract(doc);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_with(503, "") == ErrorCode::BackendUnavailable);
  CHECK(code_with(200, "not json") == ErrorCode::BackendProtocol);
  CHECK(code_with(200, R"({"entities":[{"s":0,"l":0,"r":1,"type":"Score"}]})") == ErrorCode::BackendProtocol);
  CHECK(code_with(200, R"({"entities":[{"s":0,"l":0,"r":40,"type":"Task"}]})") == ErrorCode::BackendProtocol);
}

TEST_CASE("text training export puts center entities at window offsets") {
  auto pd = testsupport::doc_from_sentences("x", {"a b", "we use BERT"});
  AnnotatedDocument d;
  d.doc = pd;
  d.review_state = ReviewState::Gold;
  d.entities.push_back(make_entity(pd, "e1", TextAnchor{1, 2, 3}, EntityType::Model));
  auto out = export_text_training({d}, "gold");
  std::vector<Json> recs;
  std::istringstream in(out);
  for (std::string l; std::getline(in, l);)
    if (!text::trim(l).empty()) recs.push_back(parse_json(l));
  REQUIRE(recs.size() == 2);
  CHECK(recs[0]["entities"].empty());
  REQUIRE(recs[1]["entities"].size() == 1);
  auto toks = recs[1]["tokens"];
  size_t l = recs[1]["entities"][0]["l"].get<size_t>();
  CHECK(toks[l].get<std::string>() == "BERT");
}
