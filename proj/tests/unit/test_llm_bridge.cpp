#include <doctest.h>

#include <atomic>
#include <set>

#include "scimine/error.hpp"
#include "scimine/llm_bridge.hpp"
#include "scimine/serialize.hpp"
#include "test_support.hpp"

using namespace scimine;

namespace {

std::string golden_prompt(const std::string& name) {
  return text::read_file(testsupport::golden() + "/prompts/" + name + ".txt");
}

TableGrid glue_grid() {
  return TableGrid::from_rows(
      "", {{"System", "MNLI-(m/mm)", "QQP", "QNLI", "SST-2", "CoLA", "STS-B", "MRPC", "RTE", "Average"},
           {"", "392k", "363k", "108k", "67k", "8.5k", "5.7k", "3.5k", "2.5k", "-"},
           {"Pre-OpenAI SOTA", "80.6/80.1", "66.1", "82.3", "93.2", "35.0", "81.0", "86.0", "61.7", "74.0"},
           {"OpenAI GPT", "82.1/81.4", "70.3", "87.4", "91.3", "45.4", "80.0", "82.3", "56.0", "75.1"},
           {"bertbase", "84.6/83.4", "71.2", "90.5", "93.5", "52.1", "85.8", "88.9", "66.4", "79.6"}});
}

TableGrid squad_grid() {
  return TableGrid::from_rows("", {{"System", "Dev", "Dev", "Test", "Test"},
                                   {"", "EM", "F1", "EM", "F1"},
                                   {"Human", "-", "-", "82.3", "91.2"},
                                   {"#1 Ensemble - nlnet", "-", "-", "86.0", "91.7"},
                                   {"#2 Ensemble - QANet", "-", "-", "84.5", "90.5"},
                                   {"bertbase(Single)", "80.8", "88.5", "-", "-"}});
}

std::string random_response(std::mt19937_64& rng) {
  static const std::vector<std::string> seeds = {
      "[['BERT', 'Model'], ['GLUE', 'Dataset']]",
      "{'Task': [], 'Dataset': ['QQP'], 'Model': ['bertbase'], 'Method': [], 'Metric': ['F1'], 'Setting': None}",
      "{['#1 Ensemble - nlnet':'91.7', 'Human': '82.3']}",
      "[[\"BERT\", \"Model\"]] Hope this helps!",
      "None",
      "[]"};
  static const std::string alphabet = "[]{}'\":, \\abcXYZ\n\t0123456789BERTModel";
  std::string s;
  switch (rng() % 4) {
    case 0: {  // random bytes
      size_t n = rng() % 80;
      for (size_t k = 0; k < n; ++k) s += static_cast<char>(rng() % 256);
      break;
    }
    case 1: {  // truncation
      const auto& base = seeds[rng() % seeds.size()];
      s = base.substr(0, rng() % (base.size() + 1));
      break;
    }
    case 2: {  // structural mutation
      s = seeds[rng() % seeds.size()];
      for (int k = 0; k < 4 && !s.empty(); ++k) s[rng() % s.size()] = alphabet[rng() % alphabet.size()];
      break;
    }
    default: {  // random punctuation soup
      size_t n = rng() % 60;
      for (size_t k = 0; k < n; ++k) s += alphabet[rng() % alphabet.size()];
    }
  }
  return s;
}

}  // namespace

TEST_CASE("built prompts byte-match the golden templates") {
  struct Case {
    LlmTask task;
    int shots;
    bool score;
    std::string file;
    std::string slot;
  };
  std::vector<Case> cases = {
      {LlmTask::TextNer, 1, true, "text_ner_1shot", "[S]"},
      {LlmTask::TextNer, 2, true, "text_ner_2shot", "[S]"},
      {LlmTask::TableNer, 1, true, "table_ner_1shot_score", "[T]"},
      {LlmTask::TableNer, 2, true, "table_ner_2shot_score", "[T]"},
      {LlmTask::TableNer, 1, false, "table_ner_1shot_noscore", "[T]"},
      {LlmTask::TableNer, 2, false, "table_ner_2shot_noscore", "[T]"},
      {LlmTask::TableRe, 1, true, "table_re_1shot", "[T]"},
      {LlmTask::TableRe, 2, true, "table_re_2shot", "[T]"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.file);
    auto b = build_prompt(c.task, c.shots, c.slot, c.score);
    CHECK(b.text == golden_prompt(c.file));
    CHECK(build_prompt(c.task, c.shots, c.slot, c.score).text == b.text);
  }
  auto text2 = build_prompt(LlmTask::TextNer, 2, "[S]").text;
  CHECK(text2.find("Given type set: [Task, Model, Method, Dataset, Metric]") != std::string::npos);
  auto noscore = build_prompt(LlmTask::TableNer, 1, "[T]", false).text;
  CHECK(noscore.find("'Score': [list of entities]") == std::string::npos);
  CHECK_THROWS_AS(build_prompt(LlmTask::TextNer, 3, "[S]"), Error);
  PromptOptions tiny;
  tiny.max_prompt_chars = 100;
  try {
    build_prompt(LlmTask::TextNer, 1, "[S]", true, tiny);
    FAIL("no size check");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PayloadTooLarge);
  }
}

TEST_CASE("payload rendering") {
  auto g = TableGrid::from_rows("", {{"System", "F1"}, {"it's", "9"}});
  CHECK(render_table_payload(g) == R"([['System', 'F1'], ["it's", '9']])");
  auto doc = testsupport::doc_from_sentences("p", {"We use BERT", "It works"});
  CHECK(render_sentences(doc.sentences()) == "We use BERT It works");
}

TEST_CASE("text NER answers") {
  auto doc = testsupport::doc_from_sentences("t", {"We fine-tune BERT on GLUE", "BERT is strong"});
  auto r = parse_text_ner("[['BERT','Model'],['GLUE','Dataset']]", doc, {0, 1});
  REQUIRE(r.entities.size() == 2);
  CHECK(r.issues.empty());
  CHECK(std::get<TextAnchor>(r.entities[0].anchor) == TextAnchor{0, 2, 3});
  CHECK(std::get<TextAnchor>(r.entities[1].anchor) == TextAnchor{0, 4, 5});
  CHECK(r.entities[0].provenance == Provenance::Llm);

  auto empty = parse_text_ner("[]", doc, {0, 1});
  CHECK(empty.entities.empty());
  CHECK(empty.issues.empty());

  auto person = parse_text_ner("[['Danqi Chen','Person']]", doc, {0, 1});
  CHECK(person.entities.empty());
  REQUIRE(person.issues.size() == 1);
  CHECK(person.issues[0].kind == ResponseIssue::Kind::UndefinedType);

  // Leftmost unconsumed match: the second BERT goes to sentence 1.
  auto twice = parse_text_ner("[[\"BERT\", \"Model\"], [\"BERT\", \"Model\"]] That is all.", doc, {0, 1});
  REQUIRE(twice.entities.size() == 2);
  CHECK(std::get<TextAnchor>(twice.entities[1].anchor).sentence == 1);

  auto lost = parse_text_ner("[['RoBERTa','Model']]", doc, {0, 1});
  CHECK(lost.entities.empty());
  CHECK(lost.count(ResponseIssue::Kind::Malformed) == 1);
}

TEST_CASE("table NER answers") {
  auto g = glue_grid();
  auto r = parse_table_ner("{'Model': ['bertbase'], 'Dataset': ['QQP'], 'Metric': [], 'Setting': None}", g, 0);
  REQUIRE(r.entities.size() == 2);
  std::map<Coord, EntityType> at;
  for (const auto& e : r.entities) {
    auto a = std::get<TableAnchor>(e.anchor);
    at[{a.row, a.col}] = e.type;
  }
  CHECK(at == std::map<Coord, EntityType>{{{4, 0}, EntityType::Model}, {{0, 2}, EntityType::Dataset}});

  // A header shaped after the demonstrations: Model and Metric lists.
  auto small = TableGrid::from_rows("", {{"System", "F1"}, {"bertbase", "88.5"}});
  auto r2 = parse_table_ner(R"({"Model":["bertbase"],"Metric":["F1"],"Task":[]})", small, 0);
  CHECK(r2.entities.size() == 2);
  CHECK(r2.issues.empty());

  CHECK(parse_table_ner("None", g, 0).items.empty());

  auto sq = squad_grid();
  auto amb = parse_table_ner("{'Metric': ['F1']}", sq, 0);
  CHECK(amb.entities.size() == 2);
  CHECK(amb.count(ResponseIssue::Kind::Ambiguous) == 1);

  auto no_score = parse_table_ner("{'Score': ['91.7']}", sq, 0, false);
  CHECK(no_score.entities.empty());
  CHECK(no_score.count(ResponseIssue::Kind::UndefinedType) == 1);
}

TEST_CASE("table RE answers") {
  auto sq = squad_grid();
  auto r = parse_table_re("{['#1 Ensemble - nlnet':'91.7']}", sq);
  REQUIRE(r.relations.size() == 1);
  CHECK(r.relations[0] == std::pair<Coord, Coord>{{3, 0}, {3, 4}});
  CHECK(parse_table_re("None", sq).relations.empty());
}

TEST_CASE("render then parse returns the same annotations") {
  std::vector<std::pair<std::string, std::string>> items = {{"BERT", "Model"}, {"GLUE", "Dataset"}};
  CHECK(parse_text_ner(render_text_ner_answer(items)).items == items);

  auto sq = squad_grid();
  std::map<EntityType, std::vector<std::string>> by_type = {
      {EntityType::Model, {"Human", "bertbase(Single)"}}, {EntityType::Score, {"86.0"}}};
  auto r = parse_table_ner(render_table_ner_answer(by_type, true), sq, 0);
  std::set<std::pair<Coord, EntityType>> got;
  for (const auto& e : r.entities) {
    auto a = std::get<TableAnchor>(e.anchor);
    got.insert({{a.row, a.col}, e.type});
  }
  CHECK(got == std::set<std::pair<Coord, EntityType>>{
                   {{2, 0}, EntityType::Model}, {{5, 0}, EntityType::Model}, {{3, 3}, EntityType::Score}});

  std::vector<std::pair<std::string, std::string>> pairs = {{"Human", "82.3"}, {"#2 Ensemble - QANet", "90.5"}};
  auto re = parse_table_re(render_table_re_answer(pairs), sq);
  std::set<std::pair<Coord, Coord>> rel(re.relations.begin(), re.relations.end());
  CHECK(rel == std::set<std::pair<Coord, Coord>>{{{2, 0}, {2, 3}}, {{4, 0}, {4, 4}}});
}

TEST_CASE("parsers are total on 300 fuzzed responses") {
  std::mt19937_64 rng(300);
  auto doc = testsupport::doc_from_sentences("f", {"We fine-tune BERT on GLUE"});
  auto g = glue_grid();
  for (int k = 0; k < 300; ++k) {
    auto s = random_response(rng);
    CAPTURE(s);
    CHECK_NOTHROW(parse_text_ner(s, doc, {0}));
    CHECK_NOTHROW(parse_table_ner(s, g, 0));
    CHECK_NOTHROW(parse_table_re(s, g));
  }
}

TEST_CASE("chat client retries transient failures") {
  std::atomic<int> calls{0};
  ChatConfig cfg;
  cfg.base_url = "http://llm.invalid/v1";
  cfg.backoff_ms = 1;
  cfg.api_key = "k";
  cfg.post = [&](const std::string& url, const std::string& body, const Headers& h) -> std::pair<int, std::string> {
    CHECK(url == "http://llm.invalid/v1/chat/completions");
    CHECK(parse_json(body)["temperature"] == 0);
    CHECK(std::find(h.begin(), h.end(), std::pair<std::string, std::string>{"Authorization", "Bearer k"}) != h.end());
    if (++calls < 3) return {503, ""};
    return {200, R"({"choices":[{"message":{"role":"assistant","content":"[]"}}]})"};
  };
  ChatClient client(cfg);
  CHECK(client.complete("hi") == "[]");
  CHECK(calls == 3);

  cfg.post = [](const std::string&, const std::string&, const Headers&) -> std::pair<int, std::string> {
    return {429, ""};
  };
  try {
    ChatClient(cfg).complete("hi");
    FAIL("no error after retries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendUnavailable);
  }
  cfg.post = [](const std::string&, const std::string&, const Headers&) -> std::pair<int, std::string> {
    return {200, R"({"id":"x"})"};
  };
  try {
    ChatClient(cfg).complete("hi");
    FAIL("accepted a reply without choices");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendProtocol);
  }
}

TEST_CASE("llm extraction over a fake chat endpoint") {
  ChatConfig cfg;
  cfg.base_url = "http://llm.invalid";
  cfg.post = [](const std::string&, const std::string& body, const Headers&) -> std::pair<int, std::string> {
    auto prompt = parse_json(body)["messages"][0]["content"].get<std::string>();
    std::string answer = prompt.find("GLUE") != std::string::npos ? "[['GLUE', 'Dataset']]" : "[]";
    return {200, dump(Json{{"choices", {{{"message", {{"content", answer}}}}}}})};
  };
  ChatClient client(cfg);
  auto doc = testsupport::doc_from_sentences("l", {"a", "b", "c", "d", "we use GLUE"});
  auto r = llm_extract_text(doc, client);
  REQUIRE(r.entities.size() == 1);
  CHECK(std::get<TextAnchor>(r.entities[0].anchor) == TextAnchor{4, 2, 3});
}
