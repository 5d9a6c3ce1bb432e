#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "scimine/error.hpp"
#include "scimine/review_service.hpp"
#include "scimine/synth.hpp"
#include "test_support.hpp"

using namespace scimine;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path root;
  SynthCorpus corpus;
  Workspace ws;

  explicit Fixture(const std::string& name)
      : root(testsupport::temp_dir(name)), corpus(make_corpus()), ws(Workspace::init(root)) {
    seed_workspace(ws, corpus);
    advance_round(ws);
    run_round(ws, PartitionName::Added, 1);
  }
  ~Fixture() { fs::remove_all(root); }

  static SynthCorpus make_corpus() {
    SynthOptions o;
    o.seeds = 3;
    o.added = 3;
    o.test = 2;
    return make_synthetic_corpus(o);
  }
  std::vector<std::string> added() const { return corpus.manifest.find(PartitionName::Added)->doc_ids; }
};

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return parse_json(r->body);
}

Json corrections_json(const std::vector<Correction>& cs) {
  Json arr = Json::array();
  for (const auto& c : cs) arr.push_back(to_json(c));
  return arr;
}

std::string path_of(const std::string& id) { return "/api/docs/" + httplib::detail::encode_url(id); }

}  // namespace

TEST_CASE("palette lists every entity type with a color") {
  auto p = schema_palette();
  REQUIRE(p["entity_types"].size() == 7);
  std::map<std::string, std::string> colors;
  for (const auto& t : p["entity_types"]) colors[t["name"]] = t["color"];
  CHECK(colors.at("Model") == "#1b5e20");
  CHECK(colors.at("Score") == "#e65100");
  std::set<std::string> unique;
  for (const auto& [k, v] : colors) unique.insert(v);
  CHECK(unique.size() == 7);
}

TEST_CASE("review API end to end") {
  Fixture fx("service");
  ServiceOptions so;
  so.port = 0;
  ReviewService svc(fx.ws, so);
  svc.start();
  REQUIRE(svc.port() > 0);
  httplib::Client cli("127.0.0.1", svc.port());

  auto schema = body_of(cli.Get("/api/schema"));
  CHECK(schema == schema_palette());
  CHECK(body_of(cli.Get("/api/rounds"))["rounds"].size() == 1);

  auto pending = body_of(cli.Get("/api/docs?status=pending"));
  CHECK(pending["docs"].size() == 3);
  CHECK(body_of(cli.Get("/api/docs?status=done"))["docs"].size() == 3);
  CHECK(cli.Get("/api/docs?status=bogus")->status == 400);
  CHECK(cli.Get("/api/docs/nope")->status == 404);
  CHECK(cli.Get("/")->status == 200);

  auto ids = fx.added();
  auto doc = body_of(cli.Get(path_of(ids[0])));
  uint64_t version = doc["version"];
  CHECK(doc["task"]["status"] == "pending");

  SUBCASE("stale version is a conflict") {
    Json req{{"version", version + 7}, {"corrections", Json::array()}};
    auto r = cli.Patch(path_of(ids[0]), dump(req), "application/json");
    REQUIRE(r);
    CHECK(r->status == 409);
    auto b = parse_json(r->body);
    CHECK(b["code"] == "stale_version");
    CHECK(b["current_version"] == version);
  }

  SUBCASE("a scripted session ends as the expected gold document") {
    auto before = *fx.ws.get_annotations(ids[0]);
    // Delete two text entities and add them back under new ids; unlink and relink one pair.
    std::vector<Correction> cs;
    std::vector<const Entity*> texts;
    for (const auto& e : before.entities)
      if (!is_table(e.anchor) && texts.size() < 2) texts.push_back(&e);
    REQUIRE(texts.size() == 2);
    REQUIRE_FALSE(before.relations.empty());
    auto r0 = before.relations.front();
    auto n1 = before.next_entity_id();
    auto n2 = "e" + std::to_string(std::stoull(n1.substr(1)) + 1);
    cs.push_back({Correction::Op::Remove, texts[0]->id, std::nullopt, std::nullopt, "", ""});
    cs.push_back({Correction::Op::Remove, texts[1]->id, std::nullopt, std::nullopt, "", ""});
    cs.push_back({Correction::Op::Add, n1, texts[0]->anchor, texts[0]->type, "", ""});
    cs.push_back({Correction::Op::Add, n2, texts[1]->anchor, EntityType::Task, "", ""});
    cs.push_back({Correction::Op::RemoveRel, "", std::nullopt, std::nullopt, r0.e1, r0.e2});
    cs.push_back({Correction::Op::AddRel, "", std::nullopt, std::nullopt, r0.e2, r0.e1});

    auto expected = merge_review(merge_review(before, version, cs, false), version + 1, {}, true);

    Json req{{"version", version}, {"corrections", corrections_json(cs)}, {"reviewer", "rita"}};
    auto r = cli.Patch(path_of(ids[0]), dump(req), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(parse_json(r->body)["version"] == version + 1);
    auto done = cli.Post(path_of(ids[0]) + "/complete", dump(Json{{"reviewer", "rita"}}), "application/json");
    REQUIRE(done);
    CHECK(done->status == 200);
    CHECK(parse_json(done->body)["review_state"] == "gold");

    auto file = fx.ws.annotations_dir() / (safe_doc_filename(ids[0]) + ".jsonl");
    CHECK(text::read_file(file.string()) == dump(to_json(expected)) + "\n");
    CHECK(body_of(cli.Get("/api/docs?status=done"))["docs"].size() == 4);

    // Another reviewer cannot take a finished task; reopen brings it back.
    auto claim = cli.Post(path_of(ids[0]) + "/claim", dump(Json{{"reviewer", "sam"}}), "application/json");
    CHECK(claim->status == 409);
    auto reopen = cli.Post(path_of(ids[0]) + "/reopen", dump(Json{{"reviewer", "sam"}}), "application/json");
    CHECK(reopen->status == 200);
    CHECK(parse_json(reopen->body)["status"] == "in_progress");
  }

  SUBCASE("oracle session with five corrections promotes one gold document") {
    auto before = *fx.ws.get_annotations(ids[1]);
    auto truth = fx.corpus.partition(PartitionName::Added)[1];
    auto cs = diff_annotations(before, truth);
    size_t gold_before = fx.ws.gold_documents().size();
    CHECK(cli.Post(path_of(ids[1]) + "/claim", dump(Json{{"reviewer", "ann"}}), "application/json")->status == 200);
    uint64_t v = before.version;
    // First five corrections, then the rest; a partial diff that does not
    // validate on its own falls back to a single request.
    size_t head = std::min<size_t>(5, cs.size());
    std::vector<std::vector<Correction>> chunks = {{cs.begin(), cs.begin() + head}, {cs.begin() + head, cs.end()}};
    for (const auto& chunk : chunks) {
      Json req{{"version", v}, {"corrections", corrections_json(chunk)}, {"reviewer", "ann"}};
      auto r = cli.Patch(path_of(ids[1]), dump(req), "application/json");
      REQUIRE(r);
      if (r->status == 422) {
        req["corrections"] = corrections_json(cs);
        r = cli.Patch(path_of(ids[1]), dump(req), "application/json");
        REQUIRE(r);
        CHECK(r->status == 200);
        v = parse_json(r->body)["version"];
        break;
      }
      CHECK(r->status == 200);
      v = parse_json(r->body)["version"];
    }
    auto bob = cli.Patch(path_of(ids[1]), dump(Json{{"version", v}, {"corrections", Json::array()}, {"reviewer", "bob"}}),
                         "application/json");
    CHECK(bob->status == 409);
    CHECK(cli.Post(path_of(ids[1]) + "/complete", dump(Json{{"reviewer", "ann"}}), "application/json")->status == 200);
    auto after = *fx.ws.get_annotations(ids[1]);
    CHECK(after.review_state == ReviewState::Gold);
    CHECK(diff_annotations(after, truth).empty());
    CHECK(fx.ws.gold_documents().size() == gold_before + 1);
    svc.stop();
    auto r2 = advance_round(fx.ws);
    CHECK(r2.produced_gold == std::vector<std::string>{ids[1]});
  }

  SUBCASE("invalid corrections are rejected") {
    Json bad{{"version", version},
             {"corrections", Json::array({Json{{"op", "remove"}, {"id", "e99999"}}})}};
    auto r = cli.Patch(path_of(ids[2]), dump(bad), "application/json");
    REQUIRE(r);
    CHECK(r->status == 422);
    CHECK(parse_json(r->body)["code"] == "invalid_correction");
    CHECK(cli.Patch(path_of(ids[2]), "{not json", "application/json")->status == 400);
  }

  SUBCASE("parallel writers: exactly one wins per version") {
    std::atomic<int> ok{0}, conflict{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
      threads.emplace_back([&, t] {
        httplib::Client c("127.0.0.1", svc.port());
        Json req{{"version", version}, {"corrections", Json::array()}, {"reviewer", "same"}};
        auto r = c.Patch(path_of(ids[0]), dump(req), "application/json");
        if (r && r->status == 200) ++ok;
        if (r && r->status == 409) ++conflict;
        (void)t;
      });
    for (auto& th : threads) th.join();
    CHECK(ok == 1);
    CHECK(conflict == 7);
    CHECK(fx.ws.get_annotations(ids[0])->version == version + 1);
  }
  svc.stop();
}

TEST_CASE("bearer token guards the API") {
  Fixture fx("service_auth");
  ServiceOptions so;
  so.port = 0;
  so.token = "s3cret";
  ReviewService svc(fx.ws, so);
  svc.start();
  httplib::Client cli("127.0.0.1", svc.port());
  auto denied = cli.Get("/api/docs");
  REQUIRE(denied);
  CHECK(denied->status == 401);
  CHECK(parse_json(denied->body)["code"] == "unauthorized");
  httplib::Headers h = {{"Authorization", "Bearer s3cret"}};
  CHECK(cli.Get("/api/docs", h)->status == 200);
  CHECK(cli.Get("/api/docs", httplib::Headers{{"Authorization", "Bearer wrong"}})->status == 401);
  svc.stop();
}

TEST_CASE("one service per workspace and per port") {
  Fixture fx("service_lock");
  ServiceOptions so;
  so.port = 0;
  ReviewService first(fx.ws, so);
  int port = first.bind();
  try {
    ReviewService second(fx.ws, so);
    FAIL("second holder got the lock");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WorkspaceLocked);
  }

  Fixture other("service_port");
  ServiceOptions same_port;
  same_port.port = port;
  ReviewService clash(other.ws, same_port);
  try {
    clash.bind();
    FAIL("bound an occupied port");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AddrInUse);
  }
}
