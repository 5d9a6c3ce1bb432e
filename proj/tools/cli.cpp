#include "scimine/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <set>

#include "scimine/error.hpp"
#include "scimine/evaluation.hpp"
#include "scimine/latex_corpus.hpp"
#include "scimine/llm_bridge.hpp"
#include "scimine/parallel.hpp"
#include "scimine/pipeline.hpp"
#include "scimine/review_service.hpp"
#include "scimine/serialize.hpp"
#include "scimine/synth.hpp"
#include "scimine/text_util.hpp"

namespace fs = std::filesystem;

namespace scimine {

namespace {

std::vector<std::string> read_id_list(const std::string& path) {
  std::vector<std::string> ids;
  for (auto& w : text::split_ws(text::read_file(path)))
    if (w[0] != '#') ids.push_back(w);
  return ids;
}

/// Annotation JSONL files from a directory (or a single file).
std::vector<AnnotatedDocument> load_annotations(const std::string& path) {
  std::vector<AnnotatedDocument> docs;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw Error(ErrorCode::NotFound, path + " does not exist");
  }
  for (const auto& f : files)
    for (auto& d : annotations_from_jsonl(text::read_file(f.string()))) docs.push_back(std::move(d));
  return docs;
}

/// Parsed documents (*.json) and annotation files (*.jsonl) from a directory.
std::vector<AnnotatedDocument> load_inputs(const std::string& path) {
  std::vector<AnnotatedDocument> docs;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  for (const auto& f : files) {
    if (f.extension() == ".json") {
      AnnotatedDocument a;
      a.doc = parsed_document_from_json(parse_json(text::read_file(f.string())));
      docs.push_back(std::move(a));
    } else if (f.extension() == ".jsonl") {
      for (auto& d : annotations_from_jsonl(text::read_file(f.string()))) docs.push_back(std::move(d));
    }
  }
  return docs;
}

void write_annotations_dir(const std::string& dir, const std::vector<AnnotatedDocument>& docs) {
  fs::create_directories(dir);
  for (const auto& d : docs)
    text::write_file_atomic((fs::path(dir) / (safe_doc_filename(d.doc.doc_id) + ".jsonl")).string(),
                            dump(to_json(d)) + "\n");
}

PartitionName partition_arg(const std::string& s) {
  auto p = parse_partition_name(s);
  if (!p) throw Error(ErrorCode::InvalidArgument, "unknown partition " + s);
  return *p;
}

Domain domain_arg(const std::string& s) {
  auto d = parse_domain(s);
  if (!d) throw Error(ErrorCode::InvalidArgument, "unknown domain " + s);
  return *d;
}

ReviewService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scimine: cross-modality scientific information extraction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "scimine 0.1.0");

  // ingest
  std::string ids_file, cache_dir, out_dir, workspace, domain = "CS", base_url = "https://arxiv.org";
  size_t workers = 4;
  auto* ingest = app.add_subcommand("ingest", "fetch arXiv sources and parse them");
  ingest->add_option("--ids", ids_file, "file with one arXiv id per line")->required();
  ingest->add_option("--cache", cache_dir, "source cache directory")->required();
  ingest->add_option("--out", out_dir, "directory for parsed documents");
  ingest->add_option("--workspace", workspace, "store parsed documents in this workspace");
  ingest->add_option("--domain", domain, "domain tag for all ids");
  ingest->add_option("--base-url", base_url, "arXiv mirror");
  ingest->add_option("--workers", workers, "parallel downloads");

  // init / partition
  auto* init = app.add_subcommand("init", "create an empty workspace");
  init->add_option("--workspace", workspace)->required();
  std::string part_name, ids_for_part;
  auto* partition = app.add_subcommand("partition", "define a corpus partition in a workspace");
  partition->add_option("--workspace", workspace)->required();
  partition->add_option("--name", part_name, "seeds | added | test | large")->required();
  partition->add_option("--ids", ids_for_part, "file with doc ids")->required();
  partition->add_option("--domain", domain);

  // import gold
  std::string gold_dir;
  auto* import_gold = app.add_subcommand("import-gold", "store reviewed annotations as gold");
  import_gold->add_option("--workspace", workspace)->required();
  import_gold->add_option("--in", gold_dir, "annotation JSONL file or directory")->required();

  // run
  int round = 0;
  std::string text_backend = "gazetteer", table_backend = "heuristic", endpoint;
  bool no_score = false, no_guiding = false;
  auto* run = app.add_subcommand("run", "auto-annotate a partition with the round's extractors");
  run->add_option("--workspace", workspace)->required();
  run->add_option("--round", round, "round index (default: latest)");
  run->add_option("--partition", part_name)->required();
  run->add_option("--text-backend", text_backend, "gazetteer | remote");
  run->add_option("--table-backend", table_backend, "heuristic | remote");
  run->add_option("--endpoint", endpoint, "remote extractor base URL");
  run->add_option("--workers", workers);
  run->add_flag("--no-score", no_score, "table NER without the Score label");
  run->add_flag("--no-guiding", no_guiding, "skip label guiding");

  auto* advance = app.add_subcommand("advance-round", "fold new gold into the train set and retrain");
  advance->add_option("--workspace", workspace)->required();

  // review helpers
  std::string truth_dir, reviewer = "oracle";
  auto* oracle = app.add_subcommand("oracle-review", "review pending tasks against reference annotations");
  oracle->add_option("--workspace", workspace)->required();
  oracle->add_option("--truth", truth_dir, "reference annotation JSONL file or directory")->required();
  oracle->add_option("--reviewer", reviewer);

  // stats
  bool as_json = false;
  auto* stats = app.add_subcommand("stats", "per-paper corpus statistics of a partition");
  stats->add_option("--workspace", workspace)->required();
  stats->add_option("--partition", part_name)->required();
  stats->add_flag("--json", as_json);

  // export-training
  std::string task = "text-ner", out_file;
  auto* exp = app.add_subcommand("export-training", "write training data for external extractors");
  exp->add_option("--workspace", workspace)->required();
  exp->add_option("--round", round, "round index (default: latest)");
  exp->add_option("--task", task, "text-ner | table-ner | table-re");
  exp->add_option("--out", out_file, "output file (default: stdout)");
  exp->add_flag("--no-score", no_score);

  // llm-extract
  std::string in_dir, llm_url, llm_model, llm_key_env = "SCIMINE_LLM_KEY";
  int shots = 2;
  bool dry_run = false;
  double rps = 0;
  auto* llm = app.add_subcommand("llm-extract", "few-shot extraction through a chat-completion endpoint");
  llm->add_option("--task", task, "text-ner | table-ner | table-re")->required();
  llm->add_option("--shots", shots, "1 or 2");
  llm->add_flag("--no-score", no_score);
  llm->add_option("--in", in_dir, "parsed documents (*.json) or annotations (*.jsonl)")->required();
  llm->add_option("--out", out_dir, "output directory")->required();
  llm->add_option("--url", llm_url, "API base URL (default $SCIMINE_LLM_URL)");
  llm->add_option("--model", llm_model, "model name (default $SCIMINE_LLM_MODEL or gpt-3.5-turbo)");
  llm->add_option("--rps", rps, "requests per second limit");
  llm->add_flag("--dry-run", dry_run, "write prompts instead of calling the endpoint");

  // evaluate
  std::string pred_dir, report_path;
  bool per_domain = false, speed = false, errors = false, strict_re = false;
  size_t batch = 32;
  auto* ev = app.add_subcommand("evaluate", "score predictions against gold");
  ev->add_option("--gold", gold_dir)->required();
  ev->add_option("--pred", pred_dir);
  ev->add_flag("--per-domain", per_domain);
  ev->add_flag("--speed", speed, "measure throughput of the native extractors");
  ev->add_flag("--errors", errors, "error categories");
  ev->add_flag("--strict-re-types", strict_re, "relations must also match endpoint types");
  ev->add_option("--batch", batch, "speed batch size");
  ev->add_option("--workspace", workspace, "extractors for --speed (default: trained on --gold)");
  ev->add_option("--round", round);
  ev->add_option("--report", report_path, "write eval_report.json here");

  // serve
  std::string host = "127.0.0.1", token, static_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the review API");
  serve->add_option("--workspace", workspace)->required();
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--token", token, "bearer token (default $SCIMINE_TOKEN)");
  serve->add_option("--static", static_dir, "review UI bundle directory");

  // synth
  uint64_t seed = 20240501;
  size_t total = 100, score = 60;
  std::string kind = "rounds";
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--kind", kind, "rounds | score");
  synth->add_option("--workspace", workspace, "workspace to seed (rounds)");
  synth->add_option("--gold-out", gold_dir, "write gold annotations of every paper here");
  synth->add_option("--seed", seed);
  synth->add_option("--total", total, "table entities (score)");
  synth->add_option("--score", score, "Score entities among them (score)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code;
  }

  try {
    if (*ingest) {
      if (out_dir.empty() && workspace.empty()) throw Error(ErrorCode::InvalidArgument, "--out or --workspace required");
      auto ids = read_id_list(ids_file);
      FetchOptions fo;
      fo.base_url = base_url;
      ParseOptions po;
      po.domain = domain_arg(domain);
      std::optional<Workspace> ws;
      if (!workspace.empty()) ws = Workspace::init(workspace);
      if (!out_dir.empty()) fs::create_directories(out_dir);
      std::vector<std::string> failures(ids.size());
      std::vector<size_t> tables(ids.size(), 0);
      parallel_for(ids.size(), workers, [&](size_t i) {
        try {
          auto doc = parse_document(fetch_source(ids[i], cache_dir, fo), po);
          tables[i] = doc.tables.size();
          if (ws) ws->put_parsed(doc);
          if (!out_dir.empty())
            text::write_file_atomic((fs::path(out_dir) / (safe_doc_filename(doc.doc_id) + ".json")).string(),
                                    dump(to_json(doc)) + "\n");
        } catch (const Error& e) {
          failures[i] = std::string(to_string(e.code())) + ": " + e.what();
        }
      });
      size_t ok = 0;
      for (size_t i = 0; i < ids.size(); ++i) {
        if (failures[i].empty()) {
          ++ok;
          out << ids[i] << "\tok\t" << tables[i] << " tables\n";
        } else {
          out << ids[i] << "\tfailed\t" << failures[i] << "\n";
          if (ws) ws->log_error({ids[i], "ingest", failures[i]});
        }
      }
      out << ok << "/" << ids.size() << " documents parsed\n";
      return ok == ids.size() ? 0 : 3;
    }

    if (*init) {
      Workspace::init(workspace);
      out << "initialized " << workspace << "\n";
      return 0;
    }

    if (*partition) {
      Workspace ws(workspace);
      auto m = ws.partitions();
      CorpusPartition p;
      p.name = partition_arg(part_name);
      p.doc_ids = read_id_list(ids_for_part);
      for (const auto& id : p.doc_ids) p.domains[id] = domain_arg(domain);
      std::erase_if(m.partitions, [&](const CorpusPartition& x) { return x.name == p.name; });
      m.partitions.push_back(p);
      ws.set_partitions(m);
      out << part_name << ": " << p.doc_ids.size() << " documents\n";
      return 0;
    }

    if (*import_gold) {
      Workspace ws(workspace);
      auto docs = load_annotations(gold_dir);
      for (auto& d : docs) {
        auto report = validate(d);
        if (has_errors(report)) throw Error(ErrorCode::InvalidCorrection, d.doc.doc_id + " fails validation");
        d.review_state = ReviewState::Gold;
        if (!ws.get_parsed(d.doc.doc_id)) ws.put_parsed(d.doc);
        ws.put_annotations(d);
        ws.put_task(ReviewTask{d.doc.doc_id, std::nullopt, TaskStatus::Done, d.version, d.round, d.doc.domain});
      }
      out << docs.size() << " gold documents imported\n";
      return 0;
    }

    if (*run) {
      Workspace ws(workspace);
      if (round == 0) {
        auto rounds = ws.rounds();
        if (rounds.empty()) throw Error(ErrorCode::NotFound, "no rounds yet; run advance-round first");
        round = rounds.back().index;
      }
      RunOptions ro;
      ro.text_backend = text_backend;
      ro.table_backend = table_backend;
      ro.endpoint = endpoint;
      ro.stage.workers = workers;
      ro.stage.table.mode = no_score ? ScoreMode::WithoutScore : ScoreMode::WithScore;
      ro.stage.table.label_guiding = !no_guiding;
      auto r = run_round(ws, partition_arg(part_name), round, ro);
      double total_s = 0;
      for (const auto& [id, s] : r.seconds) total_s += s;
      out << "round " << round << ": annotated " << r.docs.size() << " documents, " << r.errors.size()
          << " failures, " << total_s << " s\n";
      for (const auto& e : r.errors) out << "  " << e.doc_id << ": " << e.message << "\n";
      return 0;
    }

    if (*advance) {
      Workspace ws(workspace);
      auto r = advance_round(ws);
      out << "round " << r.index << ": " << r.train_doc_ids.size() << " training documents ("
          << r.produced_gold.size() << " new)\n";
      for (const auto& [k, v] : r.extractor_snapshots) out << "  " << k << " " << v << "\n";
      return 0;
    }

    if (*oracle) {
      Workspace ws(workspace);
      size_t n = 0;
      for (const auto& truth : load_annotations(truth_dir)) {
        auto t = ws.task(truth.doc.doc_id);
        if (!t || t->status == TaskStatus::Done) continue;
        oracle_review(ws, truth, reviewer);
        ++n;
      }
      out << n << " documents reviewed\n";
      return 0;
    }

    if (*stats) {
      Workspace ws(workspace);
      auto m = ws.partitions();
      const auto* p = m.find(partition_arg(part_name));
      if (!p) throw Error(ErrorCode::NotFound, "no partition " + part_name);
      auto table = corpus_stats(*p, [&](const std::string& id) -> std::optional<AnnotatedDocument> {
        if (auto a = ws.get_annotations(id)) return a;
        if (auto d = ws.get_parsed(id)) {
          AnnotatedDocument a;
          a.doc = *d;
          return a;
        }
        return std::nullopt;
      });
      out << (as_json ? dump(to_json(table), 2) + "\n" : table.render());
      return 0;
    }

    if (*exp) {
      Workspace ws(workspace);
      auto rounds = ws.rounds();
      if (rounds.empty()) throw Error(ErrorCode::NotFound, "no rounds yet");
      const Round* r = &rounds.back();
      if (round != 0) {
        auto it = std::find_if(rounds.begin(), rounds.end(), [&](const Round& x) { return x.index == round; });
        if (it == rounds.end()) throw Error(ErrorCode::NotFound, "no round " + std::to_string(round));
        r = &*it;
      }
      std::set<std::string> ids(r->train_doc_ids.begin(), r->train_doc_ids.end());
      std::vector<AnnotatedDocument> docs;
      for (const auto& id : r->train_doc_ids)
        if (auto d = ws.get_annotations(id)) docs.push_back(*d);
      auto t = parse_llm_task(task);
      if (!t) throw Error(ErrorCode::InvalidArgument, "unknown task " + task);
      ScoreMode mode = no_score ? ScoreMode::WithoutScore : ScoreMode::WithScore;
      std::string data = *t == LlmTask::TextNer   ? export_text_training(docs, "pipeline")
                         : *t == LlmTask::TableNer ? export_table_training(docs, false, mode)
                                                   : export_table_training(docs, true, mode);
      if (out_file.empty())
        out << data;
      else
        text::write_file_atomic(out_file, data);
      return 0;
    }

    if (*llm) {
      auto t = parse_llm_task(task);
      if (!t) throw Error(ErrorCode::InvalidArgument, "unknown task " + task);
      auto docs = load_inputs(in_dir);
      LlmExtractOptions lo;
      lo.shots = shots;
      lo.include_score = !no_score;
      fs::create_directories(out_dir);
      if (dry_run) {
        size_t n = 0;
        for (const auto& d : docs) {
          std::vector<std::string> prompts;
          if (*t == LlmTask::TextNer) {
            auto sents = d.doc.sentences();
            for (size_t s = 0; s < sents.size(); s += lo.sentences_per_prompt) {
              std::vector<const Sentence*> group(sents.begin() + s,
                                                 sents.begin() + std::min(sents.size(), s + lo.sentences_per_prompt));
              prompts.push_back(build_prompt(*t, shots, render_sentences(group), lo.include_score).text);
            }
          } else {
            for (const auto& g : d.doc.tables)
              prompts.push_back(build_prompt(*t, shots, render_table_payload(g), lo.include_score).text);
          }
          for (size_t k = 0; k < prompts.size(); ++k, ++n)
            text::write_file_atomic(
                (fs::path(out_dir) / (safe_doc_filename(d.doc.doc_id) + "." + std::to_string(k) + ".prompt.txt"))
                    .string(),
                prompts[k]);
        }
        out << n << " prompts written\n";
        return 0;
      }
      ChatConfig cc = ChatConfig::from_env();
      if (!llm_url.empty()) cc.base_url = llm_url;
      if (!llm_model.empty()) cc.model = llm_model;
      cc.requests_per_second = rps;
      ChatClient client(cc);
      Json issues = Json::array();
      std::vector<AnnotatedDocument> results;
      for (auto d : docs) {
        d.stages.push_back("llm_" + std::string(to_string(*t)));
        if (*t == LlmTask::TextNer) {
          auto r = llm_extract_text(d.doc, client, lo);
          std::erase_if(d.entities, [](const Entity& e) { return !is_table(e.anchor); });
          for (auto& e : r.entities) d.entities.push_back(e);
          for (const auto& i : r.issues)
            issues.push_back(Json{{"doc_id", d.doc.doc_id}, {"kind", std::string(to_string(i.kind))}, {"fragment", i.fragment}});
        } else if (*t == LlmTask::TableNer) {
          std::erase_if(d.entities, [](const Entity& e) { return is_table(e.anchor); });
          d.relations.clear();
          for (size_t ti = 0; ti < d.doc.tables.size(); ++ti) {
            auto r = llm_extract_table_ner(d.doc.tables[ti], ti, client, lo);
            for (auto& e : r.entities) d.entities.push_back(e);
            for (const auto& i : r.issues)
              issues.push_back(Json{{"doc_id", d.doc.doc_id}, {"table", ti}, {"kind", std::string(to_string(i.kind))}, {"fragment", i.fragment}});
          }
        } else {
          d.relations.clear();
          for (size_t ti = 0; ti < d.doc.tables.size(); ++ti) {
            auto r = llm_extract_table_re(d.doc.tables[ti], client, lo);
            std::map<Coord, std::string> id_at;
            for (const auto& e : d.entities)
              if (auto* a = std::get_if<TableAnchor>(&e.anchor); a && a->table == ti) id_at[{a->row, a->col}] = e.id;
            for (auto [a, b] : r.relations) {
              auto ia = id_at.find(a), ib = id_at.find(b);
              if (ia == id_at.end() || ib == id_at.end()) {
                issues.push_back(Json{{"doc_id", d.doc.doc_id}, {"table", ti}, {"kind", "malformed"}, {"fragment", "relation endpoint without a table entity"}});
                continue;
              }
              const Entity* ea = d.find_entity(ia->second);
              const Entity* eb = d.find_entity(ib->second);
              if (ea->type == eb->type) continue;
              d.relations.push_back(make_relation(ia->second, ib->second, ti, Provenance::Llm));
            }
            for (const auto& i : r.issues)
              issues.push_back(Json{{"doc_id", d.doc.doc_id}, {"table", ti}, {"kind", std::string(to_string(i.kind))}, {"fragment", i.fragment}});
          }
        }
        assign_ids(d);
        results.push_back(std::move(d));
      }
      write_annotations_dir(out_dir, results);
      std::string il;
      for (const auto& i : issues) il += dump(i) + "\n";
      text::write_file_atomic((fs::path(out_dir) / "issues.jsonl").string(), il);
      out << results.size() << " documents, " << issues.size() << " parse issues\n";
      return 0;
    }

    if (*ev) {
      auto gold = load_annotations(gold_dir);
      std::vector<AnnotatedDocument> pred;
      if (!pred_dir.empty()) pred = load_annotations(pred_dir);
      EvalOptions eo;
      eo.per_domain = per_domain;
      eo.errors = errors;
      eo.strict_re_types = strict_re;
      auto report = evaluate(gold, pred, eo);
      if (speed) {
        Extractors ex;
        if (!workspace.empty()) {
          Workspace ws(workspace);
          int r = round;
          if (r == 0) {
            auto rounds = ws.rounds();
            if (rounds.empty()) throw Error(ErrorCode::NotFound, "no rounds yet");
            r = rounds.back().index;
          }
          ex = ws.load_extractors(r);
        } else {
          std::vector<AnnotatedDocument> g = gold;
          for (auto& d : g) d.review_state = ReviewState::Gold;
          ex = train_extractors(g);
        }
        GazetteerTextBackend tb(ex.text);
        HeuristicTableBackend hb(ex.table);
        report.speed = measure_speed(parsed_only(gold), tb, hb, batch);
      }
      out << report.render_text();
      if (!report_path.empty()) text::write_file_atomic(report_path, dump(report.to_json(), 2) + "\n");
      return 0;
    }

    if (*serve) {
      if (token.empty())
        if (const char* t = std::getenv("SCIMINE_TOKEN")) token = t;
      ServiceOptions so;
      so.host = host;
      so.port = port;
      so.token = token;
      so.static_dir = static_dir;
      ReviewService svc(Workspace(workspace), so);
      int bound = svc.bind();
      out << "serving " << workspace << " on http://" << host << ":" << bound << "\n" << std::flush;
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      svc.run();
      g_service = nullptr;
      return 0;
    }

    if (*synth) {
      if (kind == "score") {
        if (gold_dir.empty()) throw Error(ErrorCode::InvalidArgument, "--gold-out required");
        auto docs = make_score_corpus(total, score, seed);
        write_annotations_dir(gold_dir, docs);
        out << docs.size() << " documents with " << total << " table entities (" << score << " Score)\n";
        return 0;
      }
      if (kind != "rounds") throw Error(ErrorCode::InvalidArgument, "unknown kind " + kind);
      SynthOptions so;
      so.seed = seed;
      auto corpus = make_synthetic_corpus(so);
      if (!workspace.empty()) seed_workspace(Workspace::init(workspace), corpus);
      if (!gold_dir.empty()) {
        for (const auto& p : corpus.manifest.partitions)
          write_annotations_dir((fs::path(gold_dir) / std::string(to_string(p.name))).string(),
                                corpus.partition(p.name));
      }
      out << corpus.truth.size() << " papers, vocabulary of " << corpus.vocab.size() << " terms\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace scimine
