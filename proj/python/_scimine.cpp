#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scimine/cli.hpp"
#include "scimine/docmodel.hpp"
#include "scimine/error.hpp"
#include "scimine/evaluation.hpp"
#include "scimine/latex_corpus.hpp"
#include "scimine/llm_bridge.hpp"
#include "scimine/serialize.hpp"
#include "scimine/synth.hpp"
#include "scimine/table_extract.hpp"

namespace py = pybind11;
using namespace scimine;

// Documents cross the boundary as JSON text; the Python package decodes it.

namespace {

LlmTask task_arg(const std::string& s) {
  auto t = parse_llm_task(s);
  if (!t) throw Error(ErrorCode::InvalidArgument, "unknown task " + s);
  return *t;
}

std::string response_json(const ParsedResponse& r) {
  Json j;
  Json ents = Json::array();
  for (const auto& e : r.entities) ents.push_back(to_json(e));
  Json rels = Json::array();
  for (const auto& [a, b] : r.relations) rels.push_back(Json::array({Json::array({a.first, a.second}), Json::array({b.first, b.second})}));
  Json items = Json::array();
  for (const auto& [x, y] : r.items) items.push_back(Json::array({x, y}));
  Json issues = Json::array();
  for (const auto& i : r.issues) issues.push_back(Json{{"kind", std::string(to_string(i.kind))}, {"fragment", i.fragment}});
  j["entities"] = std::move(ents);
  j["relations"] = std::move(rels);
  j["items"] = std::move(items);
  j["issues"] = std::move(issues);
  return dump(j);
}

}  // namespace

PYBIND11_MODULE(_scimine, m) {
  m.doc() = "scimine native core";

  py::register_exception<Error>(m, "ScimineError");

  m.def("parse_latex", [](const std::string& doc_id, const std::string& tex, const std::string& domain) {
    ParseOptions o;
    o.domain = parse_domain(domain).value_or(Domain::OTHER);
    return dump(to_json(parse_latex(doc_id, tex, o)));
  }, py::arg("doc_id"), py::arg("tex"), py::arg("domain") = "OTHER");

  m.def("flatten_table", [](const std::string& table_json) {
    auto flat = flatten_table(table_from_json(parse_json(table_json)));
    Json spans = Json::array();
    for (const auto& [c, s] : flat.coord_spans) spans.push_back(Json::array({c.first, c.second, s.first, s.second}));
    return dump(Json{{"text", flat.text}, {"coord_spans", std::move(spans)}});
  });

  m.def("build_prompt", [](const std::string& task, int shots, const std::string& payload, bool include_score) {
    return build_prompt(task_arg(task), shots, payload, include_score).text;
  }, py::arg("task"), py::arg("shots"), py::arg("payload"), py::arg("include_score") = true);

  m.def("parse_text_ner", [](const std::string& response) { return response_json(parse_text_ner(response)); });
  m.def("parse_table_ner", [](const std::string& response, const std::string& table_json, bool include_score) {
    return response_json(parse_table_ner(response, table_from_json(parse_json(table_json)), 0, include_score));
  }, py::arg("response"), py::arg("table"), py::arg("include_score") = true);
  m.def("parse_table_re", [](const std::string& response, const std::string& table_json) {
    return response_json(parse_table_re(response, table_from_json(parse_json(table_json))));
  });

  m.def("validate", [](const std::string& annotations_json) {
    return dump(to_json(validate(annotated_document_from_json(parse_json(annotations_json)))));
  });

  m.def("evaluate", [](const std::string& gold_jsonl, const std::string& pred_jsonl, bool per_domain, bool errors) {
    EvalOptions o;
    o.per_domain = per_domain;
    o.errors = errors;
    return dump(evaluate(annotations_from_jsonl(gold_jsonl), annotations_from_jsonl(pred_jsonl), o).to_json());
  }, py::arg("gold_jsonl"), py::arg("pred_jsonl"), py::arg("per_domain") = true, py::arg("errors") = true);

  m.def("synthetic_corpus", [](uint64_t seed) {
    SynthOptions o;
    o.seed = seed;
    return to_jsonl(make_synthetic_corpus(o).truth);
  }, py::arg("seed") = SynthOptions{}.seed);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
