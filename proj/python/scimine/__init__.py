"""Python access to the scimine core. Documents are plain dicts."""

import json

from . import _scimine
from ._scimine import ScimineError

__all__ = [
    "ScimineError",
    "parse_latex",
    "flatten_table",
    "build_prompt",
    "parse_text_ner",
    "parse_table_ner",
    "parse_table_re",
    "validate",
    "evaluate",
    "synthetic_corpus",
    "run_cli",
]


def parse_latex(doc_id, tex, domain="OTHER"):
    return json.loads(_scimine.parse_latex(doc_id, tex, domain))


def flatten_table(table):
    return json.loads(_scimine.flatten_table(json.dumps(table)))


def build_prompt(task, shots, payload, include_score=True):
    return _scimine.build_prompt(task, shots, payload, include_score)


def parse_text_ner(response):
    return json.loads(_scimine.parse_text_ner(response))


def parse_table_ner(response, table, include_score=True):
    return json.loads(_scimine.parse_table_ner(response, json.dumps(table), include_score))


def parse_table_re(response, table):
    return json.loads(_scimine.parse_table_re(response, json.dumps(table)))


def validate(annotations):
    return json.loads(_scimine.validate(json.dumps(annotations)))


def _jsonl(docs):
    return "".join(json.dumps(d) + "\n" for d in docs)


def evaluate(gold, pred, per_domain=True, errors=True):
    return json.loads(_scimine.evaluate(_jsonl(gold), _jsonl(pred), per_domain, errors))


def synthetic_corpus(seed=None):
    text = _scimine.synthetic_corpus() if seed is None else _scimine.synthetic_corpus(seed)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def run_cli(*args):
    """Returns (exit_code, stdout, stderr)."""
    return _scimine.run_cli([str(a) for a in args])
