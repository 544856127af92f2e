from __future__ import annotations

import pytest

from gate.engine import Engine, Registry
from gate.store import Collection, Span
from gate.vie import Gazetteer, Lexicon, register_builtin_modules

SARAH = b"Sarah savored the soup."

GOLDEN_LEXICON = {"savored": "VBD", "the": "DT", "soup": "NN"}
GOLDEN_GAZETTEER = {"Sarah": "person"}

# expected pipeline output over SARAH: (id, type, start, end, attributes)
GOLDEN_ROWS = [
    (1, "token", 0, 5, {"pos": "NP"}),
    (2, "token", 6, 13, {"pos": "VBD"}),
    (3, "token", 14, 17, {"pos": "DT"}),
    (4, "token", 18, 22, {"pos": "NN"}),
    (5, "token", 22, 23, {}),
    (6, "name", 0, 5, {"name_type": "person"}),
    (7, "sentence", 0, 23, {}),
]

NEWS_SGML = (
    b"<DOC>\n"
    b"<HEADERS>Reuter</HEADERS>\n"
    b"<SENT>Dog bites man.</SENT>\n"
    b"<SENT>Newshound implicated.</SENT>\n"
    b"</DOC>\n"
)

_ROW_PRODUCERS = {
    "token": "tokenizer-0.1",
    "name": "gazetteer-0.1",
    "sentence": "sentencer-0.1",
}


def builtin_engine(lexicon=None, gazetteer=None, timeout=20.0) -> Engine:
    registry = Registry()
    register_builtin_modules(
        registry,
        Lexicon(GOLDEN_LEXICON if lexicon is None else lexicon),
        Gazetteer(GOLDEN_GAZETTEER if gazetteer is None else gazetteer),
    )
    return Engine(registry, run_timeout=timeout)


def add_golden_rows(doc):
    for _, type_name, start, end, attrs in GOLDEN_ROWS:
        doc.add_annotation(type_name, [Span(start, end)], attrs, _ROW_PRODUCERS[type_name])
    return doc


@pytest.fixture
def collection(tmp_path) -> Collection:
    return Collection.create(tmp_path / "coll", "test")


@pytest.fixture
def sarah_doc(collection):
    return collection.add_document("sarah", SARAH)


@pytest.fixture
def golden_doc(sarah_doc):
    """Sarah document preloaded with the seven golden annotation rows."""
    return add_golden_rows(sarah_doc)


@pytest.fixture
def engine() -> Engine:
    return builtin_engine()
