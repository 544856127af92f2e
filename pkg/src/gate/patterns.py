"""Anchored wildcard patterns over producer ids.

A producer pattern is matched against the full producer id ("name-version"),
anchored at both ends:

    pattern := term ("|" term)*            top-level alternation
    term    := unit+
    unit    := literal run | "*" | group
    group   := "(" literal ")" ("|" "(" literal ")")*

``*`` matches any (possibly empty) run of characters.  Parenthesized groups
joined by "|" alternate locally and share the remainder of the term, so
``(brill)|(post)-*`` matches ``brill-0.1`` and ``post-1.0`` but not
``xerox-1.0``.  A "|" not joining two groups separates whole terms.

Matching is implemented directly (position-set simulation) rather than via
``re`` so the test suite can cross-check it against an independent
regex-based oracle.
"""

from __future__ import annotations

from .errors import BadPattern

# Characters with structural meaning; anything else is a literal.
_SPECIAL = set("()|*")

STAR = "*"  # unit sentinel; other units are str (literal) or tuple (group options)

Unit = object  # str literal, tuple of alternatives, or the STAR sentinel


class ProducerPattern:
    """Compiled producer pattern; anchored full-string matching."""

    def __init__(self, source: str, terms: list[list[Unit]]):
        self.source = source
        self._terms = terms

    def matches(self, producer: str) -> bool:
        return any(_match_term(units, producer) for units in self._terms)

    def __repr__(self):
        return f"ProducerPattern({self.source!r})"


def _match_term(units: list[Unit], s: str) -> bool:
    positions = {0}
    for unit in units:
        nxt: set[int] = set()
        if unit is STAR:
            nxt.update(range(min(positions), len(s) + 1))
        elif isinstance(unit, tuple):
            for p in positions:
                for option in unit:
                    if s.startswith(option, p):
                        nxt.add(p + len(option))
        else:
            for p in positions:
                if s.startswith(unit, p):
                    nxt.add(p + len(unit))
        positions = nxt
        if not positions:
            return False
    return len(s) in positions


def compile_producer_pattern(source: str) -> ProducerPattern:
    """Parse and compile a producer pattern; raises BadPattern on syntax errors."""

    if not source:
        raise BadPattern(source, "empty producer pattern")
    terms: list[list[Unit]] = []
    units: list[Unit] = []
    literal: list[str] = []
    i = 0
    n = len(source)

    def flush_literal():
        if literal:
            units.append("".join(literal))
            literal.clear()

    def end_term():
        flush_literal()
        if not units:
            raise BadPattern(source, "empty alternation branch")
        terms.append(list(units))
        units.clear()

    while i < n:
        c = source[i]
        if c == "*":
            flush_literal()
            units.append(STAR)
            i += 1
        elif c == "(":
            flush_literal()
            options = []
            while True:
                end = source.find(")", i + 1)
                if end < 0:
                    raise BadPattern(source, "unbalanced parenthesis")
                option = source[i + 1 : end]
                if not option or any(ch in _SPECIAL for ch in option):
                    raise BadPattern(source, "parentheses may only group literals")
                options.append(option)
                i = end + 1
                # adjacent "(a)|(b)" alternates locally and shares the term tail
                if source.startswith("|(", i):
                    i += 1
                else:
                    break
            units.append(tuple(options))
        elif c == ")":
            raise BadPattern(source, "unbalanced parenthesis")
        elif c == "|":
            end_term()
            i += 1
        elif c.isspace():
            raise BadPattern(source, "whitespace inside producer pattern")
        else:
            literal.append(c)
            i += 1
    end_term()
    return ProducerPattern(source, terms)


class PreconditionPattern:
    """One precondition: producer pattern plus a literal result label.

    The textual form is "<producer-pattern> <label>", e.g. "brill-* pos_tags".
    """

    def __init__(self, source: str):
        parts = source.split()
        if len(parts) != 2:
            raise BadPattern(source, "expected '<producer-pattern> <label>'")
        self.source = source
        self.producer_pattern = parts[0]
        self.label = parts[1]
        self._compiled = compile_producer_pattern(parts[0])

    def matches(self, producer: str, label: str) -> bool:
        return label == self.label and self._compiled.matches(producer)

    def __repr__(self):
        return f"PreconditionPattern({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, PreconditionPattern) and other.source == self.source

    def __hash__(self):
        return hash(self.source)


def literal_producer_pattern(producer: str) -> str:
    """Pattern string matching exactly one producer id.

    Valid only for producer ids free of pattern metacharacters and
    whitespace, which module registration enforces.
    """
    if any(ch in _SPECIAL or ch.isspace() for ch in producer):
        raise BadPattern(producer, "producer id contains pattern metacharacters")
    return producer
