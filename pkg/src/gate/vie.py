"""Built-in processing modules: tokenizer, sentence splitter, lexicon POS
tagger, gazetteer name recognizer, and a precision/recall scorer.

All rules are byte-level and locale-free.  Whitespace is ASCII space, tab,
CR and LF; non-ASCII bytes count as word bytes so multi-byte characters
stay inside word runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .engine import DATA, ModuleDescriptor, Registry, RunContext, ViewerHint
from .errors import InvalidResource
from .patterns import PreconditionPattern
from .store import Annotation, AnnotationSelector, Document, Span

TOKENIZER = "tokenizer-0.1"
SENTENCER = "sentencer-0.1"
TAGGER = "tagger-0.1"
GAZETTEER = "gazetteer-0.1"

_WHITESPACE = frozenset(b" \t\r\n")
_SENTENCE_ENDERS = (b".", b"!", b"?")


def _is_word_byte(b: int) -> bool:
    return (
        0x30 <= b <= 0x39  # 0-9
        or 0x41 <= b <= 0x5A  # A-Z
        or 0x61 <= b <= 0x7A  # a-z
        or b >= 0x80  # non-ASCII kept inside word runs
    )


def token_spans(content: bytes) -> list[Span]:
    """Maximal word-byte runs, plus one span per other non-whitespace byte."""
    spans = []
    i = 0
    n = len(content)
    while i < n:
        b = content[i]
        if b in _WHITESPACE:
            i += 1
        elif _is_word_byte(b):
            j = i + 1
            while j < n and _is_word_byte(content[j]):
                j += 1
            spans.append(Span(i, j))
            i = j
        else:
            spans.append(Span(i, i + 1))
            i += 1
    return spans


def run_tokenizer(ctx: RunContext):
    for span in token_spans(ctx.content):
        ctx.add_annotation("token", [span], {})


def _tokens_in_order(ctx: RunContext) -> list[Annotation]:
    return ctx.annotations(AnnotationSelector(type_name="token"))


def run_sentencer(ctx: RunContext):
    """One sentence per maximal token run ending at . ! ? or end of document."""
    tokens = _tokens_in_order(ctx)
    first: Annotation | None = None
    last: Annotation | None = None
    for token in tokens:
        if first is None:
            first = token
        last = token
        if ctx.text(token.spans[0]) in _SENTENCE_ENDERS:
            ctx.add_annotation("sentence", [Span(first.start, token.spans[-1].end)], {})
            first = None
    if first is not None and last is not None:
        ctx.add_annotation("sentence", [Span(first.start, last.spans[-1].end)], {})


@dataclass
class Lexicon:
    """Word to POS-tag lookup; keys compared byte-wise after UTF-8 encoding."""

    entries: dict[str, str]

    def __post_init__(self):
        if any(not k for k in self.entries):
            raise InvalidResource("lexicon keys must be non-empty")
        self._by_bytes = {k.encode("utf-8"): v for k, v in self.entries.items()}

    def lookup(self, token: bytes) -> str | None:
        tag = self._by_bytes.get(token)
        if tag is None:
            tag = self._by_bytes.get(token.lower())
        return tag


@dataclass
class Gazetteer:
    """Name to category lookup; names may contain single spaces."""

    entries: dict[str, str]

    def __post_init__(self):
        for key in self.entries:
            if not key or key != key.strip():
                raise InvalidResource(f"bad gazetteer key {key!r}")
        self._by_bytes = {k.encode("utf-8"): v for k, v in self.entries.items()}
        self.max_words = max((k.count(" ") + 1 for k in self.entries), default=0)

    def lookup(self, name: bytes) -> str | None:
        return self._by_bytes.get(name)


def load_lexicon(path: Path) -> Lexicon:
    return Lexicon(_load_tsv(path, "lexicon"))


def load_gazetteer(path: Path) -> Gazetteer:
    return Gazetteer(_load_tsv(path, "gazetteer"))


def _load_tsv(path: Path, kind: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidResource(f"cannot read {kind} file {path}: {exc}") from exc
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition("\t")
        if not sep or not key or not value:
            raise InvalidResource(f"{path}:{lineno}: expected <{kind} entry>\\t<value>")
        entries[key] = value
    return entries


def run_tagger(ctx: RunContext, lexicon: Lexicon):
    """Attach pos=<tag> to word tokens: lexicon, lowercased lexicon, then
    NP for capitalized tokens, NN otherwise.  Punctuation tokens get none."""
    for token in _tokens_in_order(ctx):
        text = ctx.text(token.spans[0])
        if not text or (len(text) == 1 and not _is_word_byte(text[0])):
            continue
        tag = lexicon.lookup(text)
        if tag is None:
            tag = "NP" if 0x41 <= text[0] <= 0x5A else "NN"
        ctx.set_attributes(token.id, {"pos": tag})


def run_gazetteer(ctx: RunContext, gazetteer: Gazetteer):
    """Longest-match scan over token sequences joined by single spaces."""
    tokens = _tokens_in_order(ctx)
    texts = [ctx.text(t.spans[0]) for t in tokens]
    i = 0
    while i < len(tokens):
        matched = 0
        for k in range(min(gazetteer.max_words, len(tokens) - i), 0, -1):
            category = gazetteer.lookup(b" ".join(texts[i : i + k]))
            if category is not None:
                ctx.add_annotation(
                    "name",
                    [Span(tokens[i].start, tokens[i + k - 1].spans[-1].end)],
                    {"name_type": category},
                )
                matched = k
                break
        i += matched if matched else 1


# --- scoring ---


@dataclass
class ScoreReport:
    matches: int
    response_size: int
    key_size: int
    precision: Fraction
    recall: Fraction
    f1: Fraction

    def to_json(self) -> dict:
        return {
            "matches": self.matches,
            "response_size": self.response_size,
            "key_size": self.key_size,
            "precision": float(self.precision),
            "recall": float(self.recall),
            "f1": float(self.f1),
        }


def _ratio(matches: int, size: int, other_size: int) -> Fraction:
    if size == 0:
        return Fraction(1) if other_size == 0 else Fraction(0)
    return Fraction(matches, size)


def score_annotations(
    response: list[Annotation], key: list[Annotation], strict_attrs: bool = False
) -> ScoreReport:
    """Match-based precision/recall/F1 over two annotation lists.

    Two annotations match when type and span list agree (and attribute maps,
    when strict).  Pairing is one-to-one, greedy in document order, which is
    maximal here because match equality is unambiguous.
    """

    def sort_key(ann: Annotation):
        return (ann.start, ann.id)

    unmatched_keys = sorted(key, key=sort_key)
    matches = 0
    for ann in sorted(response, key=sort_key):
        for i, candidate in enumerate(unmatched_keys):
            if ann.type_name != candidate.type_name:
                continue
            if not ann.matches_span_list(candidate):
                continue
            if strict_attrs and ann.attributes != candidate.attributes:
                continue
            matches += 1
            del unmatched_keys[i]
            break
    precision = _ratio(matches, len(response), len(key))
    recall = _ratio(matches, len(key), len(response))
    if precision + recall == 0:
        f1 = Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ScoreReport(
        matches=matches,
        response_size=len(response),
        key_size=len(key),
        precision=precision,
        recall=recall,
        f1=f1,
    )


def score(
    doc: Document,
    response: AnnotationSelector,
    key: AnnotationSelector,
    strict_attrs: bool = False,
) -> ScoreReport:
    return score_annotations(
        doc.get_annotations(response), doc.get_annotations(key), strict_attrs
    )


# --- registration ---

TOKEN_COLOR = "#f2c74c"
SENTENCE_COLOR = "#a9c9f5"
NAME_COLOR = "#8fe3a1"


def register_builtin_modules(
    registry: Registry,
    lexicon: Lexicon | None = None,
    gazetteer: Gazetteer | None = None,
):
    """Register the built-in tight modules against the given resources."""
    lexicon = lexicon if lexicon is not None else Lexicon({})
    gazetteer = gazetteer if gazetteer is not None else Gazetteer({})
    registry.register(
        ModuleDescriptor(
            name="tokenizer",
            version="0.1",
            results=["tokens"],
            viewer_hint=ViewerHint("token", TOKEN_COLOR),
        ),
        run_tokenizer,
    )
    registry.register(
        ModuleDescriptor(
            name="sentencer",
            version="0.1",
            preconditions=[PreconditionPattern("tokenizer-* tokens")],
            results=["sentences"],
            viewer_hint=ViewerHint("sentence", SENTENCE_COLOR),
        ),
        run_sentencer,
    )
    registry.register(
        ModuleDescriptor(
            name="tagger",
            version="0.1",
            preconditions=[PreconditionPattern("tokenizer-* tokens")],
            results=["pos_tags"],
        ),
        lambda ctx: run_tagger(ctx, lexicon),
    )
    registry.register(
        ModuleDescriptor(
            name="gazetteer",
            version="0.1",
            preconditions=[PreconditionPattern("tokenizer-* tokens")],
            results=["names"],
            viewer_hint=ViewerHint("name", NAME_COLOR),
        ),
        lambda ctx: run_gazetteer(ctx, gazetteer),
    )


def register_resource_modules(
    registry: Registry,
    lexicon_path: Path | None = None,
    gazetteer_path: Path | None = None,
):
    """Register lexicon/gazetteer files as data modules (running one
    reloads and validates its resource file)."""

    def data_entry(name: str, label: str, path: Path, loader):
        def run(ctx: RunContext):
            resource = loader(path)
            ctx.log(f"loaded {len(resource.entries)} {label} entries")

        registry.register(
            ModuleDescriptor(
                name=name, version="0.1", results=[label], coupling=DATA, data_path=path
            ),
            run,
        )

    if lexicon_path is not None:
        data_entry("vie-lexicon", "lexicon", Path(lexicon_path), load_lexicon)
    if gazetteer_path is not None:
        data_entry("vie-gazetteer", "gazetteer", Path(gazetteer_path), load_gazetteer)
