"""Standoff-annotation document store with line-oriented persistence.

Documents are immutable raw byte content plus attributes, a table of
annotations addressed by half-open byte spans, and a provenance index of
(producer, result-label) pairs.  Documents are grouped into collections
persisted as a directory:

    <collection>/manifest.gate        gate-collection 1 / name= / doc= / attr.<k>=
    <collection>/docs/<doc_id>.raw    verbatim content bytes
    <collection>/docs/<doc_id>.attrs  one "<key>=<value>" per line
    <collection>/docs/<doc_id>.prov   one "<producer>\\t<label>" per line
    <collection>/docs/<doc_id>.ann    one annotation per line (see ANN_LINE_DOC)
    <collection>/docs/<doc_id>.meta   "next_id=<n>" (id counter survives reopen)

All text files are UTF-8 with LF line endings.  Names, keys and values
percent-encode the five bytes % TAB LF ; = so the line formats stay
unambiguous.  Content bytes are opaque and 8-bit clean; every offset is a
byte offset.

A collection opened with an ``overlay`` directory reads content from the
primary root but sends every write to the overlay, so documents on
read-only media stay annotatable.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BadRequest,
    CorruptManifest,
    DuplicateDocId,
    IoFailure,
    MalformedSpans,
    NoSuchAnnotation,
    NoSuchDocument,
    NotACollection,
    PathOccupied,
    SpanOutOfBounds,
)
from .patterns import compile_producer_pattern

MANIFEST_NAME = "manifest.gate"
MANIFEST_MAGIC = "gate-collection 1"
DOCS_DIR = "docs"

ANN_LINE_DOC = "<id>\\t<type>\\t<producer>\\t<s:e>[,<s:e>...]\\t<k>=<v>[;<k>=<v>...]"

_ESCAPES = {"%": "%25", "\t": "%09", "\n": "%0A", ";": "%3B", "=": "%3D"}
_UNESCAPES = {code[1:].lower(): char for char, code in _ESCAPES.items()}


def escape(value: str) -> str:
    """Percent-encode the five reserved characters inside names/keys/values."""
    out = []
    for ch in value:
        out.append(_ESCAPES.get(ch, ch))
    return "".join(out)


def unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "%":
            code = value[i + 1 : i + 3].lower()
            if code not in _UNESCAPES:
                raise ValueError(f"bad escape %{code}")
            out.append(_UNESCAPES[code])
            i += 3
        else:
            out.append(ch)
            i += 1
    return "".join(out)


@dataclass(frozen=True, order=True)
class Span:
    """Half-open [start, end) byte range."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise MalformedSpans(f"bad span {self.start}:{self.end}")

    def overlaps(self, other: "Span") -> bool:
        """True when the two ranges share at least one byte position.

        An empty probe range overlaps nothing.
        """
        if other.start >= other.end:
            return False
        return self.start < other.end and other.start < self.end

    def __str__(self):
        return f"{self.start}:{self.end}"


@dataclass
class Annotation:
    """Typed, attributed record over one or more ordered disjoint spans."""

    id: int
    type_name: str
    spans: tuple[Span, ...]
    attributes: dict[str, str]
    producer: str

    @property
    def start(self) -> int:
        return self.spans[0].start

    def matches_span_list(self, other: "Annotation") -> bool:
        return [(s.start, s.end) for s in self.spans] == [
            (s.start, s.end) for s in other.spans
        ]


@dataclass
class AnnotationSelector:
    """Conjunctive annotation filter; an empty selector selects everything."""

    type_name: str | None = None
    producer_pattern: str | None = None
    overlapping: Span | None = None


@dataclass(frozen=True)
class AnnotationTypeDeclaration:
    """Declares the attribute shape and display color of one annotation type."""

    type_name: str
    attribute_keys: tuple[tuple[str, str], ...] = ()  # (key, kind) pairs
    display_color: str = "#cccccc"


def _validate_spans(spans, content_length: int) -> tuple[Span, ...]:
    spans = tuple(spans)
    if not spans:
        raise MalformedSpans("annotation needs at least one span")
    for span in spans:
        if span.end > content_length:
            raise SpanOutOfBounds(
                f"span {span} exceeds content length {content_length}"
            )
    for a, b in zip(spans, spans[1:]):
        if b.start < a.end:
            raise MalformedSpans(f"spans {a} and {b} are unsorted or overlap")
    return spans


def _validate_producer(producer: str):
    if not producer or "-" not in producer.strip("-") or producer.startswith("-"):
        raise BadRequest(f"producer id {producer!r} is not of the form name-version")


class Document:
    """One document: immutable content, attributes, annotations, provenance.

    All mutations on one document serialize on ``lock``; distinct documents
    may be mutated concurrently.
    """

    def __init__(self, doc_id: str, content: bytes, attributes: dict[str, str] | None = None):
        self.doc_id = doc_id
        self._content = bytes(content)
        self.attributes: dict[str, str] = dict(attributes or {})
        self.annotations: dict[int, Annotation] = {}
        self.provenance: set[tuple[str, str]] = set()
        self.next_id = 1
        self.raw_path: Path | None = None
        self.lock = threading.RLock()

    @property
    def content(self) -> bytes:
        return self._content

    def get_text(self, span: Span) -> bytes:
        if span.end > len(self._content):
            raise SpanOutOfBounds(
                f"span {span} exceeds content length {len(self._content)}"
            )
        return self._content[span.start : span.end]

    def add_annotation(
        self,
        type_name: str,
        spans,
        attributes: dict[str, str] | None = None,
        producer: str = "",
    ) -> Annotation:
        if not type_name:
            raise BadRequest("annotation type name must be non-empty")
        _validate_producer(producer)
        spans = _validate_spans(spans, len(self._content))
        with self.lock:
            ann = Annotation(
                id=self.next_id,
                type_name=type_name,
                spans=spans,
                attributes=dict(attributes or {}),
                producer=producer,
            )
            self.annotations[ann.id] = ann
            self.next_id += 1
            # every producer seen on an annotation must appear in the index
            if not any(p == producer for p, _ in self.provenance):
                self.provenance.add((producer, ""))
            return ann

    def set_attributes(self, ann_id: int, attributes: dict[str, str]) -> Annotation:
        with self.lock:
            ann = self.annotations.get(ann_id)
            if ann is None:
                raise NoSuchAnnotation(f"no annotation {ann_id} in {self.doc_id}")
            ann.attributes.update(attributes)
            return ann

    def get_annotations(self, selector: AnnotationSelector | None = None) -> list[Annotation]:
        selector = selector or AnnotationSelector()
        matcher = None
        if selector.producer_pattern is not None:
            matcher = compile_producer_pattern(selector.producer_pattern)
        with self.lock:
            found = []
            for ann in self.annotations.values():
                if selector.type_name is not None and ann.type_name != selector.type_name:
                    continue
                if matcher is not None and not matcher.matches(ann.producer):
                    continue
                if selector.overlapping is not None and not any(
                    s.overlaps(selector.overlapping) for s in ann.spans
                ):
                    continue
                found.append(ann)
            found.sort(key=lambda a: (a.start, a.id))
            return found

    def delete_annotations(self, selector: AnnotationSelector | None = None) -> int:
        with self.lock:
            doomed = self.get_annotations(selector)
            for ann in doomed:
                del self.annotations[ann.id]
            return len(doomed)

    def record_result(self, producer: str, label: str) -> None:
        with self.lock:
            self.provenance.add((producer, label))
            if label:
                # a real label supersedes the unlabelled placeholder entry
                self.provenance.discard((producer, ""))

    def clear_result(self, producer: str, label: str) -> None:
        with self.lock:
            self.provenance.discard((producer, label))

    def has_result(self, producer: str, label: str) -> bool:
        return (producer, label) in self.provenance


# --- annotation line codec (persistence and loose-coupling interchange) ---


def format_annotation_line(ann: Annotation) -> str:
    spans = ",".join(str(s) for s in ann.spans)
    attrs = ";".join(
        f"{escape(k)}={escape(v)}" for k, v in sorted(ann.attributes.items())
    )
    return f"{ann.id}\t{escape(ann.type_name)}\t{escape(ann.producer)}\t{spans}\t{attrs}"


def parse_annotation_line(line: str, content_length: int | None = None) -> Annotation:
    fields = line.split("\t")
    if len(fields) != 5:
        raise ValueError(f"expected 5 tab-separated fields, got {len(fields)}")
    raw_id, raw_type, raw_producer, raw_spans, raw_attrs = fields
    ann_id = int(raw_id)
    spans = []
    for part in raw_spans.split(","):
        start_s, _, end_s = part.partition(":")
        spans.append(Span(int(start_s), int(end_s)))
    attributes: dict[str, str] = {}
    if raw_attrs:
        for pair in raw_attrs.split(";"):
            key_s, sep, value_s = pair.partition("=")
            if not sep:
                raise ValueError(f"attribute {pair!r} is missing '='")
            attributes[unescape(key_s)] = unescape(value_s)
    ann = Annotation(
        id=ann_id,
        type_name=unescape(raw_type),
        spans=_validate_spans(spans, content_length if content_length is not None else max(s.end for s in spans)),
        attributes=attributes,
        producer=unescape(raw_producer),
    )
    return ann


# --- collection persistence ---


@dataclass
class CollectionManifest:
    name: str
    doc_ids: list[str] = field(default_factory=list)
    attributes: dict[str, str] = field(default_factory=dict)


def _validate_doc_id(doc_id: str):
    if not doc_id or doc_id in (".", "..") or any(c in doc_id for c in "/\\\0"):
        raise BadRequest(f"invalid document id {doc_id!r}")


class Collection:
    """A named group of documents persisted under one directory."""

    def __init__(self, root: Path, manifest: CollectionManifest, overlay: Path | None = None):
        self.root = Path(root)
        self.overlay = Path(overlay) if overlay is not None else None
        self.manifest = manifest
        self._docs: dict[str, Document] = {}
        self._lock = threading.RLock()

    # -- construction --

    @classmethod
    def create(cls, path, name: str) -> "Collection":
        root = Path(path)
        if root.exists():
            if not root.is_dir() or any(root.iterdir()):
                raise PathOccupied(f"{root} exists and is not an empty directory")
        manifest = CollectionManifest(name=name)
        coll = cls(root, manifest)
        try:
            (root / DOCS_DIR).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(str(root), str(exc)) from exc
        coll._write_manifest()
        return coll

    @classmethod
    def open(cls, path, overlay=None) -> "Collection":
        root = Path(path)
        overlay_path = Path(overlay) if overlay is not None else None
        manifest_path = None
        if overlay_path is not None and (overlay_path / MANIFEST_NAME).is_file():
            manifest_path = overlay_path / MANIFEST_NAME
        elif (root / MANIFEST_NAME).is_file():
            manifest_path = root / MANIFEST_NAME
        if manifest_path is None:
            raise NotACollection(f"{root} does not contain {MANIFEST_NAME}")
        manifest = cls._parse_manifest(manifest_path)
        return cls(root, manifest, overlay_path)

    @staticmethod
    def _parse_manifest(path: Path) -> CollectionManifest:
        try:
            lines = path.read_bytes().decode("utf-8").split("\n")
        except (OSError, UnicodeDecodeError) as exc:
            raise NotACollection(f"{path}: {exc}") from exc
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or lines[0] != MANIFEST_MAGIC:
            raise CorruptManifest(str(path), 1, f"expected {MANIFEST_MAGIC!r}")
        name = None
        doc_ids: list[str] = []
        attributes: dict[str, str] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            key, sep, value = line.partition("=")
            if not sep:
                raise CorruptManifest(str(path), lineno, "expected key=value")
            try:
                if key == "name":
                    name = unescape(value)
                elif key == "doc":
                    doc_id = unescape(value)
                    if doc_id in doc_ids:
                        raise ValueError(f"duplicate doc id {doc_id!r}")
                    doc_ids.append(doc_id)
                elif key.startswith("attr."):
                    attributes[unescape(key[5:])] = unescape(value)
                else:
                    raise ValueError(f"unknown key {key!r}")
            except ValueError as exc:
                raise CorruptManifest(str(path), lineno, str(exc)) from exc
        if name is None:
            raise CorruptManifest(str(path), len(lines), "missing name= line")
        return CollectionManifest(name=name, doc_ids=doc_ids, attributes=attributes)

    # -- path helpers (reads fall back from overlay to root; writes go to overlay) --

    def _read_base(self, relative: str) -> Path | None:
        if self.overlay is not None:
            candidate = self.overlay / relative
            if candidate.exists():
                return candidate
        candidate = self.root / relative
        if candidate.exists():
            return candidate
        return None

    def _write_base(self, relative: str) -> Path:
        base = self.overlay if self.overlay is not None else self.root
        return base / relative

    def _write_file(self, relative: str, data: bytes):
        path = self._write_base(relative)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as exc:
            raise IoFailure(str(path), str(exc)) from exc

    def raw_path(self, doc_id: str) -> Path | None:
        return self._read_base(f"{DOCS_DIR}/{doc_id}.raw")

    # -- documents --

    @property
    def doc_ids(self) -> list[str]:
        return list(self.manifest.doc_ids)

    def add_document(
        self, doc_id: str, content: bytes, attributes: dict[str, str] | None = None
    ) -> Document:
        _validate_doc_id(doc_id)
        with self._lock:
            if doc_id in self.manifest.doc_ids:
                raise DuplicateDocId(f"document {doc_id!r} already in collection")
            doc = Document(doc_id, content, attributes)
            self.manifest.doc_ids.append(doc_id)
            self._docs[doc_id] = doc
            self._write_file(f"{DOCS_DIR}/{doc_id}.raw", doc.content)
            doc.raw_path = self._write_base(f"{DOCS_DIR}/{doc_id}.raw")
            self._flush_document(doc)
            self._write_manifest()
            return doc

    def document(self, doc_id: str) -> Document:
        with self._lock:
            if doc_id in self._docs:
                return self._docs[doc_id]
            if doc_id not in self.manifest.doc_ids:
                raise NoSuchDocument(f"no document {doc_id!r} in collection")
            doc = self._load_document(doc_id)
            self._docs[doc_id] = doc
            return doc

    def _load_document(self, doc_id: str) -> Document:
        raw = self._read_base(f"{DOCS_DIR}/{doc_id}.raw")
        if raw is None:
            raise NoSuchDocument(f"missing content file for {doc_id!r}")
        try:
            content = raw.read_bytes()
        except OSError as exc:
            raise IoFailure(str(raw), str(exc)) from exc
        doc = Document(doc_id, content)
        doc.raw_path = raw
        attrs_path = self._read_base(f"{DOCS_DIR}/{doc_id}.attrs")
        if attrs_path is not None:
            for lineno, line in _read_lines(attrs_path):
                key_s, sep, value_s = line.partition("=")
                if not sep:
                    raise CorruptManifest(str(attrs_path), lineno, "expected key=value")
                try:
                    doc.attributes[unescape(key_s)] = unescape(value_s)
                except ValueError as exc:
                    raise CorruptManifest(str(attrs_path), lineno, str(exc)) from exc
        prov_path = self._read_base(f"{DOCS_DIR}/{doc_id}.prov")
        if prov_path is not None:
            for lineno, line in _read_lines(prov_path):
                producer_s, sep, label_s = line.partition("\t")
                if not sep:
                    raise CorruptManifest(str(prov_path), lineno, "expected producer\\tlabel")
                try:
                    doc.provenance.add((unescape(producer_s), unescape(label_s)))
                except ValueError as exc:
                    raise CorruptManifest(str(prov_path), lineno, str(exc)) from exc
        ann_path = self._read_base(f"{DOCS_DIR}/{doc_id}.ann")
        if ann_path is not None:
            for lineno, line in _read_lines(ann_path):
                try:
                    ann = parse_annotation_line(line, len(content))
                except (ValueError, MalformedSpans, SpanOutOfBounds) as exc:
                    raise CorruptManifest(str(ann_path), lineno, str(exc)) from exc
                if ann.id < 1:
                    raise CorruptManifest(str(ann_path), lineno, f"bad id {ann.id}")
                if ann.id in doc.annotations:
                    raise CorruptManifest(str(ann_path), lineno, f"duplicate id {ann.id}")
                doc.annotations[ann.id] = ann
        doc.next_id = max(doc.annotations, default=0) + 1
        meta_path = self._read_base(f"{DOCS_DIR}/{doc_id}.meta")
        if meta_path is not None:
            for lineno, line in _read_lines(meta_path):
                key_s, sep, value_s = line.partition("=")
                if key_s == "next_id" and sep:
                    try:
                        value = int(value_s)
                    except ValueError as exc:
                        raise CorruptManifest(str(meta_path), lineno, str(exc)) from exc
                    if value < doc.next_id:
                        raise CorruptManifest(
                            str(meta_path), lineno, f"next_id {value} not above max annotation id"
                        )
                    doc.next_id = value
                else:
                    raise CorruptManifest(str(meta_path), lineno, "expected next_id=<n>")
        return doc

    # -- persistence --

    def _manifest_bytes(self) -> bytes:
        lines = [MANIFEST_MAGIC, f"name={escape(self.manifest.name)}"]
        lines.extend(f"doc={escape(d)}" for d in self.manifest.doc_ids)
        lines.extend(
            f"attr.{escape(k)}={escape(v)}"
            for k, v in sorted(self.manifest.attributes.items())
        )
        return ("\n".join(lines) + "\n").encode("utf-8")

    def _write_manifest(self):
        self._write_file(MANIFEST_NAME, self._manifest_bytes())

    def _document_files(self, doc: Document) -> dict[str, bytes]:
        """Serialized annotation-side files for one document (not .raw)."""
        attrs = "".join(
            f"{escape(k)}={escape(v)}\n" for k, v in sorted(doc.attributes.items())
        )
        prov = "".join(
            f"{escape(p)}\t{escape(l)}\n" for p, l in sorted(doc.provenance)
        )
        anns = "".join(
            format_annotation_line(doc.annotations[i]) + "\n"
            for i in sorted(doc.annotations)
        )
        meta = f"next_id={doc.next_id}\n"
        return {
            f"{DOCS_DIR}/{doc.doc_id}.attrs": attrs.encode("utf-8"),
            f"{DOCS_DIR}/{doc.doc_id}.prov": prov.encode("utf-8"),
            f"{DOCS_DIR}/{doc.doc_id}.ann": anns.encode("utf-8"),
            f"{DOCS_DIR}/{doc.doc_id}.meta": meta.encode("utf-8"),
        }

    def _flush_document(self, doc: Document):
        with doc.lock:
            if self._read_base(f"{DOCS_DIR}/{doc.doc_id}.raw") is None:
                self._write_file(f"{DOCS_DIR}/{doc.doc_id}.raw", doc.content)
            for relative, data in self._document_files(doc).items():
                self._write_file(relative, data)

    def flush(self):
        """Write manifest and every loaded document durably to disk."""
        with self._lock:
            self._write_manifest()
            for doc in self._docs.values():
                self._flush_document(doc)

    def serialized_state(self) -> dict[str, bytes]:
        """Full deterministic serialization, keyed by path relative to the root.

        Loads every document; used by tests comparing persisted states.
        """
        with self._lock:
            state = {MANIFEST_NAME: self._manifest_bytes()}
            for doc_id in self.manifest.doc_ids:
                doc = self.document(doc_id)
                state[f"{DOCS_DIR}/{doc_id}.raw"] = doc.content
                state.update(self._document_files(doc))
            return state


def _read_lines(path: Path):
    """Yield (lineno, line) pairs, splitting on LF only (values may hold CR)."""
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(str(path), str(exc)) from exc
    if not data:
        return
    lines = data.decode("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    yield from enumerate(lines, start=1)
