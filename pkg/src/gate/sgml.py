"""Inline SGML markup converted to and from standoff annotations.

Supported subset: explicit open/close tags, attributes with double-quoted
values, and the entities &amp; &lt; &gt; in character data (&quot; in
attribute values).  No DTDs, comments, processing instructions, CDATA or
tag minimization.

Import strips tags, decodes entities and keeps every other byte verbatim;
each element becomes one single-span annotation over its character-data
extent, type name lowercased, producer "sgml-import-1.0".  Export re-inlines
selected single-span annotations as uppercase tags; spans must pairwise nest
or stay disjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    MalformedSgml,
    MultiSpanNotRepresentable,
    OverlapNotRepresentable,
)
from .store import Annotation, AnnotationSelector, Collection, Document, Span

SGML_PRODUCER = "sgml-import-1.0"
SGML_RESULT_LABEL = "sgml"

_NAME_START = set(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz")
_NAME_BYTES = _NAME_START | set(b"0123456789._-")
_WS = set(b" \t\r\n")

_CHARDATA_ENTITIES = {b"amp": b"&", b"lt": b"<", b"gt": b">"}


@dataclass
class ImportResult:
    """Stripped text plus one annotation per element, in close-tag order.

    Annotation ids are 0: the store assigns real ids on ingest.
    """

    text: bytes
    annotations: list[Annotation]


def _parse_name(data: bytes, i: int) -> tuple[str, int]:
    if i >= len(data) or data[i] not in _NAME_START:
        raise MalformedSgml(i, "expected a tag or attribute name")
    j = i
    while j < len(data) and data[j] in _NAME_BYTES:
        j += 1
    return data[i:j].decode("ascii"), j


def _skip_ws(data: bytes, i: int) -> int:
    while i < len(data) and data[i] in _WS:
        i += 1
    return i


def _parse_attribute_value(data: bytes, i: int) -> tuple[str, int]:
    # caller consumed the opening quote; &quot; is the only entity decoded here
    out = bytearray()
    while i < len(data):
        b = data[i]
        if b == 0x22:  # closing quote
            try:
                return out.decode("utf-8"), i + 1
            except UnicodeDecodeError as exc:
                raise MalformedSgml(i, f"attribute value is not UTF-8: {exc}") from exc
        if data.startswith(b"&quot;", i):
            out.append(0x22)
            i += 6
            continue
        out.append(b)
        i += 1
    raise MalformedSgml(i, "unterminated attribute value")


def _parse_open_tag(data: bytes, i: int) -> tuple[str, dict[str, str], int]:
    name, i = _parse_name(data, i)
    attributes: dict[str, str] = {}
    while True:
        i = _skip_ws(data, i)
        if i >= len(data):
            raise MalformedSgml(i, f"unterminated tag <{name}")
        if data[i] == 0x3E:  # ">"
            return name, attributes, i + 1
        key, i = _parse_name(data, i)
        i = _skip_ws(data, i)
        if i >= len(data) or data[i] != 0x3D:  # "="
            raise MalformedSgml(i, f"attribute {key!r} needs =\"value\"")
        i = _skip_ws(data, i + 1)
        if i >= len(data) or data[i] != 0x22:  # '"'
            raise MalformedSgml(i, f"attribute {key!r} value must be double-quoted")
        value, i = _parse_attribute_value(data, i + 1)
        if key in attributes:
            raise MalformedSgml(i, f"duplicate attribute {key!r}")
        attributes[key] = value


def sgml_import(data: bytes) -> ImportResult:
    """Convert inline markup to stripped text plus standoff annotations."""

    text = bytearray()
    stack: list[tuple[str, dict[str, str], int, int]] = []  # name, attrs, text pos, byte offset
    annotations: list[Annotation] = []
    i = 0
    n = len(data)
    while i < n:
        b = data[i]
        if b == 0x3C:  # "<"
            tag_at = i
            if i + 1 < n and data[i + 1] == 0x2F:  # "</"
                name, j = _parse_name(data, i + 2)
                j = _skip_ws(data, j)
                if j >= n or data[j] != 0x3E:
                    raise MalformedSgml(tag_at, f"unterminated close tag </{name}")
                if not stack:
                    raise MalformedSgml(tag_at, f"close tag </{name}> with no open element")
                open_name, attrs, start_pos, _ = stack.pop()
                if open_name.lower() != name.lower():
                    raise MalformedSgml(
                        tag_at, f"close tag </{name}> does not match <{open_name}>"
                    )
                annotations.append(
                    Annotation(
                        id=0,
                        type_name=open_name.lower(),
                        spans=(Span(start_pos, len(text)),),
                        attributes=attrs,
                        producer=SGML_PRODUCER,
                    )
                )
                i = j + 1
            else:
                name, attrs, i = _parse_open_tag(data, i + 1)
                stack.append((name, attrs, len(text), tag_at))
        elif b == 0x26:  # "&"
            for entity, replacement in _CHARDATA_ENTITIES.items():
                if data.startswith(b"&" + entity + b";", i):
                    text.extend(replacement)
                    i += len(entity) + 2
                    break
            else:
                raise MalformedSgml(i, "bad entity (only &amp; &lt; &gt; are supported)")
        else:
            text.append(b)
            i += 1
    if stack:
        name, _, _, offset = stack[-1]
        raise MalformedSgml(offset, f"unclosed tag <{name}>")
    return ImportResult(text=bytes(text), annotations=annotations)


def import_into(
    collection: Collection,
    doc_id: str,
    data: bytes,
    attributes: dict[str, str] | None = None,
) -> Document:
    """Import markup as a new document with element annotations attached."""

    result = sgml_import(data)
    doc = collection.add_document(doc_id, result.text, attributes)
    for ann in result.annotations:
        doc.add_annotation(ann.type_name, ann.spans, ann.attributes, SGML_PRODUCER)
    doc.record_result(SGML_PRODUCER, SGML_RESULT_LABEL)
    return doc


def _encode_chardata(data: bytes) -> bytes:
    return data.replace(b"&", b"&amp;").replace(b"<", b"&lt;").replace(b">", b"&gt;")


def _encode_attr_value(value: str) -> bytes:
    return value.encode("utf-8").replace(b'"', b"&quot;")


@dataclass
class _Node:
    ann: Annotation
    children: list["_Node"]


def _build_forest(annotations: list[Annotation]) -> list[_Node]:
    # sort so potential parents precede children: earlier start, then longer,
    # then later id (identical spans: the later-created annotation is the one
    # whose close tag came later on import, i.e. the outer element)
    ordered = sorted(
        annotations, key=lambda a: (a.spans[0].start, -a.spans[0].end, -a.id)
    )
    roots: list[_Node] = []
    stack: list[_Node] = []
    for ann in ordered:
        span = ann.spans[0]
        node = _Node(ann, [])
        while stack and span.start >= stack[-1].ann.spans[0].end:
            stack.pop()
        if stack:
            enclosing = stack[-1].ann.spans[0]
            if span.end > enclosing.end:
                raise OverlapNotRepresentable(stack[-1].ann.id, ann.id)
            stack[-1].children.append(node)
        else:
            roots.append(node)
        stack.append(node)
    return roots


def _emit_tag_open(ann: Annotation, out: bytearray):
    out.extend(b"<" + ann.type_name.upper().encode("utf-8"))
    for key, value in ann.attributes.items():
        out.extend(b" " + key.encode("utf-8") + b'="' + _encode_attr_value(value) + b'"')
    out.extend(b">")


def _emit_node(node: _Node, content: bytes, out: bytearray):
    span = node.ann.spans[0]
    _emit_tag_open(node.ann, out)
    pos = span.start
    for child in node.children:
        child_span = child.ann.spans[0]
        out.extend(_encode_chardata(content[pos : child_span.start]))
        _emit_node(child, content, out)
        pos = child_span.end
    out.extend(_encode_chardata(content[pos : span.end]))
    out.extend(b"</" + node.ann.type_name.upper().encode("utf-8") + b">")


def sgml_export(doc: Document, selector: AnnotationSelector | None = None) -> bytes:
    """Re-inline selected annotations as markup over the document content."""

    annotations = doc.get_annotations(selector)
    for ann in annotations:
        if len(ann.spans) != 1:
            raise MultiSpanNotRepresentable(ann.id)
    roots = _build_forest(annotations)
    content = doc.content
    out = bytearray()
    pos = 0
    for root in roots:
        span = root.ann.spans[0]
        out.extend(_encode_chardata(content[pos : span.start]))
        _emit_node(root, content, out)
        pos = span.end
    out.extend(_encode_chardata(content[pos:]))
    return bytes(out)
