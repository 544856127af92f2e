from __future__ import annotations

import random

import pytest

from gate.errors import (
    BadPattern,
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
from gate.store import (
    Annotation,
    AnnotationSelector,
    AnnotationTypeDeclaration,
    Collection,
    Span,
    escape,
    format_annotation_line,
    parse_annotation_line,
    unescape,
)

from conftest import SARAH
from generators import random_store_ops


# --- escaping and the annotation line codec ---


@pytest.mark.parametrize("value", ["plain", "a=b;c", "tab\there", "nl\nthere", "100%", "café", ""])
def test_escape_round_trip(value):
    assert unescape(escape(value)) == value


def test_escape_covers_reserved_bytes():
    assert escape("%;=\t\n") == "%25%3B%3D%09%0A"


def test_unescape_rejects_unknown_codes():
    with pytest.raises(ValueError):
        unescape("%41")


def test_annotation_line_round_trip():
    ann = Annotation(
        id=7,
        type_name="na;me",
        spans=(Span(0, 2), Span(5, 9)),
        attributes={"k=1": "v;2", "tab": "a\tb"},
        producer="mod-0.1",
    )
    line = format_annotation_line(ann)
    assert "\n" not in line and line.count("\t") == 4
    back = parse_annotation_line(line, 10)
    assert back.id == 7
    assert back.type_name == "na;me"
    assert [(s.start, s.end) for s in back.spans] == [(0, 2), (5, 9)]
    assert back.attributes == ann.attributes
    assert back.producer == "mod-0.1"


def test_annotation_line_empty_attribute_field():
    ann = Annotation(1, "token", (Span(0, 5),), {}, "tokenizer-0.1")
    line = format_annotation_line(ann)
    assert line.endswith("\t")
    assert parse_annotation_line(line, 5).attributes == {}


def test_annotation_type_declaration_defaults():
    decl = AnnotationTypeDeclaration(
        type_name="name", attribute_keys=(("name_type", "string"),), display_color="#8fe3a1"
    )
    assert decl.display_color.startswith("#")
    assert AnnotationTypeDeclaration(type_name="token").attribute_keys == ()


# --- collection lifecycle ---


def test_create_collection_empty(tmp_path):
    coll = Collection.create(tmp_path / "c1", "muc6")
    assert coll.manifest.name == "muc6"
    assert coll.doc_ids == []


def test_create_collection_twice_fails(tmp_path):
    Collection.create(tmp_path / "c1", "muc6")
    with pytest.raises(PathOccupied):
        Collection.create(tmp_path / "c1", "muc6")


def test_create_then_open_round_trip(tmp_path):
    created = Collection.create(tmp_path / "c1", "muc6")
    created.manifest.attributes["lang"] = "en"
    created.flush()
    opened = Collection.open(tmp_path / "c1")
    assert opened.manifest.name == created.manifest.name
    assert opened.manifest.doc_ids == created.manifest.doc_ids
    assert opened.manifest.attributes == created.manifest.attributes


def test_open_missing_path_is_not_a_collection(tmp_path):
    with pytest.raises(NotACollection):
        Collection.open(tmp_path / "nonexistent")


def test_open_after_add_document_lists_it(tmp_path):
    coll = Collection.create(tmp_path / "c1", "muc6")
    coll.add_document("sarah", SARAH)
    reopened = Collection.open(tmp_path / "c1")
    assert reopened.doc_ids == ["sarah"]


def test_corrupt_manifest_reports_line_number(tmp_path):
    coll = Collection.create(tmp_path / "c1", "muc6")
    path = tmp_path / "c1" / "manifest.gate"
    path.write_bytes(path.read_bytes() + b"garbage line\n")
    with pytest.raises(CorruptManifest) as err:
        Collection.open(tmp_path / "c1")
    assert err.value.line == 3
    assert coll.manifest.name == "muc6"


def test_corrupt_magic_line(tmp_path):
    coll_dir = tmp_path / "c1"
    Collection.create(coll_dir, "muc6")
    data = (coll_dir / "manifest.gate").read_bytes()
    (coll_dir / "manifest.gate").write_bytes(b"not-a-manifest\n" + data[len(b"gate-collection 1\n") :])
    with pytest.raises(CorruptManifest) as err:
        Collection.open(coll_dir)
    assert err.value.line == 1


# --- documents ---


def test_add_document_sarah(collection):
    doc = collection.add_document("sarah", SARAH)
    assert len(doc.content) == 23
    assert doc.get_annotations() == []
    assert doc.next_id == 1
    assert doc.provenance == set()


def test_add_empty_document_is_valid(collection):
    doc = collection.add_document("e", b"")
    assert doc.content == b""


def test_duplicate_doc_id(collection):
    collection.add_document("sarah", SARAH)
    with pytest.raises(DuplicateDocId):
        collection.add_document("sarah", b"again")


def test_invalid_doc_ids_rejected(collection):
    for bad in ["", ".", "..", "a/b", "a\\b"]:
        with pytest.raises(BadRequest):
            collection.add_document(bad, b"x")


def test_missing_document(collection):
    with pytest.raises(NoSuchDocument):
        collection.document("ghost")


def test_content_is_8bit_clean(collection):
    payload = bytes(range(256))
    collection.add_document("bytes", payload)
    collection.flush()
    reopened = Collection.open(collection.root)
    assert reopened.document("bytes").content == payload


# --- get_text ---


def test_get_text_slices(sarah_doc):
    assert sarah_doc.get_text(Span(0, 5)) == b"Sarah"
    assert sarah_doc.get_text(Span(0, 0)) == b""
    with pytest.raises(SpanOutOfBounds):
        sarah_doc.get_text(Span(0, 24))


def test_get_text_length_property(sarah_doc):
    rng = random.Random(7)
    for _ in range(100):
        a, b = sorted((rng.randint(0, 23), rng.randint(0, 23)))
        assert len(sarah_doc.get_text(Span(a, b))) == b - a


# --- annotations ---


def test_add_annotation_assigns_sequential_ids(sarah_doc):
    first = sarah_doc.add_annotation("token", [Span(0, 5)], {"pos": "NP"}, "tokenizer-0.1")
    assert first.id == 1
    for span in [Span(6, 13), Span(14, 17), Span(18, 22)]:
        sarah_doc.add_annotation("token", [span], {}, "tokenizer-0.1")
    fifth = sarah_doc.add_annotation("token", [Span(22, 23)], {}, "tokenizer-0.1")
    assert fifth.id == 5
    assert fifth.attributes == {}


def test_add_annotation_rejects_bad_spans(sarah_doc):
    with pytest.raises(MalformedSpans):
        sarah_doc.add_annotation("x", [Span(5, 3)], {}, "m-1")
    with pytest.raises(MalformedSpans):
        sarah_doc.add_annotation("x", [Span(5, 9), Span(7, 12)], {}, "m-1")
    with pytest.raises(MalformedSpans):
        sarah_doc.add_annotation("x", [], {}, "m-1")
    with pytest.raises(SpanOutOfBounds):
        sarah_doc.add_annotation("x", [Span(20, 30)], {}, "m-1")


def test_add_annotation_validates_producer_and_type(sarah_doc):
    with pytest.raises(BadRequest):
        sarah_doc.add_annotation("", [Span(0, 1)], {}, "m-1")
    with pytest.raises(BadRequest):
        sarah_doc.add_annotation("x", [Span(0, 1)], {}, "noversion")


def test_set_attributes_merges(golden_doc):
    updated = golden_doc.set_attributes(1, {"pos": "NNP", "case": "title"})
    assert updated.attributes == {"pos": "NNP", "case": "title"}
    same = golden_doc.set_attributes(1, {})
    assert same.attributes == {"pos": "NNP", "case": "title"}
    with pytest.raises(NoSuchAnnotation):
        golden_doc.set_attributes(99, {"x": "y"})


def test_get_annotations_by_type(golden_doc):
    tokens = golden_doc.get_annotations(AnnotationSelector(type_name="token"))
    assert [a.id for a in tokens] == [1, 2, 3, 4, 5]


def test_get_annotations_overlap(golden_doc):
    hits = golden_doc.get_annotations(AnnotationSelector(overlapping=Span(0, 6)))
    assert [a.id for a in hits] == [1, 6, 7]


def test_get_annotations_overlap_brute_force_oracle(golden_doc):
    probe = Span(0, 6)
    expected = []
    for ann in sorted(golden_doc.annotations.values(), key=lambda a: (a.start, a.id)):
        if any(s.start < probe.end and probe.start < s.end for s in ann.spans):
            expected.append(ann.id)
    got = [a.id for a in golden_doc.get_annotations(AnnotationSelector(overlapping=probe))]
    assert got == expected == [1, 6, 7]


def test_empty_selector_selects_all(golden_doc):
    assert len(golden_doc.get_annotations(AnnotationSelector())) == 7


def test_empty_probe_span_matches_nothing(golden_doc):
    assert golden_doc.get_annotations(AnnotationSelector(overlapping=Span(3, 3))) == []


def test_selector_producer_pattern(golden_doc):
    hits = golden_doc.get_annotations(AnnotationSelector(producer_pattern="tokenizer-*"))
    assert [a.id for a in hits] == [1, 2, 3, 4, 5]
    with pytest.raises(BadPattern):
        golden_doc.get_annotations(AnnotationSelector(producer_pattern="((x"))


def test_selector_algebra_commutes(collection):
    rng = random.Random(99)
    doc = collection.add_document("r", bytes(40))
    for _ in range(60):
        start = rng.randint(0, 39)
        end = rng.randint(start, 40)
        doc.add_annotation(
            rng.choice(["token", "name"]),
            [Span(start, end)],
            {},
            rng.choice(["alpha-0.1", "beta-1.0"]),
        )
    by_type = {
        a.id
        for a in doc.get_annotations(AnnotationSelector(type_name="token"))
        if a.producer == "alpha-0.1"
    }
    by_producer = {
        a.id
        for a in doc.get_annotations(AnnotationSelector(producer_pattern="alpha-*"))
        if a.type_name == "token"
    }
    both = {
        a.id
        for a in doc.get_annotations(
            AnnotationSelector(type_name="token", producer_pattern="alpha-*")
        )
    }
    assert by_type == by_producer == both


def test_delete_annotations(golden_doc):
    assert golden_doc.delete_annotations(AnnotationSelector(type_name="token")) == 5
    assert golden_doc.delete_annotations(AnnotationSelector()) == 2
    assert golden_doc.delete_annotations(AnnotationSelector()) == 0


def test_ids_never_reused_after_delete(golden_doc):
    golden_doc.delete_annotations(AnnotationSelector())
    fresh = golden_doc.add_annotation("token", [Span(0, 1)], {}, "tokenizer-0.1")
    assert fresh.id == 8


def test_delete_retains_provenance(golden_doc):
    golden_doc.record_result("tokenizer-0.1", "tokens")
    golden_doc.delete_annotations(AnnotationSelector(type_name="token"))
    assert golden_doc.has_result("tokenizer-0.1", "tokens")


def test_record_result_is_idempotent(sarah_doc):
    sarah_doc.record_result("brill-0.1", "pos_tags")
    sarah_doc.record_result("brill-0.1", "pos_tags")
    assert sarah_doc.provenance == {("brill-0.1", "pos_tags")}
    sarah_doc.record_result("tokenizer-0.1", "tokens")
    assert sarah_doc.has_result("tokenizer-0.1", "tokens")


def test_provenance_tracks_every_annotation_producer(sarah_doc):
    sarah_doc.add_annotation("token", [Span(0, 5)], {}, "adhoc-9.9")
    producers = {p for p, _ in sarah_doc.provenance}
    assert "adhoc-9.9" in producers
    # recording a real label collapses the unlabelled placeholder
    sarah_doc.record_result("adhoc-9.9", "tokens")
    assert sarah_doc.provenance == {("adhoc-9.9", "tokens")}


# --- persistence ---


def _state(coll: Collection) -> dict[str, bytes]:
    return coll.serialized_state()


def test_flush_open_round_trip(tmp_path, golden_doc, collection):
    golden_doc.record_result("tokenizer-0.1", "tokens")
    collection.manifest.attributes["source"] = "unit"
    collection.flush()
    before = _state(collection)
    reopened = Collection.open(collection.root)
    assert _state(reopened) == before
    doc = reopened.document("sarah")
    assert [a.id for a in doc.get_annotations(AnnotationSelector(type_name="token"))] == [1, 2, 3, 4, 5]
    assert doc.has_result("tokenizer-0.1", "tokens")
    assert doc.next_id == 8


def test_flush_untouched_collection_changes_nothing(collection, golden_doc):
    collection.flush()
    before = _state(collection)
    collection.flush()
    assert _state(collection) == before


def test_flush_failure_raises_io_failure(tmp_path):
    coll = Collection.create(tmp_path / "c", "c")
    coll.add_document("d", b"x")
    # replace the docs directory with a file so writes must fail
    docs = tmp_path / "c" / "docs"
    for child in docs.iterdir():
        child.unlink()
    docs.rmdir()
    docs.write_bytes(b"not a directory")
    with pytest.raises(IoFailure):
        coll.flush()


def test_escaped_values_survive_reopen(collection):
    doc = collection.add_document("d", b"0123456789", {"weird;key": "v=1\t2\n3%"})
    doc.add_annotation("ty;pe", [Span(0, 3)], {"k=": ";v%", "nl": "a\nb"}, "mod-0.1")
    doc.record_result("mod-0.1", "label;with=stuff")
    collection.flush()
    reopened = Collection.open(collection.root)
    rdoc = reopened.document("d")
    assert rdoc.attributes == {"weird;key": "v=1\t2\n3%"}
    ann = rdoc.get_annotations()[0]
    assert ann.type_name == "ty;pe"
    assert ann.attributes == {"k=": ";v%", "nl": "a\nb"}
    assert rdoc.has_result("mod-0.1", "label;with=stuff")


def test_next_id_survives_reopen_after_delete(collection):
    doc = collection.add_document("d", b"abcdef")
    for i in range(3):
        doc.add_annotation("t", [Span(i, i + 1)], {}, "m-1")
    doc.delete_annotations(AnnotationSelector())
    collection.flush()
    reopened = Collection.open(collection.root)
    rdoc = reopened.document("d")
    assert rdoc.add_annotation("t", [Span(0, 1)], {}, "m-1").id == 4


def test_random_sequences_round_trip_queries(tmp_path):
    rng = random.Random(4242)
    for case in range(25):
        coll = Collection.create(tmp_path / f"c{case}", f"c{case}")
        random_store_ops(rng, coll, rng.randint(3, 15))
        coll.flush()
        before = _state(coll)
        reopened = Collection.open(coll.root)
        assert _state(reopened) == before
        for doc_id in coll.doc_ids:
            original = coll.document(doc_id)
            restored = reopened.document(doc_id)
            assert [
                (a.id, a.type_name, a.spans, a.attributes, a.producer)
                for a in original.get_annotations()
            ] == [
                (a.id, a.type_name, a.spans, a.attributes, a.producer)
                for a in restored.get_annotations()
            ]
            assert original.provenance == restored.provenance
            assert original.attributes == restored.attributes


# --- read-only media via overlay ---


def test_overlay_redirects_annotation_writes(tmp_path):
    primary = tmp_path / "primary"
    coll = Collection.create(primary, "archive")
    coll.add_document("d", b"Dog bites man.")
    coll.flush()
    frozen = {p: p.read_bytes() for p in sorted(primary.rglob("*")) if p.is_file()}

    overlay = tmp_path / "overlay"
    overlay.mkdir()
    working = Collection.open(primary, overlay=overlay)
    doc = working.document("d")
    doc.add_annotation("token", [Span(0, 3)], {}, "tokenizer-0.1")
    doc.record_result("tokenizer-0.1", "tokens")
    working.flush()

    # primary files untouched, annotation files landed in the overlay
    assert {p: p.read_bytes() for p in sorted(primary.rglob("*")) if p.is_file()} == frozen
    assert (overlay / "docs" / "d.ann").is_file()

    again = Collection.open(primary, overlay=overlay)
    doc2 = again.document("d")
    assert doc2.content == b"Dog bites man."
    assert len(doc2.get_annotations(AnnotationSelector(type_name="token"))) == 1
    assert doc2.has_result("tokenizer-0.1", "tokens")


def test_overlay_new_documents_live_in_overlay(tmp_path):
    primary = tmp_path / "primary"
    Collection.create(primary, "archive").flush()
    overlay = tmp_path / "overlay"
    overlay.mkdir()
    working = Collection.open(primary, overlay=overlay)
    working.add_document("new", b"fresh bytes")
    working.flush()
    assert (overlay / "docs" / "new.raw").read_bytes() == b"fresh bytes"
    assert not (primary / "docs" / "new.raw").exists()
