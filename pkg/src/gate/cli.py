"""Command-line gateway mirroring the HTTP API 1:1.

Exit status: 0 on success, 1 on a domain error, 2 on usage errors.
``--json`` switches every command to machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import sgml, vie
from .errors import BadRequest, GateError
from .server import (
    ServerConfig,
    Workbench,
    annotation_json,
    error_json,
    module_json,
    run_outcomes_json,
    serve,
    states_payload,
)
from .store import AnnotationSelector, Span, parse_annotation_line


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gate",
        description="Text-engineering workbench: documents, annotations, module pipelines.",
    )
    parser.add_argument(
        "--root",
        default=os.environ.get("GATE_ROOT", "."),
        help="collection root directory (env GATE_ROOT, default .)",
    )
    parser.add_argument(
        "--modules",
        default=os.environ.get("GATE_MODULES"),
        help="module descriptor directory (env GATE_MODULES)",
    )
    parser.add_argument("--resources", default=None, help="resource directory (lexicon.tsv, gazetteer.tsv)")
    parser.add_argument("--timeout", type=float, default=60.0, help="module run timeout in seconds")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collection", help="manage collections")
    csub = p.add_subparsers(dest="subcommand", required=True)
    c = csub.add_parser("create", help="create a collection under the root")
    c.add_argument("name")
    csub.add_parser("list", help="list collections under the root")

    p = sub.add_parser("doc", help="manage documents")
    dsub = p.add_subparsers(dest="subcommand", required=True)
    d = dsub.add_parser("add", help="add a document from a file or stdin")
    _collection_arg(d)
    d.add_argument("--doc", required=True, help="document id")
    d.add_argument("--attr", action="append", default=[], metavar="K=V")
    d.add_argument("file", nargs="?", default="-", help="content file, - for stdin")
    d = dsub.add_parser("list", help="list document ids")
    _collection_arg(d)
    d = dsub.add_parser("text", help="print document content bytes")
    _collection_arg(d)
    d.add_argument("--doc", required=True)
    d.add_argument("--start", type=int)
    d.add_argument("--end", type=int)

    p = sub.add_parser("import-sgml", help="import markup as a document plus annotations")
    _collection_arg(p)
    p.add_argument("--doc", required=True)
    p.add_argument("--attr", action="append", default=[], metavar="K=V")
    p.add_argument("file", nargs="?", default="-")

    p = sub.add_parser("export-sgml", help="export annotations as inline markup")
    _collection_arg(p)
    p.add_argument("--doc", required=True)
    _selector_args(p)
    p.add_argument("-o", "--output", default="-", help="output file, - for stdout")

    p = sub.add_parser("ann", help="query and edit annotations")
    asub = p.add_subparsers(dest="subcommand", required=True)
    a = asub.add_parser("list", help="list annotations matching a selector")
    _collection_arg(a)
    a.add_argument("--doc", required=True)
    _selector_args(a)
    a = asub.add_parser("add", help="add one annotation")
    _collection_arg(a)
    a.add_argument("--doc", required=True)
    a.add_argument("--type", required=True)
    a.add_argument("--span", action="append", required=True, metavar="S:E")
    a.add_argument("--attr", action="append", default=[], metavar="K=V")
    a.add_argument("--producer", required=True)
    a = asub.add_parser("delete", help="delete annotations matching a selector")
    _collection_arg(a)
    a.add_argument("--doc", required=True)
    _selector_args(a)

    sub.add_parser("modules", help="list registered modules")

    p = sub.add_parser("states", help="module states and graph for one document")
    _collection_arg(p)
    p.add_argument("--doc", required=True)

    p = sub.add_parser("run", help="run one module on one document")
    _collection_arg(p)
    p.add_argument("--doc", required=True)
    p.add_argument("module")

    p = sub.add_parser("run-chain", help="run a module chain on one document")
    _collection_arg(p)
    p.add_argument("--doc", required=True)
    p.add_argument("--chain", required=True, help="comma-separated module ids")
    p.add_argument("--start", required=True)

    p = sub.add_parser("run-collection", help="run one module on every document")
    _collection_arg(p)
    p.add_argument("module")

    p = sub.add_parser("score", help="precision/recall/F1 of response vs key annotations")
    _collection_arg(p)
    p.add_argument("--doc", required=True)
    p.add_argument("--response", default="", help="selector, e.g. 'type=token,producer=x-*'")
    p.add_argument("--key", default=None, help="key selector over the same document")
    p.add_argument("--key-file", default=None, help="key annotations in .ann line format")
    p.add_argument("--strict-attrs", action="store_true")

    p = sub.add_parser("serve", help="serve the HTTP gateway")
    p.add_argument("--listen", default="127.0.0.1:8080", metavar="HOST:PORT")
    p.add_argument("--ui", default=None, help="static UI directory served under /ui/")

    return parser


def _collection_arg(parser):
    parser.add_argument(
        "--collection",
        default=None,
        help="collection name (default: the only collection under the root)",
    )


def _selector_args(parser):
    parser.add_argument("--type", default=None)
    parser.add_argument("--producer", default=None)
    parser.add_argument("--start", type=int, default=None)
    parser.add_argument("--end", type=int, default=None)


def _selector_from_args(args) -> AnnotationSelector:
    if (args.start is None) != (args.end is None):
        raise BadRequest("--start and --end must be given together")
    overlapping = Span(args.start, args.end) if args.start is not None else None
    return AnnotationSelector(
        type_name=args.type, producer_pattern=args.producer, overlapping=overlapping
    )


def _selector_from_expr(expr: str) -> AnnotationSelector:
    sel = AnnotationSelector()
    span = {}
    for part in filter(None, (p.strip() for p in expr.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise BadRequest(f"selector part {part!r} is not key=value")
        if key == "type":
            sel.type_name = value
        elif key == "producer":
            sel.producer_pattern = value
        elif key in ("start", "end"):
            span[key] = int(value)
        else:
            raise BadRequest(f"unknown selector key {key!r}")
    if span:
        if len(span) != 2:
            raise BadRequest("selector start and end must be given together")
        sel.overlapping = Span(span["start"], span["end"])
    return sel


def _attrs_from_args(pairs: list[str]) -> dict[str, str]:
    attributes = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise BadRequest(f"--attr {pair!r} is not K=V")
        attributes[key] = value
    return attributes


def _read_input(spec: str) -> bytes:
    if spec == "-":
        return sys.stdin.buffer.read()
    return Path(spec).read_bytes()


def _workbench(args) -> Workbench:
    config = ServerConfig(
        root=Path(args.root),
        module_dir=Path(args.modules) if args.modules else None,
        resource_dir=Path(args.resources) if args.resources else None,
        run_timeout=args.timeout,
    )
    return Workbench(config)


def _collection(workbench: Workbench, args):
    if args.collection:
        return workbench.collection(args.collection)
    names = workbench.list_collections()
    if len(names) != 1:
        raise BadRequest(
            "--collection is required when the root does not hold exactly one collection"
        )
    return workbench.collection(names[0])


def _emit(args, payload, human: str | None = None):
    if args.json:
        print(json.dumps(payload))
    elif human is not None:
        if human:
            print(human)
    else:
        print(json.dumps(payload, indent=2))


def _human_annotations(annotations) -> str:
    lines = []
    for a in annotations:
        spans = ",".join(f"{s.start}:{s.end}" for s in a.spans)
        attrs = ";".join(f"{k}={v}" for k, v in sorted(a.attributes.items()))
        lines.append(f"{a.id}\t{a.type_name}\t{spans}\t{a.producer}\t{attrs}")
    return "\n".join(lines)


def run_command(args) -> int:
    workbench = _workbench(args)

    if args.command == "collection" and args.subcommand == "create":
        workbench.create_collection(args.name)
        _emit(args, {"name": args.name}, f"created collection {args.name}")
        return 0

    if args.command == "collection" and args.subcommand == "list":
        names = workbench.list_collections()
        _emit(args, names, "\n".join(names))
    elif args.command == "doc" and args.subcommand == "add":
        coll = _collection(workbench, args)
        doc = coll.add_document(args.doc, _read_input(args.file), _attrs_from_args(args.attr))
        coll.flush()
        _emit(
            args,
            {"doc_id": doc.doc_id, "bytes": len(doc.content), "annotations": 0},
            f"added {doc.doc_id} ({len(doc.content)} bytes)",
        )
    elif args.command == "doc" and args.subcommand == "list":
        coll = _collection(workbench, args)
        _emit(args, coll.doc_ids, "\n".join(coll.doc_ids))
    elif args.command == "doc" and args.subcommand == "text":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        if (args.start is None) != (args.end is None):
            raise BadRequest("--start and --end must be given together")
        data = doc.get_text(Span(args.start, args.end)) if args.start is not None else doc.content
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    elif args.command == "import-sgml":
        coll = _collection(workbench, args)
        doc = sgml.import_into(coll, args.doc, _read_input(args.file), _attrs_from_args(args.attr))
        coll.flush()
        _emit(
            args,
            {"doc_id": doc.doc_id, "bytes": len(doc.content), "annotations": len(doc.annotations)},
            f"imported {doc.doc_id}: {len(doc.content)} bytes, {len(doc.annotations)} annotations",
        )
    elif args.command == "export-sgml":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        data = sgml.sgml_export(doc, _selector_from_args(args))
        if args.output == "-":
            sys.stdout.buffer.write(data)
            sys.stdout.buffer.flush()
        else:
            Path(args.output).write_bytes(data)
    elif args.command == "ann" and args.subcommand == "list":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        annotations = doc.get_annotations(_selector_from_args(args))
        _emit(args, [annotation_json(a) for a in annotations], _human_annotations(annotations))
    elif args.command == "ann" and args.subcommand == "add":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        spans = []
        for raw in args.span:
            start_s, sep, end_s = raw.partition(":")
            if not sep:
                raise BadRequest(f"--span {raw!r} is not S:E")
            spans.append(Span(int(start_s), int(end_s)))
        ann = doc.add_annotation(args.type, spans, _attrs_from_args(args.attr), args.producer)
        coll.flush()
        _emit(args, annotation_json(ann), f"added annotation {ann.id}")
    elif args.command == "ann" and args.subcommand == "delete":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        count = doc.delete_annotations(_selector_from_args(args))
        coll.flush()
        _emit(args, {"deleted": count}, f"deleted {count}")
    elif args.command == "modules":
        modules = [module_json(d) for d in workbench.registry.descriptors()]
        _emit(
            args,
            modules,
            "\n".join(f"{m['id']}\t{m['coupling']}\tresults={','.join(m['results'])}" for m in modules),
        )
    elif args.command == "states":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        payload = states_payload(workbench, doc)
        human = "\n".join(f"{pid}\t{state}" for pid, state in payload["states"].items())
        _emit(args, payload, human)
    elif args.command == "run":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        result = workbench.engine.run_module(doc, args.module)
        coll.flush()
        _emit(
            args,
            result.to_json(),
            f"{result.module} on {result.doc_id}: +{result.annotations_added} annotations, "
            f"{result.attributes_set} attributes, labels {','.join(result.labels_recorded)}",
        )
    elif args.command == "run-chain":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        chain = [p for p in args.chain.split(",") if p]
        results, error = workbench.engine.run_chain(doc, chain, args.start)
        coll.flush()
        payload = [r.to_json() for r in results]
        if error is not None:
            _emit(args, {"results": payload, **error_json(error)}, None)
            print(f"error: {error.message}", file=sys.stderr)
            return 1
        _emit(args, payload, "\n".join(f"{r.module}: +{r.annotations_added}" for r in results))
    elif args.command == "run-collection":
        coll = _collection(workbench, args)
        outcomes = workbench.engine.run_collection(coll, args.module)
        coll.flush()
        payload = run_outcomes_json(outcomes)
        human = "\n".join(
            f"{o['doc_id']}\t{'ok' if o['ok'] else 'error: ' + o['error']['code']}" for o in payload
        )
        _emit(args, payload, human)
    elif args.command == "score":
        coll = _collection(workbench, args)
        doc = coll.document(args.doc)
        response = doc.get_annotations(_selector_from_expr(args.response))
        if args.key_file is not None:
            key = []
            for line in Path(args.key_file).read_text(encoding="utf-8").split("\n"):
                if line:
                    key.append(parse_annotation_line(line, len(doc.content)))
        elif args.key is not None:
            key = doc.get_annotations(_selector_from_expr(args.key))
        else:
            raise BadRequest("score needs --key or --key-file")
        report = vie.score_annotations(response, key, args.strict_attrs)
        _emit(
            args,
            report.to_json(),
            f"matches={report.matches} response={report.response_size} key={report.key_size}\n"
            f"precision={float(report.precision):.6g} recall={float(report.recall):.6g} "
            f"f1={float(report.f1):.6g}",
        )
    elif args.command == "serve":
        host, _, port_s = args.listen.rpartition(":")
        if not host or not port_s.isdigit():
            raise BadRequest(f"--listen {args.listen!r} is not HOST:PORT")
        config = ServerConfig(
            root=Path(args.root),
            host=host,
            port=int(port_s),
            module_dir=Path(args.modules) if args.modules else None,
            resource_dir=Path(args.resources) if args.resources else None,
            run_timeout=args.timeout,
            ui_dir=Path(args.ui) if args.ui else None,
        )
        serve(config)
    else:  # pragma: no cover - argparse enforces the command set
        raise BadRequest(f"unknown command {args.command}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run_command(args)
    except GateError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
