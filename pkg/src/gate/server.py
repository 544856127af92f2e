"""HTTP gateway: collections, documents, annotations, modules, runs,
SGML I/O and scoring over a small threaded JSON API.

Every domain error maps to exactly one (status, code) pair via
:data:`ERROR_STATUS`; 500 is reserved for unexpected failures.  Document
mutation serializes through the store's per-document locks, so concurrent
requests against different documents proceed in parallel while runs on one
document queue.  Mutating requests flush the collection before replying.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlsplit

from . import sgml, vie
from .engine import Engine, ModuleDescriptor, Registry, load_descriptor_dir
from .errors import BadRequest, GateError, IoFailure, NoSuchCollection, NotFound
from .store import AnnotationSelector, Collection, Span

logger = logging.getLogger(__name__)

LEXICON_FILE = "lexicon.tsv"
GAZETTEER_FILE = "gazetteer.tsv"

ERROR_STATUS = {
    "PATH_OCCUPIED": 409,
    "NOT_A_COLLECTION": 404,
    "CORRUPT_MANIFEST": 422,
    "NO_SUCH_COLLECTION": 404,
    "DUPLICATE_DOC_ID": 409,
    "NO_SUCH_DOC": 404,
    "SPAN_OUT_OF_BOUNDS": 400,
    "MALFORMED_SPANS": 400,
    "NO_SUCH_ANNOTATION": 404,
    "BAD_PATTERN": 400,
    "IO_FAILURE": 500,
    "INVALID_RESOURCE": 400,
    "DUPLICATE_MODULE": 409,
    "NO_SUCH_MODULE": 404,
    "PRECONDITION_UNSATISFIED": 409,
    "MODULE_FAILED": 502,
    "INVALID_CHAIN": 400,
    "AMBIGUOUS_PREREQUISITE": 409,
    "MALFORMED_SGML": 400,
    "OVERLAP_NOT_REPRESENTABLE": 409,
    "MULTI_SPAN_NOT_REPRESENTABLE": 409,
    "BAD_REQUEST": 400,
    "NOT_FOUND": 404,
    "GATE_ERROR": 400,
}


@dataclass
class ServerConfig:
    root: Path
    host: str = "127.0.0.1"
    port: int = 8080
    module_dir: Path | None = None
    resource_dir: Path | None = None
    run_timeout: float = 60.0
    ui_dir: Path | None = None

    def validate(self):
        for label, path in (
            ("collection root", self.root),
            ("module descriptor directory", self.module_dir),
            ("resource directory", self.resource_dir),
            ("ui directory", self.ui_dir),
        ):
            if path is not None and not Path(path).is_dir():
                raise IoFailure(str(path), f"{label} does not exist")


class Workbench:
    """Shared runtime for the HTTP service and the CLI: one collection root
    plus the module registry and engine."""

    def __init__(self, config: ServerConfig):
        config.validate()
        self.config = config
        self.root = Path(config.root)
        self.registry = Registry()
        lexicon = gazetteer = None
        if config.resource_dir is not None:
            lexicon_path = Path(config.resource_dir) / LEXICON_FILE
            gazetteer_path = Path(config.resource_dir) / GAZETTEER_FILE
            if lexicon_path.is_file():
                lexicon = vie.load_lexicon(lexicon_path)
            if gazetteer_path.is_file():
                gazetteer = vie.load_gazetteer(gazetteer_path)
            vie.register_builtin_modules(self.registry, lexicon, gazetteer)
            vie.register_resource_modules(
                self.registry,
                lexicon_path if lexicon_path.is_file() else None,
                gazetteer_path if gazetteer_path.is_file() else None,
            )
        else:
            vie.register_builtin_modules(self.registry)
        if config.module_dir is not None:
            load_descriptor_dir(self.registry, Path(config.module_dir))
        self.engine = Engine(self.registry, run_timeout=config.run_timeout)
        self._collections: dict[str, Collection] = {}
        self._lock = threading.Lock()

    def _check_name(self, name: str):
        if not name or name in (".", "..") or any(c in name for c in "/\\\0"):
            raise BadRequest(f"invalid collection name {name!r}")

    def create_collection(self, name: str) -> Collection:
        self._check_name(name)
        with self._lock:
            coll = Collection.create(self.root / name, name)
            self._collections[name] = coll
            return coll

    def collection(self, name: str) -> Collection:
        self._check_name(name)
        with self._lock:
            if name not in self._collections:
                path = self.root / name
                if not path.is_dir():
                    raise NoSuchCollection(f"no collection {name!r} under {self.root}")
                self._collections[name] = Collection.open(path)
            return self._collections[name]

    def list_collections(self) -> list[str]:
        names = []
        for child in sorted(self.root.iterdir()):
            if child.is_dir() and (child / "manifest.gate").is_file():
                names.append(child.name)
        return names


# --- JSON projections ---


def annotation_json(ann) -> dict:
    return {
        "id": ann.id,
        "type": ann.type_name,
        "spans": [[s.start, s.end] for s in ann.spans],
        "attributes": dict(ann.attributes),
        "producer": ann.producer,
    }


def module_json(desc: ModuleDescriptor) -> dict:
    return {
        "id": desc.producer_id,
        "name": desc.name,
        "version": desc.version,
        "preconditions": [p.source for p in desc.preconditions],
        "results": list(desc.results),
        "coupling": desc.coupling,
        "viewer_hint": (
            {"type": desc.viewer_hint.type_name, "color": desc.viewer_hint.color}
            if desc.viewer_hint
            else None
        ),
    }


def error_json(exc: GateError) -> dict:
    return {"error": {"code": exc.code, "message": exc.message, "detail": exc.detail}}


def selector_from_params(params: dict[str, list[str]]) -> AnnotationSelector:
    sel = AnnotationSelector()
    if "type" in params:
        sel.type_name = params["type"][0]
    if "producer" in params:
        sel.producer_pattern = params["producer"][0]
    if ("start" in params) != ("end" in params):
        raise BadRequest("start and end must be given together")
    if "start" in params:
        try:
            sel.overlapping = Span(int(params["start"][0]), int(params["end"][0]))
        except ValueError as exc:
            raise BadRequest(f"bad span bounds: {exc}") from exc
    return sel


def selector_from_json(payload) -> AnnotationSelector:
    if payload is None:
        return AnnotationSelector()
    if not isinstance(payload, dict):
        raise BadRequest("selector must be an object")
    sel = AnnotationSelector()
    if payload.get("type") is not None:
        sel.type_name = str(payload["type"])
    if payload.get("producer") is not None:
        sel.producer_pattern = str(payload["producer"])
    if (payload.get("start") is not None) != (payload.get("end") is not None):
        raise BadRequest("start and end must be given together")
    if payload.get("start") is not None:
        try:
            sel.overlapping = Span(int(payload["start"]), int(payload["end"]))
        except (TypeError, ValueError) as exc:
            raise BadRequest(f"bad span bounds: {exc}") from exc
    return sel


def states_payload(workbench: Workbench, doc) -> dict:
    engine = workbench.engine
    states = engine.states(doc)
    graph = engine.build_graph()
    modules = []
    for desc in workbench.registry.descriptors():
        entry = module_json(desc)
        entry["state"] = states[desc.producer_id]
        if entry["state"] == "amber":
            entry["unmet"] = [
                {"pattern": pattern.source, "candidates": candidates}
                for pattern, candidates in engine.resolve_prerequisites(
                    doc, desc.producer_id
                )
            ]
        else:
            entry["unmet"] = []
        modules.append(entry)
    return {
        "doc_id": doc.doc_id,
        "states": states,
        "edges": [[a, b] for a, b in graph.edges],
        "modules": modules,
    }


def run_outcomes_json(outcomes: list[dict]) -> list[dict]:
    entries = []
    for outcome in outcomes:
        entry = {"doc_id": outcome["doc_id"], "ok": outcome["ok"]}
        if outcome["ok"]:
            entry["result"] = outcome["result"].to_json()
        else:
            exc = outcome["error"]
            if isinstance(exc, GateError):
                entry.update(error_json(exc))
            else:
                entry["error"] = {"code": "GATE_ERROR", "message": str(exc), "detail": None}
        entries.append(entry)
    return entries


# --- request handling ---


class _Routes:
    def __init__(self):
        self.table: list[tuple[str, re.Pattern, object]] = []

    def add(self, method: str, pattern: str, fn):
        self.table.append((method, re.compile(f"^{pattern}$"), fn))

    def dispatch(self, handler, method: str, path: str):
        for m, regex, fn in self.table:
            if m != method:
                continue
            match = regex.match(path)
            if match:
                return fn(handler, *[unquote(g) if g is not None else None for g in match.groups()])
        raise NotFound(f"no route for {method} {path}")


ROUTES = _Routes()


def route(method: str, pattern: str):
    def decorate(fn):
        ROUTES.add(method, pattern, fn)
        return fn

    return decorate


class GateRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    workbench: Workbench = None  # injected by make_server

    # -- plumbing --

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _split(self):
        parts = urlsplit(self.path)
        self._query = parse_qs(parts.query, keep_blank_values=True)
        return parts.path

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _json_body(self):
        body = self._body()
        if not body:
            return {}
        try:
            return json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadRequest(f"request body is not valid JSON: {exc}") from exc

    def send_json(self, payload, status: int = 200):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def send_bytes(self, data: bytes, content_type: str = "application/octet-stream"):
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _handle(self, method: str):
        try:
            path = self._split()
            ROUTES.dispatch(self, method, path)
        except GateError as exc:
            status = ERROR_STATUS.get(exc.code, 400)
            self.send_json(error_json(exc), status=status)
        except Exception as exc:  # pragma: no cover - unexpected
            logger.exception("unhandled error")
            self.send_json(
                {"error": {"code": "INTERNAL", "message": str(exc), "detail": None}},
                status=500,
            )

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")

    def do_DELETE(self):
        self._handle("DELETE")

    # -- helpers --

    def _collection(self, name: str) -> Collection:
        return self.workbench.collection(name)

    def _document(self, coll_name: str, doc_id: str):
        coll = self._collection(coll_name)
        return coll, coll.document(doc_id)


# -- routes --


@route("GET", "/")
def handle_root(h: GateRequestHandler):
    h.send_json({"service": "gate", "ui": "/ui/", "modules": "/modules"})


@route("GET", "/collections")
def handle_list_collections(h: GateRequestHandler):
    h.send_json(h.workbench.list_collections())


@route("POST", "/collections")
def handle_create_collection(h: GateRequestHandler):
    payload = h._json_body()
    name = payload.get("name")
    if not isinstance(name, str):
        raise BadRequest("body must be {\"name\": <string>}")
    h.workbench.create_collection(name)
    h.send_json({"name": name, "documents": []}, status=201)


@route("GET", "/collections/([^/]+)/documents")
def handle_list_documents(h: GateRequestHandler, coll_name: str):
    h.send_json(h._collection(coll_name).doc_ids)


@route("POST", "/collections/([^/]+)/documents")
def handle_add_document(h: GateRequestHandler, coll_name: str):
    coll = h._collection(coll_name)
    params = h._query
    doc_id = params.get("id", [None])[0]
    if not doc_id:
        raise BadRequest("query parameter id=<doc_id> is required")
    attributes = {
        key[5:]: values[0] for key, values in params.items() if key.startswith("attr.")
    }
    body = h._body()
    if params.get("format", [None])[0] == "sgml":
        doc = sgml.import_into(coll, doc_id, body, attributes)
    else:
        doc = coll.add_document(doc_id, body, attributes)
    coll.flush()
    h.send_json(
        {"doc_id": doc.doc_id, "bytes": len(doc.content), "annotations": len(doc.annotations)},
        status=201,
    )


@route("GET", "/collections/([^/]+)/documents/([^/]+)/text")
def handle_text(h: GateRequestHandler, coll_name: str, doc_id: str):
    _, doc = h._document(coll_name, doc_id)
    params = h._query
    if ("start" in params) != ("end" in params):
        raise BadRequest("start and end must be given together")
    if "start" in params:
        try:
            span = Span(int(params["start"][0]), int(params["end"][0]))
        except ValueError as exc:
            raise BadRequest(f"bad span bounds: {exc}") from exc
        h.send_bytes(doc.get_text(span))
    else:
        h.send_bytes(doc.content)


@route("GET", "/collections/([^/]+)/documents/([^/]+)/annotations")
def handle_list_annotations(h: GateRequestHandler, coll_name: str, doc_id: str):
    _, doc = h._document(coll_name, doc_id)
    selector = selector_from_params(h._query)
    h.send_json([annotation_json(a) for a in doc.get_annotations(selector)])


@route("POST", "/collections/([^/]+)/documents/([^/]+)/annotations")
def handle_add_annotation(h: GateRequestHandler, coll_name: str, doc_id: str):
    coll, doc = h._document(coll_name, doc_id)
    payload = h._json_body()
    try:
        spans = [Span(int(s), int(e)) for s, e in payload.get("spans", [])]
    except (TypeError, ValueError) as exc:
        raise BadRequest(f"spans must be [[start, end], ...]: {exc}") from exc
    attributes = payload.get("attributes") or {}
    if not isinstance(attributes, dict):
        raise BadRequest("attributes must be an object")
    ann = doc.add_annotation(
        str(payload.get("type", "")),
        spans,
        {str(k): str(v) for k, v in attributes.items()},
        str(payload.get("producer", "")),
    )
    coll.flush()
    h.send_json(annotation_json(ann), status=201)


@route("DELETE", "/collections/([^/]+)/documents/([^/]+)/annotations")
def handle_delete_annotations(h: GateRequestHandler, coll_name: str, doc_id: str):
    coll, doc = h._document(coll_name, doc_id)
    selector = selector_from_params(h._query)
    count = doc.delete_annotations(selector)
    coll.flush()
    h.send_json({"deleted": count})


@route("GET", "/modules")
def handle_modules(h: GateRequestHandler):
    h.send_json([module_json(d) for d in h.workbench.registry.descriptors()])


@route("GET", "/collections/([^/]+)/documents/([^/]+)/states")
def handle_states(h: GateRequestHandler, coll_name: str, doc_id: str):
    _, doc = h._document(coll_name, doc_id)
    h.send_json(states_payload(h.workbench, doc))


@route("POST", "/collections/([^/]+)/documents/([^/]+)/run/([^/]+)")
def handle_run(h: GateRequestHandler, coll_name: str, doc_id: str, module: str):
    coll, doc = h._document(coll_name, doc_id)
    result = h.workbench.engine.run_module(doc, module)
    coll.flush()
    h.send_json(result.to_json())


@route("POST", "/collections/([^/]+)/documents/([^/]+)/run-chain")
def handle_run_chain(h: GateRequestHandler, coll_name: str, doc_id: str):
    coll, doc = h._document(coll_name, doc_id)
    payload = h._json_body()
    chain = payload.get("chain")
    start = payload.get("start")
    if not isinstance(chain, list) or not all(isinstance(x, str) for x in chain):
        raise BadRequest("body must carry chain: [<module>, ...]")
    if not isinstance(start, str):
        raise BadRequest("body must carry start: <module>")
    try:
        results, error = h.workbench.engine.run_chain(doc, chain, start)
    finally:
        coll.flush()
    if error is not None:
        payload = error_json(error)
        payload["results"] = [r.to_json() for r in results]
        h.send_json(payload, status=ERROR_STATUS.get(error.code, 400))
    else:
        h.send_json([r.to_json() for r in results])


@route("POST", "/collections/([^/]+)/run/([^/]+)")
def handle_run_collection(h: GateRequestHandler, coll_name: str, module: str):
    coll = h._collection(coll_name)
    outcomes = h.workbench.engine.run_collection(coll, module)
    coll.flush()
    h.send_json(run_outcomes_json(outcomes))


@route("GET", "/collections/([^/]+)/documents/([^/]+)/export/sgml")
def handle_export_sgml(h: GateRequestHandler, coll_name: str, doc_id: str):
    _, doc = h._document(coll_name, doc_id)
    selector = selector_from_params(h._query)
    h.send_bytes(sgml.sgml_export(doc, selector), content_type="application/sgml")


@route("POST", "/collections/([^/]+)/documents/([^/]+)/score")
def handle_score(h: GateRequestHandler, coll_name: str, doc_id: str):
    _, doc = h._document(coll_name, doc_id)
    payload = h._json_body()
    report = vie.score(
        doc,
        selector_from_json(payload.get("response")),
        selector_from_json(payload.get("key")),
        bool(payload.get("strict_attrs", False)),
    )
    h.send_json(report.to_json())


@route("GET", "/ui(/.*)?")
def handle_ui(h: GateRequestHandler, rest: str | None):
    ui_dir = h.workbench.config.ui_dir
    if ui_dir is None:
        raise NotFound("no ui directory configured")
    rest = (rest or "/").lstrip("/") or "index.html"
    target = (Path(ui_dir) / rest).resolve()
    if not target.is_relative_to(Path(ui_dir).resolve()) or not target.is_file():
        raise NotFound(f"no ui file {rest!r}")
    content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
    h.send_bytes(target.read_bytes(), content_type=content_type)


def make_server(config: ServerConfig, workbench: Workbench | None = None) -> ThreadingHTTPServer:
    workbench = workbench or Workbench(config)
    handler = type("BoundHandler", (GateRequestHandler,), {"workbench": workbench})
    server = ThreadingHTTPServer((config.host, config.port), handler)
    server.daemon_threads = True
    return server


def serve(config: ServerConfig):
    """Run the gateway until interrupted."""
    server = make_server(config)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}/", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
