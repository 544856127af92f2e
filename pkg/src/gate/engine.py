"""Module registry and pipeline engine.

Modules register a descriptor (name, version, preconditions, result labels,
coupling, optional viewer hint); the engine computes per-document states,
builds the dependency graph and executes modules.

States per (module, document):
  green  ready to run, results not yet present
  amber  some precondition has no matching provenance entry
  red    every declared result label already recorded under this producer id

Tight modules run in-process through a :class:`RunContext`; loose modules
run as child processes over the line protocol in :data:`LOOSE_PROTOCOL_DOC`.
Data modules (grammars, lexica, gazetteers) load and validate a resource
file when run.
"""

from __future__ import annotations

import os
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AmbiguousPrerequisite,
    BadPattern,
    DuplicateModule,
    GateError,
    InvalidChain,
    ModuleFailed,
    NoSuchModule,
    PreconditionUnsatisfied,
)
from .patterns import PreconditionPattern, literal_producer_pattern
from .store import (
    Annotation,
    AnnotationSelector,
    Collection,
    Document,
    format_annotation_line,
    parse_annotation_line,
    unescape,
)

GREEN = "green"
AMBER = "amber"
RED = "red"

TIGHT = "tight"
LOOSE = "loose"
DATA = "data"

LOOSE_PROTOCOL_DOC = """\
argv:   <exec> --raw <path-to-.raw-file>     (env GATE_DOC_ID = document id)
stdin:  "gate-ann 1 <doc byte length>" header, then current annotations,
        one per line in the .ann line format
stdout: new annotations in the .ann line format with id 0 (the store
        assigns ids; the producer field is replaced by the module's id), or
        "@attr <id>\\t<k>=<v>[;...]" to set attributes on an existing one
exit:   0 = success, anything else = failure; stderr is captured as the log
"""

_FORBIDDEN_NAME_CHARS = set("()|*\t\n ")


@dataclass(frozen=True)
class ViewerHint:
    """Annotation type plus display color for result viewers."""

    type_name: str
    color: str


@dataclass
class ModuleDescriptor:
    name: str
    version: str
    preconditions: list[PreconditionPattern] = field(default_factory=list)
    results: list[str] = field(default_factory=list)
    coupling: str = TIGHT
    exec_path: Path | None = None
    data_path: Path | None = None
    viewer_hint: ViewerHint | None = None

    @property
    def producer_id(self) -> str:
        return f"{self.name}-{self.version}"


@dataclass
class RunResult:
    module: str
    doc_id: str
    annotations_added: int
    attributes_set: int
    labels_recorded: list[str]
    duration_ms: int
    log: str

    def to_json(self) -> dict:
        return {
            "module": self.module,
            "doc_id": self.doc_id,
            "annotations_added": self.annotations_added,
            "attributes_set": self.attributes_set,
            "labels_recorded": self.labels_recorded,
            "duration_ms": self.duration_ms,
            "log": self.log,
        }


@dataclass
class ModuleGraph:
    nodes: list[str]
    edges: list[tuple[str, str]]


class RunContext:
    """Write handle passed to tight modules; stamps and counts every write."""

    def __init__(self, doc: Document, producer: str):
        self.doc = doc
        self.producer = producer
        self.annotations_added = 0
        self.attributes_set = 0
        self._log: list[str] = []

    @property
    def content(self) -> bytes:
        return self.doc.content

    def annotations(self, selector: AnnotationSelector | None = None) -> list[Annotation]:
        return self.doc.get_annotations(selector)

    def text(self, span) -> bytes:
        return self.doc.get_text(span)

    def add_annotation(self, type_name, spans, attributes=None) -> Annotation:
        ann = self.doc.add_annotation(type_name, spans, attributes, self.producer)
        self.annotations_added += 1
        return ann

    def set_attributes(self, ann_id: int, attributes: dict[str, str]) -> Annotation:
        ann = self.doc.set_attributes(ann_id, attributes)
        self.attributes_set += len(attributes)
        return ann

    def log(self, message: str):
        self._log.append(message)

    @property
    def log_text(self) -> str:
        return "".join(line + "\n" for line in self._log)


class Registry:
    """Registered modules in registration order, keyed by producer id."""

    def __init__(self):
        self._modules: dict[str, ModuleDescriptor] = {}
        self._runners: dict[str, object] = {}

    def register(self, descriptor: ModuleDescriptor, runner=None):
        if not descriptor.name or not descriptor.version:
            raise BadPattern(descriptor.producer_id, "empty module name or version")
        for ch in descriptor.name + descriptor.version:
            if ch in _FORBIDDEN_NAME_CHARS or ch.isspace():
                raise BadPattern(descriptor.producer_id, f"bad character {ch!r} in module name")
        pid = descriptor.producer_id
        if pid in self._modules:
            raise DuplicateModule(f"module {pid} already registered")
        if not descriptor.results:
            raise BadPattern(pid, "module declares no result labels")
        if descriptor.coupling in (TIGHT, DATA) and runner is None:
            raise BadPattern(pid, f"{descriptor.coupling} module needs an in-process runner")
        if descriptor.coupling == LOOSE and descriptor.exec_path is None:
            raise BadPattern(pid, "loose module needs an executable path")
        self._modules[pid] = descriptor
        if runner is not None:
            self._runners[pid] = runner

    def get(self, producer_id: str) -> ModuleDescriptor:
        if producer_id not in self._modules:
            raise NoSuchModule(f"no module {producer_id!r} registered")
        return self._modules[producer_id]

    def runner(self, producer_id: str):
        return self._runners.get(producer_id)

    def descriptors(self) -> list[ModuleDescriptor]:
        return list(self._modules.values())

    def producer_ids(self) -> list[str]:
        return list(self._modules)

    def __contains__(self, producer_id: str) -> bool:
        return producer_id in self._modules


class Engine:
    """Evaluates module states and runs modules over store documents."""

    def __init__(self, registry: Registry, run_timeout: float | None = 60.0):
        self.registry = registry
        self.run_timeout = run_timeout

    # -- states --

    def unmet_preconditions(self, doc: Document, producer_id: str) -> list[PreconditionPattern]:
        desc = self.registry.get(producer_id)
        unmet = []
        for pattern in desc.preconditions:
            if not any(pattern.matches(p, l) for p, l in doc.provenance):
                unmet.append(pattern)
        return unmet

    def module_state(self, doc: Document, producer_id: str) -> str:
        desc = self.registry.get(producer_id)
        if all(doc.has_result(producer_id, label) for label in desc.results):
            return RED
        if self.unmet_preconditions(doc, producer_id):
            return AMBER
        return GREEN

    def states(self, doc: Document) -> dict[str, str]:
        return {pid: self.module_state(doc, pid) for pid in self.registry.producer_ids()}

    # -- graph --

    def build_graph(self) -> ModuleGraph:
        descriptors = self.registry.descriptors()
        nodes = [d.producer_id for d in descriptors]
        edges = []
        for a in descriptors:
            for b in descriptors:
                if any(
                    p.matches(a.producer_id, r)
                    for r in a.results
                    for p in b.preconditions
                ):
                    edges.append((a.producer_id, b.producer_id))
        return ModuleGraph(nodes=nodes, edges=edges)

    def resolve_prerequisites(
        self, doc: Document, producer_id: str
    ) -> list[tuple[PreconditionPattern, list[str]]]:
        """Per unmet precondition, the registered modules able to satisfy it."""
        resolution = []
        for pattern in self.unmet_preconditions(doc, producer_id):
            candidates = [
                d.producer_id
                for d in self.registry.descriptors()
                if any(pattern.matches(d.producer_id, r) for r in d.results)
            ]
            resolution.append((pattern, candidates))
        return resolution

    # -- execution --

    def run_module(self, doc: Document, producer_id: str) -> RunResult:
        desc = self.registry.get(producer_id)
        with doc.lock:
            unmet = self.unmet_preconditions(doc, producer_id)
            state = self.module_state(doc, producer_id)
            if state == AMBER:
                raise PreconditionUnsatisfied(producer_id, [p.source for p in unmet])
            if state == RED:
                # re-run: drop previous results so they are not duplicated
                doc.delete_annotations(
                    AnnotationSelector(producer_pattern=literal_producer_pattern(producer_id))
                )
                for label in desc.results:
                    doc.clear_result(producer_id, label)
            started = time.monotonic()
            ctx = RunContext(doc, producer_id)
            if desc.coupling == LOOSE:
                self._run_loose(desc, doc, ctx)
            else:
                runner = self.registry.runner(producer_id)
                try:
                    runner(ctx)
                except Exception as exc:
                    raise ModuleFailed(
                        producer_id, f"module raised {exc!r}", log=ctx.log_text
                    ) from exc
            for label in desc.results:
                doc.record_result(producer_id, label)
            duration_ms = int((time.monotonic() - started) * 1000)
            return RunResult(
                module=producer_id,
                doc_id=doc.doc_id,
                annotations_added=ctx.annotations_added,
                attributes_set=ctx.attributes_set,
                labels_recorded=list(desc.results),
                duration_ms=duration_ms,
                log=ctx.log_text,
            )

    def _run_loose(self, desc: ModuleDescriptor, doc: Document, ctx: RunContext):
        pid = desc.producer_id
        raw_path = doc.raw_path
        if raw_path is None:
            raise ModuleFailed(pid, "document has no content file on disk")
        header = f"gate-ann 1 {len(doc.content)}\n"
        lines = "".join(
            format_annotation_line(doc.annotations[i]) + "\n"
            for i in sorted(doc.annotations)
        )
        env = dict(os.environ)
        env["GATE_DOC_ID"] = doc.doc_id
        try:
            proc = subprocess.run(
                [str(desc.exec_path), "--raw", str(raw_path)],
                input=(header + lines).encode("utf-8"),
                capture_output=True,
                env=env,
                timeout=self.run_timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise ModuleFailed(
                pid,
                f"timed out after {self.run_timeout}s",
                log=(exc.stderr or b"").decode("utf-8", "replace"),
            ) from exc
        except OSError as exc:
            raise ModuleFailed(pid, f"could not execute {desc.exec_path}: {exc}") from exc
        stderr = proc.stderr.decode("utf-8", "replace")
        if stderr:
            ctx.log(stderr.rstrip("\n"))
        if proc.returncode != 0:
            raise ModuleFailed(
                pid, f"exit status {proc.returncode}", log=stderr, exit_status=proc.returncode
            )
        self._ingest_loose_output(pid, proc.stdout, ctx)

    def _ingest_loose_output(self, pid: str, stdout: bytes, ctx: RunContext):
        for lineno, line in enumerate(stdout.decode("utf-8", "replace").split("\n"), 1):
            if not line:
                continue
            if line.startswith("@attr "):
                rest = line[len("@attr ") :]
                id_s, sep, attr_s = rest.partition("\t")
                if not sep:
                    raise ModuleFailed(pid, f"stdout line {lineno}: bad @attr line")
                try:
                    attributes = {}
                    for pair in attr_s.split(";"):
                        key_s, eq, value_s = pair.partition("=")
                        if not eq:
                            raise ValueError(f"attribute {pair!r} is missing '='")
                        attributes[unescape(key_s)] = unescape(value_s)
                    ctx.set_attributes(int(id_s), attributes)
                except Exception as exc:
                    raise ModuleFailed(pid, f"stdout line {lineno}: {exc}") from exc
                continue
            try:
                ann = parse_annotation_line(line, len(ctx.doc.content))
            except Exception as exc:
                raise ModuleFailed(pid, f"stdout line {lineno}: {exc}") from exc
            if ann.id != 0:
                raise ModuleFailed(
                    pid, f"stdout line {lineno}: new annotations must use id 0"
                )
            ctx.add_annotation(ann.type_name, ann.spans, ann.attributes)

    def run_chain(
        self, doc: Document, chain: list[str], start: str
    ) -> tuple[list[RunResult], GateError | None]:
        """Run every chain member from ``start`` to the end, in chain order.

        An amber member is first resolved by running its unique in-chain
        satisfier from earlier in the chain (recursively); results of those
        auto-runs are included in execution order.  Aborts on the first
        failure and returns the results so far together with the error.

        A chain is an ordered sequence of distinct registered modules;
        whether its members connect is enforced at run time through the
        in-chain satisfier rule, not by consecutive graph edges (a useful
        chain may interleave modules with independent prerequisites).
        """
        if start not in chain:
            raise InvalidChain(f"start module {start!r} is not in the chain")
        if len(set(chain)) != len(chain):
            raise InvalidChain("chain repeats a module")
        for pid in chain:
            self.registry.get(pid)
        results: list[RunResult] = []

        def satisfy(index: int):
            pid = chain[index]
            for pattern in self.unmet_preconditions(doc, pid):
                satisfiers = [
                    i
                    for i in range(index)
                    if any(
                        pattern.matches(chain[i], r)
                        for r in self.registry.get(chain[i]).results
                    )
                ]
                if len(satisfiers) != 1:
                    raise AmbiguousPrerequisite(
                        pid, pattern.source, [chain[i] for i in satisfiers]
                    )
                satisfy(satisfiers[0])
                results.append(self.run_module(doc, chain[satisfiers[0]]))

        try:
            for index in range(chain.index(start), len(chain)):
                satisfy(index)
                results.append(self.run_module(doc, chain[index]))
        except GateError as exc:
            return results, exc
        return results, None

    def run_collection(self, collection: Collection, producer_id: str) -> list[dict]:
        """Run one module over every document; failures recorded, not raised."""
        self.registry.get(producer_id)
        outcomes = []
        for doc_id in collection.doc_ids:
            try:
                result = self.run_module(collection.document(doc_id), producer_id)
                outcomes.append({"doc_id": doc_id, "ok": True, "result": result})
            except Exception as exc:  # per-document failures embed in the batch
                outcomes.append({"doc_id": doc_id, "ok": False, "error": exc})
        return outcomes


# --- descriptor files ---

DESCRIPTOR_SUFFIX = ".creole"


def load_descriptor_file(path: Path) -> ModuleDescriptor:
    """Parse one line-oriented module descriptor file.

    Keys: name=, version=, pre= (repeatable), result= (repeatable), exec=,
    data=, color=, view=.  exec makes a loose module; data makes a data
    module whose run loads and validates the resource file.
    """
    name = version = None
    preconditions: list[PreconditionPattern] = []
    results: list[str] = []
    exec_path = data_path = None
    color = view = None
    text = path.read_text(encoding="utf-8")
    for lineno, line in enumerate(text.split("\n"), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise BadPattern(str(path), f"line {lineno}: expected key=value")
        if key == "name":
            name = value
        elif key == "version":
            version = value
        elif key == "pre":
            preconditions.append(PreconditionPattern(value))
        elif key == "result":
            results.append(value)
        elif key == "exec":
            exec_path = (path.parent / value).resolve() if not Path(value).is_absolute() else Path(value)
        elif key == "data":
            data_path = (path.parent / value).resolve() if not Path(value).is_absolute() else Path(value)
        elif key == "color":
            color = value
        elif key == "view":
            view = value
        else:
            raise BadPattern(str(path), f"line {lineno}: unknown key {key!r}")
    if not name or not version:
        raise BadPattern(str(path), "descriptor needs name= and version=")
    hint = ViewerHint(view, color) if view and color else None
    coupling = LOOSE if exec_path is not None else DATA
    return ModuleDescriptor(
        name=name,
        version=version,
        preconditions=preconditions,
        results=results,
        coupling=coupling,
        exec_path=exec_path,
        data_path=data_path,
        viewer_hint=hint,
    )


def load_descriptor_dir(registry: Registry, directory: Path):
    """Register every *.creole descriptor found in ``directory``, sorted by name."""
    for path in sorted(Path(directory).glob(f"*{DESCRIPTOR_SUFFIX}")):
        desc = load_descriptor_file(path)
        runner = None
        if desc.coupling == DATA:
            runner = _data_loader(desc)
        registry.register(desc, runner)


def _data_loader(desc: ModuleDescriptor):
    def load(ctx: RunContext):
        if desc.data_path is None or not desc.data_path.is_file():
            raise FileNotFoundError(f"resource file {desc.data_path} not found")
        count = sum(1 for line in desc.data_path.read_text(encoding="utf-8").splitlines() if line.strip())
        ctx.log(f"loaded {count} entries from {desc.data_path.name}")

    return load
