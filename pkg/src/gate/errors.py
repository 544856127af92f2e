"""Exception hierarchy shared by the store, the engine and the gateway.

Every error carries a stable ``code`` token; the HTTP layer maps codes to
status lines and the CLI maps any :class:`GateError` to exit status 1.
"""

from __future__ import annotations


class GateError(Exception):
    """Base class for all domain errors."""

    code = "GATE_ERROR"

    def __init__(self, message: str, detail: object = None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class PathOccupied(GateError):
    code = "PATH_OCCUPIED"


class NotACollection(GateError):
    code = "NOT_A_COLLECTION"


class CorruptManifest(GateError):
    """Persistence file failed to parse; detail carries (path, line number)."""

    code = "CORRUPT_MANIFEST"

    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}", detail={"path": path, "line": line})
        self.path = path
        self.line = line


class NoSuchCollection(GateError):
    code = "NO_SUCH_COLLECTION"


class DuplicateDocId(GateError):
    code = "DUPLICATE_DOC_ID"


class NoSuchDocument(GateError):
    code = "NO_SUCH_DOC"


class SpanOutOfBounds(GateError):
    code = "SPAN_OUT_OF_BOUNDS"


class MalformedSpans(GateError):
    code = "MALFORMED_SPANS"


class NoSuchAnnotation(GateError):
    code = "NO_SUCH_ANNOTATION"


class BadPattern(GateError):
    code = "BAD_PATTERN"

    def __init__(self, pattern: str, reason: str):
        super().__init__(f"bad pattern {pattern!r}: {reason}", detail={"pattern": pattern})
        self.pattern = pattern


class IoFailure(GateError):
    code = "IO_FAILURE"

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}", detail={"path": path})
        self.path = path


class InvalidResource(GateError):
    code = "INVALID_RESOURCE"


class DuplicateModule(GateError):
    code = "DUPLICATE_MODULE"


class NoSuchModule(GateError):
    code = "NO_SUCH_MODULE"


class PreconditionUnsatisfied(GateError):
    """Module is amber; detail lists the unmet pattern strings."""

    code = "PRECONDITION_UNSATISFIED"

    def __init__(self, module: str, unmet: list[str]):
        super().__init__(
            f"{module}: unmet preconditions: {', '.join(unmet)}",
            detail={"module": module, "unmet": unmet},
        )
        self.unmet = unmet


class ModuleFailed(GateError):
    """Module execution failed; detail carries exit status and captured log."""

    code = "MODULE_FAILED"

    def __init__(self, module: str, reason: str, log: str = "", exit_status: int | None = None):
        super().__init__(
            f"{module}: {reason}",
            detail={"module": module, "exit_status": exit_status, "log": log},
        )
        self.log = log
        self.exit_status = exit_status


class InvalidChain(GateError):
    code = "INVALID_CHAIN"


class AmbiguousPrerequisite(GateError):
    """A chain precondition has zero or several in-chain satisfiers."""

    code = "AMBIGUOUS_PREREQUISITE"

    def __init__(self, module: str, pattern: str, candidates: list[str]):
        super().__init__(
            f"{module}: precondition {pattern!r} has {len(candidates)} in-chain satisfiers",
            detail={"module": module, "pattern": pattern, "candidates": candidates},
        )


class MalformedSgml(GateError):
    code = "MALFORMED_SGML"

    def __init__(self, offset: int, reason: str):
        super().__init__(f"byte {offset}: {reason}", detail={"offset": offset})
        self.offset = offset


class OverlapNotRepresentable(GateError):
    """Two selected spans partially overlap; inline markup cannot express that."""

    code = "OVERLAP_NOT_REPRESENTABLE"

    def __init__(self, id1: int, id2: int):
        super().__init__(
            f"annotations {id1} and {id2} partially overlap",
            detail={"ids": [id1, id2]},
        )
        self.ids = (id1, id2)


class MultiSpanNotRepresentable(GateError):
    code = "MULTI_SPAN_NOT_REPRESENTABLE"

    def __init__(self, ann_id: int):
        super().__init__(f"annotation {ann_id} has multiple spans", detail={"id": ann_id})


class BadRequest(GateError):
    code = "BAD_REQUEST"


class NotFound(GateError):
    code = "NOT_FOUND"
