"""Text-engineering workbench.

Standoff-annotation document store, precondition-driven module pipeline
engine with built-in tokenizer / sentence splitter / POS tagger / gazetteer
modules, SGML import/export, a precision/recall scorer, and an HTTP/CLI
gateway.
"""

from .engine import (
    AMBER,
    GREEN,
    RED,
    Engine,
    ModuleDescriptor,
    ModuleGraph,
    Registry,
    RunContext,
    RunResult,
    ViewerHint,
)
from .errors import GateError
from .patterns import PreconditionPattern, compile_producer_pattern
from .sgml import ImportResult, import_into, sgml_export, sgml_import
from .store import (
    Annotation,
    AnnotationSelector,
    AnnotationTypeDeclaration,
    Collection,
    CollectionManifest,
    Document,
    Span,
)
from .vie import (
    Gazetteer,
    Lexicon,
    ScoreReport,
    register_builtin_modules,
    score,
    score_annotations,
)

__version__ = "0.1.0"

__all__ = [
    "AMBER",
    "Annotation",
    "AnnotationSelector",
    "AnnotationTypeDeclaration",
    "Collection",
    "CollectionManifest",
    "Document",
    "Engine",
    "GREEN",
    "GateError",
    "Gazetteer",
    "ImportResult",
    "Lexicon",
    "ModuleDescriptor",
    "ModuleGraph",
    "PreconditionPattern",
    "RED",
    "Registry",
    "RunContext",
    "RunResult",
    "ScoreReport",
    "Span",
    "ViewerHint",
    "compile_producer_pattern",
    "import_into",
    "register_builtin_modules",
    "score",
    "score_annotations",
    "sgml_export",
    "sgml_import",
]
