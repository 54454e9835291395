"""Exception hierarchy for the retrieval engine."""
from typing import Iterable, Optional


class RetrievalError(Exception):
    """Base class for every error the engine raises on purpose."""


class ConfigError(RetrievalError):
    """Engine configuration could not be loaded or validated."""


# --- query dags -----------------------------------------------------------


class DagValidationError(RetrievalError):
    """A query dag violates a structural invariant."""


class CycleDetected(DagValidationError):
    def __init__(self, node_ids: Iterable[str]):
        self.node_ids = list(node_ids)
        super().__init__(f"cycle through nodes: {' -> '.join(self.node_ids)}")


class DanglingChild(DagValidationError):
    def __init__(self, node_id: str, child: str):
        self.node_id = node_id
        self.child = child
        super().__init__(f"node {node_id} references unknown child {child}")


class ArityViolation(DagValidationError):
    def __init__(self, node_id: str, kind: str, arity: int):
        self.node_id = node_id
        super().__init__(f"node {node_id}: {kind} cannot have {arity} children")


class MissingRoot(DagValidationError):
    def __init__(self, root: str):
        self.root = root
        super().__init__(f"root {root} is not a node of the dag")


class DagFormatError(RetrievalError):
    """The dag wire format could not be parsed."""


class DagSyntaxError(DagFormatError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnknownKind(DagFormatError):
    def __init__(self, node_id: str, kind: str):
        self.node_id = node_id
        self.kind = kind
        super().__init__(f"node {node_id}: unknown kind {kind!r}")


class DuplicateId(DagFormatError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"duplicate node id {node_id}")


# --- index ----------------------------------------------------------------


class IndexFormatError(RetrievalError):
    """Index file is truncated, foreign or otherwise unreadable."""


class IndexVersionError(IndexFormatError):
    pass


class IndexChecksumError(IndexFormatError):
    pass


class CorpusError(RetrievalError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateDocument(RetrievalError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__(f"document {doc_id} given twice with different tokens")


# --- circuits -------------------------------------------------------------


class CircuitWidthError(RetrievalError):
    """A constant does not fit the declared bit width."""


class CircuitOverflowError(RetrievalError):
    """A compiled sum could exceed the configured maximum width."""


class ConstraintError(RetrievalError):
    """The constraint DSL document is malformed."""


class InvalidCircuit(RetrievalError):
    """A CircuitInstance is not an acyclic, well-formed gate list."""


# --- baselines / bench ----------------------------------------------------


class ExpansionLimitExceeded(RetrievalError):
    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"unrolled tree needs {count} nodes, limit is {limit}")


class WorkLimitExceeded(RetrievalError):
    def __init__(self, work: int, limit: int):
        self.work = work
        self.limit = limit
        super().__init__(f"tree evaluation exceeded work limit {limit} (reached {work})")


class NotATree(RetrievalError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"node {node_id} has more than one parent")


class BenchPreconditionError(RetrievalError):
    """Experiment parameters violate the experiment's precondition."""


class UnknownExperiment(RetrievalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown experiment {name!r}")


class UnknownNode(RetrievalError):
    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"node {node_id} does not exist in this builder")


class UsageError(RetrievalError):
    """Command-line arguments failed validation."""
