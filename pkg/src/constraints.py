"""Constraint DSL: JSON documents compiled into query dags by the circuit compiler."""
import json
from typing import Annotated, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from src.circuit_compiler import (
    DagBuilder,
    WeightedTerm,
    count_at_least,
    field_between,
    field_gt_const,
    field_lt_const,
    import_dag,
    weighted_sum_at_least,
    weighted_sum_gt,
)
from src.errors import ConstraintError
from src.query_dag import QueryDag, dag_from_document
from src.schemas import DagDocument


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WeightSpec(_Spec):
    term: str
    weight: int


class WeightedSumGtSpec(_Spec):
    kind: Literal["weighted_sum_gt"]
    good: List[WeightSpec]
    bad: List[WeightSpec]


class WeightedSumAtLeastSpec(_Spec):
    kind: Literal["weighted_sum_at_least"]
    terms: List[WeightSpec]
    threshold: int


class CountAtLeastSpec(_Spec):
    kind: Literal["count_at_least"]
    terms: List[str]
    k: int


class FieldGtConstSpec(_Spec):
    kind: Literal["field_gt_const"]
    field: str
    const: int
    width: int


class FieldLtConstSpec(_Spec):
    kind: Literal["field_lt_const"]
    field: str
    const: int
    width: int


class FieldBetweenSpec(_Spec):
    kind: Literal["field_between"]
    field: str
    low: int
    high: int
    width: int


class TermSpec(_Spec):
    kind: Literal["term"]
    term: str


class AnyOfSpec(_Spec):
    kind: Literal["any_of"]
    terms: List[str]


class DagSpec(_Spec):
    kind: Literal["dag"]
    dag: DagDocument


class AndSpec(_Spec):
    kind: Literal["and"]
    args: List["Constraint"]


class OrSpec(_Spec):
    kind: Literal["or"]
    args: List["Constraint"]


class NotSpec(_Spec):
    kind: Literal["not"]
    arg: "Constraint"


Constraint = Annotated[
    Union[
        WeightedSumGtSpec,
        WeightedSumAtLeastSpec,
        CountAtLeastSpec,
        FieldGtConstSpec,
        FieldLtConstSpec,
        FieldBetweenSpec,
        TermSpec,
        AnyOfSpec,
        DagSpec,
        AndSpec,
        OrSpec,
        NotSpec,
    ],
    Field(discriminator="kind"),
]

for _model in (AndSpec, OrSpec, NotSpec):
    _model.model_rebuild()

_adapter = TypeAdapter(Constraint)


def parse_constraint(data) -> Constraint:
    """Validate a constraint document (already decoded from JSON)."""
    try:
        return _adapter.validate_python(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConstraintError(f"{first['msg']} at {location or 'top level'}") from e


def _weights(specs: List[WeightSpec]) -> List[WeightedTerm]:
    return [WeightedTerm(s.term, s.weight) for s in specs]


def lower(b: DagBuilder, spec: Constraint) -> int:
    """Emit the nodes for one constraint into the builder; returns its root id."""
    if isinstance(spec, WeightedSumGtSpec):
        return weighted_sum_gt(b, _weights(spec.good), _weights(spec.bad))
    if isinstance(spec, WeightedSumAtLeastSpec):
        return weighted_sum_at_least(b, _weights(spec.terms), spec.threshold)
    if isinstance(spec, CountAtLeastSpec):
        return count_at_least(b, [b.term(t) for t in spec.terms], spec.k)
    if isinstance(spec, FieldGtConstSpec):
        return field_gt_const(b, spec.field, spec.const, spec.width)
    if isinstance(spec, FieldLtConstSpec):
        return field_lt_const(b, spec.field, spec.const, spec.width)
    if isinstance(spec, FieldBetweenSpec):
        return field_between(b, spec.field, spec.low, spec.high, spec.width)
    if isinstance(spec, TermSpec):
        return b.term(spec.term)
    if isinstance(spec, AnyOfSpec):
        return b.or_all([b.term(t) for t in spec.terms])
    if isinstance(spec, DagSpec):
        return import_dag(b, dag_from_document(spec.dag))
    if isinstance(spec, AndSpec):
        return b.and_all([lower(b, arg) for arg in spec.args])
    if isinstance(spec, OrSpec):
        return b.or_all([lower(b, arg) for arg in spec.args])
    if isinstance(spec, NotSpec):
        return b.not_(lower(b, spec.arg))
    raise ConstraintError(f"unsupported constraint {spec!r}")


def compile_constraint(data, fold_constants: bool = True) -> QueryDag:
    """Constraint document -> pruned query dag."""
    b = DagBuilder(fold_constants=fold_constants)
    root = lower(b, parse_constraint(data))
    return b.build(root)


def compile_constraint_text(text: str, fold_constants: bool = True) -> QueryDag:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConstraintError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
    return compile_constraint(data, fold_constants)
