"""Pydantic models for the JSON wire formats (query dags and circuit instances)."""
from typing import List, Optional

from pydantic import BaseModel, ConfigDict


class NodeSpec(BaseModel):
    """One node of a query dag: `{"id", "kind", "term"?, "children"?}`."""

    model_config = ConfigDict(extra="forbid")

    id: str
    kind: str
    term: Optional[str] = None
    children: List[str] = []


class DagDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    root: str
    nodes: List[NodeSpec]


class GateSpec(BaseModel):
    """One gate of a circuit instance; inputs carry `value` instead of children."""

    model_config = ConfigDict(extra="forbid")

    id: str
    kind: str
    value: Optional[bool] = None
    children: List[str] = []


class CircuitDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    root: str
    nodes: List[GateSpec]
