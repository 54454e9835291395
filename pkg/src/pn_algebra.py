"""Positive/negative set algebra.

A PNResponse <S, POS> denotes S itself; <S, NEG> denotes U \\ S. No
operation here reads the universe size except `shrink` and `semantics`,
so results are byte-identical whatever universe is assumed.
"""
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np

from src.index import DOC_DTYPE, PostingList, freeze


class Polarity(str, Enum):
    POS = "POS"
    NEG = "NEG"

    def flipped(self) -> "Polarity":
        return Polarity.NEG if self is Polarity.POS else Polarity.POS


@dataclass
class CostCounters:
    """Instrumentation for one evaluation; never shared between evaluations."""

    element_touches: int = 0
    node_visits: int = 0
    max_materialized: int = 0
    finalization_touches: int = 0

    def touch(self, count: int) -> None:
        self.element_touches += int(count)

    def observe(self, size: int) -> None:
        if size > self.max_materialized:
            self.max_materialized = int(size)

    def merge(self, other: "CostCounters") -> None:
        """Fold another counter set in; commutative, so order never matters."""
        self.element_touches += other.element_touches
        self.node_visits += other.node_visits
        self.finalization_touches += other.finalization_touches
        self.max_materialized = max(self.max_materialized, other.max_materialized)

    def as_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PNResponse:
    docs: PostingList
    polarity: Polarity

    @classmethod
    def positive(cls, docs: PostingList) -> "PNResponse":
        return cls(docs, Polarity.POS)

    @classmethod
    def negative(cls, docs: PostingList) -> "PNResponse":
        return cls(docs, Polarity.NEG)

    @property
    def size(self) -> int:
        return int(self.docs.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PNResponse):
            return NotImplemented
        return self.polarity is other.polarity and np.array_equal(self.docs, other.docs)

    def __repr__(self) -> str:
        return f"<{self.docs.tolist()}, {self.polarity.value}>"


# --- merge kernels ---------------------------------------------------------
# Each kernel charges |a| + |b| reads, the cost of a linear sorted merge.


def set_union(a: PostingList, b: PostingList, counters: Optional[CostCounters] = None) -> PostingList:
    if counters is not None:
        counters.touch(a.size + b.size)
    return freeze(np.union1d(a, b).astype(DOC_DTYPE, copy=False))


def set_intersect(a: PostingList, b: PostingList, counters: Optional[CostCounters] = None) -> PostingList:
    if counters is not None:
        counters.touch(a.size + b.size)
    return freeze(np.intersect1d(a, b, assume_unique=True).astype(DOC_DTYPE, copy=False))


def set_difference(a: PostingList, b: PostingList, counters: Optional[CostCounters] = None) -> PostingList:
    if counters is not None:
        counters.touch(a.size + b.size)
    return freeze(np.setdiff1d(a, b, assume_unique=True).astype(DOC_DTYPE, copy=False))


def complement(docs: PostingList, universe_size: int) -> PostingList:
    """[0, universe_size) minus docs; callers charge the |U| scan themselves."""
    universe = np.arange(universe_size, dtype=DOC_DTYPE)
    return freeze(np.setdiff1d(universe, docs, assume_unique=True))


# --- PN operators ----------------------------------------------------------


def pn_not(child: PNResponse) -> PNResponse:
    """Flip the polarity flag; the set is shared, nothing is touched."""
    return PNResponse(child.docs, child.polarity.flipped())


def pn_and(left: PNResponse, right: PNResponse, counters: Optional[CostCounters] = None) -> PNResponse:
    pos, neg = Polarity.POS, Polarity.NEG
    if left.polarity is pos and right.polarity is pos:
        return PNResponse(set_intersect(left.docs, right.docs, counters), pos)
    if left.polarity is pos and right.polarity is neg:
        return PNResponse(set_difference(left.docs, right.docs, counters), pos)
    if left.polarity is neg and right.polarity is pos:
        return PNResponse(set_difference(right.docs, left.docs, counters), pos)
    # De Morgan: (U\L) & (U\R) = U \ (L | R)
    return PNResponse(set_union(left.docs, right.docs, counters), neg)


def pn_or(left: PNResponse, right: PNResponse, counters: Optional[CostCounters] = None) -> PNResponse:
    pos, neg = Polarity.POS, Polarity.NEG
    if left.polarity is pos and right.polarity is pos:
        return PNResponse(set_union(left.docs, right.docs, counters), pos)
    if left.polarity is pos and right.polarity is neg:
        # L | (U\R) = U \ (R\L)
        return PNResponse(set_difference(right.docs, left.docs, counters), neg)
    if left.polarity is neg and right.polarity is pos:
        return PNResponse(set_difference(left.docs, right.docs, counters), neg)
    return PNResponse(set_intersect(left.docs, right.docs, counters), neg)


def shrink(response: PNResponse, universe_size: int, counters: Optional[CostCounters] = None) -> PNResponse:
    """Opt-in re-polarization: flip to the complement when |S| > |U|/2."""
    if 2 * response.size <= universe_size:
        return response
    if counters is not None:
        counters.touch(universe_size)
    return PNResponse(complement(response.docs, universe_size), response.polarity.flipped())


def semantics(response: PNResponse, universe_size: int) -> PostingList:
    """The absolute document set a response denotes inside [0, universe_size)."""
    if response.polarity is Polarity.POS:
        return response.docs
    return complement(response.docs, universe_size)
