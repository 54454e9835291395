"""ComputePN: memoized bottom-up evaluation of a query dag over an inverted index."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.index import DOC_DTYPE, InvertedIndex, PostingList, freeze
from src.pn_algebra import (
    CostCounters,
    PNResponse,
    Polarity,
    complement,
    pn_and,
    pn_not,
    pn_or,
    shrink,
)
from src.query_dag import NodeKind, NormalizedDag, QueryDag, leaf_terms, prepare, topo_order

logger = logging.getLogger(__name__)

_EMPTY = freeze(np.empty(0, dtype=DOC_DTYPE))


@dataclass(frozen=True)
class EvalOptions:
    adaptive_leaf_polarity: bool = False
    parallel: bool = False
    collect_counters: bool = True
    # Re-polarize intermediate sets larger than |U|/2 (weakens the sparsity bound)
    shrink_intermediate: bool = False
    max_workers: Optional[int] = None


class MemoTable:
    """Node id -> PNResponse, each key written exactly once per evaluation."""

    def __init__(self):
        self._entries: Dict[int, PNResponse] = {}

    def __setitem__(self, node_id: int, response: PNResponse) -> None:
        if node_id in self._entries:
            raise RuntimeError(f"memo entry {node_id} written twice")
        self._entries[node_id] = response

    def __getitem__(self, node_id: int) -> PNResponse:
        return self._entries[node_id]

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()


@dataclass
class EvalReport:
    result: PostingList
    counters: CostCounters
    u_active_size: int
    per_node_set_sizes: Dict[str, int] = field(default_factory=dict)
    root_polarity: Polarity = Polarity.POS
    dag_size: int = 0

    @property
    def count(self) -> int:
        return int(self.result.size)

    def to_json(self, include_ids: bool = True, per_node: bool = False) -> dict:
        data = {
            "count": self.count,
            "counters": self.counters.as_dict(),
            "u_active_size": self.u_active_size,
            "root_polarity": self.root_polarity.value,
            "dag_size": self.dag_size,
        }
        if include_ids:
            data["result"] = self.result.tolist()
        if per_node:
            data["per_node_set_sizes"] = dict(self.per_node_set_sizes)
        return data


def leaf_response(
    index: InvertedIndex,
    term: str,
    opts: EvalOptions = EvalOptions(),
    counters: Optional[CostCounters] = None,
) -> PNResponse:
    """<I(t), POS>, or <U \\ I(t), NEG> for dense terms under adaptive polarity."""
    docs = index.lookup(term)
    if opts.adaptive_leaf_polarity and 2 * docs.size > index.universe_size:
        if counters is not None:
            counters.touch(index.universe_size)
        return PNResponse(complement(docs, index.universe_size), Polarity.NEG)
    return PNResponse(docs, Polarity.POS)


def finalize(
    root: PNResponse,
    universe_size: int,
    counters: Optional[CostCounters] = None,
) -> PostingList:
    """Materialize the root: the only complement against the universe."""
    if root.polarity is Polarity.POS:
        return root.docs
    if counters is not None:
        counters.finalization_touches += universe_size
    return complement(root.docs, universe_size)


def _evaluate_node(
    dag: QueryDag,
    node_id: int,
    memo: MemoTable,
    index: InvertedIndex,
    opts: EvalOptions,
    counters: Optional[CostCounters],
) -> PNResponse:
    node = dag.nodes[node_id]
    kind = node.kind
    if kind is NodeKind.TERM:
        return leaf_response(index, node.term, opts, counters)
    if kind is NodeKind.TRUE:
        return PNResponse(_EMPTY, Polarity.NEG)
    if kind is NodeKind.FALSE:
        return PNResponse(_EMPTY, Polarity.POS)
    if kind is NodeKind.NOT:
        return pn_not(memo[node.children[0]])

    left, right = (memo[c] for c in node.children)
    if kind is NodeKind.AND:
        response = pn_and(left, right, counters)
    else:
        response = pn_or(left, right, counters)
    if opts.shrink_intermediate:
        response = shrink(response, index.universe_size, counters)
    return response


def _levels(dag: QueryDag, order: List[int]) -> List[List[int]]:
    """Group nodes into waves; every node's children sit in earlier waves."""
    depth: Dict[int, int] = {}
    for node_id in order:
        children = dag.nodes[node_id].children
        depth[node_id] = 1 + max((depth[c] for c in children), default=-1)
    waves: List[List[int]] = [[] for _ in range(max(depth.values(), default=-1) + 1)]
    for node_id in order:
        waves[depth[node_id]].append(node_id)
    return waves


def _run_sequential(dag, order, index, opts, counters) -> MemoTable:
    memo = MemoTable()
    for node_id in order:
        memo[node_id] = _evaluate_node(dag, node_id, memo, index, opts, counters)
    return memo


def _run_parallel(dag, order, index, opts, counters) -> MemoTable:
    memo = MemoTable()

    def task(node_id: int) -> Tuple[PNResponse, Optional[CostCounters]]:
        local = CostCounters() if counters is not None else None
        return _evaluate_node(dag, node_id, memo, index, opts, local), local

    with ThreadPoolExecutor(max_workers=opts.max_workers) as pool:
        for wave in _levels(dag, order):
            # Writes happen on this thread, in wave order, after the wave completes
            results = list(pool.map(task, wave))
            for node_id, (response, local) in zip(wave, results):
                memo[node_id] = response
                if local is not None:
                    counters.merge(local)
    return memo


def u_active(dag: QueryDag, index: InvertedIndex) -> PostingList:
    """Union of the posting lists of every reachable leaf term."""
    lists = [index.lookup(term) for term in leaf_terms(dag)]
    if not lists:
        return _EMPTY
    return freeze(np.unique(np.concatenate(lists)))


def compute_pn(
    dag: QueryDag,
    index: InvertedIndex,
    opts: EvalOptions = EvalOptions(),
    prepared: bool = False,
) -> EvalReport:
    """Evaluate `dag` against `index`.

    The dag is normalized, shared (CSE) and pruned first unless `prepared`
    says that already happened, so every distinct sub-expression is computed
    once. Node visits count the nodes of that prepared dag.

    Raises:
        DagValidationError: if the dag is malformed or cyclic.
    """
    work: NormalizedDag = dag if prepared else prepare(dag)
    order = topo_order(work)
    counters = CostCounters() if opts.collect_counters else None

    if opts.parallel:
        memo = _run_parallel(work, order, index, opts, counters)
    else:
        memo = _run_sequential(work, order, index, opts, counters)

    per_node: Dict[str, int] = {}
    for node_id, response in memo.items():
        per_node[work.label(node_id)] = response.size
        if counters is not None:
            counters.observe(response.size)
    if counters is not None:
        counters.node_visits = len(memo)

    root = memo[work.root]
    result = finalize(root, index.universe_size, counters)
    report = EvalReport(
        result=result,
        counters=counters if counters is not None else CostCounters(),
        u_active_size=int(u_active(work, index).size),
        per_node_set_sizes=per_node,
        root_polarity=root.polarity,
        dag_size=len(work),
    )
    logger.debug(
        "compute_pn: %d nodes, |U_active|=%d, result=%d",
        report.dag_size, report.u_active_size, report.count,
    )
    return report
