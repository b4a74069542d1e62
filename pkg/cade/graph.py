"""
cade Graph — weighted causal DAGs.

A CausalGraph wraps the weighted adjacency matrix A of an SCM, where
A[i, j] is the weight of the edge i -> j. Validation computes the
topological order (ties broken by ascending index) and the depth, the
longest directed path counted in edges. Depth bounds the number of
consequence-propagation sweeps a counterfactual needs.
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import CycleError, NumericError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CausalGraph:
    """Validated DAG over d variables. Build it with validate_graph()."""

    d: int
    adjacency: np.ndarray
    topo_order: Tuple[int, ...]
    depth: int
    names: Tuple[str, ...]
    _nx: nx.DiGraph = field(repr=False, compare=False)

    def parents(self, i: int) -> Tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.adjacency[:, i]))

    def children(self, i: int) -> Tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.adjacency[i, :]))

    def ancestors(self, i: int) -> FrozenSet[int]:
        return frozenset(nx.ancestors(self._nx, i))

    def descendants(self, nodes: Iterable[int]) -> FrozenSet[int]:
        """Strict descendants of a node set (the set itself is excluded
        unless some member descends from another)."""
        out = set()
        for v in nodes:
            out |= nx.descendants(self._nx, v)
        return frozenset(out)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"Unknown variable '{name}'. Available: {', '.join(self.names)}") from None

    def resolve(self, variables: Iterable) -> Tuple[int, ...]:
        """Map a mix of names and indices to sorted indices."""
        out = set()
        for v in variables:
            idx = self.index(v) if isinstance(v, str) else int(v)
            if not 0 <= idx < self.d:
                raise KeyError(f"Variable index {idx} out of range for d={self.d}")
            out.add(idx)
        return tuple(sorted(out))

    def to_networkx(self) -> nx.DiGraph:
        return self._nx.copy()

    def __repr__(self) -> str:
        return f"CausalGraph(d={self.d}, edges={self._nx.number_of_edges()}, depth={self.depth})"


def validate_graph(adjacency, names: Optional[Sequence[str]] = None) -> CausalGraph:
    """
    Validate a weighted adjacency matrix and derive its order and depth.

    Raises CycleError (with one cycle's vertex list) when the nonzero
    pattern is not acyclic.
    """
    a = np.array(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("adjacency contains non-finite entries")

    d = a.shape[0]
    if names is None:
        names = tuple(f"x{i}" for i in range(d))
    names = tuple(names)
    if len(names) != d:
        raise ShapeError(f"{len(names)} names given for {d} variables")

    g = nx.DiGraph()
    g.add_nodes_from(range(d))
    for i, j in zip(*np.nonzero(a)):
        g.add_edge(int(i), int(j), coef=float(a[i, j]))

    if not nx.is_directed_acyclic_graph(g):
        cycle = [u for u, _ in nx.find_cycle(g)]
        raise CycleError(cycle)

    topo = tuple(nx.lexicographical_topological_sort(g))
    depth = int(nx.dag_longest_path_length(g)) if d else 0
    a.setflags(write=False)
    logger.debug("validated graph d=%d edges=%d depth=%d", d, g.number_of_edges(), depth)
    return CausalGraph(d=d, adjacency=a, topo_order=topo, depth=depth, names=names, _nx=g)


def markov_blanket(graph: CausalGraph, target: int) -> FrozenSet[int]:
    """Parents, children, and the children's other parents."""
    if not 0 <= target < graph.d:
        raise KeyError(f"target {target} out of range for d={graph.d}")
    children = graph.children(target)
    blanket = set(graph.parents(target)) | set(children)
    for c in children:
        blanket |= set(graph.parents(c))
    blanket.discard(target)
    return frozenset(blanket)
