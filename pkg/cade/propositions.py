"""
cade Propositions — exact checks of the Markov-blanket claims by enumeration.

Three claims about discrete SCMs are verified numerically:

  - blanket sufficiency: p(y | x) = p(y | Mb_y(x))
  - intervention effect: rewriting a child's mechanism changes p(y | x);
    rewriting a co-parent's (that is not a child) leaves it unchanged
  - latent transfer: for observations x = g(z, u_x), if p(y | x) changes
    then the latent marginal p(z) changed as well

Joints are built by broadcasting conditional probability tables over
the full configuration grid, so every quantity is exact up to float
round-off. Grids above spec.MAX_CONFIGURATIONS raise SizeError.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ConfigError, ShapeError, SizeError
from .graph import CausalGraph, markov_blanket, validate_graph
from . import spec

logger = logging.getLogger(__name__)

MAX_CARDINALITY = 5
CPT_TOLERANCE = 1e-12


@dataclass(eq=False)
class DiscreteScm:
    """
    Discrete SCM as a DAG plus one CPT per variable.

    cpts[i] has shape (card[p] for p in parents(i)) + (card[i],), parents
    in ascending index order; the last axis sums to one.
    """

    graph: CausalGraph
    cards: Tuple[int, ...]
    cpts: List[np.ndarray]
    y_index: int

    def __post_init__(self):
        self.cards = tuple(int(c) for c in self.cards)
        if len(self.cards) != self.graph.d or len(self.cpts) != self.graph.d:
            raise ShapeError(f"need {self.graph.d} cardinalities and CPTs")
        if any(not 1 <= c <= MAX_CARDINALITY for c in self.cards):
            raise ConfigError(f"cardinalities must lie in [1, {MAX_CARDINALITY}], got {self.cards}")
        if not 0 <= self.y_index < self.graph.d:
            raise ConfigError(f"y_index {self.y_index} out of range")
        self.cpts = [np.asarray(t, dtype=float) for t in self.cpts]
        for i, t in enumerate(self.cpts):
            shape = tuple(self.cards[p] for p in self.graph.parents(i)) + (self.cards[i],)
            if t.shape != shape:
                raise ShapeError(f"CPT of variable {i} has shape {t.shape}, expected {shape}")
            if np.any(t < 0) or np.any(t > 1):
                raise ConfigError(f"CPT of variable {i} has entries outside [0, 1]")
            if np.max(np.abs(t.sum(axis=-1) - 1.0)) > CPT_TOLERANCE:
                raise ConfigError(f"CPT rows of variable {i} do not sum to 1")

    @property
    def d(self) -> int:
        return self.graph.d

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[Tuple[int, int]], cards, cpts, y_index: int, names=None) -> "DiscreteScm":
        a = np.zeros((d, d))
        for i, j in edges:
            a[i, j] = 1.0
        return cls(validate_graph(a, names=names), tuple(cards), list(cpts), y_index)

    def intervene(self, i: int, cpt, parents: Optional[Sequence[int]] = None) -> "DiscreteScm":
        """
        Replace the mechanism of variable i. With parents given, the
        incoming edges are rewired to exactly those parents (an empty list
        severs them all); otherwise the existing parents are kept.
        """
        a = np.array(self.graph.adjacency)
        if parents is not None:
            a[:, i] = 0.0
            for p in parents:
                a[int(p), i] = 1.0
        cpts = list(self.cpts)
        cpts[i] = np.asarray(cpt, dtype=float)
        return DiscreteScm(validate_graph(a, names=self.graph.names), self.cards, cpts, self.y_index)

    def __repr__(self) -> str:
        return f"DiscreteScm(d={self.d}, cards={self.cards}, y={self.y_index})"


@dataclass
class JointTable:
    """probs has one axis per variable; entry [x0, ..., x_{d-1}] is p(x)."""

    probs: np.ndarray
    y_index: int

    @property
    def cards(self) -> Tuple[int, ...]:
        return self.probs.shape

    @property
    def d(self) -> int:
        return self.probs.ndim


@dataclass
class ConditionalTable:
    """
    p(y | given) over the axes given ∪ {y}, in ascending variable order.

    probs is NaN where the evidence has zero probability; `defined`
    marks the evidence configurations where the conditional exists.
    """

    axes: Tuple[int, ...]
    y_index: int
    probs: np.ndarray
    evidence: np.ndarray

    @property
    def given(self) -> Tuple[int, ...]:
        return tuple(a for a in self.axes if a != self.y_index)

    @property
    def defined(self) -> np.ndarray:
        return self.evidence > 0


def _expand(table: np.ndarray, axes: Sequence[int], d: int) -> np.ndarray:
    """Reshape a table over ascending `axes` so it broadcasts over d axes."""
    shape = [1] * d
    for k, a in enumerate(axes):
        shape[a] = table.shape[k]
    return table.reshape(shape)


def _check_size(cards: Sequence[int]):
    total = int(np.prod([int(c) for c in cards], dtype=np.int64)) if cards else 1
    if total > spec.MAX_CONFIGURATIONS:
        raise SizeError(f"{total} configurations exceed the enumeration cap {spec.MAX_CONFIGURATIONS}")


def enumerate_joint(scm: DiscreteScm) -> JointTable:
    """Exact joint p(x) = Π_i p(x_i | Pa_i) over every configuration."""
    _check_size(scm.cards)
    joint = np.ones(scm.cards)
    for i, cpt in enumerate(scm.cpts):
        axes = scm.graph.parents(i) + (i,)
        order = np.argsort(axes)
        joint = joint * _expand(np.transpose(cpt, order), sorted(axes), scm.d)
    total = joint.sum()
    if abs(total - 1.0) > spec.PROPOSITION_TOLERANCE:
        raise ConfigError(f"joint sums to {total}, not 1")
    return JointTable(joint, scm.y_index)


def conditional_y_given(joint: JointTable, given: Iterable[int]) -> ConditionalTable:
    """
    Exact p(y | given) by marginalization and normalization.

    Evidence configurations with zero probability are left undefined
    (NaN), never filled in.
    """
    y = joint.y_index
    given = tuple(sorted({int(g) for g in given}))
    if y in given:
        raise ConfigError("the conditioning set must not contain y")
    axes = tuple(sorted(given + (y,)))
    drop = tuple(a for a in range(joint.d) if a not in axes)
    marg = joint.probs.sum(axis=drop) if drop else joint.probs
    y_pos = axes.index(y)
    evidence = marg.sum(axis=y_pos, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(evidence > 0, marg / np.where(evidence > 0, evidence, 1.0), np.nan)
    return ConditionalTable(axes, y, probs, np.squeeze(evidence, axis=y_pos))


def _conditional_on_grid(cond: ConditionalTable, d: int) -> np.ndarray:
    return _expand(cond.probs, cond.axes, d)


def _tv_over_x(p: np.ndarray, q: np.ndarray, y: int, support: np.ndarray) -> float:
    """max over x in support of ½ Σ_y |p(y|x) − q(y|x)|; support is keepdims along y."""
    tv = 0.5 * np.abs(p - q).sum(axis=y, keepdims=True)
    tv = np.broadcast_to(tv, support.shape)
    return float(np.max(np.where(support, tv, 0.0))) if support.any() else 0.0


def _others(d: int, y: int) -> Tuple[int, ...]:
    return tuple(i for i in range(d) if i != y)


# ─── blanket sufficiency ────────────────────────────────────────

def check_prop_31(scm: DiscreteScm, blanket: Optional[Iterable[int]] = None) -> float:
    """
    Max total-variation distance between p(y | x) and p(y | Mb_y(x)) over
    every x with positive probability. The claim holds iff this is below
    spec.PROPOSITION_TOLERANCE. Pass `blanket` to check a different set.
    """
    joint = enumerate_joint(scm)
    y = scm.y_index
    mb = frozenset(markov_blanket(scm.graph, y) if blanket is None else blanket)
    full = conditional_y_given(joint, _others(scm.d, y))
    local = conditional_y_given(joint, mb)
    support = joint.probs.sum(axis=y, keepdims=True) > 0
    dev = _tv_over_x(_conditional_on_grid(full, scm.d), _conditional_on_grid(local, scm.d), y, support)
    logger.debug("blanket check %r blanket=%s deviation=%.3e", scm, sorted(mb), dev)
    return dev


# ─── intervention effect ────────────────────────────────────────

@dataclass(frozen=True)
class InterventionCheck:
    kind: str            # "child" | "coparent"
    intervened: int
    tv: float


def intervention_kind(graph: CausalGraph, y: int, i: int) -> str:
    """'child' or 'coparent'; ConfigError for y, its parents and unrelated variables."""
    if i == y:
        raise ConfigError("cannot intervene on y itself")
    if i in graph.parents(y):
        raise ConfigError(f"variable {i} is a parent of y")
    if i in graph.children(y):
        return "child"
    if any(i in graph.parents(c) for c in graph.children(y)):
        return "coparent"
    raise ConfigError(f"variable {i} is neither a child nor a co-parent of y")


def conditional_shift(before: DiscreteScm, after: DiscreteScm) -> float:
    """Max TV between p(y|x) under two SCMs over the x both give positive probability."""
    y = before.y_index
    j0, j1 = enumerate_joint(before), enumerate_joint(after)
    others = _others(before.d, y)
    c0 = _conditional_on_grid(conditional_y_given(j0, others), before.d)
    c1 = _conditional_on_grid(conditional_y_given(j1, others), after.d)
    support = (j0.probs.sum(axis=y, keepdims=True) > 0) & (j1.probs.sum(axis=y, keepdims=True) > 0)
    return _tv_over_x(c0, c1, y, support)


def check_prop_32(
    scm: DiscreteScm,
    intervened: int,
    new_cpt,
    parents: Optional[Sequence[int]] = None,
) -> InterventionCheck:
    """
    Rewrite the mechanism of `intervened` and measure how far p(y | x)
    moves. Expected: positive for a child of y with generic CPTs, zero
    (below tolerance) for a co-parent that is not a child.
    """
    kind = intervention_kind(scm.graph, scm.y_index, intervened)
    modified = scm.intervene(intervened, new_cpt, parents)
    tv = conditional_shift(scm, modified)
    logger.debug("%s intervention on %d: tv=%.3e", kind, intervened, tv)
    return InterventionCheck(kind, int(intervened), tv)


def marginal_of(scm: DiscreteScm, i: int) -> np.ndarray:
    """p(x_i), the CPT of a parent-free replacement mechanism."""
    joint = enumerate_joint(scm)
    return joint.probs.sum(axis=tuple(a for a in range(scm.d) if a != i))


# ─── latent transfer ────────────────────────────────────────────

@dataclass(eq=False)
class TwoLevelScm:
    """
    Latent discrete SCM over z plus noisy observations x_k of z_{sources[k]}:
    p(x_k | z) = emissions[k][z_{sources[k]}, x_k]. y is the latent z_{y_index}.
    """

    latent: DiscreteScm
    sources: Tuple[int, ...]
    emissions: List[np.ndarray]

    def __post_init__(self):
        self.sources = tuple(int(s) for s in self.sources)
        if len(self.sources) != len(self.emissions):
            raise ShapeError("need one emission matrix per observation")
        self.emissions = [np.asarray(e, dtype=float) for e in self.emissions]
        for k, (s, e) in enumerate(zip(self.sources, self.emissions)):
            if e.ndim != 2 or e.shape[0] != self.latent.cards[s]:
                raise ShapeError(f"emission {k} has shape {e.shape}, rows must match card of z{s}")
            if np.max(np.abs(e.sum(axis=1) - 1.0)) > CPT_TOLERANCE or np.any(e < 0):
                raise ConfigError(f"emission {k} rows are not distributions")

    @property
    def y_index(self) -> int:
        return self.latent.y_index

    def with_latent(self, latent: DiscreteScm) -> "TwoLevelScm":
        return TwoLevelScm(latent, self.sources, list(self.emissions))

    def y_and_x(self) -> np.ndarray:
        """p(y, x) with y on axis 0 followed by one axis per observation."""
        dz = self.latent.d
        x_cards = [e.shape[1] for e in self.emissions]
        _check_size(list(self.latent.cards) + x_cards)
        pz = enumerate_joint(self.latent).probs
        table = pz.reshape(pz.shape + (1,) * len(x_cards))
        for k, (s, e) in enumerate(zip(self.sources, self.emissions)):
            shape = [1] * (dz + len(x_cards))
            shape[s] = e.shape[0]
            shape[dz + k] = e.shape[1]
            table = table * e.reshape(shape)
        drop = tuple(a for a in range(dz) if a != self.y_index)
        return table.sum(axis=drop)


@dataclass(frozen=True)
class TransferCheck:
    tv_latent: float          # TV(p_f(z), p_f′(z)) over the full latent joint
    tv_conditional: float     # max over shared-support x of TV(p(y|x), p′(y|x))
    tv_observed: float        # TV(p(x), p′(x))
    tv_target: float          # TV(p(y), p′(y))

    def holds(self, tol: float = spec.PROPOSITION_TOLERANCE) -> bool:
        """Equal latent marginals must imply equal conditionals."""
        return not (self.tv_latent < tol and self.tv_conditional >= tol)

    def latent_changed_conditional_kept(self, tol: float = spec.PROPOSITION_TOLERANCE) -> bool:
        return self.tv_latent >= tol and self.tv_conditional < tol


def check_prop_33(model: TwoLevelScm, intervened: int, new_cpt, parents: Optional[Sequence[int]] = None) -> TransferCheck:
    """Intervene on latent z_i and report the four distances between the two models."""
    after = model.with_latent(model.latent.intervene(intervened, new_cpt, parents))
    z0 = enumerate_joint(model.latent).probs
    z1 = enumerate_joint(after.latent).probs
    yx0, yx1 = model.y_and_x(), after.y_and_x()
    x0, x1 = yx0.sum(axis=0), yx1.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        c0 = yx0 / np.where(x0 > 0, x0, 1.0)
        c1 = yx1 / np.where(x1 > 0, x1, 1.0)
    support = ((x0 > 0) & (x1 > 0))[None, ...]
    return TransferCheck(
        tv_latent=float(0.5 * np.abs(z0 - z1).sum()),
        tv_conditional=_tv_over_x(c0, c1, 0, support),
        tv_observed=float(0.5 * np.abs(x0 - x1).sum()),
        tv_target=float(0.5 * np.abs(yx0.sum(axis=tuple(range(1, yx0.ndim))) - yx1.sum(axis=tuple(range(1, yx1.ndim)))).sum()),
    )


# ─── random instances ───────────────────────────────────────────

def random_cpt(rng: np.random.Generator, parent_cards: Sequence[int], card: int, alpha: float = 1.0) -> np.ndarray:
    """Rows drawn from a symmetric Dirichlet, so generic with probability one."""
    rows = int(np.prod(parent_cards)) if parent_cards else 1
    return rng.dirichlet(np.full(card, alpha), size=rows).reshape(tuple(parent_cards) + (card,))


def random_dag(rng: np.random.Generator, d: int, edge_prob: float = 0.5) -> np.ndarray:
    """Adjacency of a random DAG: forward edges of a random permutation."""
    perm = rng.permutation(d)
    a = np.zeros((d, d))
    for u in range(d):
        for v in range(u + 1, d):
            if rng.random() < edge_prob:
                a[perm[u], perm[v]] = 1.0
    return a


def _fill_cpts(rng: np.random.Generator, graph: CausalGraph, cards: Sequence[int], alpha: float) -> List[np.ndarray]:
    return [random_cpt(rng, [cards[p] for p in graph.parents(i)], cards[i], alpha) for i in range(graph.d)]


def random_discrete_scm(
    rng: np.random.Generator,
    d: int,
    max_card: int = 3,
    edge_prob: float = 0.5,
    alpha: float = 1.0,
    y_index: Optional[int] = None,
) -> DiscreteScm:
    graph = validate_graph(random_dag(rng, d, edge_prob))
    cards = tuple(int(c) for c in rng.integers(2, max_card + 1, size=d))
    y = int(rng.integers(d)) if y_index is None else y_index
    return DiscreteScm(graph, cards, _fill_cpts(rng, graph, cards, alpha), y)


BLANKET_NAMES = ("P", "CP", "y", "C", "D", "E")


def random_blanket_scm(rng: np.random.Generator, d: int = 5, max_card: int = 3, alpha: float = 1.0) -> DiscreteScm:
    """
    Random SCM where y (index 2) has a parent P (0), a child C (3) and a
    co-parent CP (1) through C; further forward edges are random but never
    join CP and y directly.
    """
    if not 4 <= d <= len(BLANKET_NAMES):
        raise ConfigError(f"d must lie in [4, {len(BLANKET_NAMES)}], got {d}")
    a = np.zeros((d, d))
    a[0, 2] = a[2, 3] = a[1, 3] = 1.0
    for u in range(d):
        for v in range(u + 1, d):
            if (u, v) != (1, 2) and rng.random() < 0.3:
                a[u, v] = 1.0
    graph = validate_graph(a, names=BLANKET_NAMES[:d])
    cards = tuple(int(c) for c in rng.integers(2, max_card + 1, size=d))
    return DiscreteScm(graph, cards, _fill_cpts(rng, graph, cards, alpha), y_index=2)


def random_two_level_scm(rng: np.random.Generator, max_card: int = 3, max_noise: float = 0.3) -> TwoLevelScm:
    """Blanket-shaped latent layer of four variables; every z but y is observed through a noisy channel."""
    latent = random_blanket_scm(rng, d=4, max_card=max_card)
    sources, emissions = [], []
    for s in range(latent.d):
        if s == latent.y_index:
            continue
        card = latent.cards[s]
        eta = rng.uniform(0.0, max_noise)
        emissions.append((1.0 - eta) * np.eye(card) + eta * rng.dirichlet(np.ones(card), size=card))
        sources.append(s)
    return TwoLevelScm(latent, tuple(sources), emissions)


# ─── suite ──────────────────────────────────────────────────────

@dataclass
class SuiteResult:
    seed: int
    instances: int
    rows: List[Dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame.from_records(self.rows)


def run_suite(seed: int = 0, instances: int = 100, child_pass_fraction: float = 0.99) -> SuiteResult:
    """
    Check all three claims on `instances` random SCMs each. Degenerate
    child-branch draws (TV at or below spec.GENERIC_TOLERANCE) are logged
    and counted, and the branch passes while they stay within
    1 − child_pass_fraction of the instances.
    """
    tol = spec.PROPOSITION_TOLERANCE
    streams = np.random.SeedSequence(seed).spawn(4)
    result = SuiteResult(seed, instances)

    rng = np.random.default_rng(streams[0])
    devs = [check_prop_31(random_discrete_scm(rng, int(rng.integers(2, 7)))) for _ in range(instances)]
    result.rows.append(_row("blanket_sufficiency", instances, max(devs, default=0.0), all(v < tol for v in devs)))

    rng = np.random.default_rng(streams[1])
    coparent = []
    for _ in range(instances):
        scm = random_blanket_scm(rng, d=int(rng.integers(4, 7)))
        parent_cards = [scm.cards[p] for p in scm.graph.parents(1)]
        coparent.append(check_prop_32(scm, 1, random_cpt(rng, parent_cards, scm.cards[1])).tv)
    result.rows.append(_row("coparent_intervention", instances, max(coparent, default=0.0), all(v < tol for v in coparent)))

    rng = np.random.default_rng(streams[2])
    child = []
    for _ in range(instances):
        scm = random_blanket_scm(rng, d=int(rng.integers(4, 7)))
        child.append(check_prop_32(scm, 3, marginal_of(scm, 3), parents=()).tv)
    degenerate = sum(v <= spec.GENERIC_TOLERANCE for v in child)
    if degenerate:
        logger.info("child intervention: %d degenerate draws of %d", degenerate, instances)
    result.rows.append(_row(
        "child_intervention", instances, min(child, default=0.0),
        degenerate <= (1.0 - child_pass_fraction) * instances, degenerate=degenerate,
    ))

    rng = np.random.default_rng(streams[3])
    checks = []
    for _ in range(instances):
        model = random_two_level_scm(rng)
        i = int(rng.choice([v for v in range(model.latent.d) if v != model.y_index]))
        if rng.random() < 0.5:
            new_cpt = model.latent.cpts[i]
        else:
            parent_cards = [model.latent.cards[p] for p in model.latent.graph.parents(i)]
            new_cpt = random_cpt(rng, parent_cards, model.latent.cards[i])
        checks.append(check_prop_33(model, i, new_cpt))
    violations = sum(not c.holds(tol) for c in checks)
    kept = sum(c.latent_changed_conditional_kept(tol) for c in checks)
    result.rows.append(_row(
        "latent_transfer", instances, float(violations), violations == 0,
        latent_changed_conditional_kept=kept / max(1, instances),
    ))

    for r in result.rows:
        logger.info("%s: %s (stat=%.3e)", r["check"], "pass" if r["passed"] else "FAIL", r["statistic"])
    return result


def _row(check: str, instances: int, statistic: float, passed: bool, **extra) -> Dict:
    return {"check": check, "instances": instances, "statistic": float(statistic), "passed": bool(passed), **extra}
