"""Contextual sub-tree similarity and threshold equivalence classes.

Two sub-trees are compared level by level: the nodes themselves, then their
parents, grandparents and so on, up to the shallower of the two depths.  Each
level ``i`` contributes ``f(P_i(x), P_i(y))`` with harmonic weight ``1/(i+1)``,
so the nodes' own content dominates and distant context only nudges the score.

Equivalence at threshold ``tau`` is the transitive closure of ``sim >= tau``,
i.e. the clusters of a single-link hierarchy cut at ``tau``.  It is computed
with a disjoint-set forest over the thresholded pair graph.
"""
from __future__ import annotations

import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .tree import Kind, Label, Position, SubTreeRef, Tree

log = logging.getLogger(__name__)

__all__ = [
    "Partition",
    "SimilarityFn",
    "JaccardEntityNames",
    "LabelMultisetJaccard",
    "TreeEditSimilarity",
    "SimParams",
    "make_similarity",
    "level_weights",
    "weighted_similarity",
    "sim",
    "single_link_partition",
    "threshold_partition",
    "equivalence_classes",
    "label_classes",
    "entity_names",
    "thread_count",
]


def thread_count() -> int:
    """Worker cap from ``ARCHITEXT_THREADS`` (defaults to 1)."""
    raw = os.environ.get("ARCHITEXT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer ARCHITEXT_THREADS=%r", raw)
        return 1


@dataclass(frozen=True)
class Partition:
    """Disjoint, non-empty blocks covering a set of items.

    Blocks are ordered by their smallest member so that block indices are
    deterministic.
    """

    blocks: tuple[frozenset, ...]
    class_of: Mapping = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        blocks = tuple(sorted((frozenset(b) for b in self.blocks), key=min))
        index = {}
        for k, block in enumerate(blocks):
            if not block:
                raise ValueError("partition blocks must be non-empty")
            for item in block:
                if item in index:
                    raise ValueError(f"{item!r} occurs in two blocks")
                index[item] = k
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "class_of", index)

    @classmethod
    def from_keys(cls, keys: Mapping) -> "Partition":
        """Group items by equal key."""
        groups: dict = {}
        for item, key in keys.items():
            groups.setdefault(key, set()).add(item)
        return cls(tuple(groups.values()))

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def items(self) -> frozenset:
        return frozenset(self.class_of)

    def block_of(self, item) -> frozenset:
        return self.blocks[self.class_of[item]]

    def support(self, item) -> int:
        """Size of the block holding ``item``."""
        return len(self.block_of(item))

    def refines(self, coarser: "Partition") -> bool:
        """True when every block lies inside a single block of ``coarser``."""
        return all(len({coarser.class_of[i] for i in b}) == 1 for b in self.blocks)


# ------------------------------------------------------------ base functions


def entity_names(node: Tree) -> frozenset[str]:
    return frozenset(n.label.value for _, n in node.walk() if n.label.kind is Kind.ENTITY)


class SimilarityFn:
    """A symmetric node comparison ``f`` in [0, 1] with ``f(x, x) == 1``.

    ``key`` extracts the features ``compare`` needs, which lets callers cache
    features per node and compare many pairs cheaply.
    """

    name = "abstract"

    def key(self, node: Tree) -> Hashable:
        raise NotImplementedError

    def compare(self, ka, kb) -> float:
        raise NotImplementedError

    def __call__(self, a: Tree, b: Tree) -> float:
        return self.compare(self.key(a), self.key(b))


class JaccardEntityNames(SimilarityFn):
    """Jaccard index of the entity-name sets; two empty sets count as identical."""

    name = "jaccard"

    def key(self, node):
        return entity_names(node)

    def compare(self, ka, kb):
        if ka == kb:
            return 1.0
        union = len(ka | kb)
        return len(ka & kb) / union if union else 1.0


class LabelMultisetJaccard(SimilarityFn):
    """Weighted Jaccard over the multiset of non-token labels."""

    name = "jaccard-multiset"

    def key(self, node):
        counts = Counter(str(n.label) for _, n in node.walk() if n.label.kind is not Kind.TOKEN)
        return frozenset(counts.items())

    def compare(self, ka, kb):
        if ka == kb:
            return 1.0
        a, b = dict(ka), dict(kb)
        names = a.keys() | b.keys()
        top = sum(min(a.get(n, 0), b.get(n, 0)) for n in names)
        bottom = sum(max(a.get(n, 0), b.get(n, 0)) for n in names)
        return top / bottom if bottom else 1.0


class TreeEditSimilarity(SimilarityFn):
    """``1 - ted(a, b) / max(|a|, |b|)`` with unit costs (Zhang-Shasha).

    Tokens are ignored so that only structure and categories count.  Sub-trees
    larger than ``max_nodes`` fall back to the size-difference bound, since the
    exact distance is cubic in tree size.
    """

    name = "tree-edit"

    def __init__(self, max_nodes: int = 64):
        self.max_nodes = max_nodes

    def key(self, node):
        return _strip_tokens(node)

    def compare(self, ka, kb):
        if ka == kb:
            return 1.0
        return _ted_similarity(ka, kb, self.max_nodes)


def _strip_tokens(node: Tree) -> Tree:
    return Tree(node.label, (_strip_tokens(c) for c in node.children if c.label.kind is not Kind.TOKEN))


@lru_cache(maxsize=65536)
def _ted_similarity(a: Tree, b: Tree, max_nodes: int) -> float:
    big = max(a.size, b.size)
    if big > max_nodes:
        return 1.0 - abs(a.size - b.size) / big
    import zss

    dist = zss.simple_distance(
        a,
        b,
        get_children=lambda n: list(n.children),
        get_label=lambda n: str(n.label),
        label_dist=lambda x, y: 0 if x == y else 1,
    )
    return max(0.0, 1.0 - dist / big)


_FUNCTIONS = {
    "jaccard": JaccardEntityNames,
    "jaccard-multiset": LabelMultisetJaccard,
    "tree-edit": TreeEditSimilarity,
}


def make_similarity(name: str) -> SimilarityFn:
    try:
        return _FUNCTIONS[name]()
    except KeyError:
        raise ValueError(f"unknown similarity {name!r}; choose from {sorted(_FUNCTIONS)}") from None


@dataclass(frozen=True)
class SimParams:
    f: SimilarityFn = field(default_factory=JaccardEntityNames)
    tau: float = 0.7

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")


# ------------------------------------------------------- contextual similarity


def level_weights(d: int) -> np.ndarray:
    """Harmonic weights ``1/(i+1)`` for levels ``0..d``."""
    return 1.0 / np.arange(1, d + 2)


def weighted_similarity(values: Sequence[float]) -> float:
    """Combine per-level scores (level 0 first) into the contextual similarity."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("need at least one level")
    w = level_weights(values.size - 1)
    return float(np.dot(w, values) / w.sum())


def sim(x: SubTreeRef, y: SubTreeRef, f: SimilarityFn) -> float:
    d = min(x.depth, y.depth)
    values = [f(x.tree[x.at[: len(x.at) - i]], y.tree[y.at[: len(y.at) - i]]) for i in range(d + 1)]
    return weighted_similarity(values)


def _signature_sim(sa: tuple, sb: tuple, compare) -> float:
    d = min(len(sa), len(sb))
    return weighted_similarity([compare(sa[i], sb[i]) for i in range(d)])


# ---------------------------------------------------------------- clustering


def single_link_partition(items: Sequence, similarity: Callable, tau: float) -> Partition:
    """Blocks of the transitive closure of ``similarity(a, b) >= tau``.

    Pairs are visited in input order; the result does not depend on it.
    """
    items = list(items)
    forest = DisjointSet(items)
    for a, b in combinations(items, 2):
        if forest.connected(a, b):
            continue
        if similarity(a, b) >= tau:
            forest.merge(a, b)
    return Partition(tuple(forest.subsets()))


def threshold_partition(matrix, tau: float) -> Partition:
    """Single-link cut of a symmetric similarity matrix over indices ``0..n-1``."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("similarity matrix must be square")
    return single_link_partition(range(m.shape[0]), lambda i, j: m[i, j], tau)


def equivalence_classes(tree: Tree, scope: Iterable[Position], params: SimParams) -> Partition:
    """Partition ``scope`` by the transitive closure of ``sim >= tau``.

    Positions with identical ancestor signatures are trivially similar, so
    the pairwise pass only runs over distinct signatures.
    """
    scope = sorted(set(scope))
    if not scope:
        return Partition(())
    f = params.f
    keys: dict[Position, Hashable] = {}

    def key(pos):
        k = keys.get(pos)
        if k is None:
            k = keys[pos] = f.key(tree[pos])
        return k

    sigs: dict[Position, tuple] = {}
    for pos in scope:
        sigs[pos] = tuple(key(pos[: len(pos) - i]) for i in range(len(pos) + 1))

    distinct = list(dict.fromkeys(sigs.values()))
    cache: dict = {}

    def compare(ka, kb):
        if ka is kb or ka == kb:
            return 1.0
        pair = (ka, kb) if hash(ka) <= hash(kb) else (kb, ka)
        v = cache.get(pair)
        if v is None:
            v = cache[pair] = f.compare(ka, kb)
        return v

    ids = range(len(distinct))
    threads = thread_count()
    if threads > 1 and len(distinct) > 64:
        # precompute the thresholded graph in parallel, merge sequentially
        def row(i):
            return [j for j in range(i + 1, len(distinct))
                    if _signature_sim(distinct[i], distinct[j], f.compare) >= params.tau]

        with ThreadPoolExecutor(threads) as pool:
            edges = list(pool.map(row, ids))
        forest = DisjointSet(ids)
        for i, js in enumerate(edges):
            for j in js:
                forest.merge(i, j)
        sig_blocks = Partition(tuple(forest.subsets()))
    else:
        sig_blocks = single_link_partition(
            ids, lambda i, j: _signature_sim(distinct[i], distinct[j], compare), params.tau
        )
    sig_index = {s: i for i, s in enumerate(distinct)}
    return Partition.from_keys({pos: sig_blocks.class_of[sig_index[sigs[pos]]] for pos in scope})


def label_classes(tree: Tree) -> Partition:
    """Partition of the whole domain by exact label equality."""
    return Partition.from_keys({pos: node.label for pos, node in tree.walk()})
