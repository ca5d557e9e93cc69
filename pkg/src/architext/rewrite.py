"""The structuring loop: rewrite an instance until its grammar is valid.

Each iteration computes threshold equivalence classes over the internal
nodes, then tries the operations below in order and keeps the first one that
changes the tree:

    0 find_groups            label frequent entity groupings GROUP_k
    1 find_subgroups         split a group around a more frequent subset
    2 merge_groups           grow a group with sibling groups or entities
    3 find_collections       wrap equivalent sibling groups in COLL_k
    4 find_relations         label a node over two distinct groups REL_k
    5 find_collections       the same for relations
    6 reduce_bottom          drop unlabelled levels above loose entities
    7 reduce_top             drop every remaining unlabelled level

The last two only run when none of the first six applies.  Every operation
works on the whole tree at once and returns ``None`` when nothing changes.
"""
from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Optional, Sequence

from .grammar import CondensedGrammar, extract_grammar
from .metagrammar import validate, validity_frontier
from .similarity import Partition, SimParams, _signature_sim, equivalence_classes
from .tree import Kind, Label, Position, Tree, replace_at, splice_children

log = logging.getLogger(__name__)

__all__ = [
    "Op",
    "StructuringConfig",
    "NameRegistry",
    "IterationMetrics",
    "IterationLog",
    "StructuringResult",
    "Context",
    "candidate_scope",
    "support",
    "find_groups",
    "find_subgroups",
    "merge_candidates",
    "merge_groups",
    "find_relations",
    "find_collections",
    "reduce_bottom",
    "reduce_top",
    "compute_metrics",
    "structure",
    "CSV_HEADER",
]

# wrapper label for nodes that lose their category
UNLABELLED = Label.syn("X")


class Op(enum.IntEnum):
    NONE = -1
    FIND_GROUPS = 0
    FIND_SUBGROUPS = 1
    MERGE_GROUPS = 2
    FIND_COLLECTIONS_OF_GROUPS = 3
    FIND_RELATIONSHIPS = 4
    FIND_COLLECTIONS_OF_RELATIONSHIPS = 5
    REDUCE_BOTTOM = 6
    REDUCE_TOP = 7


@dataclass(frozen=True)
class StructuringConfig:
    sim: SimParams = field(default_factory=SimParams)
    min_support: int = 2
    max_cycles: int = 50

    def __post_init__(self):
        if self.min_support < 1:
            raise ValueError("min_support must be at least 1")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")


class NameRegistry:
    """Dense ids per category; one id per fingerprint, never reused."""

    def __init__(self):
        self._next = {Kind.GROUP: 0, Kind.REL: 0, Kind.COLL: 0}
        self._ids: dict = {}

    def reserve(self, tree: Tree) -> None:
        """Skip ids already present in ``tree``."""
        for _, node in tree.walk():
            kind = node.label.kind
            if kind in self._next and node.label.value.isdigit():
                self._next[kind] = max(self._next[kind], int(node.label.value) + 1)

    def name(self, kind: Kind, fingerprint) -> str:
        key = (kind, fingerprint)
        if key not in self._ids:
            self._ids[key] = str(self._next[kind])
            self._next[kind] += 1
        return self._ids[key]


# ----------------------------------------------------------------- helpers


def _top_entities(node: Tree) -> list[Tree]:
    """Outermost entity nodes below ``node`` in document order."""
    out = []
    for c in node.children:
        if c.label.kind is Kind.ENTITY:
            out.append(c)
        elif c.label.kind is not Kind.TOKEN:
            out.extend(_top_entities(c))
    return out


def _has_structure(node: Tree) -> bool:
    return any(n.label.is_structural for _, n in node.walk())


def _groupable(node: Tree) -> bool:
    """Unlabelled, no structure below, distinct entity names."""
    if not node.children or not node.label.is_unlabelled or _has_structure(node):
        return False
    names = [e.label.value for e in _top_entities(node)]
    return bool(names) and len(set(names)) == len(names)


def _group_like(node: Tree) -> bool:
    if node.label.kind is Kind.GROUP:
        return True
    return (
        node.label.is_unlabelled
        and bool(node.children)
        and all(c.label.kind is Kind.ENTITY for c in node.children)
    )


def _is_ancestor(a: Position, b: Position) -> bool:
    return len(a) < len(b) and b[: len(a)] == a


def candidate_scope(tree: Tree) -> list[Position]:
    """Internal nodes that may be restructured: not the root, entities or tokens."""
    return [
        p
        for p, n in tree.walk()
        if p and n.children and n.label.kind not in (Kind.ENTITY, Kind.TOKEN, Kind.ROOT)
    ]


class Context:
    """Equivalence classes of one iteration plus support bookkeeping."""

    def __init__(self, tree: Tree, params: SimParams, partition: Optional[Partition] = None):
        self.tree = tree
        self.params = params
        self.partition = partition if partition is not None else equivalence_classes(
            tree, candidate_scope(tree), params
        )
        f = params.f
        self._keys: dict[Position, object] = {}
        self.sigs = {p: self.signature(p) for p in self.partition.items}
        self._group_like = {p: _group_like(tree[p]) for p in self.partition.items}
        self._block_counts = [sum(self._group_like[p] for p in b) for b in self.partition.blocks]
        # distinct signatures with the blocks they occur in
        self._sig_blocks: dict[tuple, int] = {}
        for p, s in self.sigs.items():
            self._sig_blocks.setdefault(s, self.partition.class_of[p])
        self._cmp_cache: dict = {}
        self._support_cache: dict = {}

    def key(self, pos: Position):
        k = self._keys.get(pos)
        if k is None:
            k = self._keys[pos] = self.params.f.key(self.tree[pos])
        return k

    def signature(self, pos: Position) -> tuple:
        return tuple(self.key(pos[: len(pos) - i]) for i in range(len(pos) + 1))

    def _compare(self, ka, kb) -> float:
        if ka is kb or ka == kb:
            return 1.0
        pair = (ka, kb) if hash(ka) <= hash(kb) else (kb, ka)
        v = self._cmp_cache.get(pair)
        if v is None:
            v = self._cmp_cache[pair] = self.params.f.compare(ka, kb)
        return v

    def group_support(self, pos: Position) -> int:
        """Group-like members in the class of ``pos``."""
        return self._block_counts[self.partition.class_of[pos]]

    def linked_blocks(self, sig: tuple) -> set[int]:
        tau = self.params.tau
        return {
            b for s, b in self._sig_blocks.items()
            if _signature_sim(sig, s, self._compare) >= tau
        }

    def hypothetical_support(self, sig: tuple, removed: Iterable[Position] = ()) -> int:
        """Support of a new group with signature ``sig`` replacing ``removed``.

        The new node joins every class it is similar to.  Classes holding one
        of the replaced nodes are not counted: a node that absorbs its parts
        is always similar to them, which says nothing about its frequency.
        """
        blocks = self._support_cache.get(sig)
        if blocks is None:
            blocks = self._support_cache[sig] = frozenset(self.linked_blocks(sig))
        own = {self.partition.class_of[p] for p in removed if p in self.partition.class_of}
        return 1 + sum(self._block_counts[b] for b in blocks - own)

    def common_group_id(self, blocks: Iterable[int]) -> Optional[str]:
        ids = Counter(
            self.tree[p].label.value
            for b in sorted(blocks)
            for p in self.partition.blocks[b]
            if self.tree[p].label.kind is Kind.GROUP
        )
        if not ids:
            return None
        return min(ids, key=lambda i: (-ids[i], _id_order(i)))


def _id_order(value: str):
    return (0, int(value), "") if value.isdigit() else (1, 0, value)


def support(tree: Tree, partition: Partition, pos: Position) -> int:
    """Number of members in the class of ``pos``."""
    return partition.support(pos)


# ------------------------------------------------------------------ findGroups


def find_groups(
    tree: Tree, partition: Partition, min_support: int, registry: NameRegistry
) -> Optional[Tree]:
    """Relabel members of frequent classes as groups of their entities.

    Members are visited deepest first (ties by position) so that inner
    groupings win over the sentences that contain them.  Intermediate nodes
    below a new group are dissolved.
    """
    frequent = {k for k, b in enumerate(partition.blocks) if len(b) >= min_support}
    members = [p for k in frequent for p in partition.blocks[k] if p in tree and _groupable(tree[p])]
    if not members:
        return None
    members.sort(key=lambda p: (-len(p), p))
    names: dict[int, set] = {}
    for p in members:
        names.setdefault(partition.class_of[p], set()).update(e.label.value for e in _top_entities(tree[p]))
    ids: dict[int, str] = {}
    done: list[Position] = []
    for p in members:
        if any(_is_ancestor(g, p) or _is_ancestor(p, g) for g in done):
            continue
        node = tree[p]
        if not _groupable(node):
            continue
        k = partition.class_of[p]
        if k not in ids:
            existing = Counter(
                tree[q].label.value for q in partition.blocks[k]
                if q in tree and tree[q].label.kind is Kind.GROUP
            )
            if existing:
                ids[k] = min(existing, key=lambda i: (-existing[i], _id_order(i)))
            else:
                ids[k] = registry.name(Kind.GROUP, frozenset(names[k]))
        tree = replace_at(tree, p, [Tree(Label.group(ids[k]), _top_entities(node))])
        done.append(p)
    return tree if done else None


# --------------------------------------------------------------- findSubgroups


def _group_id_for(ctx: Context, sig: tuple, names: Iterable[str], registry: NameRegistry) -> str:
    gid = ctx.common_group_id(ctx._support_cache.get(sig) or ctx.linked_blocks(sig))
    return gid if gid is not None else registry.name(Kind.GROUP, frozenset(names))


def find_subgroups(ctx: Context, registry: NameRegistry) -> Optional[Tree]:
    """Split groups that contain a strictly more frequent subset of their entities.

    ``st`` becomes an unlabelled node over the new subgroup and the leftover
    entities.  Subsets are tried largest first, then in child order.
    """
    tree = ctx.tree
    f = ctx.params.f
    changed = False
    for st in sorted(ctx.partition.items):
        node = tree[st]
        if not _group_like(node) or len(node.children) < 2:
            continue
        base = ctx.group_support(st)
        outer = node.label if node.label.is_unlabelled else UNLABELLED
        kids = node.children
        n = len(kids)
        done = False
        for size in range(n - 1, 0, -1):
            for combo in combinations(range(n), size):
                sub = Tree(Label.group("?"), [kids[i] for i in combo])
                rest = [kids[i] for i in range(n) if i not in combo]
                wrapper = Tree(outer, [sub, *rest])
                sig = (f.key(sub), f.key(wrapper)) + ctx.sigs[st][1:]
                if ctx.hypothetical_support(sig, [st]) <= base:
                    continue
                gid = _group_id_for(ctx, sig, (c.label.value for c in sub.children), registry)
                sub = Tree(Label.group(gid), sub.children)
                tree = replace_at(tree, st, [Tree(outer, [sub, *rest])])
                changed = done = True
                break
            if done:
                break
    return tree if changed else None


# ----------------------------------------------------------------- mergeGroups


def merge_candidates(
    groups: Sequence, entities: Sequence, class_of: Callable, size: int
) -> list[tuple]:
    """Combinations of ``size`` siblings with at most one group per class.

    ``groups`` and ``entities`` hold sibling identifiers in child order; the
    combinations come out in lexicographic order over ``groups + entities``.
    """
    items = list(groups) + list(entities)
    gset = set(groups)
    out = []
    for combo in combinations(items, size):
        classes = [class_of(x) for x in combo if x in gset]
        if len(classes) != len(set(classes)):
            continue
        out.append(combo)
    return out


def merge_groups(ctx: Context, registry: NameRegistry) -> Optional[Tree]:
    """Merge sibling groups and entities into a larger, more frequent group."""
    tree = ctx.tree
    f = ctx.params.f
    changed = False
    touched: list[Position] = []
    for st in sorted(ctx.partition.items):
        if any(_is_ancestor(t, st) for t in touched):
            continue
        node = tree[st]
        if not node.label.is_unlabelled:
            continue
        gpos = [st + (i,) for i, c in enumerate(node.children) if c.label.kind is Kind.GROUP]
        epos = [st + (i,) for i, c in enumerate(node.children) if c.label.kind is Kind.ENTITY]
        if not gpos or len(gpos) + len(epos) < 2:
            continue
        n_classes = len({ctx.partition.class_of[g] for g in gpos})
        top = n_classes + len(epos)
        found = False
        for size in range(top, 1, -1):
            for combo in merge_candidates(gpos, epos, ctx.partition.class_of.__getitem__, size):
                members = [g for g in combo if g in gpos]
                if not members:
                    continue
                ents = []
                for q in sorted(combo):
                    c = tree[q]
                    ents.extend(c.children if c.label.kind is Kind.GROUP else [c])
                names = [e.label.value for e in ents]
                if len(set(names)) != len(names):
                    continue
                merged = Tree(Label.group("?"), ents)
                kids = []
                for i, c in enumerate(node.children):
                    q = st + (i,)
                    if q == min(combo):
                        kids.append(merged)
                    elif q not in combo:
                        kids.append(c)
                sig = (f.key(merged), f.key(Tree(node.label, kids))) + ctx.sigs[st][1:]
                base = max(ctx.group_support(g) for g in members)
                if ctx.hypothetical_support(sig, members) <= base:
                    continue
                gid = _group_id_for(ctx, sig, names, registry)
                kids = [Tree(Label.group(gid), ents) if c is merged else c for c in kids]
                tree = splice_children(tree, st, kids)
                touched.append(st)
                changed = found = True
                break
            if found:
                break
    return tree if changed else None


# --------------------------------------------------------------- findRelations


def _rel_name(registry: NameRegistry, a: str, b: str) -> str:
    return registry.name(Kind.REL, frozenset((a, b)))


def find_relations(tree: Tree, registry: NameRegistry) -> Optional[Tree]:
    """Label nodes over two distinct groups as relations.

    A node over one group and a collection of groups is replaced by one
    relation per collection member, each pairing the group with that member.
    """

    def walk(node: Tree, is_root: bool) -> list[Tree]:
        kids = []
        for c in node.children:
            kids.extend(walk(c, False))
        node = Tree(node.label, kids) if kids != list(node.children) else node
        if is_root or not node.label.is_unlabelled or len(node.children) != 2:
            return [node]
        a, b = node.children
        ka, kb = a.label.kind, b.label.kind
        if ka is Kind.GROUP and kb is Kind.GROUP:
            if a.label.value == b.label.value:
                return [node]
            return [Tree(Label.rel(_rel_name(registry, a.label.value, b.label.value)), (a, b))]
        if {ka, kb} == {Kind.GROUP, Kind.COLL}:
            coll = b if kb is Kind.COLL else a
            group = a if coll is b else b
            if not coll.children or any(m.label.kind is not Kind.GROUP for m in coll.children):
                return [node]
            if any(m.label.value == group.label.value for m in coll.children):
                return [node]
            out = []
            for m in coll.children:
                pair = (group, m) if coll is b else (m, group)
                out.append(Tree(Label.rel(_rel_name(registry, group.label.value, m.label.value)), pair))
            return out
        return [node]

    new = walk(tree, True)[0]
    return None if new == tree else new


# ------------------------------------------------------------- findCollections


def _collect_children(children: Sequence[Tree], kind: Kind, registry: NameRegistry) -> Optional[list[Tree]]:
    def klass(c: Tree) -> Optional[str]:
        if c.label.kind is kind:
            return c.label.value
        if c.label.kind is Kind.COLL and c.children:
            values = {m.label.value for m in c.children if m.label.kind is kind}
            if len(values) == 1 and all(m.label.kind is kind for m in c.children):
                return values.pop()
        return None

    classes = [klass(c) for c in children]
    plain = Counter(k for k, c in zip(classes, children) if k is not None and c.label.kind is kind)
    colls = Counter(k for k, c in zip(classes, children) if k is not None and c.label.kind is Kind.COLL)
    changing = [
        k for k in dict.fromkeys(x for x in classes if x is not None)
        if plain[k] >= 2 or colls[k] >= 2 or (plain[k] >= 1 and colls[k] >= 1)
    ]
    if not changing:
        return None
    keep = [c for k, c in zip(classes, children) if k not in changing]
    for k in changing:
        members, cid = [], None
        for kk, c in zip(classes, children):
            if kk != k:
                continue
            if c.label.kind is Kind.COLL:
                cid = cid or c.label.value
                members.extend(c.children)
            else:
                members.append(c)
        cid = cid or registry.name(Kind.COLL, (kind, k))
        keep.append(Tree(Label.coll(cid), members))
    return keep


def find_collections(tree: Tree, kind: Kind, registry: NameRegistry) -> Optional[Tree]:
    """Wrap same-kind siblings of unlabelled nodes (or the root) in collections.

    Siblings are equivalent when they carry the same label.  A collection
    nested in one with the same label is spliced into it.  Existing
    collections of one class are merged and stray equivalent siblings join
    them.  Untouched children keep their order and new collections follow,
    in order of first occurrence.
    """
    if kind not in (Kind.GROUP, Kind.REL):
        raise ValueError("collections hold groups or relations")

    def walk(node: Tree) -> Tree:
        kids = [walk(c) for c in node.children]
        if node.label.kind is Kind.COLL:
            # a split member can leave a copy of the collection inside itself
            flat = []
            for c in kids:
                flat.extend(c.children if c.label == node.label else [c])
            kids = flat
        elif node.label.kind is Kind.ROOT or node.label.is_unlabelled:
            new = _collect_children(kids, kind, registry)
            if new is not None:
                kids = new
        return Tree(node.label, kids)

    new = walk(tree)
    return None if new == tree else new


# ---------------------------------------------------------------------- reduce


def _wrap_id(tree: Tree, name: str, registry: NameRegistry) -> str:
    counts = Counter()
    for _, n in tree.walk():
        if n.label.kind is Kind.GROUP and any(e.label.value == name for e in n.children):
            counts[n.label.value] += 1
    if counts:
        return min(counts, key=lambda i: (-counts[i], _id_order(i)))
    return registry.name(Kind.GROUP, frozenset((name,)))


def reduce_bottom(tree: Tree, registry: Optional[NameRegistry] = None) -> Optional[Tree]:
    """Remove unlabelled levels directly above loose entities.

    Works bottom-up: an unlabelled node that is unary or holds only entities
    is replaced by its children.  When no level can be removed, entities that
    still sit next to structures (or repeat at the root) are wrapped in a
    group, reusing the most frequent group that already holds that entity.
    """
    registry = registry or NameRegistry()

    def collapse(node: Tree, is_root: bool) -> list[Tree]:
        if node.label.kind in (Kind.ENTITY, Kind.TOKEN) or node.label.is_structural:
            return [node]
        kids = []
        for c in node.children:
            kids.extend(collapse(c, False))
        node = Tree(node.label, kids)
        if is_root or not node.label.is_unlabelled:
            return [node]
        if len(kids) == 1 or (kids and all(c.label.kind is Kind.ENTITY for c in kids)):
            return kids
        return [node]

    new = collapse(tree, True)[0]
    if new != tree:
        return new

    def wrap(node: Tree, is_root: bool) -> Tree:
        if node.label.kind in (Kind.ENTITY, Kind.TOKEN) or node.label.kind is Kind.GROUP:
            return node
        kids = [wrap(c, False) for c in node.children]
        loose = [c for c in kids if c.label.kind is Kind.ENTITY]
        if loose and (node.label.is_unlabelled or node.label.kind is Kind.ROOT):
            names = Counter(c.label.value for c in loose)
            structured = any(c.label.kind is not Kind.ENTITY for c in kids)
            if not is_root or structured or any(v > 1 for v in names.values()):
                if is_root and not structured:
                    targets = {n for n, v in names.items() if v > 1}
                else:
                    targets = set(names)
                kids = [
                    Tree(Label.group(_wrap_id(tree, c.label.value, registry)), (c,))
                    if c.label.kind is Kind.ENTITY and c.label.value in targets else c
                    for c in kids
                ]
        return Tree(node.label, kids)

    new = wrap(tree, True)
    return None if new == tree else new


def reduce_top(tree: Tree) -> Optional[Tree]:
    """Delete every unlabelled internal node below the root, promoting its children."""

    def walk(node: Tree, is_root: bool) -> list[Tree]:
        if node.label.kind in (Kind.ENTITY, Kind.TOKEN):
            return [node]
        kids = []
        for c in node.children:
            kids.extend(walk(c, False))
        if not is_root and node.label.is_unlabelled and node.children:
            return kids
        return [Tree(node.label, kids)]

    new = walk(tree, True)[0]
    return None if new == tree else new


# --------------------------------------------------------------------- metrics

CSV_HEADER = (
    "iteration,op,nb_prod,nb_unlabelled,nb_group,nb_rel,nb_coll,nb_equiv,"
    "mean_group_inst,mean_rel_inst,mean_coll_inst"
)


@dataclass(frozen=True)
class IterationMetrics:
    nb_prod: int
    nb_unlabelled: int
    nb_group: int
    nb_rel: int
    nb_coll: int
    nb_equiv: int
    mean_group_inst: float
    mean_rel_inst: float
    mean_coll_inst: float


@dataclass(frozen=True)
class IterationLog:
    iteration: int
    op: Op
    metrics: IterationMetrics
    tried: tuple = ()

    def csv_row(self) -> str:
        m = self.metrics
        return (
            f"{self.iteration},{int(self.op)},{m.nb_prod},{m.nb_unlabelled},{m.nb_group},"
            f"{m.nb_rel},{m.nb_coll},{m.nb_equiv},{m.mean_group_inst:.4f},"
            f"{m.mean_rel_inst:.4f},{m.mean_coll_inst:.4f}"
        )


def compute_metrics(tree: Tree, grammar: CondensedGrammar, nb_equiv: int) -> IterationMetrics:
    unlabelled = 0
    inst = {Kind.GROUP: Counter(), Kind.REL: Counter(), Kind.COLL: Counter()}
    for p, n in tree.walk():
        if p and n.children and n.label.is_unlabelled:
            unlabelled += 1
        if n.label.kind in inst:
            inst[n.label.kind][n.label.value] += 1

    def mean(c: Counter) -> float:
        return sum(c.values()) / len(c) if c else 0.0

    return IterationMetrics(
        nb_prod=len(grammar),
        nb_unlabelled=unlabelled,
        nb_group=len(inst[Kind.GROUP]),
        nb_rel=len(inst[Kind.REL]),
        nb_coll=len(inst[Kind.COLL]),
        nb_equiv=nb_equiv,
        mean_group_inst=mean(inst[Kind.GROUP]),
        mean_rel_inst=mean(inst[Kind.REL]),
        mean_coll_inst=mean(inst[Kind.COLL]),
    )


# ------------------------------------------------------------------------ loop


@dataclass
class StructuringResult:
    instance: Tree
    grammar: CondensedGrammar
    log: list
    valid: bool
    iterations: int
    best_iteration: int
    frontier: frozenset = frozenset()

    def metrics_csv(self) -> str:
        return CSV_HEADER + "\n" + "".join(entry.csv_row() + "\n" for entry in self.log)


def _apply(op: Op, ctx: Context, config: StructuringConfig, registry: NameRegistry) -> Optional[Tree]:
    t = ctx.tree
    if op is Op.FIND_GROUPS:
        return find_groups(t, ctx.partition, config.min_support, registry)
    if op is Op.FIND_SUBGROUPS:
        return find_subgroups(ctx, registry)
    if op is Op.MERGE_GROUPS:
        return merge_groups(ctx, registry)
    if op is Op.FIND_COLLECTIONS_OF_GROUPS:
        return find_collections(t, Kind.GROUP, registry)
    if op is Op.FIND_RELATIONSHIPS:
        return find_relations(t, registry)
    if op is Op.FIND_COLLECTIONS_OF_RELATIONSHIPS:
        return find_collections(t, Kind.REL, registry)
    if op is Op.REDUCE_BOTTOM:
        return reduce_bottom(t, registry)
    if op is Op.REDUCE_TOP:
        return reduce_top(t)
    raise ValueError(op)


ORDER = tuple(Op)[1:]


def structure(
    instance: Tree,
    config: Optional[StructuringConfig] = None,
    registry: Optional[NameRegistry] = None,
) -> StructuringResult:
    """Rewrite ``instance`` until its extracted grammar validates or the budget runs out.

    On budget exhaustion the instance with the smallest validity frontier is
    returned, which is not necessarily the last one.
    """
    config = config or StructuringConfig()
    registry = registry or NameRegistry()
    registry.reserve(instance)
    tree = instance
    grammar = extract_grammar(tree)
    report = validate(grammar)
    ctx = Context(tree, config.sim)
    entries = [IterationLog(0, Op.NONE, compute_metrics(tree, grammar, len(ctx.partition)))]
    if not tree.children:
        # nothing to structure: the empty grammar describes the empty corpus
        return StructuringResult(tree, CondensedGrammar(), entries, True, 0, 0)
    best = (len(validity_frontier(grammar, tree)), 0, tree, grammar)
    iteration = 0
    while not report.valid and iteration < config.max_cycles:
        iteration += 1
        if ctx.tree is not tree:
            ctx = Context(tree, config.sim)
        applied, tried, new = Op.NONE, [], None
        for op in ORDER:
            tried.append(op)
            new = _apply(op, ctx, config, registry)
            if new is not None and new != tree:
                applied = op
                break
        if applied is Op.NONE:
            entries.append(IterationLog(iteration, Op.NONE, entries[-1].metrics, tuple(tried)))
            log.info("iteration %d: no operation applies; stopping", iteration)
            break
        tree = new
        grammar = extract_grammar(tree)
        report = validate(grammar)
        metrics = compute_metrics(tree, grammar, len(ctx.partition))
        entries.append(IterationLog(iteration, applied, metrics, tuple(tried)))
        log.debug("iteration %d: %s, %d rules", iteration, applied.name, len(grammar))
        if not report.valid:
            size = len(validity_frontier(grammar, tree))
            if size < best[0]:
                best = (size, iteration, tree, grammar)
    if report.valid:
        return StructuringResult(tree, grammar, entries, True, iteration, iteration)
    size, at, best_tree, best_grammar = best
    return StructuringResult(
        best_tree, best_grammar, entries, False, iteration, at,
        frozenset(validity_frontier(best_grammar, best_tree)),
    )
