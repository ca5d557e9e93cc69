"""Corpus ingestion: syntax trees plus entity spans to a single instance tree.

Inputs are a trees file (one bracketed tree per line, ``#`` comments, an
optional ``id<TAB>`` prefix) and a TSV of entity spans::

    sentence	entity	start	end
    0	SOSY	1	2

Spans are 0-based and inclusive over the sentence's tokens.  The sentence
column refers to the sentence id, which defaults to its ordinal in the file.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .similarity import thread_count
from .tree import BracketError, Kind, Label, Position, Tree, splice_children

log = logging.getLogger(__name__)

__all__ = [
    "NamedEntity",
    "AnnotatedSentence",
    "CorpusConfig",
    "CorpusError",
    "parse_trees",
    "parse_entities",
    "read_sentences",
    "read_corpus",
    "merge",
    "insert_entities",
    "unnest_entities",
    "flatten_conjunctions",
    "simplify",
    "enrich",
    "build_instance",
    "load_instance",
    "entity_inventory",
    "write_entities",
]


class CorpusError(ValueError):
    """Malformed corpus input."""


@dataclass(frozen=True, order=True)
class NamedEntity:
    name: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise CorpusError(f"bad span {self.start}..{self.end} for {self.name}")
        if not self.name or any(ch.isspace() or ch in "()" for ch in self.name):
            raise CorpusError(f"bad entity name {self.name!r}")

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class AnnotatedSentence:
    tree: Tree
    entities: tuple[NamedEntity, ...] = ()
    sid: str = ""

    @property
    def token_positions(self) -> list[Position]:
        return token_positions(self.tree)


@dataclass(frozen=True)
class CorpusConfig:
    conjunction_tags: frozenset = frozenset({"CONJ"})
    # phrases with a child carrying one of these tags count as coordinations
    coordinator_tags: frozenset = frozenset({"CC"})
    keep_tags: frozenset = frozenset({"ER", "EC"})


def token_positions(tree: Tree) -> list[Position]:
    return [p for p, n in tree.walk() if n.label.kind is Kind.TOKEN]


# -------------------------------------------------------------------- reading


def parse_trees(lines: Iterable[str]) -> list[tuple[str, Tree]]:
    out, seen = [], set()
    ordinal = 0
    for n, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sid, tab, rest = line.partition("\t")
        if not tab or sid.startswith("("):
            sid, rest = str(ordinal), line
        sid = sid.strip()
        if sid in seen:
            raise CorpusError(f"line {n}: duplicate sentence id {sid!r}")
        seen.add(sid)
        try:
            tree = Tree.from_bracketed(rest)
        except BracketError as exc:
            raise CorpusError(f"line {n}: {exc}") from None
        out.append((sid, tree))
        ordinal += 1
    return out


def parse_entities(lines: Iterable[str]) -> dict[str, list[NamedEntity]]:
    rows = [r for r in csv.reader(lines, delimiter="\t") if r and not r[0].startswith("#")]
    if not rows:
        return {}
    header = [c.strip() for c in rows[0]]
    if header != ["sentence", "entity", "start", "end"]:
        raise CorpusError("entities header must be: sentence, entity, start, end")
    out: dict[str, list[NamedEntity]] = {}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise CorpusError(f"entities row {n}: expected 4 columns, got {len(row)}")
        try:
            ent = NamedEntity(row[1].strip(), int(row[2]), int(row[3]))
        except ValueError as exc:
            raise CorpusError(f"entities row {n}: {exc}") from None
        out.setdefault(row[0].strip(), []).append(ent)
    return out


def read_sentences(trees_path, entities_path=None) -> list[AnnotatedSentence]:
    with open(trees_path, encoding="utf-8") as fh:
        trees = parse_trees(fh)
    spans: dict[str, list[NamedEntity]] = {}
    if entities_path is not None:
        with open(entities_path, encoding="utf-8", newline="") as fh:
            spans = parse_entities(fh)
    ids = {sid for sid, _ in trees}
    unknown = sorted(set(spans) - ids)
    if unknown:
        raise CorpusError(f"entities refer to unknown sentences: {', '.join(unknown[:5])}")
    out = []
    for sid, tree in trees:
        ents = tuple(spans.get(sid, ()))
        n_tokens = len(token_positions(tree))
        for e in ents:
            if e.end >= n_tokens:
                raise CorpusError(
                    f"sentence {sid}: entity {e.name} span {e.start}..{e.end} exceeds {n_tokens} tokens"
                )
        out.append(AnnotatedSentence(tree, ents, sid))
    return out


def merge(trees: Sequence[Tree]) -> Tree:
    """Hang sentence trees under a common root, in order."""
    kids: list[Tree] = []
    for t in trees:
        if t.label.kind is Kind.ROOT:
            kids.extend(t.children)
        else:
            kids.append(t)
    return Tree(Label.root(), kids)


def read_corpus(trees_path, entities_path=None, config: Optional[CorpusConfig] = None) -> Tree:
    """The raw forest: every sentence tree under one root, entities unapplied."""
    return merge([s.tree for s in read_sentences(trees_path, entities_path)])


# -------------------------------------------------------------------- enrichment


def _token_span(node: Tree, offset: int) -> tuple[int, int]:
    n = sum(1 for _, x in node.walk() if x.label.kind is Kind.TOKEN)
    return offset, offset + n


def _insert(tree: Tree, ent: NamedEntity) -> Optional[Tree]:
    """Interpose an entity node over the span, or None when impossible."""
    tokens = token_positions(tree)
    first, last = tokens[ent.start], tokens[ent.end]
    if ent.start == ent.end:
        parent, i = first[:-1], first[-1]
        node = tree[parent]
        kids = list(node.children)
        kids[i] = Tree(Label.ent(ent.name), (kids[i],))
        return splice_children(tree, parent, kids)
    k = 0
    while k < min(len(first), len(last)) and first[k] == last[k]:
        k += 1
    u = first[:k]
    while True:
        node = tree[u]
        # token index range covered by each child of u
        spans, offset = [], _first_token_index(tree, u, tokens)
        for c in node.children:
            lo, hi = _token_span(c, offset)
            spans.append((lo, hi))
            offset = hi
        inside = [i for i, (lo, hi) in enumerate(spans) if lo <= ent.end and hi > ent.start and hi > lo]
        b, e = inside[0], inside[-1]
        straddling = [i for i in (b, e) if spans[i][0] < ent.start or spans[i][1] > ent.end + 1]
        if not straddling:
            break
        i = straddling[0]
        child = node.children[i]
        if child.label.kind is Kind.ENTITY or not child.children:
            log.warning("entity %s %d..%d crosses an existing entity; skipped", ent.name, ent.start, ent.end)
            return None
        kids = list(node.children[:i]) + list(child.children) + list(node.children[i + 1:])
        tree = splice_children(tree, u, kids)
        tokens = token_positions(tree)
    kids = list(node.children)
    wrapped = Tree(Label.ent(ent.name), kids[b:e + 1])
    return splice_children(tree, u, kids[:b] + [wrapped] + kids[e + 1:])


def _first_token_index(tree: Tree, u: Position, tokens: list[Position]) -> int:
    for idx, p in enumerate(tokens):
        if p[: len(u)] == u:
            return idx
    return len(tokens)


def insert_entities(sentence: AnnotatedSentence) -> Tree:
    """Add one entity node per span; longer spans are placed first."""
    tree = sentence.tree
    n_tokens = len(token_positions(tree))
    order = sorted(sentence.entities, key=lambda e: (-len(e), e.start, e.name))
    for ent in order:
        if ent.end >= n_tokens:
            raise CorpusError(f"entity {ent.name} span exceeds {n_tokens} tokens")
        new = _insert(tree, ent)
        if new is not None:
            tree = new
    return tree


def _token_leaves(node: Tree) -> list[Tree]:
    """Tokens in order, not descending into EC copies of inner entities."""
    if node.label.kind is Kind.TOKEN:
        return [node]
    out = []
    for c in node.children:
        if c.label != Label.aux("EC"):
            out.extend(_token_leaves(c))
    return out


def _has_entity_below(node: Tree) -> bool:
    return any(n.label.kind is Kind.ENTITY for p, n in node.walk() if p)


def _unnest(node: Tree) -> Tree:
    kids = tuple(_unnest(c) for c in node.children)
    node = Tree(node.label, kids)
    if node.label.kind is not Kind.ENTITY or not _has_entity_below(node):
        return node
    inner: list[Tree] = []

    def collect(n: Tree):
        for c in n.children:
            if c.label.kind is Kind.ENTITY or c.label == Label.aux("ER"):
                inner.append(c)
            else:
                collect(c)

    collect(node)
    outer = Tree(node.label, _token_leaves(node))
    return Tree(Label.aux("ER"), (outer, Tree(Label.aux("EC"), inner)))


def unnest_entities(tree: Tree) -> Tree:
    """Rewrite nested entities into ``ER[ENT, EC[inner...]]``, innermost first."""
    return _unnest(tree)


def _is_coordination(node: Tree, config: CorpusConfig) -> bool:
    if node.label.kind is not Kind.SYNTACTIC:
        return False
    if node.label.value in config.conjunction_tags:
        return True
    return any(c.label.kind is Kind.SYNTACTIC and c.label.value in config.coordinator_tags for c in node.children)


def flatten_conjunctions(tree: Tree, config: Optional[CorpusConfig] = None) -> Tree:
    """Splice nested coordinations of the same label into their parent."""
    config = config or CorpusConfig()

    def walk(node: Tree) -> Tree:
        kids = [walk(c) for c in node.children]
        if _is_coordination(node, config):
            flat = []
            for c in kids:
                if c.label == node.label and _is_coordination(c, config):
                    flat.extend(c.children)
                else:
                    flat.append(c)
            kids = flat
        return Tree(node.label, kids)

    return walk(tree)


def _prune(node: Tree) -> Optional[Tree]:
    if node.label.kind is Kind.ENTITY:
        return node
    kids = [k for k in (_prune(c) for c in node.children) if k is not None]
    if not kids:
        return None
    return Tree(node.label, kids)


def _collapse(node: Tree, keep: frozenset, is_root: bool) -> Tree:
    if node.label.kind is Kind.ENTITY:
        # inside an entity only the tokens matter
        return Tree(node.label, _token_leaves(node)) if any(c.children for c in node.children) else node
    kids = [_collapse(c, keep, False) for c in node.children]
    node = Tree(node.label, kids)
    while (
        not is_root
        and len(node.children) == 1
        and node.label.kind in (Kind.SYNTACTIC, Kind.AUX)
        and str(node.label) not in keep
    ):
        child = node.children[0]
        if child.children and child.label.kind is Kind.SYNTACTIC:
            # keep the upper label, drop the intermediate level
            node = Tree(node.label, child.children)
        else:
            return child
    return node


def simplify(tree: Tree, config: Optional[CorpusConfig] = None) -> Tree:
    """Drop entity-free sub-trees, then remove unary non-entity levels.

    Returns the bare root when nothing carries an entity.
    """
    config = config or CorpusConfig()
    if tree.label.kind is Kind.ROOT:
        kids = [k for k in (_prune(c) for c in tree.children) if k is not None]
        return _collapse(Tree(tree.label, kids), config.keep_tags, True)
    pruned = _prune(tree)
    if pruned is None:
        return Tree.empty()
    return _collapse(pruned, config.keep_tags, False)


def enrich(sentence: AnnotatedSentence, config: Optional[CorpusConfig] = None) -> Tree:
    """Per-sentence pipeline; the result is rooted so empty sentences vanish on merge."""
    config = config or CorpusConfig()
    flat = flatten_conjunctions(sentence.tree, config)
    tree = insert_entities(AnnotatedSentence(flat, sentence.entities, sentence.sid))
    tree = unnest_entities(tree)
    return simplify(Tree(Label.root(), (tree,)), config)


def build_instance(sentences: Sequence[AnnotatedSentence], config: Optional[CorpusConfig] = None) -> Tree:
    """Enrich and simplify every sentence, then merge them under one root."""
    config = config or CorpusConfig()
    threads = thread_count()
    if threads > 1 and len(sentences) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda s: enrich(s, config), sentences))
    else:
        parts = [enrich(s, config) for s in sentences]
    return merge(parts)


def load_instance(trees_path, entities_path=None, config: Optional[CorpusConfig] = None) -> Tree:
    return build_instance(read_sentences(trees_path, entities_path), config)


def entity_inventory(tree: Tree) -> list[tuple[str, tuple[str, ...]]]:
    """Sorted (entity name, token texts) pairs; preserved by every rewrite."""
    out = []
    for _, node in tree.walk():
        if node.label.kind is Kind.ENTITY:
            out.append((node.label.value, tuple(t.label.value for t in _token_leaves(node))))
    return sorted(out)


def write_entities(rows: Iterable[tuple[str, NamedEntity]], fh) -> None:
    writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
    writer.writerow(["sentence", "entity", "start", "end"])
    for sid, e in rows:
        writer.writerow([sid, e.name, e.start, e.end])
