"""Condensed context-free grammars extracted from instance trees.

Nodes are grouped by label; every class of internal nodes contributes one
production whose right-hand side lists the classes of its members' children.
A symbol is suffixed with ``+`` when some node has several children of that
class.  The text form is one rule per line::

    ROOT -> X+ Y
    X -> a b c
    Y -> a
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .similarity import Partition, label_classes
from .tree import Kind, Position, Tree

__all__ = [
    "Symbol",
    "Rule",
    "CondensedGrammar",
    "GrammarSyntaxError",
    "QuotientTree",
    "succ",
    "quotient",
    "extract_grammar",
    "accepts",
    "canonical_form",
    "DATA",
]

DATA = "<data>"


class GrammarSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, order=True)
class Symbol:
    name: str
    plus: bool = False

    def __str__(self) -> str:
        return self.name + ("+" if self.plus else "")

    @classmethod
    def parse(cls, text: str) -> "Symbol":
        plus = text.endswith("+")
        name = text[:-1] if plus else text
        if not name or "+" in name:
            raise GrammarSyntaxError(f"bad symbol {text!r}")
        return cls(name, plus)


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[Symbol, ...]

    def __str__(self) -> str:
        return " ".join([self.lhs, "->", *map(str, self.rhs)])

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.rhs)


@dataclass(frozen=True)
class CondensedGrammar:
    rules: tuple[Rule, ...] = ()

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    @property
    def start(self) -> Optional[str]:
        return self.rules[0].lhs if self.rules else None

    def rule_for(self, lhs: str) -> Optional[Rule]:
        for r in self.rules:
            if r.lhs == lhs:
                return r
        return None

    def to_text(self) -> str:
        return "".join(f"{r}\n" for r in self.rules)

    @classmethod
    def from_text(cls, text: str) -> "CondensedGrammar":
        rules = []
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            lhs, arrow, rest = line.partition("->")
            if not arrow:
                raise GrammarSyntaxError("expected 'LHS -> symbols'", n)
            lhs = lhs.strip()
            if not lhs or len(lhs.split()) != 1 or "+" in lhs:
                raise GrammarSyntaxError(f"bad left-hand side {lhs!r}", n)
            try:
                rhs = tuple(Symbol.parse(tok) for tok in rest.split())
            except GrammarSyntaxError as exc:
                raise GrammarSyntaxError(str(exc), n) from None
            rules.append(Rule(lhs, rhs))
        return cls(tuple(rules))

    @classmethod
    def read(cls, path) -> "CondensedGrammar":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


# ------------------------------------------------------------------ quotient


def _is_terminal(node: Tree, entity_terminals: bool) -> bool:
    return not node.children or (entity_terminals and node.label.kind is Kind.ENTITY)


def _class_children(tree: Tree, partition: Partition, block: int, entity_terminals: bool = False):
    """Child classes of ``block`` ordered by first child position, with repeat flags."""
    first: dict[int, Position] = {}
    repeated: set[int] = set()
    for u in partition.blocks[block]:
        node = tree[u]
        if _is_terminal(node, entity_terminals):
            continue
        counts = Counter()
        for i in range(len(node.children)):
            v = u + (i,)
            c = partition.class_of[v]
            counts[c] += 1
            if c not in first or v < first[c]:
                first[c] = v
        repeated.update(c for c, k in counts.items() if k > 1)
    order = sorted(first, key=first.__getitem__)
    return order, repeated


def succ(tree: Tree, partition: Partition, block: int) -> set[int]:
    """Indices of the blocks holding a child of some member of ``block``."""
    return set(_class_children(tree, partition, block)[0])


@dataclass(frozen=True)
class QuotientTree:
    """Tree of classes; ``blocks[p]`` is the class index placed at position ``p``."""

    blocks: dict
    labels: dict
    repeated: frozenset

    @property
    def domain(self) -> frozenset:
        return frozenset(self.blocks)

    def children(self, pos: Position) -> list[Position]:
        out, i = [], 0
        while pos + (i,) in self.blocks:
            out.append(pos + (i,))
            i += 1
        return out


def quotient(tree: Tree, partition: Partition, entity_terminals: bool = False) -> QuotientTree:
    """Expand classes breadth-first from the root class.

    A class reachable from several parents is duplicated under each.  A class
    already on the path from the root is placed but not expanded again, which
    keeps the quotient finite when a label dominates itself.
    """
    if () not in partition.class_of:
        raise ValueError("partition has no block containing the root")
    rep = {k: min(b) for k, b in enumerate(partition.blocks)}
    blocks = {(): partition.class_of[()]}
    repeated = set()
    queue = deque([((), (blocks[()],))])
    while queue:
        pos, path = queue.popleft()
        order, rep_flags = _class_children(tree, partition, blocks[pos], entity_terminals)
        for i, c in enumerate(order):
            child = pos + (i,)
            blocks[child] = c
            if c in rep_flags:
                repeated.add(child)
            if c not in path:
                queue.append((child, path + (c,)))
    labels = {p: tree[rep[c]].label for p, c in blocks.items()}
    return QuotientTree(blocks, labels, frozenset(repeated))


def extract_grammar(tree: Tree, entity_terminals: bool = True, entity_rules: bool = False) -> CondensedGrammar:
    """Grammar of an instance: one rule per internal label, root first.

    With ``entity_terminals`` the sub-trees below entity nodes are treated as
    data and produce no rules.  Symbols under a collection are always marked
    ``+``.  ``entity_rules`` adds an ``ENT_x -> <data>``
    line per entity name.
    """
    partition = label_classes(tree)
    q = quotient(tree, partition, entity_terminals)
    seen: set[int] = set()
    rules = []
    entities = []
    for pos in sorted(q.blocks, key=lambda p: (len(p), p)):
        c = q.blocks[pos]
        if c in seen:
            continue
        seen.add(c)
        kids = q.children(pos)
        label = q.labels[pos]
        if label.kind is Kind.ENTITY and entity_terminals:
            entities.append(Rule(str(label), (Symbol(DATA),)))
            continue
        if not kids:
            continue
        # a collection body is a repetition even with a single member
        many = label.kind is Kind.COLL
        rhs = tuple(Symbol(str(q.labels[k]), many or k in q.repeated) for k in kids)
        rules.append(Rule(str(label), rhs))
    if entity_rules:
        rules.extend(entities)
    return CondensedGrammar(tuple(rules))


# ---------------------------------------------------------------- acceptance


def _fits_unordered(labels: list[str], rule: Rule, allow_missing: bool) -> bool:
    allowed = {s.name: s.plus for s in rule.rhs}
    counts = Counter(labels)
    for name, k in counts.items():
        if name not in allowed or (k > 1 and not allowed[name]):
            return False
    return allow_missing or all(s.name in counts for s in rule.rhs)


def _fits_ordered(labels: list[str], rule: Rule, allow_missing: bool) -> bool:
    # reachable = set of consumed-prefix lengths after each rhs symbol
    reachable = {0}
    for sym in rule.rhs:
        nxt = set(reachable) if allow_missing else set()
        for i in reachable:
            j = i
            while j < len(labels) and labels[j] == sym.name:
                j += 1
                nxt.add(j)
                if not sym.plus:
                    break
        reachable = nxt
        if not reachable:
            return False
    return len(labels) in reachable


def accepts(
    grammar: CondensedGrammar,
    tree: Tree,
    allow_missing: bool = False,
    ordered: bool = False,
    entity_terminals: bool = True,
) -> bool:
    """Whether ``tree`` is a derivation of ``grammar``.

    By default children are matched as a multiset: each child label must be
    on the right-hand side, only ``+`` symbols may repeat, and unless
    ``allow_missing`` every symbol must be present.  ``ordered=True`` also
    demands right-hand-side order.
    """
    if not grammar.rules:
        return not tree.children
    if str(tree.label) != grammar.start:
        return False
    table = {r.lhs: r for r in grammar.rules}
    fits = _fits_ordered if ordered else _fits_unordered
    for _, node in tree.walk():
        name = str(node.label)
        rule = table.get(name)
        if entity_terminals and node.label.kind is Kind.ENTITY:
            continue
        if not node.children:
            if rule is not None and rule.rhs and not allow_missing:
                return False
            continue
        if rule is None:
            return False
        if not fits([str(c.label) for c in node.children], rule, allow_missing):
            return False
    return True


# ------------------------------------------------------------ normalisation


def canonical_form(grammar: CondensedGrammar) -> tuple:
    """A renaming-invariant description of a grammar.

    Every GROUP/REL/COLL name is replaced by the structure it expands to, so
    two grammars are equal up to id renaming exactly when their canonical
    forms are equal.  Entity names and syntactic labels are kept.
    """
    table = {r.lhs: r for r in grammar.rules}

    def expand(name: str, stack: tuple) -> object:
        kind = name.split("_", 1)[0]
        if kind not in ("GROUP", "REL", "COLL") or name not in table or name in stack:
            return name
        rhs = tuple((expand(s.name, stack + (name,)), s.plus) for s in table[name].rhs)
        return (kind, rhs)

    forms = Counter()
    for r in grammar.rules:
        if r.lhs == grammar.start:
            # root order is presentation only
            body = sorted(((expand(s.name, ()), s.plus) for s in r.rhs), key=repr)
            forms[("START", tuple(body))] += 1
        else:
            forms[expand(r.lhs, ())] += 1
    return tuple(sorted(forms.items(), key=repr))
