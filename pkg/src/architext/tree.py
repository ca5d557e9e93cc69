"""Ordered labelled trees addressed by integer-sequence positions.

A position is a tuple of child indices; ``()`` is the root.  Trees are
immutable: every operation below returns a new tree and leaves its input
untouched, so trees can be shared freely between threads.

Bracketed I/O follows the Penn Treebank convention::

    (ROOT (S (NP (DT The) (NN heart)) (VP (VBD was))))

Atoms without parentheses are tokens; ``(X)`` is an internal label with no
children.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

Position = tuple[int, ...]
Hedge = tuple["Tree", ...]

__all__ = [
    "Kind",
    "Label",
    "Position",
    "Hedge",
    "Tree",
    "Fragment",
    "SubTreeRef",
    "PositionError",
    "BracketError",
    "subtree",
    "ancestor",
    "splice_children",
    "replace_at",
    "relabel",
    "check_domain",
    "format_position",
    "parse_position",
    "Var",
    "NodeVar",
    "Pattern",
    "RewriteRule",
    "apply_rule",
]


class PositionError(KeyError):
    """Raised when a position is not in a tree's domain."""


class BracketError(ValueError):
    """Raised on malformed bracketed input."""


class Kind(enum.Enum):
    ROOT = "root"
    SYNTACTIC = "syntactic"
    ENTITY = "entity"
    GROUP = "group"
    REL = "rel"
    COLL = "coll"
    TOKEN = "token"
    AUX = "aux"


_PREFIXED = {
    Kind.ENTITY: "ENT_",
    Kind.GROUP: "GROUP_",
    Kind.REL: "REL_",
    Kind.COLL: "COLL_",
}
AUX_KINDS = frozenset({"ER", "EC"})
STRUCTURAL = frozenset({Kind.GROUP, Kind.REL, Kind.COLL})


@dataclass(frozen=True, slots=True)
class Label:
    """Tagged node label.  ``str(label)`` is its bracketed rendering."""

    kind: Kind
    value: str = ""

    def __post_init__(self):
        if self.kind in _PREFIXED and not self.value:
            raise ValueError(f"{self.kind.value} label needs a non-empty id")
        if self.kind is Kind.AUX and self.value not in AUX_KINDS:
            raise ValueError(f"auxiliary label must be ER or EC, got {self.value!r}")

    def __str__(self) -> str:
        if self.kind is Kind.ROOT:
            return "ROOT"
        prefix = _PREFIXED.get(self.kind)
        return prefix + self.value if prefix else self.value

    @classmethod
    def root(cls) -> "Label":
        return cls(Kind.ROOT)

    @classmethod
    def syn(cls, tag: str) -> "Label":
        return cls(Kind.SYNTACTIC, tag)

    @classmethod
    def ent(cls, name: str) -> "Label":
        return cls(Kind.ENTITY, name)

    @classmethod
    def group(cls, gid) -> "Label":
        return cls(Kind.GROUP, str(gid))

    @classmethod
    def rel(cls, rid) -> "Label":
        return cls(Kind.REL, str(rid))

    @classmethod
    def coll(cls, cid) -> "Label":
        return cls(Kind.COLL, str(cid))

    @classmethod
    def token(cls, text: str) -> "Label":
        return cls(Kind.TOKEN, text)

    @classmethod
    def aux(cls, which: str) -> "Label":
        return cls(Kind.AUX, which)

    @classmethod
    def parse(cls, text: str) -> "Label":
        """Parse the rendering of a non-token label (inverse of ``str``)."""
        for kind, prefix in _PREFIXED.items():
            if text.startswith(prefix) and len(text) > len(prefix):
                return cls(kind, text[len(prefix):])
        if text in AUX_KINDS:
            return cls(Kind.AUX, text)
        return cls(Kind.SYNTACTIC, text)

    @property
    def is_structural(self) -> bool:
        return self.kind in STRUCTURAL

    @property
    def is_unlabelled(self) -> bool:
        # not (yet) a category of the target meta-model
        return self.kind in (Kind.SYNTACTIC, Kind.AUX)


class Tree:
    """Immutable ordered tree node: a label and a tuple of child trees."""

    __slots__ = ("label", "children", "_hash", "_size")

    def __init__(self, label: Label, children: Iterable["Tree"] = ()):
        if not isinstance(label, Label):
            raise TypeError(f"label must be a Label, got {type(label).__name__}")
        children = tuple(children)
        if label.kind is Kind.TOKEN and children:
            raise ValueError("token labels occur only at leaves")
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "_hash", hash((label, children)))
        object.__setattr__(self, "_size", 1 + sum(c._size for c in children))

    def __setattr__(self, name, value):
        raise AttributeError("Tree is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Tree) or self._hash != other._hash:
            return False
        return self.label == other.label and self.children == other.children

    def __repr__(self) -> str:
        return f"Tree({self.to_bracketed()!r})"

    def __len__(self) -> int:
        return self._size

    @property
    def size(self) -> int:
        return self._size

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __getitem__(self, pos: Position) -> "Tree":
        node = self
        try:
            for i in pos:
                if i < 0:
                    raise IndexError
                node = node.children[i]
        except IndexError:
            raise PositionError(pos) from None
        return node

    def __contains__(self, pos) -> bool:
        try:
            self[pos]
        except (PositionError, TypeError):
            return False
        return True

    def walk(self, prefix: Position = ()) -> Iterator[tuple[Position, "Tree"]]:
        """Yield ``(position, node)`` pairs in preorder (lexicographic order)."""
        stack = [(prefix, self)]
        while stack:
            pos, node = stack.pop()
            yield pos, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((pos + (i,), node.children[i]))

    def positions(self) -> list[Position]:
        return [p for p, _ in self.walk()]

    @property
    def domain(self) -> frozenset[Position]:
        return frozenset(self.positions())

    def labels(self) -> dict[Position, Label]:
        return {p: n.label for p, n in self.walk()}

    def leaves(self) -> list[Position]:
        return [p for p, n in self.walk() if not n.children]

    def tokens(self) -> list[str]:
        return [n.label.value for _, n in self.walk() if n.label.kind is Kind.TOKEN]

    def depth(self) -> int:
        return max(len(p) for p in self.positions())

    def to_bracketed(self) -> str:
        if self.label.kind is Kind.TOKEN:
            return self.label.value
        if not self.children:
            return f"({self.label})"
        inner = " ".join(c.to_bracketed() for c in self.children)
        return f"({self.label} {inner})"

    @classmethod
    def from_bracketed(cls, text: str) -> "Tree":
        return _parse_bracketed(text)

    @classmethod
    def empty(cls) -> "Tree":
        """The empty instance ``{ε ↦ λ}``."""
        return cls(Label.root())


def format_position(pos: Position) -> str:
    return ".".join(map(str, pos)) if pos else "ε"


def parse_position(text: str) -> Position:
    """``"1.0.2"`` -> ``(1, 0, 2)``; ``""`` or ``"ε"`` is the root."""
    text = text.strip()
    if text in ("", "ε", "eps"):
        return ()
    if "." in text:
        return tuple(int(p) for p in text.split("."))
    return tuple(int(c) for c in text)


# --------------------------------------------------------------- bracketed I/O

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def _parse_bracketed(text: str) -> Tree:
    toks = _TOKEN_RE.findall(text)
    if not toks:
        raise BracketError("empty input")
    pos = 0

    def node() -> Tree:
        nonlocal pos
        if toks[pos] != "(":
            atom = toks[pos]
            pos += 1
            return Tree(Label.token(atom))
        pos += 1
        if pos >= len(toks):
            raise BracketError("unexpected end of input after '('")
        label_text = None
        if toks[pos] not in "()":
            label_text = toks[pos]
            pos += 1
        kids = []
        while pos < len(toks) and toks[pos] != ")":
            kids.append(node())
        if pos >= len(toks):
            raise BracketError("missing ')'")
        pos += 1
        if label_text is None:
            # PTB wrapper "( (S ...) )"
            if len(kids) != 1:
                raise BracketError("unlabelled bracket must wrap exactly one tree")
            return kids[0]
        return Tree(Label.parse(label_text), kids)

    try:
        tree = node()
    except IndexError:
        raise BracketError("unexpected end of input") from None
    if pos != len(toks):
        raise BracketError(f"trailing input after tree: {' '.join(toks[pos:pos + 5])!r}")
    if tree.label == Label.syn("ROOT"):
        tree = Tree(Label.root(), tree.children)
    return tree


# ------------------------------------------------------------ sub-tree access


@dataclass(frozen=True)
class Fragment:
    """Sub-tree ``T|u`` with absolute positions (not itself a tree unless ``at == ()``)."""

    at: Position
    labels: Mapping[Position, Label]

    @property
    def domain(self) -> frozenset[Position]:
        return frozenset(self.labels)


@dataclass(frozen=True)
class SubTreeRef:
    tree: Tree
    at: Position

    def __post_init__(self):
        if self.at not in self.tree:
            raise PositionError(self.at)

    @property
    def node(self) -> Tree:
        return self.tree[self.at]

    @property
    def depth(self) -> int:
        return len(self.at)


def subtree(tree: Tree, at: Position) -> Fragment:
    node = tree[at]
    return Fragment(at, {p: n.label for p, n in node.walk(at)})


def ancestor(ref: SubTreeRef, i: int) -> SubTreeRef:
    """The ``i``-th tree-ancestor of ``ref``; ``ancestor(ref, 0) is ref``."""
    if i < 0 or i > len(ref.at):
        raise ValueError(f"ancestor {i} exceeds depth {len(ref.at)}")
    if i == 0:
        return ref
    return SubTreeRef(ref.tree, ref.at[: len(ref.at) - i])


def check_domain(domain: Iterable[Position]) -> None:
    """Assert prefix-closure and left-sibling-closure of a position set."""
    dom = set(domain)
    if () not in dom:
        raise AssertionError("root position missing")
    for p in dom:
        if p and p[:-1] not in dom:
            raise AssertionError(f"{format_position(p)}: parent missing")
        if p and p[-1] > 0 and p[:-1] + (p[-1] - 1,) not in dom:
            raise AssertionError(f"{format_position(p)}: left sibling missing")


# ----------------------------------------------------------------- editing


def _rebuild(tree: Tree, at: Position, fn: Callable[[Tree], Sequence[Tree]]) -> Hedge:
    """Replace the node at ``at`` with the hedge ``fn(node)``; returns the new top hedge."""
    if not at:
        return tuple(fn(tree))
    i = at[0]
    if i < 0 or i >= len(tree.children):
        raise PositionError(at)
    new = _rebuild(tree.children[i], at[1:], fn)
    kids = tree.children[:i] + new + tree.children[i + 1:]
    return (Tree(tree.label, kids),)


def replace_at(tree: Tree, at: Position, hedge: Sequence[Tree]) -> Tree:
    """Replace the sub-tree at ``at`` by a hedge; right siblings shift to close gaps.

    The root cannot be replaced by anything other than exactly one tree.
    """
    if at not in tree:
        raise PositionError(at)
    out = _rebuild(tree, at, lambda _node: tuple(hedge))
    if len(out) != 1:
        raise ValueError("the root must be replaced by exactly one tree")
    return out[0]


def splice_children(tree: Tree, at: Position, hedge: Sequence[Tree]) -> Tree:
    """Replace the children of the node at ``at`` by ``hedge``."""
    if at not in tree:
        raise PositionError(at)
    return _rebuild(tree, at, lambda node: (Tree(node.label, hedge),))[0]


def relabel(tree: Tree, at: Position, label: Label) -> Tree:
    if at not in tree:
        raise PositionError(at)
    return _rebuild(tree, at, lambda node: (Tree(label, node.children),))[0]


# ------------------------------------------------------------------ rewriting


@dataclass(frozen=True)
class Var:
    """Hedge variable: matches a (possibly empty) run of sibling trees."""

    name: str


@dataclass(frozen=True)
class NodeVar:
    """Binds the label of one node; the whole matched node is bound as ``name + '*'``."""

    name: str


@dataclass(frozen=True)
class Pattern:
    """A pattern node.  ``children=None`` matches any children."""

    head: Union[Label, NodeVar]
    children: Union[tuple, None] = ()

    def __init__(self, head, children=()):
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "children", None if children is None else tuple(children))


Substitution = dict


@dataclass(frozen=True)
class RewriteRule:
    lhs: Pattern
    rhs: Pattern
    guard: Callable[[Substitution], bool] = lambda sigma: True

    def __post_init__(self):
        missing = _pattern_vars(self.rhs) - _pattern_vars(self.lhs)
        if missing:
            raise ValueError(f"rhs variables not bound by lhs: {sorted(missing)}")


def _pattern_vars(p) -> set[str]:
    if isinstance(p, Var):
        return {p.name}
    out = set()
    if isinstance(p.head, NodeVar):
        out.add(p.head.name)
    for c in p.children or ():
        out |= _pattern_vars(c)
    return out


def _bind(sigma: dict, name: str, value) -> Union[dict, None]:
    if name in sigma:
        return sigma if sigma[name] == value else None
    out = dict(sigma)
    out[name] = value
    return out


def _match_node(p: Pattern, node: Tree, sigma: dict) -> Iterator[dict]:
    if isinstance(p.head, NodeVar):
        sigma = _bind(sigma, p.head.name, node.label)
        if sigma is None:
            return
        sigma = _bind(sigma, p.head.name + "*", node)
        if sigma is None:
            return
    elif p.head != node.label:
        return
    if p.children is None:
        yield sigma
        return
    yield from _match_hedge(p.children, node.children, sigma)


def _match_hedge(pats: tuple, trees: Hedge, sigma: dict) -> Iterator[dict]:
    if not pats:
        if not trees:
            yield sigma
        return
    first, rest = pats[0], pats[1:]
    if isinstance(first, Var):
        for k in range(len(trees) + 1):
            bound = _bind(sigma, first.name, tuple(trees[:k]))
            if bound is not None:
                yield from _match_hedge(rest, trees[k:], bound)
        return
    if not trees:
        return
    for s in _match_node(first, trees[0], sigma):
        yield from _match_hedge(rest, trees[1:], s)


def _instantiate(p, sigma: dict) -> Hedge:
    if isinstance(p, Var):
        return sigma[p.name]
    if isinstance(p.head, NodeVar):
        if p.children is None:
            return (sigma[p.head.name + "*"],)
        label = sigma[p.head.name]
    else:
        label = p.head
    kids: list[Tree] = []
    for c in p.children or ():
        kids.extend(_instantiate(c, sigma))
    return (Tree(label, kids),)


def match(rule: RewriteRule, node: Tree) -> Union[dict, None]:
    """First substitution matching ``node`` against the lhs that satisfies the guard."""
    for sigma in _match_node(rule.lhs, node, {}):
        if rule.guard(sigma):
            return sigma
    return None


def apply_rule(tree: Tree, at: Position, rule: RewriteRule) -> Union[Tree, None]:
    """Apply ``rule`` at position ``at``; ``None`` when the lhs does not match."""
    sigma = match(rule, tree[at])
    if sigma is None:
        return None
    return replace_at(tree, at, _instantiate(rule.rhs, sigma))
