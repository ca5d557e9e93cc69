"""Validation of condensed grammars against the database meta-grammar.

A target grammar is valid when it is a root rule followed by rules of four
shapes::

    GROUP_g -> ENT_a ENT_b ...     distinct entities
    REL_r   -> GROUP_a GROUP_b     two distinct groups
    COLL_c  -> GROUP_g+            collection of one group kind
    COLL_c  -> REL_r+              collection of one relation kind

plus optional ``ENT_e -> <data>`` rules, and every name used is defined.
Violations cite the number of the meta-rule whose semantic condition fails;
the numbering follows the meta-grammar table (1 = start, 2 = root,
3-8 = root list, 9-14 = rule list, 15-18 = structure rules, 19-20 = entity
list, 21 = entity).

Entity names need no rule of their own: any entity referenced by a group or
the root rule counts as defined.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .grammar import CondensedGrammar, Rule
from .tree import Kind, Label, Position, Tree

__all__ = [
    "Violation",
    "MetaAttributes",
    "ValidationReport",
    "validate",
    "validity_frontier",
    "META_RULES",
]

META_RULES = {
    1: "every referenced name is defined",
    2: "root rule",
    3: "root list",
    9: "rule list",
    10: "entity rule",
    11: "group rule",
    12: "relation rule",
    13: "group collection rule",
    14: "relation collection rule",
    15: "group body",
    16: "group collection body",
    17: "relation body",
    18: "relation collection body",
    20: "entity list",
    21: "entity body",
}


@dataclass(frozen=True)
class Violation:
    meta_rule: int
    message: str
    rule_index: Optional[int] = None
    symbol: Optional[str] = None

    def __str__(self) -> str:
        where = f" (rule {self.rule_index})" if self.rule_index is not None else ""
        return f"meta-rule {self.meta_rule}: {self.message}{where}"


@dataclass
class MetaAttributes:
    """Name lists; the primed ones hold names referenced by the root rule."""

    eL: set = field(default_factory=set)
    gL: set = field(default_factory=set)
    rL: set = field(default_factory=set)
    cgL: set = field(default_factory=set)
    crL: set = field(default_factory=set)
    eL_root: set = field(default_factory=set)
    gL_root: set = field(default_factory=set)
    rL_root: set = field(default_factory=set)
    cgL_root: set = field(default_factory=set)
    crL_root: set = field(default_factory=set)


@dataclass
class ValidationReport:
    violations: list
    attributes: MetaAttributes

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid

    @property
    def meta_rules(self) -> set[int]:
        return {v.meta_rule for v in self.violations}


def _kind(name: str) -> Optional[Kind]:
    label = Label.parse(name)
    return label.kind if label.kind in (Kind.ENTITY, Kind.GROUP, Kind.REL, Kind.COLL) else None


def _id(name: str) -> str:
    return name.split("_", 1)[1]


def validate(grammar: CondensedGrammar) -> ValidationReport:
    """Evaluate the meta-grammar attributes over ``grammar`` and collect violations."""
    attrs = MetaAttributes()
    out: list[Violation] = []
    rules = grammar.rules
    if not rules:
        return ValidationReport([Violation(2, "grammar has no root rule")], attrs)
    root = rules[0]
    if root.lhs != "ROOT":
        out.append(Violation(2, f"first rule must expand ROOT, not {root.lhs}", 0, None))

    # rule list: collect definitions and check each body
    defined_by: dict[str, int] = {}
    coll_refs: list[tuple[str, int]] = []
    group_refs: list[tuple[str, int]] = []
    rel_refs: list[tuple[str, int]] = []
    for k, rule in enumerate(rules[1:], start=1):
        kind = _kind(rule.lhs)
        if rule.lhs == "ROOT":
            out.append(Violation(2, "ROOT is expanded twice", k))
            continue
        if kind is None:
            out.append(Violation(9, f"{rule.lhs} is not an entity, group, relation or collection", k))
            continue
        dup = rule.lhs in defined_by
        name = _id(rule.lhs)
        if kind is Kind.ENTITY:
            if dup:
                out.append(Violation(10, f"entity {rule.lhs} defined twice", k, rule.lhs))
            if any(_kind(s.name) is not None or s.plus for s in rule.rhs) or len(rule.rhs) != 1:
                out.append(Violation(21, f"entity {rule.lhs} must expand to data", k))
            attrs.eL.add(name)
        elif kind is Kind.GROUP:
            if dup:
                out.append(Violation(11, f"group {rule.lhs} defined twice", k, rule.lhs))
            _check_group(rule, k, out, attrs)
            attrs.gL.add(name)
        elif kind is Kind.REL:
            if dup:
                out.append(Violation(12, f"relation {rule.lhs} defined twice", k, rule.lhs))
            group_refs.extend(_check_relation(rule, k, out))
            attrs.rL.add(name)
        else:
            ref = _check_collection(rule, k, out)
            if ref is None:
                pass
            elif _kind(ref) is Kind.GROUP:
                if dup or name in attrs.cgL or name in attrs.crL:
                    out.append(Violation(13, f"collection {rule.lhs} defined twice", k, rule.lhs))
                attrs.cgL.add(name)
                coll_refs.append((ref, k))
            else:
                if dup or name in attrs.cgL or name in attrs.crL:
                    out.append(Violation(14, f"collection {rule.lhs} defined twice", k, rule.lhs))
                attrs.crL.add(name)
                rel_refs.append((ref, k))
        defined_by.setdefault(rule.lhs, k)

    # references from structure bodies
    for ref, k in group_refs:
        if _id(ref) not in attrs.gL:
            out.append(Violation(12, f"relation uses undefined {ref}", k, ref))
    for ref, k in coll_refs:
        if _id(ref) not in attrs.gL:
            out.append(Violation(13, f"collection uses undefined {ref}", k, ref))
    for ref, k in rel_refs:
        if _id(ref) not in attrs.rL:
            out.append(Violation(14, f"collection uses undefined {ref}", k, ref))

    # root list
    if root.lhs == "ROOT":
        _check_root(root, out, attrs)

    # start rule: root references must be defined
    for name in sorted(attrs.gL_root - attrs.gL):
        out.append(Violation(1, f"root uses undefined GROUP_{name}", 0, f"GROUP_{name}"))
    for name in sorted(attrs.rL_root - attrs.rL):
        out.append(Violation(1, f"root uses undefined REL_{name}", 0, f"REL_{name}"))
    for name in sorted(attrs.cgL_root):
        if name not in attrs.cgL and name not in attrs.crL:
            out.append(Violation(1, f"root uses undefined COLL_{name}", 0, f"COLL_{name}"))
    attrs.eL |= attrs.eL_root
    return ValidationReport(out, attrs)


def _check_group(rule: Rule, k: int, out: list, attrs: MetaAttributes) -> None:
    if not rule.rhs:
        out.append(Violation(15, f"group {rule.lhs} has no entities", k))
    seen = set()
    for s in rule.rhs:
        if _kind(s.name) is not Kind.ENTITY:
            out.append(Violation(15, f"group {rule.lhs} may only list entities, found {s}", k, s.name))
            continue
        if s.plus or s.name in seen:
            out.append(Violation(20, f"entity {s.name} repeated in {rule.lhs}", k, s.name))
        seen.add(s.name)
        attrs.eL.add(_id(s.name))


def _check_relation(rule: Rule, k: int, out: list) -> list:
    groups = [s for s in rule.rhs if _kind(s.name) is Kind.GROUP and not s.plus]
    if len(rule.rhs) != 2 or len(groups) != 2:
        out.append(Violation(17, f"relation {rule.lhs} must link exactly two groups", k,
                             next((s.name for s in rule.rhs if s not in groups), None)))
        return [(s.name, k) for s in groups]
    if groups[0].name == groups[1].name:
        out.append(Violation(17, f"relation {rule.lhs} links {groups[0].name} to itself", k, groups[0].name))
    return [(s.name, k) for s in groups]


def _check_collection(rule: Rule, k: int, out: list) -> Optional[str]:
    rhs = rule.rhs
    kinds = {_kind(s.name) for s in rhs}
    meta = 18 if Kind.REL in kinds and Kind.GROUP not in kinds else 16
    if len(rhs) != 1 or not rhs[0].plus or _kind(rhs[0].name) not in (Kind.GROUP, Kind.REL):
        out.append(Violation(meta, f"collection {rule.lhs} must repeat one group or relation", k,
                             rhs[0].name if rhs else None))
        return None
    return rhs[0].name


def _check_root(root: Rule, out: list, attrs: MetaAttributes) -> None:
    lists = {
        Kind.ENTITY: attrs.eL_root,
        Kind.GROUP: attrs.gL_root,
        Kind.REL: attrs.rL_root,
        Kind.COLL: attrs.cgL_root,
    }
    for s in root.rhs:
        kind = _kind(s.name)
        if kind is None:
            out.append(Violation(3, f"root may not list {s.name}", 0, s.name))
            continue
        if s.plus:
            out.append(Violation(3, f"root may not repeat {s.name}", 0, s.name))
        name = _id(s.name)
        if name in lists[kind]:
            out.append(Violation(3, f"root lists {s.name} twice", 0, s.name))
        lists[kind].add(name)
    # split collection references by what they collect
    for name in list(attrs.cgL_root):
        if name in attrs.crL:
            attrs.cgL_root.discard(name)
            attrs.crL_root.add(name)


def validity_frontier(grammar: CondensedGrammar, instance: Tree) -> set[Position]:
    """Positions that are still uncategorised or take part in a violation."""
    report = validate(grammar)
    out: set[Position] = set()
    offending = {}
    for v in report.violations:
        if v.rule_index is None or v.rule_index >= len(grammar.rules):
            continue
        offending.setdefault(grammar.rules[v.rule_index].lhs, set()).add(v.symbol)
    for pos, node in instance.walk():
        if pos and node.children and node.label.is_unlabelled:
            out.add(pos)
        hits = offending.get(str(node.label))
        if not hits:
            continue
        if None in hits:
            out.add(pos)
        for i, child in enumerate(node.children):
            if str(child.label) in hits:
                out.add(pos + (i,))
    return out
