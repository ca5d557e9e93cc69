"""Synthetic annotated corpora generated from a planted schema.

Schema files are line oriented::

    # four groups, two relations
    group G0 = DRUG DOSE FREQ
    group G1 = TEST VALUE UNIT
    relation R0 = G0 G1
    template 2 group G0
    template 1 relation R0
    noise dropout=0.1 depth=0.2 shuffle=0.1

``template <weight> group|relation <id>`` draws sentence shapes; without
templates every group and relation gets weight 1.  Noise knobs are
probabilities: ``dropout`` removes an entity annotation, ``depth`` wraps an
entity phrase in an extra prepositional level, ``shuffle`` permutes the
entity phrases of a noun phrase.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import AnnotatedSentence, NamedEntity, write_entities
from .grammar import CondensedGrammar, Rule, Symbol
from .tree import Kind, Label, Tree

__all__ = ["Noise", "PlantedSchema", "SyntheticCorpus", "SchemaError", "parse_schema", "default_schema", "generate"]


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Noise:
    dropout: float = 0.0
    depth: float = 0.0
    shuffle: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise SchemaError("dropout must lie in [0, 1)")
        for name in ("depth", "shuffle"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SchemaError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PlantedSchema:
    groups: dict
    relations: dict = field(default_factory=dict)
    templates: tuple = ()
    noise: Noise = Noise()

    def __post_init__(self):
        seen: dict[str, str] = {}
        for gid, names in self.groups.items():
            if not names or len(set(names)) != len(names):
                raise SchemaError(f"group {gid} needs distinct entity names")
            for n in names:
                if n in seen:
                    raise SchemaError(f"entity {n} is in both {seen[n]} and {gid}")
                seen[n] = gid
        for rid, (a, b) in self.relations.items():
            if a not in self.groups or b not in self.groups:
                raise SchemaError(f"relation {rid} uses an undefined group")
            if a == b:
                raise SchemaError(f"relation {rid} links {a} to itself")
        for weight, kind, ident in self.templates:
            table = self.groups if kind == "group" else self.relations
            if weight <= 0 or ident not in table:
                raise SchemaError(f"bad template {weight} {kind} {ident}")

    @property
    def weighted(self) -> list[tuple[float, str, str]]:
        if self.templates:
            return list(self.templates)
        return [(1.0, "group", g) for g in self.groups] + [(1.0, "relation", r) for r in self.relations]

    def with_noise(self, **kw) -> "PlantedSchema":
        return PlantedSchema(self.groups, self.relations, self.templates, Noise(**kw))


def parse_schema(text: str) -> PlantedSchema:
    groups, relations, templates = {}, {}, []
    noise = Noise()
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head in ("group", "relation"):
                ident, eq, body = rest.partition("=")
                if not eq:
                    raise SchemaError("expected '='")
                target = groups if head == "group" else relations
                target[ident.strip()] = tuple(body.split())
                if head == "relation" and len(target[ident.strip()]) != 2:
                    raise SchemaError("a relation links exactly two groups")
            elif head == "template":
                weight, kind, ident = rest.split()
                if kind not in ("group", "relation"):
                    raise SchemaError(f"unknown template kind {kind!r}")
                templates.append((float(weight), kind, ident))
            elif head == "noise":
                noise = Noise(**{k: float(v) for k, v in (kv.split("=") for kv in rest.split())})
            else:
                raise SchemaError(f"unknown directive {head!r}")
        except (SchemaError, ValueError, TypeError) as exc:
            raise SchemaError(f"line {n}: {exc}") from None
    return PlantedSchema(groups, relations, tuple(templates), noise)


def default_schema(**noise) -> PlantedSchema:
    """Four three-entity groups and two relations between them."""
    return PlantedSchema(
        groups={
            "G0": ("DRUG", "DOSE", "FREQ"),
            "G1": ("TEST", "VALUE", "UNIT"),
            "G2": ("SOSY", "SITE", "SEVERITY"),
            "G3": ("EXAM", "RESULT", "DATE"),
        },
        relations={"R0": ("G0", "G2"), "R1": ("G1", "G3")},
        noise=Noise(**noise),
    )


@dataclass
class SyntheticCorpus:
    sentences: list
    grammar: CondensedGrammar
    planted: Tree

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"trees": out / "trees.txt", "entities": out / "entities.tsv", "grammar": out / "grammar.txt"}
        with open(paths["trees"], "w", encoding="utf-8") as fh:
            for s in self.sentences:
                fh.write(s.tree.to_bracketed() + "\n")
        with open(paths["entities"], "w", encoding="utf-8", newline="") as fh:
            write_entities(((str(i), e) for i, s in enumerate(self.sentences) for e in s.entities), fh)
        self.grammar.write(paths["grammar"])
        return paths


def _leaf(tag: str, text: str) -> Tree:
    return Tree(Label.syn(tag), (Tree(Label.token(text)),))


def _entity_phrase(name: str, rng: random.Random) -> tuple[Tree, int]:
    stem = name.lower() + str(rng.randrange(3))
    if rng.random() < 0.5:
        return _leaf("NN", stem), 1
    return Tree(Label.syn("NP"), (_leaf("JJ", "big"), _leaf("NN", stem))), 2


def _noun_phrase(names, rng: random.Random, noise: Noise):
    """An NP realising ``names``; returns the tree and (name, token offset, length) triples."""
    names = list(names)
    if noise.shuffle and rng.random() < noise.shuffle:
        rng.shuffle(names)
    kids = [_leaf("DT", "the")]
    spans = []
    offset = 1
    for j, name in enumerate(names):
        if j:
            kids.append(_leaf("IN", "of"))
            offset += 1
        phrase, width = _entity_phrase(name, rng)
        if noise.depth and rng.random() < noise.depth:
            phrase = Tree(Label.syn("PP"), (_leaf("IN", "with"), phrase))
            offset += 1
        kids.append(phrase)
        spans.append((name, offset, width))
        offset += width
    return Tree(Label.syn("NP"), kids), spans


def _parse(text: str) -> Tree:
    return Tree.from_bracketed(text)


# Syntactic frames around the realised noun phrases.  ``{0}`` and ``{1}`` are
# the slots for the first and second noun phrase.
GROUP_FRAMES = (
    "(S {0} (VP (VBZ is) (VBN noted)))",
    "(FRAG {0} (. .))",
    "(SQ (VBZ is) (RB there) {0})",
    "(NP {0} (. .))",
    "(SINV (VP (VBN noted)) (VBZ is) {0})",
    "(PRN (-LRB- -LRB-) {0} (-RRB- -RRB-))",
)
RELATION_FRAMES = (
    "(S {0} (VP (VBZ reveals) {1}))",
    "(S {0} (VP (VBD came) (PP (IN with) {1})))",
    "(NP {0} (PP (IN with) {1}))",
    "(S (SBAR (IN when) (S {0} (VP (VBZ is) (VBN given)))) (, ,) {1} (VP (VBZ appears)))",
    "(UCP {0} (, ,) (ADJP (JJ linked) (PP (TO to) {1})))",
    "(SBARQ (WHNP (WP what)) (SQ {0} (VP (VBZ links) {1})))",
)


def _frame(template: str, *phrases: Tree) -> Tree:
    slots = [Tree(Label.syn(f"SLOT{i}")) for i in range(len(phrases))]
    tree = _parse(template.format(*(s.to_bracketed() for s in slots)))
    fill = {str(s.label): p for s, p in zip(slots, phrases)}

    def put(node: Tree) -> Tree:
        if not node.children and str(node.label) in fill:
            return fill[str(node.label)]
        return Tree(node.label, [put(c) for c in node.children]) if node.children else node

    return put(tree)


def _sentence(kind: str, ident: str, schema: PlantedSchema, rng: random.Random):
    noise = schema.noise
    if kind == "group":
        frame = GROUP_FRAMES[rng.randrange(len(GROUP_FRAMES))]
        np_, spans = _noun_phrase(schema.groups[ident], rng, noise)
        parts = [(ident, spans)]
        phrases = (np_,)
    else:
        frame = RELATION_FRAMES[rng.randrange(len(RELATION_FRAMES))]
        a, b = schema.relations[ident]
        np_a, spans_a = _noun_phrase(schema.groups[a], rng, noise)
        np_b, spans_b = _noun_phrase(schema.groups[b], rng, noise)
        parts = [(a, spans_a), (b, spans_b)]
        phrases = (np_a, np_b)
    tree = _frame(frame, *phrases)
    # shift each phrase's spans to its place in the sentence
    starts = _slot_offsets(tree, phrases)
    parts = [(gid, [(n, o + start, w) for n, o, w in spans]) for (gid, spans), start in zip(parts, starts)]
    kept = []
    for gid, spans in parts:
        names = []
        for name, start, width in spans:
            if noise.dropout and rng.random() < noise.dropout:
                continue
            names.append((name, NamedEntity(name, start, start + width - 1)))
        kept.append((gid, names))
    ents = tuple(e for _, names in kept for _, e in names)
    realised = [(gid, [n for n, _ in names]) for gid, names in kept if names]
    return AnnotatedSentence(tree, ents), realised


def _slot_offsets(tree: Tree, phrases) -> list[int]:
    """Token offset of each phrase (by identity) within ``tree``."""
    out = {}
    count = 0

    def walk(node: Tree):
        nonlocal count
        for i, p in enumerate(phrases):
            if node is p and i not in out:
                out[i] = count
        if not node.children:
            count += node.label.kind is Kind.TOKEN
            return
        for c in node.children:
            walk(c)

    walk(tree)
    return [out[i] for i in range(len(phrases))]


def _planted_structure(kind: str, ident: str, realised: list) -> Optional[tuple]:
    if not realised:
        return None
    if kind == "relation" and len(realised) == 2:
        return ("REL", ident, tuple(realised))
    return ("GROUP",) + realised[0][:1] + (tuple(realised[0][1]),)


def _ground_truth(structures: list, schema: PlantedSchema) -> tuple[CondensedGrammar, Tree]:
    """The grammar and instance a perfect structuring would produce."""
    if not structures:
        return CondensedGrammar(), Tree.empty()
    order = {n: i for names in schema.groups.values() for i, n in enumerate(names)}
    group_names: dict[str, set] = {}

    def group_tree(gid, names):
        group_names.setdefault(gid, set()).update(names)
        return Tree(Label.group(gid), [Tree(Label.ent(n), (Tree(Label.token(n.lower())),)) for n in names])

    buckets: dict[tuple, list] = {}
    for s in structures:
        if s[0] == "GROUP":
            node = group_tree(s[1], s[2])
        else:
            node = Tree(Label.rel(s[1]), [group_tree(g, names) for g, names in s[2]])
        buckets.setdefault((s[0], s[1]), []).append(node)
    kids = [nodes[0] for nodes in buckets.values() if len(nodes) == 1]
    rules = []
    for i, ((kind, ident), nodes) in enumerate((k, v) for k, v in buckets.items() if len(v) > 1):
        kids.append(Tree(Label.coll(f"C{i}"), nodes))
        rules.append(Rule(f"COLL_C{i}", (Symbol(f"{kind}_{ident}", True),)))
    rules.insert(0, Rule("ROOT", tuple(Symbol(str(k.label)) for k in kids)))
    for rid, (a, b) in schema.relations.items():
        if ("REL", rid) in buckets:
            rules.append(Rule(f"REL_{rid}", (Symbol(f"GROUP_{a}"), Symbol(f"GROUP_{b}"))))
    for gid in schema.groups:
        if gid in group_names:
            names = sorted(group_names[gid], key=order.__getitem__)
            rules.append(Rule(f"GROUP_{gid}", tuple(Symbol(f"ENT_{n}") for n in names)))
    return CondensedGrammar(tuple(rules)), Tree(Label.root(), kids)


def generate(schema: PlantedSchema, n_sentences: int, seed: int) -> SyntheticCorpus:
    """Sample ``n_sentences`` sentences; identical output for identical seeds."""
    if n_sentences < 1:
        raise ValueError("need at least one sentence")
    choices = schema.weighted
    weights = [w for w, _, _ in choices]
    picker = random.Random(f"{seed}:templates")
    picks = picker.choices(choices, weights=weights, k=n_sentences)
    sentences, structures = [], []
    for i, (_, kind, ident) in enumerate(picks):
        rng = random.Random(f"{seed}:{i}")
        sentence, realised = _sentence(kind, ident, schema, rng)
        sentences.append(AnnotatedSentence(sentence.tree, sentence.entities, str(i)))
        s = _planted_structure(kind, ident, realised)
        if s is not None:
            structures.append(s)
    grammar, planted = _ground_truth(structures, schema)
    return SyntheticCorpus(sentences, grammar, planted)
