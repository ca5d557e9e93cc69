"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also repeated in the terminal summary.  ``python tests/test_acceptance.py``
runs the criteria without pytest.
"""
import os
import random
import sys
import time
from collections import Counter, deque
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from architext.corpus import build_instance, entity_inventory
from architext.grammar import CondensedGrammar, accepts, canonical_form, extract_grammar
from architext.metagrammar import validate
from architext.rewrite import (
    CSV_HEADER,
    Context,
    NameRegistry,
    Op,
    StructuringConfig,
    candidate_scope,
    find_groups,
    structure,
)
from architext.rewrite import ORDER, _apply
from architext.similarity import (
    JaccardEntityNames,
    Partition,
    SimParams,
    equivalence_classes,
    sim,
    threshold_partition,
    weighted_similarity,
)
from architext.synth import default_schema, generate
from architext.tree import Label, SubTreeRef, Tree

from conftest import (
    FIG_COLORS,
    FIG_QUOTIENT,
    GROUPING,
    GROUPING_CLASSES,
    GROUPING_RESULT,
    STRUCTURED,
    STRUCTURED_GRAMMAR,
)

RESULTS: dict[int, str] = {}


def run_criterion(n: int, limit: float, check) -> None:
    start = time.perf_counter()
    try:
        detail = check() or ""
        ok = True
    except AssertionError as exc:
        detail = f"assertion failed: {exc}"
        ok = False
    elapsed = time.perf_counter() - start
    if elapsed > limit:
        ok = False
        detail = f"{detail}; exceeded the {limit:g}s limit".lstrip("; ")
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s of {limit:g}s) {detail}".rstrip()
    RESULTS[n] = line
    print(line)
    assert ok, line


# ------------------------------------------------------------ 1 extraction


def check_extraction_golden():
    g = extract_grammar(Tree.from_bracketed(FIG_QUOTIENT))
    assert g.to_text() == "ROOT -> X+ Y\nX -> a b c\nY -> a\n", g.to_text()
    g = extract_grammar(Tree.from_bracketed(FIG_COLORS))
    assert g.to_text() == "white -> red green\nred -> black blue\ngreen -> blue red+\n", g.to_text()
    return "both golden grammars match"


def test_criterion_1_extraction_golden():
    run_criterion(1, 1.0, check_extraction_golden)


# ------------------------------------------------------------ 2 similarity


def check_similarity_pin():
    value = weighted_similarity([1, 0.75, 1, 1])
    # independent arithmetic: weights 1, 1/2, 1/3, 1/4
    by_hand = (1 + 0.75 / 2 + 1 / 3 + 1 / 4) / (1 + 1 / 2 + 1 / 3 + 1 / 4)
    assert abs(value - by_hand) < 1e-12
    assert abs(value - 0.94) <= 0.001, value
    return f"sim = {value:.4f}"


def test_criterion_2_similarity_pin():
    run_criterion(2, 1.0, check_similarity_pin)


# ----------------------------------------------------------- 3 meta-grammar

MUTATIONS = {
    "duplicate group name": (STRUCTURED_GRAMMAR + "GROUP_1 -> ENT_4\n", 11),
    "undefined nonterminal": (STRUCTURED_GRAMMAR.replace("ROOT -> COLL_1", "ROOT -> COLL_1 COLL_9"), 1),
    "relation with one group": (STRUCTURED_GRAMMAR.replace("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1"), 17),
    "relation with three groups": (
        STRUCTURED_GRAMMAR.replace("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1 GROUP_2 GROUP_3")
        + "GROUP_3 -> ENT_4\n",
        17,
    ),
    "group inside group": (STRUCTURED_GRAMMAR.replace("GROUP_1 -> ENT_1 ENT_2", "GROUP_1 -> ENT_1 GROUP_2"), 15),
    "repeated entity": (STRUCTURED_GRAMMAR.replace("GROUP_1 -> ENT_1 ENT_2", "GROUP_1 -> ENT_1 ENT_2 ENT_1"), 20),
}


def check_metagrammar():
    grammar = CondensedGrammar.from_text(STRUCTURED_GRAMMAR)
    assert extract_grammar(Tree.from_bracketed(STRUCTURED)) == grammar
    report = validate(grammar)
    assert report.valid, report.violations
    a = report.attributes
    assert (a.crL, a.gL, a.rL, a.eL) == ({"1"}, {"1", "2"}, {"1"}, {"1", "2", "3"}), a
    for name, (text, rule) in MUTATIONS.items():
        r = validate(CondensedGrammar.from_text(text))
        assert not r.valid, name
        assert r.meta_rules == {rule}, (name, r.meta_rules)
    return f"valid base, {len(MUTATIONS)} mutations each cite one meta-rule"


def test_criterion_3_metagrammar():
    run_criterion(3, 1.0, check_metagrammar)


# ------------------------------------------------------------- 4 findGroups


def check_find_groups():
    tree = Tree.from_bracketed(GROUPING)
    partition = Partition(tuple(frozenset(b) for b in GROUPING_CLASSES))
    out = find_groups(tree, partition, 2, NameRegistry())
    assert out == Tree.from_bracketed(GROUPING_RESULT), out
    # the lone grouping node at 1.1.0.0 is gone
    assert out[(1, 1, 0)].label == Label.group("1")
    return "exact match, node 1.1.0.0 dissolved"


def test_criterion_4_find_groups():
    run_criterion(4, 1.0, check_find_groups)


# ------------------------------------------------------ 5 round-trip property


def random_tree(rng: random.Random, max_nodes: int = 30) -> Tree:
    budget = [max_nodes - 1]

    def node(depth):
        budget[0] -= 1
        if depth >= 5 or budget[0] <= 0 or rng.random() < 0.35:
            return Tree(Label.token(rng.choice("xyz")))
        kids = [node(depth + 1) for _ in range(rng.randint(1, 4)) if budget[0] > 0]
        return Tree(Label.syn(rng.choice("ABCDE")), kids or [Tree(Label.token("x"))])

    kids = [node(1) for _ in range(rng.randint(0, 4)) if budget[0] > 0]
    return Tree(Label.root(), kids)


def sibling_repeat_oracle(tree: Tree):
    children, plus = {}, {}
    for _, n in tree.walk():
        if n.children:
            counts = Counter(str(c.label) for c in n.children)
            children.setdefault(str(n.label), set()).update(counts)
            plus.setdefault(str(n.label), set()).update(k for k, v in counts.items() if v > 1)
    return children, plus


def check_round_trip():
    rng = random.Random(20240517)
    sizes = []
    for _ in range(1000):
        t = random_tree(rng)
        sizes.append(len(t))
        assert len(t) <= 30
        g = extract_grammar(t)
        assert accepts(g, t, allow_missing=True), t
        children, plus = sibling_repeat_oracle(t)
        assert len(g) == len(children), t
        for rule in g:
            assert set(rule.names) == children[rule.lhs], t
            assert {s.name for s in rule.rhs if s.plus} == plus[rule.lhs], t
    return f"1000 trees, sizes {min(sizes)}..{max(sizes)}"


def test_criterion_5_round_trip():
    run_criterion(5, 30.0, check_round_trip)


# ------------------------------------------------------------ 6 clustering


def bfs_closure(adj) -> set:
    n = len(adj)
    seen, blocks = set(), set()
    for s in range(n):
        if s in seen:
            continue
        comp, queue = {s}, deque([s])
        while queue:
            u = queue.popleft()
            for v in range(n):
                if adj[u][v] and v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        blocks.add(frozenset(comp))
    return blocks


def check_clustering():
    rng = np.random.default_rng(7)
    for _ in range(500):
        n = int(rng.integers(1, 21))
        m = rng.random((n, n))
        m = (m + m.T) / 2
        np.fill_diagonal(m, 1.0)
        t1, t2 = sorted(rng.random(2))
        p1, p2 = threshold_partition(m, t1), threshold_partition(m, t2)
        assert set(p1.blocks) == bfs_closure(m >= t1)
        assert set(p2.blocks) == bfs_closure(m >= t2)
        assert p2.refines(p1)

    # the tree route against pairwise contextual similarity
    tree = build_instance(generate(default_schema(dropout=0.2), 15, seed=11).sentences)
    scope = candidate_scope(tree)
    f = JaccardEntityNames()
    refs = [SubTreeRef(tree, p) for p in scope]
    adj = [[sim(a, b, f) >= 0.7 for b in refs] for a in refs]
    expected = {frozenset(scope[i] for i in b) for b in bfs_closure(adj)}
    assert set(equivalence_classes(tree, scope, SimParams(f, 0.7)).blocks) == expected
    return f"500 matrices plus {len(scope)} tree nodes"


def test_criterion_6_clustering():
    run_criterion(6, 30.0, check_clustering)


# ------------------------------------------------------------ 7 end-to-end


def check_end_to_end():
    clean = generate(default_schema(), 100, seed=42)
    res = structure(build_instance(clean.sentences))
    assert res.valid
    assert canonical_form(res.grammar) == canonical_form(clean.grammar), res.grammar.to_text()

    noisy = generate(default_schema(dropout=0.1), 100, seed=42)
    res = structure(build_instance(noisy.sentences), StructuringConfig(max_cycles=50))
    assert res.valid and res.iterations <= 50
    assert validate(res.grammar).valid
    first, last = res.log[0].metrics, res.log[-1].metrics
    assert last.nb_prod <= first.nb_prod, (first.nb_prod, last.nb_prod)
    assert last.nb_unlabelled < first.nb_unlabelled, (first.nb_unlabelled, last.nb_unlabelled)
    return (
        f"clean recovered exactly; noisy valid after {res.iterations} iterations, "
        f"rules {first.nb_prod}->{last.nb_prod}, unlabelled {first.nb_unlabelled}->{last.nb_unlabelled}"
    )


def test_criterion_7_end_to_end():
    run_criterion(7, 120.0, check_end_to_end)


# --------------------------------------------------------- 8 loop contracts

RUNS = {
    "clean": (default_schema(), 100, 42),
    "dropout": (default_schema(dropout=0.1), 100, 42),
    # enough distinct contexts to take the parallel clustering route
    "mixed": (default_schema(dropout=0.2, depth=0.3, shuffle=0.3), 150, 2),
}


def replay(instance: Tree, log, config: StructuringConfig) -> Tree:
    """Re-run the loop step by step, checking that exactly the logged op fires."""
    tree = instance
    registry = NameRegistry()
    registry.reserve(tree)
    for entry in log[1:]:
        ctx = Context(tree, config.sim)
        fired = None
        for op in ORDER:
            new = _apply(op, ctx, config, registry)
            if new is not None and new != tree:
                fired = (op, new)
                break
        if entry.op is Op.NONE:
            assert fired is None
            break
        assert fired is not None and fired[0] is entry.op, (entry.iteration, entry.op, fired and fired[0])
        assert entry.tried[-1] is entry.op
        tree = fired[1]
    return tree


def with_threads(n: int, fn):
    old = os.environ.get("ARCHITEXT_THREADS")
    os.environ["ARCHITEXT_THREADS"] = str(n)
    try:
        return fn()
    finally:
        if old is None:
            del os.environ["ARCHITEXT_THREADS"]
        else:
            os.environ["ARCHITEXT_THREADS"] = old


def check_contracts():
    config = StructuringConfig()
    for name, (schema, n, seed) in RUNS.items():
        sentences = generate(schema, n, seed).sentences

        def run():
            inst = build_instance(sentences)
            return inst, structure(inst, config)

        instance, res = with_threads(1, run)
        assert [e.iteration for e in res.log] == list(range(len(res.log))), name
        assert replay(instance, res.log, config) == res.instance, name
        assert entity_inventory(res.instance) == entity_inventory(instance), name
        csv = res.metrics_csv()
        assert with_threads(1, run)[1].metrics_csv() == csv, name
        assert with_threads(4, run)[1].metrics_csv() == csv, name
        assert with_threads(4, run)[1].instance == res.instance, name
    return f"{len(RUNS)} runs: one op per iteration, inventory kept, CSV identical at 1 and 4 threads"


def test_criterion_8_loop_contracts():
    run_criterion(8, 120.0, check_contracts)


# ---------------------------------------------------- 9 metrics schema

# every plotted series and the CSV column holding it
PLOTTED = {
    "nb_prod": "nb_prod",
    "nb_unlabelled": "nb_unlabelled",
    "edit_op": "op",
    "group_ratio": "mean_group_inst",
    "rel_ratio": "mean_rel_inst",
    "coll_ratio": "mean_coll_inst",
    "nb_equiv_subtrees": "nb_equiv",
    "nb_group": "nb_group",
    "nb_rel": "nb_rel",
    "nb_coll": "nb_coll",
}


def check_metrics_schema():
    columns = CSV_HEADER.split(",")
    assert columns[0] == "iteration"
    missing = [s for s, c in PLOTTED.items() if c not in columns]
    assert not missing, missing
    res = structure(build_instance(generate(default_schema(dropout=0.1), 40, seed=3).sentences))
    rows = [r.split(",") for r in res.metrics_csv().splitlines()[1:]]
    assert rows and all(len(r) == len(columns) for r in rows)
    for r in rows:
        [float(x) for x in r]
        assert -1 <= int(r[1]) <= 7
    return "CSV carries all plotted series; reference corpus numbers not reproducible (corpus not public)"


def test_criterion_9_metrics_schema():
    run_criterion(9, 60.0, check_metrics_schema)


if __name__ == "__main__":
    checks = [
        (1, 1.0, check_extraction_golden),
        (2, 1.0, check_similarity_pin),
        (3, 1.0, check_metagrammar),
        (4, 1.0, check_find_groups),
        (5, 30.0, check_round_trip),
        (6, 30.0, check_clustering),
        (7, 120.0, check_end_to_end),
        (8, 120.0, check_contracts),
        (9, 60.0, check_metrics_schema),
    ]
    failed = 0
    for n, limit, fn in checks:
        try:
            run_criterion(n, limit, fn)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
