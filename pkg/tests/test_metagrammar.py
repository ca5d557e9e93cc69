import pytest

from architext.grammar import CondensedGrammar
from architext.metagrammar import META_RULES, validate, validity_frontier
from architext.tree import Tree

from conftest import STRUCTURED_GRAMMAR

BASE = """\
ROOT -> COLL_1 COLL_2
COLL_1 -> REL_1+
COLL_2 -> GROUP_3+
REL_1 -> GROUP_1 GROUP_2
GROUP_1 -> ENT_A ENT_B
GROUP_2 -> ENT_C
GROUP_3 -> ENT_D
"""


def edit(old, new):
    return BASE.replace(old, new)


MUTATIONS = [
    ("root renamed", BASE.replace("ROOT ->", "START ->"), {2}),
    ("syntactic lhs", BASE + "NP -> ENT_A\n", {9}),
    ("entity defined twice", BASE + "ENT_A -> <data>\nENT_A -> <data>\n", {10}),
    ("entity body not data", BASE + "ENT_A -> ENT_B\n", {21}),
    ("group defined twice", BASE + "GROUP_1 -> ENT_A\n", {11}),
    ("relation defined twice", BASE + "REL_1 -> GROUP_1 GROUP_2\n", {12}),
    ("relation over undefined group", edit("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1 GROUP_7"), {12}),
    ("collection defined twice", BASE + "COLL_2 -> GROUP_3+\n", {13}),
    ("group inside group", edit("GROUP_2 -> ENT_C", "GROUP_2 -> ENT_C GROUP_3"), {15}),
    ("empty group", edit("GROUP_2 -> ENT_C", "GROUP_2 ->"), {15}),
    ("relation with one group", edit("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1"), {17}),
    ("relation with three groups", edit("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1 GROUP_2 GROUP_3"), {17}),
    ("self relation", edit("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1 GROUP_1"), {17}),
    ("repeated relation member", edit("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1+ GROUP_2"), {17}),
    ("repeated entity", edit("GROUP_2 -> ENT_C", "GROUP_2 -> ENT_C+"), {20}),
    ("undefined collection in root", edit("ROOT -> COLL_1 COLL_2", "ROOT -> COLL_1 COLL_2 COLL_9"), {1}),
    ("missing collection rule", BASE.replace("COLL_2 -> GROUP_3+\n", ""), {1}),
    ("root lists a name twice", edit("ROOT -> COLL_1 COLL_2", "ROOT -> COLL_1 COLL_2 COLL_2"), {3}),
    ("root repeats a name", edit("ROOT -> COLL_1 COLL_2", "ROOT -> COLL_1+ COLL_2"), {3}),
    ("root lists a syntactic label", edit("ROOT -> COLL_1 COLL_2", "ROOT -> COLL_1 COLL_2 NP"), {3}),
    ("no rules", "", {2}),
]


def test_base_is_valid():
    report = validate(CondensedGrammar.from_text(BASE))
    assert report.valid and bool(report)
    attrs = report.attributes
    # the lists hold ids without the category prefix
    assert attrs.gL == {"1", "2", "3"}
    assert attrs.rL == {"1"}
    assert attrs.crL == {"1"} and attrs.cgL == {"2"}
    assert attrs.crL_root == {"1"} and attrs.cgL_root == {"2"}
    assert attrs.eL == {"A", "B", "C", "D"}


def test_structured_grammar_is_valid():
    report = validate(CondensedGrammar.from_text(STRUCTURED_GRAMMAR))
    assert report.valid
    attrs = report.attributes
    assert attrs.crL == {"1"}
    assert attrs.gL == {"1", "2"}
    assert attrs.rL == {"1"}
    assert attrs.eL == {"1", "2", "3"}


@pytest.mark.parametrize("name, text, rules", MUTATIONS, ids=[m[0] for m in MUTATIONS])
def test_single_mutation_names_its_meta_rule(name, text, rules):
    report = validate(CondensedGrammar.from_text(text))
    assert not report.valid
    assert report.meta_rules == rules
    for v in report.violations:
        assert v.meta_rule in META_RULES
        assert str(v).startswith(f"meta-rule {v.meta_rule}:")


@pytest.mark.parametrize(
    "body", ["COLL_2 -> GROUP_3", "COLL_2 -> ENT_D+", "COLL_2 -> GROUP_3+ REL_1+"]
)
def test_bad_collection_body(body):
    # the broken collection is dropped from the name lists, so the root reference fails too
    report = validate(CondensedGrammar.from_text(edit("COLL_2 -> GROUP_3+", body)))
    assert 16 in report.meta_rules


@pytest.mark.parametrize(
    "extra",
    [
        "ENT_A -> <data>\n",
        "GROUP_9 -> ENT_Q\n",
    ],
)
def test_optional_rules_stay_valid(extra):
    assert validate(CondensedGrammar.from_text(BASE + extra)).valid


def test_root_may_list_groups_relations_and_entities():
    text = edit("ROOT -> COLL_1 COLL_2", "ROOT -> COLL_1 COLL_2 GROUP_1 REL_1 ENT_Z")
    assert validate(CondensedGrammar.from_text(text)).valid


def test_frontier_marks_unlabelled_and_offending_nodes():
    instance = Tree.from_bracketed(
        "(ROOT (NP (ENT_A a)) (REL_1 (GROUP_1 (ENT_A a)) (GROUP_1 (ENT_A b))))"
    )
    grammar = CondensedGrammar.from_text(
        "ROOT -> NP REL_1\nNP -> ENT_A\nREL_1 -> GROUP_1+\nGROUP_1 -> ENT_A\n"
    )
    frontier = validity_frontier(grammar, instance)
    assert (0,) in frontier
    assert {(1, 0), (1, 1)} <= frontier or (1,) in frontier
    assert (1, 0, 0) not in frontier


def test_frontier_of_valid_instance_is_empty(structured):
    grammar = CondensedGrammar.from_text(STRUCTURED_GRAMMAR)
    assert validity_frontier(grammar, structured) == set()
