import sys

import pytest

from architext.similarity import Partition
from architext.tree import Tree

# instance with two X nodes missing different children
FIG_QUOTIENT = "(ROOT (X a b) (X b c) (Y a))"

# colored tree: white root, red and green children
FIG_COLORS = "(white (red black blue) (green blue (red black) (red black)))"

# a fully structured instance and its grammar
STRUCTURED = "(ROOT (COLL_1 (REL_1 (GROUP_1 (ENT_1 v1) (ENT_2 v2)) (GROUP_2 (ENT_3 v3)))))"
STRUCTURED_GRAMMAR = """\
ROOT -> COLL_1
COLL_1 -> REL_1+
REL_1 -> GROUP_1 GROUP_2
GROUP_1 -> ENT_1 ENT_2
GROUP_2 -> ENT_3
"""

HEART_RATE = "(S (NP (DT The) (NN heart) (NN rate)) (VP (VBD was) (NP (CD 100) (NN bpm))))"

# entity parents at several depths; E6 sits one level deeper than E7
GROUPING = (
    "(ROOT"
    " (N (N (ENT_E2 v2)) (N (N (ENT_E3 v3)) (ENT_E4 v4)))"
    " (N (ENT_E5 v5) (N (N (N (ENT_E6 v6)) (ENT_E7 v7)) (N (ENT_E8 v8)))))"
)
GROUPING_CLASSES = [
    [(0,)], [(1,)], [(0, 0), (1, 1, 0)], [(0, 1)], [(0, 1, 0), (1, 1, 1)], [(1, 1)], [(1, 1, 0, 0)],
]
GROUPING_RESULT = (
    "(ROOT"
    " (N (GROUP_1 (ENT_E2 v2)) (N (GROUP_0 (ENT_E3 v3)) (ENT_E4 v4)))"
    " (N (ENT_E5 v5) (N (GROUP_1 (ENT_E6 v6) (ENT_E7 v7)) (GROUP_0 (ENT_E8 v8)))))"
)


@pytest.fixture
def quotient_tree():
    return Tree.from_bracketed(FIG_QUOTIENT)


@pytest.fixture
def color_tree():
    return Tree.from_bracketed(FIG_COLORS)


@pytest.fixture
def structured():
    return Tree.from_bracketed(STRUCTURED)


@pytest.fixture
def grouping():
    tree = Tree.from_bracketed(GROUPING)
    return tree, Partition(tuple(frozenset(b) for b in GROUPING_CLASSES))


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
