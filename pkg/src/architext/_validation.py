"""Input checks shared by the estimator and the command line."""
from __future__ import annotations

import numbers
from typing import Sequence

from .corpus import AnnotatedSentence, build_instance, merge
from .similarity import make_similarity
from .tree import Kind, Tree

__all__ = [
    "check_tau",
    "check_positive_int",
    "check_similarity",
    "check_tree",
    "check_instance",
    "check_trees",
]


def check_tau(tau) -> float:
    if isinstance(tau, bool) or not isinstance(tau, numbers.Real):
        raise TypeError(f"tau must be a real number, got {type(tau).__name__}")
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return tau


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < 1:
        raise ValueError(f"{name} must be at least 1, got {value}")
    return int(value)


def check_similarity(name):
    if not isinstance(name, str):
        raise TypeError(f"similarity must be a name, got {type(name).__name__}")
    return make_similarity(name)


def check_tree(obj, name: str = "X") -> Tree:
    if not isinstance(obj, Tree):
        raise TypeError(f"{name} must be a Tree, got {type(obj).__name__}")
    return obj


def check_instance(X) -> Tree:
    """Coerce ``X`` into one instance tree.

    Accepts an instance tree (root labelled ROOT), a single sentence tree, or a
    non-empty sequence of trees or annotated sentences.  Sentences are
    enriched and simplified; bare trees are merged as they are.
    """
    if isinstance(X, Tree):
        return X if X.label.kind is Kind.ROOT else merge([X])
    if isinstance(X, AnnotatedSentence):
        return build_instance([X])
    if isinstance(X, (str, bytes)) or not isinstance(X, Sequence):
        raise TypeError(f"expected a Tree or a sequence of trees/sentences, got {type(X).__name__}")
    items = list(X)
    if not items:
        raise ValueError("X is empty")
    if all(isinstance(x, AnnotatedSentence) for x in items):
        return build_instance(items)
    if all(isinstance(x, Tree) for x in items):
        return merge(items)
    raise TypeError("X must hold only trees or only annotated sentences")


def check_trees(X) -> list[Tree]:
    """Trees to score one by one: the children of an instance, or the items of ``X``."""
    if isinstance(X, Tree):
        return list(X.children) if X.label.kind is Kind.ROOT else [X]
    if isinstance(X, (str, bytes)) or not isinstance(X, Sequence):
        raise TypeError(f"expected a Tree or a sequence of trees, got {type(X).__name__}")
    out = []
    for x in X:
        if isinstance(x, AnnotatedSentence):
            x = build_instance([x])
            out.extend(x.children)
        else:
            out.append(check_tree(x, "element of X"))
    return out
