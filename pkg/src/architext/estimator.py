"""scikit-learn style front end for the structuring loop."""
from __future__ import annotations

import copy

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_instance, check_positive_int, check_similarity, check_tau, check_trees
from .grammar import CondensedGrammar, accepts
from .rewrite import NameRegistry, StructuringConfig, StructuringResult, structure
from .similarity import SimParams
from .tree import Kind, Label, Tree

__all__ = ["GrammarInducer"]


class GrammarInducer(TransformerMixin, BaseEstimator):
    """Induce a database-style grammar from an annotated corpus.

    Parameters
    ----------
    tau : float, default=0.7
        Similarity threshold of the equivalence classes.
    min_support : int, default=2
        Smallest class size that may become a group.
    max_cycles : int, default=50
        Iteration budget of the rewriting loop.
    similarity : {"jaccard", "jaccard-multiset", "tree-edit"}, default="jaccard"
        Per-node similarity combined over ancestors.

    Attributes
    ----------
    grammar_ : CondensedGrammar
    instance_ : Tree
        The rewritten instance.
    result_ : StructuringResult
        Full outcome including the per-iteration log.
    valid_ : bool
    n_iter_ : int

    Examples
    --------
    >>> from architext.synth import default_schema, generate
    >>> corpus = generate(default_schema(), 40, seed=0)
    >>> model = GrammarInducer().fit(corpus.sentences)
    >>> model.valid_
    True
    """

    def __init__(self, tau=0.7, min_support=2, max_cycles=50, similarity="jaccard"):
        self.tau = tau
        self.min_support = min_support
        self.max_cycles = max_cycles
        self.similarity = similarity

    def _config(self) -> StructuringConfig:
        return StructuringConfig(
            sim=SimParams(check_similarity(self.similarity), check_tau(self.tau)),
            min_support=check_positive_int(self.min_support, "min_support"),
            max_cycles=check_positive_int(self.max_cycles, "max_cycles"),
        )

    def fit(self, X, y=None):
        """Run the loop on ``X`` (an instance, trees, or annotated sentences)."""
        config = self._config()
        instance = check_instance(X)
        self.registry_ = NameRegistry()
        self.result_: StructuringResult = structure(instance, config, self.registry_)
        self.grammar_: CondensedGrammar = self.result_.grammar
        self.instance_: Tree = self.result_.instance
        self.valid_ = self.result_.valid
        self.n_iter_ = self.result_.iterations
        return self

    def transform(self, X) -> Tree:
        """Structure ``X`` with the fitted settings; ids follow the fitted ones."""
        check_is_fitted(self, "result_")
        registry = copy.deepcopy(self.registry_)
        return structure(check_instance(X), self._config(), registry).instance

    def fit_transform(self, X, y=None, **fit_params) -> Tree:
        return self.fit(X, y).instance_

    def predict(self, X) -> np.ndarray:
        """Whether each tree derives from the fitted grammar, missing values allowed."""
        check_is_fitted(self, "grammar_")
        out = []
        for t in check_trees(X):
            rooted = t if t.label.kind is Kind.ROOT else Tree(Label.root(), (t,))
            out.append(accepts(self.grammar_, rooted, allow_missing=True))
        return np.asarray(out, dtype=bool)

    def score(self, X, y=None) -> float:
        """Fraction of trees accepted by the fitted grammar."""
        pred = self.predict(X)
        return float(pred.mean()) if pred.size else 0.0
