"""Induce database-style grammars from syntactically parsed, entity-annotated text."""
from .corpus import AnnotatedSentence, CorpusConfig, NamedEntity, build_instance, load_instance
from .estimator import GrammarInducer
from .grammar import CondensedGrammar, Rule, Symbol, accepts, canonical_form, extract_grammar
from .metagrammar import ValidationReport, Violation, validate
from .rewrite import StructuringConfig, StructuringResult, structure
from .similarity import SimParams, make_similarity
from .synth import PlantedSchema, default_schema, generate, parse_schema
from .tree import Kind, Label, Tree

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "CondensedGrammar",
    "CorpusConfig",
    "GrammarInducer",
    "Kind",
    "Label",
    "NamedEntity",
    "PlantedSchema",
    "Rule",
    "SimParams",
    "StructuringConfig",
    "StructuringResult",
    "Symbol",
    "Tree",
    "ValidationReport",
    "Violation",
    "accepts",
    "build_instance",
    "canonical_form",
    "default_schema",
    "extract_grammar",
    "generate",
    "load_instance",
    "make_similarity",
    "parse_schema",
    "structure",
    "validate",
]
