"""Command line: ``architext structure|validate|extract|generate``.

Exit codes: 0 success, 1 invalid grammar (validate), 2 bad input,
3 iteration budget exhausted (structure).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .corpus import CorpusError, load_instance, merge, parse_trees
from .grammar import CondensedGrammar, GrammarSyntaxError, extract_grammar
from .metagrammar import validate
from .rewrite import StructuringConfig, structure
from .similarity import SimParams, make_similarity
from .synth import SchemaError, default_schema, generate, parse_schema
from .tree import BracketError, Tree

log = logging.getLogger("architext")

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

CONFIG_KEYS = {"tau": float, "min_support": int, "max_cycles": int, "similarity": str}


class InputError(Exception):
    pass


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not eq or key not in CONFIG_KEYS:
                raise InputError(f"{path}:{n}: expected one of {', '.join(CONFIG_KEYS)} = value")
            try:
                out[key] = CONFIG_KEYS[key](value.strip())
            except ValueError:
                raise InputError(f"{path}:{n}: bad value for {key}: {value.strip()!r}") from None
    return out


def read_instance(path) -> Tree:
    """One bracketed tree per line (or one tree over several lines), merged under a root."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        trees = [t for _, t in parse_trees(text.splitlines())]
    except CorpusError:
        trees = [Tree.from_bracketed(text)]
    if not trees:
        raise InputError(f"{path}: no tree found")
    return trees[0] if len(trees) == 1 and str(trees[0].label) == "ROOT" else merge(trees)


# ------------------------------------------------------------------ commands


def cmd_structure(args) -> int:
    config = StructuringConfig(
        SimParams(make_similarity(args.similarity), args.tau), args.min_support, args.max_cycles
    )
    if args.instance:
        instance = read_instance(args.instance)
    elif args.trees:
        instance = load_instance(args.trees, args.entities)
    else:
        raise InputError("give --trees (with optional --entities) or --instance")
    result = structure(instance, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.grammar.write(out / "grammar.txt")
    (out / "instance.txt").write_text(result.instance.to_bracketed() + "\n", encoding="utf-8")
    (out / "metrics.csv").write_text(result.metrics_csv(), encoding="utf-8")
    status = "valid" if result.valid else "invalid (budget exhausted)"
    print(f"iterations: {result.iterations}")
    print(f"grammar: {status}, {len(result.grammar)} rules")
    if not result.valid:
        print(f"best iteration: {result.best_iteration}")
        print(f"frontier: {len(result.frontier)} positions")
    print(f"written to {out}")
    return EXIT_OK if result.valid else EXIT_BUDGET


def cmd_validate(args) -> int:
    grammar = CondensedGrammar.read(args.grammar)
    report = validate(grammar)
    for v in report.violations:
        print(v)
    if report.valid:
        print("valid")
        return EXIT_OK
    return EXIT_INVALID


def cmd_extract(args) -> int:
    grammar = extract_grammar(read_instance(args.instance), entity_rules=args.entity_rules)
    if args.out:
        grammar.write(args.out)
    else:
        sys.stdout.write(grammar.to_text())
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.schema:
        schema = parse_schema(Path(args.schema).read_text(encoding="utf-8"))
    else:
        schema = default_schema()
    noise = {k: getattr(args, k) for k in ("dropout", "depth", "shuffle") if getattr(args, k) is not None}
    if noise:
        merged = {"dropout": schema.noise.dropout, "depth": schema.noise.depth, "shuffle": schema.noise.shuffle}
        schema = schema.with_noise(**{**merged, **noise})
    corpus = generate(schema, args.n, args.seed)
    paths = corpus.write(args.out)
    print(f"{args.n} sentences written to {paths['trees'].parent}")
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="architext", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("structure", help="rewrite a corpus until its grammar is valid")
    parser.set_defaults(structure_parser=p)
    p.add_argument("--trees", help="bracketed parse trees, one per line (optional 'id<TAB>' prefix)")
    p.add_argument("--entities", help="TSV with columns sentence, entity, start, end")
    p.add_argument("--instance", help="an already enriched instance tree instead of --trees")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--tau", type=float, default=0.7)
    p.add_argument("--min-support", type=int, default=2)
    p.add_argument("--max-cycles", type=int, default=50)
    p.add_argument("--similarity", default="jaccard", choices=["jaccard", "jaccard-multiset", "tree-edit"])
    p.add_argument("--out", default="architext-out", help="output directory")
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("validate", help="check a grammar against the meta-grammar")
    p.add_argument("--grammar", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("extract", help="print the grammar of an instance tree")
    p.add_argument("--instance", required=True)
    p.add_argument("--entity-rules", action="store_true", help="add ENT_x -> <data> rules")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("generate", help="write a synthetic corpus from a planted schema")
    p.add_argument("--schema", help="schema file; the built-in four-group schema if omitted")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dropout", type=float)
    p.add_argument("--depth", type=float)
    p.add_argument("--shuffle", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        # config values become defaults, so explicit flags still win
        args.structure_parser.set_defaults(**read_config(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except InputError as exc:
        print(f"architext: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"architext: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, CorpusError, GrammarSyntaxError, BracketError, SchemaError, ValueError, OSError) as exc:
        print(f"architext: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
