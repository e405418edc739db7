"""Command line entry point: ``diffreason {validate,infer,train,extract}``.

Exit codes: 0 success, 1 invalid input, 2 no path or no verified path.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from importlib.resources import files
from pathlib import Path

from .chain import ChainConfig, infer
from .dsl import DSLError, compile_rule, parse_facts, parse_rules, serialize_graph
from .embeddings import (
    TOY_RELATION_SEED,
    Lexicon,
    UnknownSymbolError,
    VocabStore,
    VocabularyError,
    load_toy_lexicon,
    load_word_vectors,
)
from .graph import edge_names
from .trainer import TrainConfig, TrainingError, report, train_all

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class InputError(Exception):
    pass


def bundle_dir(name: str) -> Path:
    """A bundle directory on disk, or one of the bundled examples by name."""
    path = Path(name)
    if path.is_dir():
        return path
    bundled = Path(str(files("diffreason") / "data" / "bundles" / name))
    if bundled.is_dir():
        return bundled
    raise InputError(f"no bundle directory {name!r}")


def _resolve_inputs(args) -> None:
    if getattr(args, "bundle", None):
        d = bundle_dir(args.bundle)
        for attr, fname in (("facts", "facts.txt"), ("goal", "goal.txt"), ("rules", "rules.txt"), ("config", "config.json")):
            if hasattr(args, attr) and getattr(args, attr) is None and (d / fname).exists():
                setattr(args, attr, str(d / fname))


def _read(path: str | None, what: str) -> str:
    if path is None:
        raise InputError(f"missing --{what}")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _lexicon(args) -> Lexicon:
    if args.vocab is None and args.relations is None:
        return load_toy_lexicon()
    toy = load_toy_lexicon()
    try:
        nodes = toy.nodes if args.vocab is None else load_word_vectors(args.vocab)
        relations = (
            load_word_vectors(args.relations) if args.relations else VocabStore(nodes.dim, {})
        )
        return Lexicon(nodes, relations, TOY_RELATION_SEED)
    except OSError as exc:
        raise InputError(f"{exc.filename}: {exc.strerror}") from None
    except VocabularyError as exc:
        raise InputError(str(exc)) from None


def _load(args, need_goal: bool):
    """Parse every input file before any computation; errors name the file."""
    lexicon = _lexicon(args)
    texts = {"facts": _read(args.facts, "facts"), "rules": _read(args.rules, "rules")}
    if need_goal:
        texts["goal"] = _read(args.goal, "goal")
    paths = {"facts": args.facts, "rules": args.rules, "goal": getattr(args, "goal", None)}

    def guarded(kind, fn):
        try:
            return fn()
        except DSLError as exc:
            raise InputError(f"{paths[kind]}:{exc}") from None
        except UnknownSymbolError as exc:
            raise InputError(f"{paths[kind]}: symbol {exc.args[0]!r} is not in the vocabulary") from None

    facts_atoms = guarded("facts", lambda: parse_facts(texts["facts"]))
    goal_atoms = guarded("goal", lambda: parse_facts(texts["goal"])) if need_goal else None
    rule_texts = guarded("rules", lambda: parse_rules(texts["rules"]))
    lexicon = lexicon.with_relations(
        edge_names([g for g in (facts_atoms, goal_atoms) if g is not None])
        + [a.name for rt in rule_texts for a in (*rt.match_atoms, *rt.create_atoms) if a.is_edge and isinstance(a.name, str)]
    )
    facts = guarded("facts", lambda: parse_facts(texts["facts"], lexicon))
    goal = guarded("goal", lambda: parse_facts(texts["goal"], lexicon)) if need_goal else None
    seed = getattr(args, "seed", None) or 0
    rules = [
        guarded("rules", lambda rt=rt, i=i: compile_rule(rt, lexicon, f"rule{i + 1}", seed))
        for i, rt in enumerate(rule_texts)
    ]
    return lexicon, facts, goal, rules, texts


def cmd_validate(args) -> int:
    _resolve_inputs(args)
    _load(args, need_goal=args.goal is not None)
    if args.config:
        _configs(args)
    print("ok")
    return EXIT_OK


def cmd_infer(args) -> int:
    _resolve_inputs(args)
    _, facts, _, rules, _ = _load(args, need_goal=False)
    for r in rules:
        if r.is_template:
            raise InputError(f"{args.rules}: {r.id} contains '*' slots; infer needs fully specified rules")
    print(f"state 0: {serialize_graph(facts)}")
    for i, step in enumerate(infer(facts, rules, args.max_depth), start=1):
        binding = ", ".join(f"{k}->{v}" for k, v in sorted(step.binding.node_map.items()))
        print(f"apply {step.rule.id} {{{binding}}}")
        print(f"state {i}: {serialize_graph(step.state)}")
    return EXIT_OK


def _configs(args) -> tuple[TrainConfig, ChainConfig]:
    raw = {}
    if args.config:
        try:
            raw = json.loads(_read(args.config, "config"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: {exc}") from None
    train_kw = dict(raw.get("train", {}))
    chain_kw = dict(raw.get("chain", {}))
    for flag, key in (("seed", "seed"), ("epochs", "epochs"), ("lr", "learning_rate"), ("loss_mode", "loss_mode")):
        value = getattr(args, flag, None)
        if value is not None:
            train_kw[key] = value
    if getattr(args, "max_depth", None) is not None:
        chain_kw["max_depth"] = args.max_depth
    known_t = {f.name for f in fields(TrainConfig)}
    known_c = {f.name for f in fields(ChainConfig)}
    unknown = (set(train_kw) - known_t) | (set(chain_kw) - known_c)
    if unknown:
        raise InputError(f"{args.config}: unknown config keys {sorted(unknown)}")
    try:
        return TrainConfig(**train_kw), ChainConfig(**chain_kw)
    except ValueError as exc:
        raise InputError(f"{args.config}: {exc}") from None


def cmd_train(args) -> int:
    _resolve_inputs(args)
    train_cfg, chain_cfg = _configs(args)
    args.seed = train_cfg.seed
    lexicon, facts, goal, rules, texts = _load(args, need_goal=True)
    try:
        best, ranked = train_all(facts, goal, rules, lexicon, chain_cfg, train_cfg)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    data = report(best, ranked, train_cfg, chain_cfg, inputs=texts)
    out = json.dumps(data, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    status = "verified" if best.verified else "NOT verified"
    print(f"best path {list(best.path.rule_ids)}: {status}, loss {best.final_loss:.6g}", file=sys.stderr)
    for text in best.rule_texts:
        print(text + "\n", file=sys.stderr)
    return EXIT_OK if best.verified else EXIT_FAILED


def cmd_extract(args) -> int:
    try:
        data = json.loads(_read(args.report, "report"))
        best = data["paths"][data.get("best", 0)]
    except (json.JSONDecodeError, KeyError, IndexError) as exc:
        raise InputError(f"{args.report}: not a training report ({exc})") from None
    print("\n\n".join(best["extracted_rules"]))
    return EXIT_OK if best["verified"] else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffreason", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p, goal=True):
        p.add_argument("--bundle", help="directory (or bundled name) holding facts.txt, goal.txt, rules.txt, config.json")
        p.add_argument("--facts")
        if goal:
            p.add_argument("--goal")
        p.add_argument("--rules")
        p.add_argument("--vocab", help="node word vectors, GloVe text format (default: bundled toy vocabulary)")
        p.add_argument("--relations", help="relation vectors, GloVe text format")

    p = sub.add_parser("validate", help="parse all inputs and report problems")
    inputs(p)
    p.add_argument("--config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("infer", help="symbolic forward chaining with fully specified rules")
    inputs(p, goal=False)
    p.add_argument("--max-depth", type=int)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="learn rules from templates and write a JSON report")
    inputs(p)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--loss-mode", choices=["stated", "full_bce"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="print the best learned rules of a report")
    p.add_argument("report")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
