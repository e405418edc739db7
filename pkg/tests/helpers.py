"""Input builders shared by the test modules."""

import numpy as np

from diffreason.cli import bundle_dir

NAMES = ["person", "fruit", "apple", "first-lady", "USA", "dog", "cat"]
RELATIONS = ["be", "win", "in", "and", "part-of", "spouse"]
VARS = "abcdefgh"


def read_bundle(name: str) -> dict[str, str]:
    d = bundle_dir(name)
    return {f: (d / f"{f}.txt").read_text() for f in ("facts", "goal", "rules")}


def _threshold(rng) -> str:
    style = rng.integers(4)
    if style == 0:
        return f"{rng.uniform(0, 1):.{rng.integers(1, 9)}f}"
    if style == 1:
        return repr(float(rng.uniform(0, 1)))
    if style == 2:
        return str(int(rng.integers(0, 2)))
    return f"{rng.uniform(0.01, 1):.3e}"


def _edges(rng, vars_, count):
    return [(vars_[rng.integers(len(vars_))], vars_[rng.integers(len(vars_))]) for _ in range(count)]


def random_rule_string(rng) -> str:
    """A valid rule with random names, wildcards, thresholds and copy slots."""
    n_match = int(rng.integers(0, 4))
    mvars = list(VARS[:n_match])
    match = []
    for v in mvars:
        name = "*" if rng.random() < 0.4 else NAMES[rng.integers(len(NAMES))]
        thr = f">{_threshold(rng)}" if rng.random() < 0.7 else ""
        match.append(f"{name}{thr}({v})")
    medges = _edges(rng, mvars, int(rng.integers(0, 3))) if mvars else []
    for s, t in medges:
        name = "*" if rng.random() < 0.4 else RELATIONS[rng.integers(len(RELATIONS))]
        thr = f">{_threshold(rng)}" if rng.random() < 0.7 else ""
        match.append(f"{name}{thr}({s},{t})")

    copied = [v for v in mvars if rng.random() < 0.5]
    fresh = list(VARS[n_match : n_match + int(rng.integers(0, 3))])
    create = [f"({v})" for v in copied]
    create += [f"{'*' if rng.random() < 0.5 else NAMES[rng.integers(len(NAMES))]}({v})" for v in fresh]
    cvars = copied + fresh
    for s, t in medges:
        if s in copied and t in copied and rng.random() < 0.5:
            create.append(f"({s},{t})")
    for s, t in _edges(rng, cvars, int(rng.integers(0, 3))) if cvars else []:
        name = "*" if rng.random() < 0.5 else RELATIONS[rng.integers(len(RELATIONS))]
        create.append(f"{name}({s},{t})")
    order = rng.permutation(len(match))
    match = [match[i] for i in order]
    sep = [", ", ",", " ,  "][rng.integers(3)]
    return f"MATCH {sep.join(match)}\nCREATE {sep.join(create)}"


def random_facts_text(rng, n_nodes: int, n_edges: int, names=NAMES, relations=RELATIONS) -> str:
    vars_ = list(VARS[:n_nodes])
    atoms = [f"{names[rng.integers(len(names))]}({v})" for v in vars_]
    atoms += [f"{relations[rng.integers(len(relations))]}({s},{t})" for s, t in _edges(rng, vars_, n_edges)]
    return ", ".join(atoms)


def random_vectors(rng, count: int, dim: int, base=None, spread: float = 0.5) -> list[np.ndarray]:
    """Random vectors, optionally scattered around ``base`` so cosines vary widely."""
    if base is None:
        return [rng.standard_normal(dim) for _ in range(count)]
    return [base + spread * rng.standard_normal(dim) for _ in range(count)]


RULE_POOL = [
    "MATCH *(a) CREATE (a), *(b), *(a,b)",
    "MATCH *(a), *(a,b), *(b) CREATE (b)",
    "MATCH fruit(a), *(a,b), *(b) CREATE (a), *(c), be(a,c)",
    "MATCH *(a), be(a,b), *(b) CREATE (b), (a), and(b,a)",
    "MATCH person(a) CREATE (a), president(b), profession(a,b)",
    "MATCH *(a), and(a,b), *(b) CREATE *(c), *(c,d), *(d)",
    "MATCH *(a), *(b) CREATE (a), (b), *(a,b)",
    "MATCH apple>0.7(a) CREATE fruit(b)",
]
CHAIN_NAMES = ["person", "fruit", "apple", "president"]
CHAIN_RELATIONS = ["be", "and", "profession"]


GRADIENT_TEMPLATES = [
    "MATCH *(a), *(a,b), *(b) CREATE (a), *(a,c), *(c)",
    "MATCH *(a) CREATE (a), *(b), *(a,b)",
    "MATCH *(a), *(b), *(a,b) CREATE (b), (a), *(b,a)",
    "MATCH *(a), be(a,b), *(b) CREATE *(c), (b), and(c,b)",
    "MATCH *(a), *(a,b), *(b), *(a,c), *(c) CREATE (b), *(b,d), *(d)",
]
GRADIENT_NAMES = ["person", "fruit", "apple", "round", "dog", "city"]
GRADIENT_RELATIONS = ["be", "and", "in", "win"]


def gradient_instance(seed: int, lexicon):
    """A random 1-2 step training chain built through the real pipeline.

    Returns ``(loss_fn, params, n)``: ``loss_fn()`` rebuilds the chain from
    the current parameter values and returns the scalar loss tensor.
    """
    from diffreason.chain import ChainConfig, enumerate_paths
    from diffreason.dsl import compile_rule, parse_facts, parse_rule
    from diffreason.trainer import build_program, init_params

    rng = np.random.default_rng(seed)
    while True:
        n_nodes = int(rng.integers(2, 4))
        facts = parse_facts(
            random_facts_text(rng, n_nodes, int(rng.integers(1, 4)), GRADIENT_NAMES, GRADIENT_RELATIONS), lexicon
        )
        goal = parse_facts(
            random_facts_text(rng, int(rng.integers(1, 3)), int(rng.integers(0, 2)), GRADIENT_NAMES, GRADIENT_RELATIONS),
            lexicon,
        )
        picks = rng.choice(len(GRADIENT_TEMPLATES), int(rng.integers(1, 3)), replace=False)
        rules = [compile_rule(parse_rule(GRADIENT_TEMPLATES[i]), lexicon, f"r{k}", seed) for k, i in enumerate(picks)]
        plans = enumerate_paths(facts, goal, rules, ChainConfig(max_depth=2))
        if plans and plans[-1].n <= 6:
            break
    plan = plans[int(rng.integers(len(plans)))]
    by_id = {r.id: r for r in rules}
    params = {rid: init_params(by_id[rid], seed) for rid in plan.rule_ids}
    for rid, p in params.items():
        for t in p.thresholds():
            t.data[...] = rng.uniform(0.6, 0.99)
        p.weight.data[...] = rng.uniform(0.2, 1.0) / max(1, len(by_id[rid].pre.nodes))
    mode = "full_bce" if rng.random() < 0.5 else "stated"

    def loss_fn():
        return build_program(plan, goal, by_id, params, 0.6).loss(mode)

    trainable = [t for p in params.values() for t in p.trainable()]
    return loss_fn, trainable, plan.n
