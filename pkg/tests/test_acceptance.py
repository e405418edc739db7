"""Acceptance suite: one test per headline requirement.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import itertools
import json
import time

import numpy as np
import pytest

from diffreason import difftensor as dt
from diffreason.chain import ChainConfig, enumerate_paths, replay
from diffreason.cli import main
from diffreason.dsl import compile_rule, format_rule_text, parse_facts, parse_rule, parse_rules, serialize_graph
from diffreason.graph import Binding, Edge, Node, SemanticGraph, match_subgraph
from diffreason.trainer import TrainConfig, train_all

import oracles
from conftest import BUNDLES
from helpers import RULE_POOL, gradient_instance, random_rule_string, random_vectors, read_bundle

SEEDS = (0, 1, 2, 3, 4)
criterion = pytest.mark.criterion


def train_report(tmp_path, bundle, seed):
    out = tmp_path / f"{bundle}-{seed}.json"
    code = main(["train", "--bundle", bundle, "--seed", str(seed), "--out", str(out)])
    return code, json.loads(out.read_text())


@criterion("one-rule learning: verified on >= 3 of 5 seeds, thresholds >= 0.6, < 60 s per run")
def test_one_rule_learning(tmp_path, lexicon):
    texts = read_bundle("one_rule")
    facts, goal = parse_facts(texts["facts"], lexicon), parse_facts(texts["goal"], lexicon)
    successes = 0
    for seed in SEEDS:
        start = time.perf_counter()
        code, data = train_report(tmp_path, "one_rule", seed)
        assert time.perf_counter() - start < 60
        best = data["paths"][data["best"]]
        rules = [compile_rule(parse_rule(t), lexicon, f"learned{i}") for i, t in enumerate(best["extracted_rules"])]
        replayed = replay(facts, goal, rules, 0.6) is not None
        thresholds = [a.threshold for t in best["extracted_rules"] for a in parse_rule(t).match_atoms]
        ok = code == 0 and best["verified"] and replayed and min(thresholds) >= 0.6
        successes += ok
    assert successes >= 3


@criterion("two-rule chaining: verified length-2 path on >= 3 of 5 seeds, frozen 'and' unchanged, < 5 min")
def test_two_rule_chaining(lexicon):
    texts = read_bundle("two_rules")
    facts, goal = parse_facts(texts["facts"], lexicon), parse_facts(texts["goal"], lexicon)
    and_before = lexicon.relations["and"].tobytes()
    start = time.perf_counter()
    successes = 0
    for seed in SEEDS:
        rules = [compile_rule(rt, lexicon, f"rule{i + 1}", seed) for i, rt in enumerate(parse_rules(texts["rules"]))]
        frozen_before = [e.embedding.tobytes() for r in rules for e in (*r.pre.edges, *r.post.edges) if e.frozen]
        best, _ = train_all(facts, goal, rules, lexicon, ChainConfig(max_depth=2), TrainConfig(seed=seed))
        second = parse_rule(best.rule_texts[1]) if len(best.rule_texts) == 2 else None
        uses_and = second is not None and any(a.is_edge and a.name == "and" for a in second.match_atoms)
        frozen_after = [e.embedding.tobytes() for r in rules for e in (*r.pre.edges, *r.post.edges) if e.frozen]
        learned_and = [e.embedding.tobytes() for e in best.rules[-1].pre.edges if e.name == "and"]
        unchanged = frozen_after == frozen_before and learned_and == [and_before]
        successes += best.verified and len(best.path) == 2 and uses_and and unchanged
    assert time.perf_counter() - start < 300
    assert successes >= 3


@criterion("gradient correctness: 20 random chains match central differences within 1e-4, < 30 s")
def test_gradient_correctness(lexicon):
    start = time.perf_counter()
    for seed in range(20):
        loss_fn, params, n = gradient_instance(1000 + seed, lexicon)
        assert n <= 6
        dt.zero_grads(params)
        dt.backward(loss_fn())
        for p in params:
            numeric = oracles.numeric_grad(lambda: loss_fn().item(), p.data, h=1e-5)
            analytic = np.zeros_like(p.data) if p.grad is None else p.grad
            assert oracles.rel_err(analytic, numeric).max() < 1e-4
    assert time.perf_counter() - start < 30


@criterion("similarity matrix: 100 instances match scalar loops within 1e-12, columns sum to 1, masked entries exactly 0")
def test_similarity_fidelity():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n, dim = int(rng.integers(1, 7)), int(rng.integers(2, 9))
        pre, facts = int(rng.integers(0, n + 1)), int(rng.integers(0, n + 1))
        P, F = np.zeros((dim, n)), np.zeros((dim, n))
        P[:, :pre] = rng.standard_normal((dim, pre))
        F[:, :facts] = rng.standard_normal((dim, facts))
        M = (rng.random((n, n)) < 0.4).astype(float)
        thr = np.zeros((n, 1))
        thr[:pre, 0] = rng.uniform(0.6, 0.99, pre)
        step = dt.StepMatrices(dt.Tensor(P), dt.Tensor(F), M, dt.Tensor(thr))
        S = dt.similarity_matrix(step).data
        np.testing.assert_allclose(S, oracles.scalar_similarity(P, F, M, thr[:, 0]), rtol=0, atol=1e-12)
        assert np.all(S[M == 0] == 0.0)
        unmasked = dt.similarity_matrix(dt.StepMatrices(step.P, step.F, np.ones((n, n)), step.thresholds)).data
        np.testing.assert_allclose(unmasked.sum(axis=0), 1.0, atol=1e-6)


@criterion("propagation matrix: pre=3, post=2, w=1, n=4 gives the printed block")
def test_propagation_layout():
    expected = np.array([[1, 1, 1, 0], [1, 1, 1, 0], [0, 0, 0, 0], [0, 0, 0, 0]], dtype=float)
    np.testing.assert_array_equal(dt.propagation_matrix(3, 2, 1.0, 4).data, expected)


TOY_CASES = [
    ("fruit(a), be(a,b), apple(b)", "apple(a), and(a,b), fruit(b)"),
    ("person(a), be(a,b), person(b), and(b,c), apple(c)", "person(a), profession(a,b), president(b)"),
    ("apple(a)", "fruit(a)"),
    ("fruit(a), be(a,b), apple(b), and(b,a)", "fruit(a), be(a,b), fruit(b)"),
    ("person(a), fruit(b)", "person(a), be(a,b), fruit(b)"),
    ("fruit(a), and(a,b), apple(b), be(a,b)", "president(a)"),
]


@criterion("path enumeration: equals brute-force recursion for all rule sets of size <= 3, no rule repeated")
def test_path_enumeration_oracle(lexicon):
    nonempty = 0
    for facts_text, goal_text in TOY_CASES:
        facts, goal = parse_facts(facts_text, lexicon), parse_facts(goal_text, lexicon)
        assert len(facts) <= 6
        for size in (1, 2, 3):
            for combo in itertools.combinations(range(len(RULE_POOL)), size):
                rules = [compile_rule(parse_rule(RULE_POOL[i]), lexicon, f"rule{i}") for i in combo]
                plans = enumerate_paths(facts, goal, rules, ChainConfig(max_depth=size))
                got = [tuple((rid, b.key) for rid, b in p.steps) for p in plans]
                assert got == oracles.all_paths(facts, goal, rules, size)
                assert all(len(set(p.rule_ids)) == len(p.rule_ids) for p in plans)
                nonempty += bool(plans)
    assert nonempty > 50


@criterion("subgraph matching: 50 instances equal exhaustive injections; self-match always present")
def test_matching_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        dim = 5
        base = rng.standard_normal(dim)
        n_facts = int(rng.integers(1, 7))
        nodes = tuple(Node(f"f{i}", f"f{i}", v) for i, v in enumerate(random_vectors(rng, n_facts, dim, base, 0.8)))
        edges = []
        for k in range(int(rng.integers(0, n_facts + 2))):
            s, t = rng.choice(n_facts, 2)
            edges.append(Edge(k, f"f{s}", f"f{t}", f"r{k}", base + rng.standard_normal(dim)))
        facts = SemanticGraph(nodes, tuple(edges))
        n_pre = int(rng.integers(1, min(3, n_facts) + 1))
        pre_nodes = tuple(Node(f"p{i}", f"p{i}", v) for i, v in enumerate(random_vectors(rng, n_pre, dim, base, 0.8)))
        pre_edges = []
        for k in range(int(rng.integers(0, n_pre + 1))):
            s, t = rng.choice(n_pre, 2)
            pre_edges.append(Edge(k, f"p{s}", f"p{t}", f"q{k}", base + rng.standard_normal(dim)))
        pre = SemanticGraph(pre_nodes, tuple(pre_edges))
        node_thr = {n.id: float(rng.uniform(-0.3, 0.9)) for n in pre.nodes}
        edge_thr = {e.id: float(rng.uniform(-0.5, 0.5)) for e in pre.edges}
        got = [b.key for b in match_subgraph(pre, node_thr, edge_thr, facts)]
        assert got == oracles.threshold_injections(pre, node_thr, edge_thr, facts)

        self_thr = {n.id: float(rng.uniform(0, 1)) for n in facts.nodes}
        self_edge_thr = {e.id: float(rng.uniform(0, 1)) for e in facts.edges}
        identity = Binding({n.id: n.id for n in facts.nodes}, {e.id: e.id for e in facts.edges})
        assert identity.key in [b.key for b in match_subgraph(facts, self_thr, self_edge_thr, facts)]


@criterion("DSL round trip: parse-serialize-parse is a fixed point on bundles and 200 random rules")
def test_dsl_round_trip():
    for name in BUNDLES:
        texts = read_bundle(name)
        for key in ("facts", "goal"):
            once = serialize_graph(parse_facts(texts[key]))
            assert serialize_graph(parse_facts(once)) == once
        for rt in parse_rules(texts["rules"]):
            once = format_rule_text(rt)
            assert format_rule_text(parse_rule(once)) == once
            assert set(parse_rule(once).match_atoms) == set(rt.match_atoms)
    rng = np.random.default_rng(11)
    for _ in range(200):
        text = random_rule_string(rng)
        once = format_rule_text(parse_rule(text))
        again = parse_rule(once)
        assert format_rule_text(again) == once
        assert set(again.match_atoms) == set(parse_rule(text).match_atoms)
        assert set(again.create_atoms) == set(parse_rule(text).create_atoms)


@criterion("determinism: same seed gives byte-identical reports for every bundle")
def test_determinism(tmp_path):
    for name in BUNDLES:
        outputs = []
        for run in range(2):
            out = tmp_path / f"{name}-{run}.json"
            main(["train", "--bundle", name, "--out", str(out)])
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
