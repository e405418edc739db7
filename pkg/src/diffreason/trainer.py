"""Training rule templates along enumerated paths.

Every path from :func:`diffreason.chain.enumerate_paths` is turned into a
matrix chain over the rules' tensors and optimised on its own. A trained
path counts as *verified* when its rules, written out as text with nearest
vocabulary words and re-parsed, fire symbolically from the facts and reach
the goal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import difftensor as dt
from .chain import ChainConfig, PathPlan, enumerate_paths, replay
from .dsl import compile_rule, parse_rule, serialize_rule, slot_tag
from .embeddings import Lexicon, random_embedding
from .graph import Edge, Node, Rule, SemanticGraph, edge_names

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class NoPathError(TrainingError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 2000
    learning_rate: float = 0.01
    clip_floor: float = 0.6
    clip_ceiling: float = 0.99
    weight_floor: float = 0.0
    # None: 1 / (number of MATCH nodes), so propagation never pushes truth above 1
    weight_ceiling: float | None = None
    seed: int = 0
    loss_mode: str = "stated"
    success_threshold: float = 0.6
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 50
    min_improvement: float = 1e-8

    def __post_init__(self):
        if not 0 < self.clip_floor <= self.clip_ceiling < 1:
            raise ValueError(f"need 0 < clip_floor <= clip_ceiling < 1, got {self.clip_floor}, {self.clip_ceiling}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.loss_mode not in ("stated", "full_bce"):
            raise ValueError(f"unknown loss_mode {self.loss_mode!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def init_params(rule: Rule, seed: int) -> dt.RuleParams:
    """Tensors for ``rule``; trainable slots are re-drawn from ``seed``."""

    def emb(el, side, kind, key):
        if el.frozen:
            return dt.Tensor(el.embedding)
        vec = random_embedding(seed, slot_tag(rule.id, side, kind, key), len(el.embedding))
        return dt.Tensor(vec, requires_grad=True)

    p = dt.RuleParams(weight=dt.Tensor(rule.weight, requires_grad=True))
    for n in rule.pre.nodes:
        p.match_nodes[n.id] = emb(n, "match", "node", n.id)
        p.node_thresholds[n.id] = dt.Tensor(rule.node_thresholds[n.id], requires_grad=True)
    for e in rule.pre.edges:
        p.match_edges[e.id] = emb(e, "match", "edge", e.id)
        p.edge_thresholds[e.id] = dt.Tensor(rule.edge_thresholds[e.id], requires_grad=True)
    for n in rule.post.nodes:
        if n.copy_of is None:
            p.create_nodes[n.id] = emb(n, "create", "node", n.id)
    for e in rule.post.edges:
        if e.copy_of is None:
            p.create_edges[e.id] = emb(e, "create", "edge", e.id)
    return p


def learned_rule(rule: Rule, p: dt.RuleParams) -> Rule:
    """``rule`` with embeddings, thresholds and weight read back from ``p``."""
    vec = lambda t: t.data[:, 0].copy()  # noqa: E731
    pre = SemanticGraph(
        tuple(Node(n.id, n.name, vec(p.match_nodes[n.id]), n.frozen) for n in rule.pre.nodes),
        tuple(
            Edge(e.id, e.source, e.target, e.name, vec(p.match_edges[e.id]), e.frozen) for e in rule.pre.edges
        ),
    )
    post = SemanticGraph(
        tuple(
            n if n.copy_of is not None else Node(n.id, n.name, vec(p.create_nodes[n.id]), n.frozen)
            for n in rule.post.nodes
        ),
        tuple(
            e
            if e.copy_of is not None
            else Edge(e.id, e.source, e.target, e.name, vec(p.create_edges[e.id]), e.frozen)
            for e in rule.post.edges
        ),
    )
    return rule.replace(
        pre=pre,
        post=post,
        node_thresholds={k: t.item() for k, t in p.node_thresholds.items()},
        edge_thresholds={k: t.item() for k, t in p.edge_thresholds.items()},
        weight=p.weight.item(),
    )


# -- chain assembly --------------------------------------------------------------


@dataclass
class ChainProgram:
    node_steps: list[tuple[dt.StepMatrices, dt.Tensor | None]]
    relation_steps: list[tuple[dt.StepMatrices, dt.Tensor | None]]
    goal_nodes: np.ndarray
    goal_edges: np.ndarray
    n: int

    def truth_vectors(self, normalize: bool = True) -> tuple[dt.Tensor, dt.Tensor]:
        f0 = np.ones((self.n, 1))
        return (
            dt.forward_chain(self.node_steps, f0, normalize),
            dt.relation_chain(self.relation_steps, f0, normalize),
        )

    def loss(self, mode: str = "stated") -> dt.Tensor:
        f, fr = self.truth_vectors()
        return dt.loss(f, fr, self.goal_nodes, self.goal_edges, mode)


def _thresholds(values: Sequence[dt.Tensor | float], n: int) -> dt.Tensor:
    row = dt.concat_cols([dt.as_tensor(v) for v in values], n, rows=1)
    return dt.transpose(row)


def build_program(
    plan: PathPlan,
    goal: SemanticGraph,
    rules: dict[str, Rule],
    params: dict[str, dt.RuleParams],
    goal_threshold: float = 0.6,
) -> ChainProgram:
    """Matrices of every step of ``plan`` wired to the rules' tensors.

    Fact and goal embeddings are constants. A copy slot forwards the very
    tensor it copied, so gradients flow back through earlier steps.
    """
    n = plan.n
    facts = plan.states[0]
    dim = len(facts.nodes[0].embedding) if facts.nodes else len(goal.nodes[0].embedding)
    node_cols = [dt.Tensor(nd.embedding) for nd in facts.nodes]
    edge_cols = [dt.Tensor(e.embedding) for e in facts.edges]
    node_steps, rel_steps = [], []

    for i, (rid, b) in enumerate(plan.steps):
        rule, p, state = rules[rid], params[rid], plan.states[i]
        M = np.zeros((n, n))
        for j, nd in enumerate(rule.pre.nodes):
            M[j, state.node_position(b.node_map[nd.id])] = 1.0
        node_steps.append(
            (
                dt.StepMatrices(
                    dt.concat_cols([p.match_nodes[nd.id] for nd in rule.pre.nodes], n, rows=dim),
                    dt.concat_cols(node_cols, n, rows=dim),
                    M,
                    _thresholds([p.node_thresholds[nd.id] for nd in rule.pre.nodes], n),
                    len(rule.pre.nodes),
                    len(rule.post.nodes),
                ),
                p.weight,
            )
        )
        Mr = np.zeros((n, n))
        for j, e in enumerate(rule.pre.edges):
            Mr[j, state.edge_position(b.edge_map[e.id])] = 1.0
        rel_steps.append(
            (
                dt.StepMatrices(
                    dt.concat_cols([p.match_edges[e.id] for e in rule.pre.edges], n, rows=dim),
                    dt.concat_cols(edge_cols, n, rows=dim),
                    Mr,
                    _thresholds([p.edge_thresholds[e.id] for e in rule.pre.edges], n),
                    len(rule.pre.edges),
                    len(rule.post.edges),
                ),
                p.weight,
            )
        )
        node_cols = [
            node_cols[state.node_position(b.node_map[nd.copy_of])] if nd.copy_of is not None else p.create_nodes[nd.id]
            for nd in rule.post.nodes
        ]
        edge_cols = [
            edge_cols[state.edge_position(b.edge_map[e.copy_of])] if e.copy_of is not None else p.create_edges[e.id]
            for e in rule.post.edges
        ]

    last, gb = plan.states[-1], plan.goal_binding
    M = np.zeros((n, n))
    for j, nd in enumerate(goal.nodes):
        M[j, last.node_position(gb.node_map[nd.id])] = 1.0
    Mr = np.zeros((n, n))
    for j, e in enumerate(goal.edges):
        Mr[j, last.edge_position(gb.edge_map[e.id])] = 1.0
    node_steps.append(
        (
            dt.StepMatrices(
                dt.concat_cols([dt.Tensor(nd.embedding) for nd in goal.nodes], n, rows=dim),
                dt.concat_cols(node_cols, n, rows=dim),
                M,
                _thresholds([goal_threshold] * len(goal.nodes), n),
            ),
            None,
        )
    )
    rel_steps.append(
        (
            dt.StepMatrices(
                dt.concat_cols([dt.Tensor(e.embedding) for e in goal.edges], n, rows=dim),
                dt.concat_cols(edge_cols, n, rows=dim),
                Mr,
                _thresholds([goal_threshold] * len(goal.edges), n),
            ),
            None,
        )
    )
    g = np.zeros((n, 1))
    g[: len(goal.nodes)] = 1.0
    gr = np.zeros((n, 1))
    gr[: len(goal.edges)] = 1.0
    return ChainProgram(node_steps, rel_steps, g, gr, n)


# -- optimisation ----------------------------------------------------------------


class Adam:
    def __init__(self, params: Sequence[dt.Tensor], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad**2
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params: Sequence[dt.Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self):
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad


def _optimizer(params, cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return SGD(params, cfg.learning_rate)
    return Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)


@dataclass
class Problem:
    """One facts/goal pair with its enumerated path."""

    facts: SemanticGraph
    goal: SemanticGraph
    path: PathPlan


@dataclass
class TrainedPath:
    paths: list[PathPlan]
    rules: list[Rule]  # learned rules in path order
    params: dict[str, dt.RuleParams]
    loss_curve: list[float]
    verified: bool
    rule_texts: list[str] = field(default_factory=list)

    @property
    def path(self) -> PathPlan:
        return self.paths[0]

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1]

    @property
    def epochs(self) -> int:
        return len(self.loss_curve) - 1

    def to_json(self) -> dict:
        out = {
            "rules": list(self.path.rule_ids),
            "length": len(self.path),
            "final_loss": self.final_loss,
            "epochs": self.epochs,
            "verified": self.verified,
            "extracted_rules": self.rule_texts,
            "weights": [r.weight for r in self.rules],
            "loss_curve": self.loss_curve,
        }
        if len(self.paths) == 1:
            out.update(self.path.to_json())
        else:
            out["pairs"] = [p.to_json() for p in self.paths]
        return out


def extract_rules(tp: TrainedPath, lexicon: Lexicon) -> list[str]:
    """Readable text of each learned rule on the path."""
    return [serialize_rule(r, lexicon) for r in tp.rules]


def verify_texts(
    texts: Sequence[str], problems: Sequence[Problem], lexicon: Lexicon, threshold: float
) -> bool:
    """Re-parse rule texts and fire them symbolically on every problem."""
    compiled = [compile_rule(parse_rule(t), lexicon, f"check{i}") for i, t in enumerate(texts)]
    return all(replay(pb.facts, pb.goal, compiled, threshold) is not None for pb in problems)


def weight_ceiling(rule: Rule, cfg: TrainConfig) -> float:
    if cfg.weight_ceiling is not None:
        return cfg.weight_ceiling
    return 1.0 / max(1, len(rule.pre.nodes))


def _project(params: dict[str, dt.RuleParams], rules: dict[str, Rule], cfg: TrainConfig):
    for rid, p in params.items():
        for t in p.thresholds():
            np.clip(t.data, cfg.clip_floor, cfg.clip_ceiling, out=t.data)
        np.clip(p.weight.data, cfg.weight_floor, weight_ceiling(rules[rid], cfg), out=p.weight.data)


def _train(
    problems: Sequence[Problem],
    rules: dict[str, Rule],
    lexicon: Lexicon,
    cfg: TrainConfig,
    goal_threshold: float,
) -> TrainedPath:
    order = list(problems[0].path.rule_ids)
    params = {rid: init_params(rules[rid], cfg.seed) for rid in order}
    trainable = [t for rid in order for t in params[rid].trainable()]
    _project(params, rules, cfg)  # start inside the feasible box

    def total_loss() -> dt.Tensor:
        total = None
        for pb in problems:
            L = build_program(pb.path, pb.goal, rules, params, goal_threshold).loss(cfg.loss_mode)
            total = L if total is None else dt.add(total, L)
        return total

    def snapshot():
        learned = [learned_rule(rules[rid], params[rid]) for rid in order]
        texts = [serialize_rule(r, lexicon) for r in learned]
        return learned, texts

    def check(value: float, epoch: int):
        if not math.isfinite(value):
            weights = {rid: p.weight.item() for rid, p in params.items()}
            raise TrainingError(f"non-finite loss {value} at epoch {epoch} on path {order}; weights {weights}")

    L = total_loss()
    curve = [L.item()]
    check(curve[0], 0)
    learned, texts = snapshot()
    # fully written rules need no training when they already reach the goal
    if not any(rules[rid].is_template for rid in order) and verify_texts(
        texts, problems, lexicon, cfg.success_threshold
    ):
        return TrainedPath([pb.path for pb in problems], learned, params, curve, True, texts)

    opt = _optimizer(trainable, cfg)
    for epoch in range(1, cfg.epochs + 1):
        dt.zero_grads(trainable)
        dt.backward(L)
        opt.step()
        _project(params, rules, cfg)
        L = total_loss()
        curve.append(L.item())
        check(curve[-1], epoch)
        if len(curve) > cfg.patience and curve[-cfg.patience - 1] - curve[-1] < cfg.min_improvement:
            break

    learned, texts = snapshot()
    verified = verify_texts(texts, problems, lexicon, cfg.success_threshold)
    log.debug("path %s: loss %.3g after %d epochs, verified=%s", order, curve[-1], len(curve) - 1, verified)
    return TrainedPath([pb.path for pb in problems], learned, params, curve, verified, texts)


def _prepare(lexicon: Lexicon, graphs: Sequence[SemanticGraph], rules: Sequence[Rule]) -> Lexicon:
    names = edge_names([*graphs, *(r.pre for r in rules), *(r.post for r in rules)])
    return lexicon.with_relations(names)


def train_path(
    path: PathPlan,
    facts: SemanticGraph,
    goal: SemanticGraph,
    rules: Sequence[Rule],
    lexicon: Lexicon,
    cfg: TrainConfig | None = None,
    goal_threshold: float = 0.6,
) -> TrainedPath:
    cfg = cfg or TrainConfig()
    lexicon = _prepare(lexicon, [facts, goal], rules)
    return _train([Problem(facts, goal, path)], {r.id: r for r in rules}, lexicon, cfg, goal_threshold)


def _rank(results: list[TrainedPath]) -> list[TrainedPath]:
    indexed = sorted(enumerate(results), key=lambda ir: (not ir[1].verified, ir[1].final_loss, ir[0]))
    return [r for _, r in indexed]


def train_all(
    facts: SemanticGraph,
    goal: SemanticGraph,
    rules: Sequence[Rule],
    lexicon: Lexicon,
    chain_cfg: ChainConfig | None = None,
    train_cfg: TrainConfig | None = None,
) -> tuple[TrainedPath, list[TrainedPath]]:
    """Train every enumerated path; returns the best and the ranked list."""
    best, ranked = train_multi([(facts, goal)], rules, lexicon, chain_cfg, train_cfg)
    return best, ranked


def train_multi(
    pairs: Sequence[tuple[SemanticGraph, SemanticGraph]],
    rules: Sequence[Rule],
    lexicon: Lexicon,
    chain_cfg: ChainConfig | None = None,
    train_cfg: TrainConfig | None = None,
) -> tuple[TrainedPath, list[TrainedPath]]:
    """Shared rule parameters trained on the summed loss of several pairs.

    A joint candidate picks one path per pair, all using the same rule
    sequence; every such combination is trained and ranked.
    """
    if not pairs:
        raise ValueError("train_multi needs at least one (facts, goal) pair")
    chain_cfg = chain_cfg or ChainConfig()
    train_cfg = train_cfg or TrainConfig()
    lexicon = _prepare(lexicon, [g for pair in pairs for g in pair], rules)
    by_id = {r.id: r for r in rules}

    per_pair = [enumerate_paths(f, g, rules, chain_cfg) for f, g in pairs]
    if any(not plans for plans in per_pair):
        raise NoPathError("no rule path connects the facts to the goal")
    candidates: list[list[PathPlan]] = [[p] for p in per_pair[0]]
    for plans in per_pair[1:]:
        candidates = [c + [p] for c in candidates for p in plans if p.rule_ids == c[0].rule_ids]
    if not candidates:
        raise NoPathError("no rule sequence reaches the goal for every pair")

    results = []
    for combo in candidates:
        problems = [Problem(f, g, p) for (f, g), p in zip(pairs, combo)]
        results.append(_train(problems, by_id, lexicon, train_cfg, chain_cfg.goal_check_threshold))
    ranked = _rank(results)
    return ranked[0], ranked


def report(
    best: TrainedPath,
    ranked: Sequence[TrainedPath],
    train_cfg: TrainConfig,
    chain_cfg: ChainConfig,
    inputs: dict | None = None,
) -> dict:
    """JSON-ready training report."""
    return {
        "config": {"train": asdict(train_cfg), "chain": asdict(chain_cfg)},
        "inputs": inputs or {},
        "best": 0,
        "best_verified": best.verified,
        "paths": [tp.to_json() for tp in ranked],
    }
