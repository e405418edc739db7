"""Enumerating rule-application paths from facts to a goal.

Before training, template embeddings are random, so paths are found by
shape: trainable elements match any element of the right kind, and only
pairs of frozen elements are compared by cosine. Each rule fires at most
once per path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .embeddings import cosine
from .graph import Binding, Rule, SemanticGraph, apply_rule, find_embeddings, goal_satisfied, match_rule


class ChainConfigError(ValueError):
    pass


@dataclass
class ChainConfig:
    max_depth: int | None = None  # defaults to the number of rules
    n: int | None = None  # defaults to the largest node or edge count involved
    goal_check_threshold: float = 0.6


@dataclass(frozen=True, eq=False)
class PathPlan:
    steps: tuple[tuple[str, Binding], ...]
    states: tuple[SemanticGraph, ...]
    goal_binding: Binding
    n: int = 0

    @property
    def rule_ids(self) -> tuple[str, ...]:
        return tuple(rid for rid, _ in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def to_json(self) -> dict:
        return {
            "rules": list(self.rule_ids),
            "bindings": [b.to_json() for _, b in self.steps],
            "goal_binding": self.goal_binding.to_json(),
        }


def _frozen_gate(threshold_of):
    def ok(p, t) -> bool:
        if p.frozen and t.frozen and p.embedding is not None and t.embedding is not None:
            return cosine(p.embedding, t.embedding) > threshold_of(p)
        return True

    return ok


def structural_match(rule: Rule, state: SemanticGraph) -> list[Binding]:
    """Bindings that respect structure, with cosine gates only between frozen elements."""
    return find_embeddings(
        rule.pre,
        state,
        _frozen_gate(lambda p: rule.node_thresholds[p.id]),
        _frozen_gate(lambda p: rule.edge_thresholds[p.id]),
    )


def goal_bindings(state: SemanticGraph, goal: SemanticGraph, threshold: float) -> list[Binding]:
    gate = _frozen_gate(lambda p: threshold)
    return find_embeddings(goal, state, gate, gate)


def graph_size(g: SemanticGraph) -> int:
    return max(len(g.nodes), len(g.edges))


def slot_count(facts: SemanticGraph, goal: SemanticGraph, rules: Sequence[Rule]) -> int:
    """Matrix dimension: the largest node or edge count over all inputs."""
    sizes = [graph_size(facts), graph_size(goal)]
    for r in rules:
        sizes += [graph_size(r.pre), graph_size(r.post)]
    return max(1, *sizes)


def enumerate_paths(
    facts: SemanticGraph,
    goal: SemanticGraph,
    rules: Sequence[Rule],
    cfg: ChainConfig | None = None,
) -> list[PathPlan]:
    """Depth-first list of every use-once rule sequence that can reach the goal's shape."""
    cfg = cfg or ChainConfig()
    if not rules:
        return []
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        raise ChainConfigError(f"rule ids must be unique, got {ids}")
    max_depth = len(rules) if cfg.max_depth is None else cfg.max_depth
    if max_depth < 1:
        raise ChainConfigError(f"max_depth must be >= 1, got {max_depth}")
    n = slot_count(facts, goal, rules) if cfg.n is None else cfg.n

    plans: list[PathPlan] = []

    def visit(state, steps, states):
        if steps:
            found = goal_bindings(state, goal, cfg.goal_check_threshold)
            if found:
                needed = max(graph_size(s) for s in [*states, goal])
                if needed > n:
                    raise ChainConfigError(f"n={n} is too small, a path needs {needed} slots")
                plans.append(PathPlan(tuple(steps), tuple(states), found[0], n))
        if len(steps) == max_depth:
            return
        used = {rid for rid, _ in steps}
        for rule in rules:
            if rule.id in used:
                continue
            for b in structural_match(rule, state):
                nxt = apply_rule(rule, state, b)
                visit(nxt, [*steps, (rule.id, b)], [*states, nxt])

    visit(facts, [], [facts])
    return plans


@dataclass
class InferenceStep:
    rule: Rule
    binding: Binding
    state: SemanticGraph


def infer(facts: SemanticGraph, rules: Sequence[Rule], max_depth: int | None = None) -> list[InferenceStep]:
    """Greedy forward chaining: fire the first unused rule that matches, repeat."""
    max_depth = len(rules) if max_depth is None else max_depth
    state = facts
    used: set[str] = set()
    trace: list[InferenceStep] = []
    while len(trace) < max_depth:
        for rule in rules:
            if rule.id in used:
                continue
            found = match_rule(rule, state)
            if found:
                state = apply_rule(rule, state, found[0])
                trace.append(InferenceStep(rule, found[0], state))
                used.add(rule.id)
                break
        else:
            break
    return trace


def replay(
    facts: SemanticGraph,
    goal: SemanticGraph,
    rules: Sequence[Rule],
    threshold: float,
) -> list[SemanticGraph] | None:
    """States of the first branch that fires ``rules`` in order and reaches the goal.

    Every binding of each rule is explored; ``None`` when no branch works.
    """

    def visit(i, states):
        if i == len(rules):
            return states if goal_satisfied(states[-1], goal, threshold) else None
        for b in match_rule(rules[i], states[-1]):
            found = visit(i + 1, [*states, apply_rule(rules[i], states[-1], b)])
            if found is not None:
                return found
        return None

    return visit(0, [facts])
