"""Semantic graphs, threshold-gated subgraph matching and rule rewriting.

A fact set such as ``joe(a), win(a,b), election(b)`` is a graph whose
nodes carry the 1-ary predicates and whose directed edges carry the 2-ary
ones. Each element has a symbol name (``None`` for ``*`` slots), an
embedding, and a ``frozen`` flag telling the trainer whether the embedding
may move.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .embeddings import cosine


class GraphError(ValueError):
    pass


class InvalidBindingError(GraphError):
    pass


@dataclass(frozen=True, eq=False)
class Node:
    id: str
    name: str | None
    embedding: np.ndarray | None = None
    frozen: bool = True
    # set on rule post-graphs only: the MATCH variable this node copies
    copy_of: str | None = None


@dataclass(frozen=True, eq=False)
class Edge:
    id: int
    source: str
    target: str
    name: str | None
    embedding: np.ndarray | None = None
    frozen: bool = True
    # set on rule post-graphs only: the MATCH edge id this edge copies
    copy_of: int | None = None


@dataclass(frozen=True, eq=False)
class SemanticGraph:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        index = {}
        for pos, node in enumerate(self.nodes):
            if node.id in index:
                raise GraphError(f"duplicate node id {node.id!r}")
            index[node.id] = pos
        seen = set()
        for edge in self.edges:
            if edge.id in seen:
                raise GraphError(f"duplicate edge id {edge.id!r}")
            seen.add(edge.id)
            for end in (edge.source, edge.target):
                if end not in index:
                    raise GraphError(f"edge {edge.id} references missing node {end!r}")
        object.__setattr__(self, "_index", index)

    def node(self, node_id: str) -> Node:
        return self.nodes[self._index[node_id]]

    def node_position(self, node_id: str) -> int:
        return self._index[node_id]

    def edge(self, edge_id: int) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def edge_position(self, edge_id: int) -> int:
        for pos, e in enumerate(self.edges):
            if e.id == edge_id:
                return pos
        raise KeyError(edge_id)

    def is_empty(self) -> bool:
        return not self.nodes and not self.edges

    def __len__(self) -> int:
        return len(self.nodes) + len(self.edges)


@dataclass(frozen=True)
class Binding:
    """Injective, structure-preserving map of a pattern into a graph (an MGU)."""

    node_map: Mapping[str, str]
    edge_map: Mapping[int, int] = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (tuple(sorted(self.node_map.items())), tuple(sorted(self.edge_map.items())))

    def to_json(self) -> dict:
        return {
            "nodes": {k: v for k, v in sorted(self.node_map.items())},
            "edges": {str(k): v for k, v in sorted(self.edge_map.items())},
        }


@dataclass(frozen=True, eq=False)
class Rule:
    """MATCH graph with per-element thresholds, CREATE graph and weight ``w``."""

    id: str
    pre: SemanticGraph
    post: SemanticGraph
    node_thresholds: Mapping[str, float]
    edge_thresholds: Mapping[int, float]
    weight: float = 1.0

    @property
    def is_template(self) -> bool:
        elements = [*self.pre.nodes, *self.pre.edges, *self.post.nodes, *self.post.edges]
        return any(not el.frozen for el in elements)

    def replace(self, **changes) -> "Rule":
        return replace(self, **changes)


ElementTest = Callable[[object, object], bool]


def find_embeddings(
    pattern: SemanticGraph,
    target: SemanticGraph,
    node_ok: ElementTest,
    edge_ok: ElementTest,
) -> list[Binding]:
    """All injective structure-preserving maps ``pattern -> target``.

    ``node_ok(p, t)`` and ``edge_ok(p, t)`` decide whether a pattern element
    may map onto a target element. Results are sorted by :attr:`Binding.key`.
    """
    p_nodes = pattern.nodes
    t_nodes = target.nodes
    if len(p_nodes) > len(t_nodes) or len(pattern.edges) > len(target.edges):
        return []

    by_ends: dict[tuple[str, str], list[Edge]] = {}
    for e in target.edges:
        by_ends.setdefault((e.source, e.target), []).append(e)

    # pattern edges indexed by the later-placed endpoint so they are checked
    # as soon as both ends are mapped
    order = {n.id: i for i, n in enumerate(p_nodes)}
    closing: list[list[Edge]] = [[] for _ in p_nodes]
    for e in pattern.edges:
        closing[max(order[e.source], order[e.target])].append(e)

    candidates = [[t for t in t_nodes if node_ok(p, t)] for p in p_nodes]
    results: list[Binding] = []
    node_map: dict[str, str] = {}
    used: set[str] = set()

    def edge_options(pe: Edge) -> list[Edge]:
        ends = (node_map[pe.source], node_map[pe.target])
        return [te for te in by_ends.get(ends, ()) if edge_ok(pe, te)]

    def assign_edges(i: int, edge_map: dict[int, int], used_edges: set[int]):
        if i == len(pattern.edges):
            results.append(Binding(dict(node_map), dict(edge_map)))
            return
        pe = pattern.edges[i]
        for te in edge_options(pe):
            if te.id in used_edges:
                continue
            edge_map[pe.id] = te.id
            used_edges.add(te.id)
            assign_edges(i + 1, edge_map, used_edges)
            used_edges.discard(te.id)
            del edge_map[pe.id]

    def assign_nodes(i: int):
        if i == len(p_nodes):
            assign_edges(0, {}, set())
            return
        p = p_nodes[i]
        for t in candidates[i]:
            if t.id in used:
                continue
            node_map[p.id] = t.id
            if all(edge_options(pe) for pe in closing[i]):
                used.add(t.id)
                assign_nodes(i + 1)
                used.discard(t.id)
            del node_map[p.id]

    assign_nodes(0)
    results.sort(key=lambda b: b.key)
    return results


def _passes(p_emb, t_emb, threshold: float) -> bool:
    if p_emb is None or t_emb is None:
        raise GraphError("cosine matching needs embeddings on both elements")
    return cosine(p_emb, t_emb) > threshold


def match_subgraph(
    pre: SemanticGraph,
    node_thresholds: Mapping[str, float],
    edge_thresholds: Mapping[int, float],
    facts: SemanticGraph,
) -> list[Binding]:
    """Bindings of ``pre`` into ``facts`` where every mapped pair clears its threshold."""
    missing = [n.id for n in pre.nodes if n.id not in node_thresholds]
    missing += [e.id for e in pre.edges if e.id not in edge_thresholds]
    if missing:
        raise GraphError(f"no threshold for precondition elements {missing}")
    return find_embeddings(
        pre,
        facts,
        lambda p, t: _passes(p.embedding, t.embedding, node_thresholds[p.id]),
        lambda p, t: _passes(p.embedding, t.embedding, edge_thresholds[p.id]),
    )


def match_rule(rule: Rule, facts: SemanticGraph) -> list[Binding]:
    return match_subgraph(rule.pre, rule.node_thresholds, rule.edge_thresholds, facts)


def check_binding(pattern: SemanticGraph, target: SemanticGraph, b: Binding) -> None:
    """Raise :class:`InvalidBindingError` unless ``b`` is a structural embedding."""
    if set(b.node_map) != {n.id for n in pattern.nodes}:
        raise InvalidBindingError("binding does not cover exactly the pattern nodes")
    if set(b.edge_map) != {e.id for e in pattern.edges}:
        raise InvalidBindingError("binding does not cover exactly the pattern edges")
    if len(set(b.node_map.values())) != len(b.node_map):
        raise InvalidBindingError("binding is not injective on nodes")
    if len(set(b.edge_map.values())) != len(b.edge_map):
        raise InvalidBindingError("binding is not injective on edges")
    for target_id in b.node_map.values():
        if target_id not in target._index:
            raise InvalidBindingError(f"binding targets missing node {target_id!r}")
    for pe in pattern.edges:
        try:
            te = target.edge(b.edge_map[pe.id])
        except KeyError:
            raise InvalidBindingError(f"binding targets missing edge {b.edge_map[pe.id]}") from None
        if (te.source, te.target) != (b.node_map[pe.source], b.node_map[pe.target]):
            raise InvalidBindingError(f"edge {pe.id} is not mapped onto matching endpoints")


def apply_rule(rule: Rule, facts: SemanticGraph, b: Binding) -> SemanticGraph:
    """Post-state of firing ``rule`` on ``facts`` under binding ``b``.

    The result is the CREATE graph with copy slots replaced by the bound fact
    elements; unmatched facts are not carried over.
    """
    check_binding(rule.pre, facts, b)
    nodes = []
    for pn in rule.post.nodes:
        if pn.copy_of is not None:
            src = facts.node(b.node_map[pn.copy_of])
            nodes.append(Node(pn.id, src.name, src.embedding, src.frozen))
        else:
            nodes.append(Node(pn.id, pn.name, pn.embedding, pn.frozen))
    edges = []
    for pos, pe in enumerate(rule.post.edges):
        if pe.copy_of is not None:
            src = facts.edge(b.edge_map[pe.copy_of])
            edges.append(Edge(pos, pe.source, pe.target, src.name, src.embedding, src.frozen))
        else:
            edges.append(Edge(pos, pe.source, pe.target, pe.name, pe.embedding, pe.frozen))
    return SemanticGraph(tuple(nodes), tuple(edges))


def goal_satisfied(state: SemanticGraph, goal: SemanticGraph, threshold: float) -> bool:
    if goal.is_empty():
        return True
    test = lambda p, t: _passes(p.embedding, t.embedding, threshold)  # noqa: E731
    return bool(find_embeddings(goal, state, test, test))


def is_isomorphic(a: SemanticGraph, b: SemanticGraph) -> bool:
    """Isomorphism up to ids, comparing symbol names."""
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    same = lambda p, t: p.name == t.name  # noqa: E731
    return bool(find_embeddings(a, b, same, same))


def subgraph(graph: SemanticGraph, b: Binding) -> SemanticGraph:
    """The part of ``graph`` hit by ``b``, in binding order."""
    node_ids = [v for _, v in sorted(b.node_map.items())]
    edge_ids = [v for _, v in sorted(b.edge_map.items())]
    return SemanticGraph(
        tuple(graph.node(i) for i in node_ids),
        tuple(graph.edge(i) for i in edge_ids),
    )


def edge_names(graphs: Sequence[SemanticGraph]) -> list[str]:
    names: list[str] = []
    for g in graphs:
        for e in g.edges:
            if e.name is not None and e.name not in names:
                names.append(e.name)
    return names

