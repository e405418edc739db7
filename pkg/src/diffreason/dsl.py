"""Predicate text format for facts, goals, rules and rule templates.

Facts and goals are comma-separated atoms::

    joe(a), win(a,b), election(b), in(b,c), USA(c)

Rules pair a MATCH clause with a CREATE clause. MATCH atoms may carry a
threshold (``person>0.6(a)``), templates use ``*`` for a trainable symbol,
and a bare ``(a)`` in CREATE copies whatever MATCH bound to ``a``::

    MATCH person>0.6(a), win>0.7(a,b), election>0.6(b)
    CREATE (a), be(a,b), president(b)

A rules file holds one rule per block; blocks are separated by blank lines.
Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .embeddings import Lexicon, nearest_word, random_embedding
from .graph import Edge, Node, Rule, SemanticGraph

DEFAULT_THRESHOLD = 0.6


class Marker(enum.Enum):
    WILDCARD = "*"
    COPY = ""

    def __repr__(self):
        return f"Marker.{self.name}"


WILDCARD = Marker.WILDCARD
COPY = Marker.COPY


class DSLError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


class DSLSyntaxError(DSLError):
    pass


class UndeclaredVariableError(DSLError):
    pass


class DuplicateVariableError(DSLError):
    pass


class UnboundCopySlotError(DSLError):
    pass


class ThresholdRangeError(DSLError):
    pass


class UnnamedElementError(DSLError):
    pass


@dataclass(frozen=True)
class PredicateAtom:
    name: str | Marker
    args: tuple[str, ...]
    threshold: float | None = None
    line: int | None = None
    col: int | None = None

    @property
    def is_edge(self) -> bool:
        return len(self.args) == 2

    def __eq__(self, other):
        if not isinstance(other, PredicateAtom):
            return NotImplemented
        return (self.name, self.args, self.threshold) == (other.name, other.args, other.threshold)

    def __hash__(self):
        return hash((self.name, self.args, self.threshold))


@dataclass(frozen=True)
class RuleText:
    match_atoms: tuple[PredicateAtom, ...]
    create_atoms: tuple[PredicateAtom, ...]


_NAME = re.compile(r"[^\W][\w\-]*")
_VAR = re.compile(r"[a-z][a-z0-9_]*")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_KEYWORDS = ("MATCH", "CREATE")


class _Scanner:
    def __init__(self, text: str, line_offset: int = 0):
        self.text = _blank_comments(text)
        self.pos = 0
        self.line_offset = line_offset

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line + self.line_offset, col

    def error(self, message: str, cls=DSLSyntaxError, pos: int | None = None):
        line, col = self.where(pos)
        return cls(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def at_end(self) -> bool:
        return self.peek() == ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = self.peek() or "end of input"
            raise self.error(f"expected {ch!r}, found {found!r}")
        self.pos += 1

    def regex(self, pattern: re.Pattern, what: str) -> str:
        self.skip_ws()
        m = pattern.match(self.text, self.pos)
        if not m:
            found = self.text[self.pos : self.pos + 10] or "end of input"
            raise self.error(f"expected {what}, found {found!r}")
        self.pos = m.end()
        return m.group(0)

    def keyword_ahead(self, word: str) -> bool:
        self.skip_ws()
        m = _NAME.match(self.text, self.pos)
        return bool(m) and m.group(0) == word

    def keyword(self, word: str):
        if not self.keyword_ahead(word):
            raise self.error(f"expected keyword {word}")
        self.pos += len(word)


def _blank_comments(text: str) -> str:
    # keep offsets stable so error positions refer to the original text
    return "\n".join(
        " " * len(line) if line.lstrip().startswith("#") else line for line in text.split("\n")
    )


def _parse_atom(sc: _Scanner) -> PredicateAtom:
    sc.skip_ws()
    line, col = sc.where()
    ch = sc.peek()
    if ch == "*":
        sc.pos += 1
        name: str | Marker = WILDCARD
    elif ch == "(":
        name = COPY
    else:
        name = sc.regex(_NAME, "predicate name")
        if name in _KEYWORDS:
            raise sc.error(f"keyword {name} used as a predicate name", pos=sc.pos - len(name))
    threshold = None
    if sc.peek() == ">":
        sc.pos += 1
        start = sc.pos
        threshold = float(sc.regex(_NUMBER, "threshold value"))
        if not 0.0 <= threshold <= 1.0:
            raise sc.error(f"threshold {threshold} outside [0, 1]", ThresholdRangeError, start)
    sc.expect("(")
    args = [sc.regex(_VAR, "variable")]
    if sc.peek() == ",":
        sc.pos += 1
        args.append(sc.regex(_VAR, "variable"))
    sc.expect(")")
    return PredicateAtom(name, tuple(args), threshold, line, col)


def _parse_atoms(sc: _Scanner, stop: tuple[str, ...] = ()) -> list[PredicateAtom]:
    atoms: list[PredicateAtom] = []
    if sc.at_end() or any(sc.keyword_ahead(k) for k in stop):
        return atoms
    atoms.append(_parse_atom(sc))
    while sc.peek() == ",":
        sc.pos += 1
        atoms.append(_parse_atom(sc))
    return atoms


def _check_side(atoms: list[PredicateAtom], side: str) -> None:
    declared: dict[str, PredicateAtom] = {}
    for atom in atoms:
        if not atom.is_edge:
            var = atom.args[0]
            if var in declared:
                raise DuplicateVariableError(
                    f"variable {var!r} declared twice in {side}", atom.line, atom.col
                )
            declared[var] = atom
    for atom in atoms:
        if atom.is_edge:
            for var in atom.args:
                if var not in declared:
                    raise UndeclaredVariableError(
                        f"edge {_atom_label(atom)} uses variable {var!r} with no node atom in {side}",
                        atom.line,
                        atom.col,
                    )


def _atom_label(atom: PredicateAtom) -> str:
    name = "*" if atom.name is WILDCARD else ("" if atom.name is COPY else atom.name)
    return f"{name}({','.join(atom.args)})"


def parse_atoms(text: str, line_offset: int = 0) -> list[PredicateAtom]:
    """Plain fact atoms: no thresholds, wildcards or copy slots."""
    sc = _Scanner(text, line_offset)
    atoms = _parse_atoms(sc)
    if not sc.at_end():
        raise sc.error(f"unexpected {sc.peek()!r}")
    for atom in atoms:
        if atom.threshold is not None:
            raise DSLSyntaxError("thresholds are only allowed in MATCH", atom.line, atom.col)
        if atom.name is WILDCARD:
            raise DSLSyntaxError("'*' is only allowed in rule templates", atom.line, atom.col)
        if atom.name is COPY:
            raise DSLSyntaxError("copy slots are only allowed in CREATE", atom.line, atom.col)
    _check_side(atoms, "facts")
    return atoms


def parse_rule(text: str, default_threshold: float = DEFAULT_THRESHOLD, line_offset: int = 0) -> RuleText:
    sc = _Scanner(text, line_offset)
    sc.keyword("MATCH")
    match = _parse_atoms(sc, stop=("CREATE",))
    sc.keyword("CREATE")
    create = _parse_atoms(sc)
    if not sc.at_end():
        raise sc.error(f"unexpected {sc.peek()!r}")

    for atom in match:
        if atom.name is COPY:
            raise DSLSyntaxError("copy slots are only allowed in CREATE", atom.line, atom.col)
    for atom in create:
        if atom.threshold is not None:
            raise DSLSyntaxError("thresholds are only allowed in MATCH", atom.line, atom.col)
    _check_side(match, "MATCH")
    _check_side(create, "CREATE")

    match_nodes = {a.args[0] for a in match if not a.is_edge}
    match_edges = {a.args for a in match if a.is_edge}
    for atom in create:
        if atom.name is not COPY:
            continue
        if atom.is_edge:
            if atom.args not in match_edges:
                raise UnboundCopySlotError(
                    f"copy slot {_atom_label(atom)} has no MATCH edge {atom.args}", atom.line, atom.col
                )
        elif atom.args[0] not in match_nodes:
            raise UnboundCopySlotError(
                f"copy slot ({atom.args[0]}) is not bound in MATCH", atom.line, atom.col
            )

    match = [
        a if a.threshold is not None else PredicateAtom(a.name, a.args, default_threshold, a.line, a.col)
        for a in match
    ]
    return RuleText(tuple(match), tuple(create))


def split_blocks(text: str) -> list[tuple[int, str]]:
    """Blank-line separated blocks with their starting line offsets."""
    blocks: list[tuple[int, str]] = []
    current: list[str] = []
    start = 0
    for i, line in enumerate(text.split("\n")):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            if not current:
                start = i
            current.append(line)
        elif not stripped and current:
            blocks.append((start, "\n".join(current)))
            current = []
    if current:
        blocks.append((start, "\n".join(current)))
    return blocks


def parse_rules(text: str, default_threshold: float = DEFAULT_THRESHOLD) -> list[RuleText]:
    return [parse_rule(block, default_threshold, offset) for offset, block in split_blocks(text)]


# -- building graphs -----------------------------------------------------------


def _node_vector(lexicon: Lexicon | None, name):
    return None if lexicon is None else lexicon.node_vector(name)


def _relation_vector(lexicon: Lexicon | None, name):
    return None if lexicon is None else lexicon.relation_vector(name)


def graph_from_atoms(atoms, lexicon: Lexicon | None = None) -> SemanticGraph:
    nodes = [
        Node(a.args[0], a.name, _node_vector(lexicon, a.name), True) for a in atoms if not a.is_edge
    ]
    edges = [
        Edge(i, a.args[0], a.args[1], a.name, _relation_vector(lexicon, a.name), True)
        for i, a in enumerate(a for a in atoms if a.is_edge)
    ]
    return SemanticGraph(tuple(nodes), tuple(edges))


def parse_facts(text: str, lexicon: Lexicon | None = None) -> SemanticGraph:
    """Parse a fact (or goal) listing; embeddings attached when ``lexicon`` is given."""
    return graph_from_atoms(parse_atoms(text), lexicon)


def slot_tag(rule_id: str, side: str, kind: str, key) -> str:
    """Tag under which the ``*`` slot's random vector is drawn."""
    return f"{rule_id}/{side}/{kind}/{key}"


def compile_rule(rt: RuleText, lexicon: Lexicon, rule_id: str, seed: int = 0, weight: float = 1.0) -> Rule:
    """Attach embeddings: named symbols are frozen vocabulary vectors, ``*`` slots
    get trainable vectors from ``random_embedding(seed, "<rule_id>/<slot>")``."""
    dim = lexicon.dim

    def element(atom: PredicateAtom, slot: tuple, is_edge: bool):
        if atom.name is WILDCARD:
            return None, random_embedding(seed, slot_tag(rule_id, *slot), dim), False
        vec = lexicon.relation_vector(atom.name) if is_edge else lexicon.node_vector(atom.name)
        return atom.name, vec, True

    pre_nodes, node_thr = [], {}
    pre_edges, edge_thr = [], {}
    match_edge_ids: dict[tuple[str, str], int] = {}
    for atom in rt.match_atoms:
        if atom.is_edge:
            eid = len(pre_edges)
            name, vec, frozen = element(atom, ("match", "edge", eid), True)
            pre_edges.append(Edge(eid, atom.args[0], atom.args[1], name, vec, frozen))
            edge_thr[eid] = atom.threshold
            match_edge_ids.setdefault(atom.args, eid)
        else:
            var = atom.args[0]
            name, vec, frozen = element(atom, ("match", "node", var), False)
            pre_nodes.append(Node(var, name, vec, frozen))
            node_thr[var] = atom.threshold

    post_nodes, post_edges = [], []
    for atom in rt.create_atoms:
        if atom.is_edge:
            eid = len(post_edges)
            if atom.name is COPY:
                post_edges.append(
                    Edge(eid, atom.args[0], atom.args[1], None, None, True, copy_of=match_edge_ids[atom.args])
                )
            else:
                name, vec, frozen = element(atom, ("create", "edge", eid), True)
                post_edges.append(Edge(eid, atom.args[0], atom.args[1], name, vec, frozen))
        else:
            var = atom.args[0]
            if atom.name is COPY:
                post_nodes.append(Node(var, None, None, True, copy_of=var))
            else:
                name, vec, frozen = element(atom, ("create", "node", var), False)
                post_nodes.append(Node(var, name, vec, frozen))

    return Rule(
        rule_id,
        SemanticGraph(tuple(pre_nodes), tuple(pre_edges)),
        SemanticGraph(tuple(post_nodes), tuple(post_edges)),
        node_thr,
        edge_thr,
        weight,
    )


# -- serialization -------------------------------------------------------------


def _variable_names():
    import itertools
    import string

    for size in itertools.count(1):
        for letters in itertools.product(string.ascii_lowercase, repeat=size):
            yield "".join(letters)


def format_threshold(t: float) -> str:
    return repr(float(t))


def serialize_graph(g: SemanticGraph) -> str:
    """Canonical text: each node followed by its outgoing edges, fresh variables."""
    names = _variable_names()
    var = {n.id: next(names) for n in g.nodes}
    parts = []
    for node in g.nodes:
        if node.name is None:
            raise UnnamedElementError(f"node {node.id!r} has no symbol name")
        parts.append(f"{node.name}({var[node.id]})")
        for e in g.edges:
            if e.source != node.id:
                continue
            if e.name is None:
                raise UnnamedElementError(f"edge {e.id} has no symbol name")
            parts.append(f"{e.name}({var[e.source]},{var[e.target]})")
    return ", ".join(parts)


def format_atom(atom: PredicateAtom) -> str:
    if atom.name is WILDCARD:
        name = "*"
    elif atom.name is COPY:
        name = ""
    else:
        name = atom.name
    thr = "" if atom.threshold is None else ">" + format_threshold(atom.threshold)
    return f"{name}{thr}({','.join(atom.args)})"


def format_rule_text(rt: RuleText) -> str:
    """Nodes before edges on each side, as in learned-rule listings."""

    def side(atoms):
        ordered = [a for a in atoms if not a.is_edge] + [a for a in atoms if a.is_edge]
        return ", ".join(format_atom(a) for a in ordered)

    return f"MATCH {side(rt.match_atoms)}\nCREATE {side(rt.create_atoms)}"


def rule_to_text(rule: Rule, lexicon: Lexicon | None = None) -> RuleText:
    """Readable form of a (possibly trained) rule.

    Frozen elements keep their symbol; trainable ones take the nearest
    vocabulary word (nodes) or relation (edges). Without a lexicon,
    trainable elements print as ``*``.
    """

    def symbol(el, is_edge: bool):
        if el.frozen and el.name is not None:
            return el.name
        if lexicon is None:
            return WILDCARD
        store = lexicon.relations if is_edge else lexicon.nodes
        return nearest_word(el.embedding, store)[0]

    match = [PredicateAtom(symbol(n, False), (n.id,), float(rule.node_thresholds[n.id])) for n in rule.pre.nodes]
    match += [
        PredicateAtom(symbol(e, True), (e.source, e.target), float(rule.edge_thresholds[e.id]))
        for e in rule.pre.edges
    ]
    create = [
        PredicateAtom(COPY if n.copy_of is not None else symbol(n, False), (n.id,)) for n in rule.post.nodes
    ]
    create += [
        PredicateAtom(COPY if e.copy_of is not None else symbol(e, True), (e.source, e.target))
        for e in rule.post.edges
    ]
    return RuleText(tuple(match), tuple(create))


def serialize_rule(rule: Rule, lexicon: Lexicon | None = None) -> str:
    return format_rule_text(rule_to_text(rule, lexicon))
