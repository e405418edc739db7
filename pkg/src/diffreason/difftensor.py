"""A small reverse-mode autodiff engine over 2-D float64 arrays.

Only what the matrix chain needs is here: products, masks, column softmax,
column normalisation, logs and sums. Vectors are ``(n, 1)`` tensors and
scalars are ``(1, 1)``.

The second half builds the chain itself. For rule step ``i`` with
precondition embeddings ``P`` (columns) and current fact embeddings ``F``::

    S_i = M_i * softmax_cols(P^T F - T_i)         # masked, threshold-biased
    R_i = w * block(post_count, pre_count)        # rule propagation
    f_n = S_n R_{n-1} S_{n-1} ... R_0 S_0 f_0

where the last similarity compares the final created state with the goal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

EPS = 1e-7


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, *, op: str = "leaf", parents=(), backward=None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = op
        self._parents: tuple[Tensor, ...] = tuple(parents)
        self._backward: Callable[[np.ndarray], None] | None = backward

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return hadamard(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, op: str, parents: Sequence[Tensor], backward) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, needs, op=op, parents=parents if needs else (), backward=backward if needs else None)


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")

    def back(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    out = _result(a.data @ b.data, "matmul", (a, b), None)
    out._backward = back if out.requires_grad else None
    return out


def _binary(op, a, b, fwd, back_a, back_b):
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(op, a, b)
    out = _result(fwd(a.data, b.data), op, (a, b), None)
    if out.requires_grad:
        def back(g):
            a._accumulate(back_a(g, a.data, b.data))
            b._accumulate(back_b(g, a.data, b.data))

        out._backward = back
    return out


def hadamard(a, b) -> Tensor:
    return _binary("hadamard", a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x)


def add(a, b) -> Tensor:
    return _binary("add", a, b, np.add, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g)


def _unary(op, a, fwd, back_fn):
    a = as_tensor(a)
    y = fwd(a.data)
    out = _result(y, op, (a,), None)
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(back_fn(g, a.data, y))
    return out


def transpose(a) -> Tensor:
    return _unary("transpose", a, lambda x: x.T.copy(), lambda g, x, y: g.T)


def neg(a) -> Tensor:
    return _unary("neg", a, np.negative, lambda g, x, y: -g)


def log_elem(a) -> Tensor:
    return _unary("log", a, np.log, lambda g, x, y: g / x)


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clip into ``[lo, hi]``; zero gradient where clipping is active."""
    return _unary(
        "clamp",
        a,
        lambda x: np.clip(x, lo, hi),
        lambda g, x, y: g * ((x >= lo) & (x <= hi)),
    )


def sum(a) -> Tensor:  # noqa: A001 - mirrors the op name
    return _unary("sum", a, lambda x: np.array([[x.sum()]]), lambda g, x, y: np.full_like(x, g[0, 0]))


def softmax_cols(a) -> Tensor:
    """Softmax down each column (max-subtracted)."""

    def fwd(x):
        z = np.exp(x - x.max(axis=0, keepdims=True))
        return z / z.sum(axis=0, keepdims=True)

    return _unary(
        "softmax_cols",
        a,
        fwd,
        lambda g, x, y: y * (g - (g * y).sum(axis=0, keepdims=True)),
    )


def normalize_cols(a) -> Tensor:
    """Scale each column to unit length; all-zero columns stay zero."""

    def norms(x):
        return np.linalg.norm(x, axis=0, keepdims=True)

    def fwd(x):
        n = norms(x)
        return np.divide(x, n, out=np.zeros_like(x), where=n > 0)

    def back(g, x, y):
        n = norms(x)
        proj = g - y * (g * y).sum(axis=0, keepdims=True)
        return np.divide(proj, n, out=np.zeros_like(x), where=n > 0)

    return _unary("normalize_cols", a, fwd, back)


def scale(w, a) -> Tensor:
    """``w * a`` for a ``1x1`` tensor ``w``."""
    w, a = as_tensor(w), as_tensor(a)
    if w.shape != (1, 1):
        raise ShapeError(f"scale: weight must be 1x1, got {w.shape}")
    out = _result(w.data[0, 0] * a.data, "scale", (w, a), None)
    if out.requires_grad:
        def back(g):
            w._accumulate(np.array([[np.sum(g * a.data)]]))
            a._accumulate(w.data[0, 0] * g)

        out._backward = back
    return out


def concat_cols(cols: Sequence[Tensor | None], width: int, rows: int | None = None) -> Tensor:
    """Place column tensors side by side, zero-padding to ``width`` columns.

    ``None`` entries are zero columns. Each entry is ``(rows, 1)``.
    """
    cols = [None if c is None else as_tensor(c) for c in cols]
    if len(cols) > width:
        raise ShapeError(f"concat_cols: {len(cols)} columns do not fit in width {width}")
    if rows is None:
        present = [c for c in cols if c is not None]
        if not present:
            raise ShapeError("concat_cols: cannot infer row count")
        rows = present[0].shape[0]
    data = np.zeros((rows, width))
    for j, c in enumerate(cols):
        if c is None:
            continue
        if c.shape != (rows, 1):
            raise ShapeError(f"concat_cols: column {j} has shape {c.shape}, expected {(rows, 1)}")
        data[:, j] = c.data[:, 0]
    parents = tuple(c for c in cols if c is not None)
    out = _result(data, "concat_cols", parents, None)
    if out.requires_grad:
        def back(g):
            for j, c in enumerate(cols):
                if c is not None:
                    c._accumulate(g[:, j : j + 1])

        out._backward = back
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable ``requires_grad`` leaf."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward() needs a 1x1 loss, got {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    # interior grads are per-call scratch; only leaves accumulate across calls
    for node in order:
        if not node.is_leaf:
            node.grad = None
    if not loss.requires_grad:
        return
    if loss.is_leaf:
        loss._accumulate(np.ones((1, 1)))
        return
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# -- the matrix chain ----------------------------------------------------------


@dataclass
class StepMatrices:
    """Inputs of one similarity step, for nodes or for relations.

    ``P`` and ``F`` hold embeddings as (zero-padded) columns, ``M`` is the
    0/1 binding mask (row = precondition slot, column = fact slot) and
    ``thresholds`` the ``(n, 1)`` per-precondition cutoffs that make up the
    row-constant bias ``T``.
    """

    P: Tensor
    F: Tensor
    M: np.ndarray
    thresholds: Tensor
    pre_count: int = 0
    post_count: int = 0

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def T(self) -> Tensor:
        return matmul(self.thresholds, np.ones((1, self.n)))


@dataclass
class RuleParams:
    """Tensors of one rule. Frozen embeddings are tensors without gradients."""

    match_nodes: dict[str, Tensor] = field(default_factory=dict)
    match_edges: dict[int, Tensor] = field(default_factory=dict)
    create_nodes: dict[str, Tensor] = field(default_factory=dict)
    create_edges: dict[int, Tensor] = field(default_factory=dict)
    node_thresholds: dict[str, Tensor] = field(default_factory=dict)
    edge_thresholds: dict[int, Tensor] = field(default_factory=dict)
    weight: Tensor = field(default_factory=lambda: Tensor(1.0, requires_grad=True))

    def embeddings(self) -> list[Tensor]:
        return [
            *self.match_nodes.values(),
            *self.match_edges.values(),
            *self.create_nodes.values(),
            *self.create_edges.values(),
        ]

    def thresholds(self) -> list[Tensor]:
        return [*self.node_thresholds.values(), *self.edge_thresholds.values()]

    def trainable(self) -> list[Tensor]:
        return [t for t in [*self.embeddings(), *self.thresholds(), self.weight] if t.requires_grad]


def similarity_matrix(step: StepMatrices, normalize: bool = True) -> Tensor:
    """``M * softmax_cols(P^T F - T)``; cosine logits when ``normalize`` is set."""
    P, F = step.P, step.F
    if P.shape[0] != F.shape[0]:
        raise ShapeError(f"similarity_matrix: embedding dims differ {P.shape} vs {F.shape}")
    if normalize:
        P, F = normalize_cols(P), normalize_cols(F)
    logits = sub(matmul(transpose(P), F), step.T)
    if logits.shape != step.M.shape:
        raise ShapeError(f"similarity_matrix: logits {logits.shape} vs mask {step.M.shape}")
    return hadamard(step.M, softmax_cols(logits))


def propagation_block(pre_count: int, post_count: int, n: int) -> np.ndarray:
    if not (0 <= pre_count <= n and 0 <= post_count <= n):
        raise ShapeError(f"propagation_matrix: counts ({pre_count}, {post_count}) exceed n={n}")
    block = np.zeros((n, n))
    block[:post_count, :pre_count] = 1.0
    return block


def propagation_matrix(pre_count: int, post_count: int, w, n: int) -> Tensor:
    """``w`` times ones on the (post rows) x (pre columns) block."""
    return scale(w, propagation_block(pre_count, post_count, n))


def chain_product(similarities: Sequence[Tensor], propagations: Sequence[Tensor | None], f0) -> Tensor:
    """``S_k R_{k-1} ... R_0 S_0 f0``; a ``None`` propagation is skipped."""
    f = as_tensor(f0)
    for i, S in enumerate(similarities):
        if S.shape[1] != f.shape[0]:
            raise ShapeError(f"chain step {i}: {S.shape} cannot act on {f.shape}")
        f = matmul(S, f)
        R = propagations[i] if i < len(propagations) else None
        if R is not None:
            f = matmul(R, f)
    return f


def forward_chain(steps: Sequence[tuple[StepMatrices, Tensor | None]], f0, normalize: bool = True) -> Tensor:
    """Truth vector after the chain. Each step is ``(matrices, weight)``; a
    ``None`` weight (the final goal comparison) means no propagation."""
    sims, props = [], []
    for mats, w in steps:
        sims.append(similarity_matrix(mats, normalize))
        props.append(None if w is None else propagation_matrix(mats.pre_count, mats.post_count, w, mats.n))
    return chain_product(sims, props, f0)


# relations go through exactly the same algebra with their own matrices
relation_chain = forward_chain


def loss(f_n, fr_n, g, gr, mode: str = "stated", eps: float = EPS) -> Tensor:
    """Cross-entropy of the node and relation truth vectors against the goal.

    ``stated`` is ``-(g.log f + g_r.log f_r)``; ``full_bce`` adds the
    ``(1-g).log(1-f)`` terms.
    """
    if mode not in ("stated", "full_bce"):
        raise ValueError(f"unknown loss mode {mode!r}")
    total = None
    for f, target in ((f_n, g), (fr_n, gr)):
        f, target = as_tensor(f), as_tensor(target)
        _same_shape("loss", f, target)
        fc = clamp(f, eps, 1.0 - eps)
        term = matmul(transpose(target), log_elem(fc))
        if mode == "full_bce":
            one = np.ones(f.shape)
            term = add(term, matmul(transpose(as_tensor(one - target.data)), log_elem(sub(one, fc))))
        total = term if total is None else add(total, term)
    return neg(total)
