"""Labeled dense tensors, network contraction and gradients.

Every array in the package is real double precision. A :class:`Tensor` is a
thin wrapper carrying axis labels so that contractions can be written by
name. Whole diagrams are contracted through :func:`contract_network`, which
accepts labels shared by more than two tensors (hyperedges); a hyperedge is
exactly a contraction with the superidentical tensor ``delta_abc``, so that
tensor never has to be built.

The same network code runs on numpy arrays and on torch tensors, the latter
giving reverse-mode gradients through :func:`evaluate_with_gradients`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
import opt_einsum as oe
import torch

__all__ = [
    "Tensor",
    "Parameter",
    "ContractionError",
    "contract",
    "contract_network",
    "network_expression",
    "svd_split",
    "project_to_unitary",
    "unitarity_error",
    "safe_divide",
    "evaluate_with_gradients",
    "superidentity",
]

UNITARY = "unitary"
SQUARED = "squared-positive"
FREE = "unconstrained"
KINDS = (UNITARY, SQUARED, FREE)

# element count above which a planned contraction is refused (2 GiB of doubles)
DEFAULT_MEMORY_CAP = 2 * 1024**3 // 8


class ContractionError(ValueError):
    """Raised for malformed contractions or plans over the memory cap."""


@dataclass(frozen=True)
class Tensor:
    """Dense real array with one unique label per axis."""

    data: np.ndarray
    axes: tuple[str, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        axes = tuple(self.axes)
        if data.ndim != len(axes):
            raise ValueError(f"{data.ndim} axes in data but labels {axes}")
        if len(set(axes)) != len(axes):
            raise ValueError(f"duplicate axis labels in {axes}")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def dim(self, axis: str) -> int:
        return self.data.shape[self.axes.index(axis)]

    def matricize(self, row_axes: Sequence[str]) -> np.ndarray:
        rows = list(row_axes)
        cols = [a for a in self.axes if a not in rows]
        missing = [a for a in rows if a not in self.axes]
        if missing:
            raise ValueError(f"unknown axes {missing}")
        perm = [self.axes.index(a) for a in rows + cols]
        nr = int(np.prod([self.dim(a) for a in rows]))
        return self.data.transpose(perm).reshape(nr, -1)

    def transpose(self, axes: Sequence[str]) -> "Tensor":
        return Tensor(self.data.transpose([self.axes.index(a) for a in axes]), tuple(axes))

    def relabel(self, mapping: Mapping[str, str]) -> "Tensor":
        return Tensor(self.data, tuple(mapping.get(a, a) for a in self.axes))


@dataclass
class Parameter:
    """A free variable of the ansatz.

    ``raw`` is what the optimizer updates. For ``unitary`` parameters the
    matrix obtained by grouping ``row_axes`` as rows must be orthogonal; for
    ``squared-positive`` parameters the tensor entering the network is
    ``raw**2``.
    """

    raw: Tensor
    kind: str
    row_axes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if self.kind == UNITARY and not self.row_axes:
            raise ValueError("unitary parameters need row axes")

    def effective(self) -> np.ndarray:
        if self.kind == SQUARED:
            return self.raw.data**2
        return self.raw.data


def contract(a: Tensor, b: Tensor, pairs: Sequence[tuple[str, str]]) -> Tensor:
    """Sum over the paired axes of ``a`` and ``b``; free axes keep a-then-b order."""
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    for x, y in pairs:
        if x not in a.axes or y not in b.axes:
            raise ContractionError(f"unknown axis in pair ({x}, {y})")
        if a.dim(x) != b.dim(y):
            raise ContractionError(
                f"dimension mismatch on ({x}, {y}): {a.dim(x)} != {b.dim(y)}"
            )
    free = [x for x in a.axes if x not in ax_a] + [y for y in b.axes if y not in ax_b]
    dup = sorted({x for x in free if free.count(x) > 1})
    if dup:
        raise ContractionError(f"duplicate surviving labels {dup}; rename before contracting")
    data = np.tensordot(
        a.data, b.data, axes=([a.axes.index(x) for x in ax_a], [b.axes.index(y) for y in ax_b])
    )
    return Tensor(data, tuple(free))


def superidentity(dim: int, order: int = 3) -> np.ndarray:
    """Materialized delta tensor, used only to check the hyperedge rewrite."""
    out = np.zeros((dim,) * order)
    out[(np.arange(dim),) * order] = 1.0
    return out


@lru_cache(maxsize=4096)
def _expression(eq: str, shapes: tuple[tuple[int, ...], ...], memory_cap: int):
    path, info = oe.contract_path(eq, *shapes, shapes=True, optimize="greedy")
    if info.largest_intermediate > memory_cap:
        raise ContractionError(
            f"contraction plan needs an intermediate of {info.largest_intermediate} "
            f"elements, above the cap of {memory_cap}"
        )
    return oe.contract_expression(eq, *shapes, optimize=path)


def network_expression(
    label_lists: Sequence[Sequence[str]],
    shapes: Sequence[Sequence[int]],
    output: Sequence[str] = (),
    memory_cap: int = DEFAULT_MEMORY_CAP,
):
    """Compile a labelled network into a reusable contraction callable.

    Labels may appear on any number of operands (hyperedges). The order is
    planned once by a greedy smallest-intermediate search; plans over
    ``memory_cap`` elements raise :class:`ContractionError`.
    """
    symbols: dict[str, str] = {}

    def sym(label):
        if label not in symbols:
            symbols[label] = oe.get_symbol(len(symbols))
        return symbols[label]

    dims: dict[str, int] = {}
    terms = []
    for labels, shape in zip(label_lists, shapes):
        if len(shape) != len(labels):
            raise ContractionError(f"{len(shape)}-axis operand labelled {tuple(labels)}")
        for lab, d in zip(labels, shape):
            if dims.setdefault(lab, d) != d:
                raise ContractionError(f"label {lab!r} carries dimensions {dims[lab]} and {d}")
        terms.append("".join(sym(x) for x in labels))
    missing = [x for x in output if x not in dims]
    if missing:
        raise ContractionError(f"output labels {missing} not in the network")
    eq = ",".join(terms) + "->" + "".join(sym(x) for x in output)
    return _expression(eq, tuple(tuple(int(d) for d in s) for s in shapes), memory_cap)


def contract_network(
    operands: Sequence[tuple[object, Sequence[str]]],
    output: Sequence[str] = (),
    memory_cap: int = DEFAULT_MEMORY_CAP,
):
    """Contract a list of ``(array, labels)`` pairs down to ``output`` labels.

    Arrays can be numpy or torch; see :func:`network_expression`.
    """
    labels = [lab for _, lab in operands]
    shapes = [tuple(arr.shape) for arr, _ in operands]
    expr = network_expression(labels, shapes, output, memory_cap)
    return expr(*[arr for arr, _ in operands])


def svd_split(t: Tensor, row_axes: Sequence[str], bond: str = "bond"):
    """Split ``t`` as ``P diag(s) Q^T`` with the rows grouped by ``row_axes``.

    Returns ``P`` with axes ``row_axes + (bond,)``, the descending singular
    values ``s`` and ``Q`` with axes ``col_axes + (bond,)``.
    """
    rows = tuple(row_axes)
    if not rows or len(rows) >= len(t.axes):
        raise ValueError("row_axes must be a nonempty proper subset of the axes")
    cols = tuple(a for a in t.axes if a not in rows)
    m = t.matricize(rows)
    try:
        p, s, qt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"SVD failed: {err}") from err
    rshape = tuple(t.dim(a) for a in rows)
    cshape = tuple(t.dim(a) for a in cols)
    P = Tensor(p.reshape(rshape + (len(s),)), rows + (bond,))
    Q = Tensor(qt.T.reshape(cshape + (len(s),)), cols + (bond,))
    return P, s, Q


def _polar(m: np.ndarray) -> np.ndarray:
    if m.shape[0] < m.shape[1]:
        raise ValueError(f"matricization {m.shape} is wide; cannot be an isometry")
    p, s, qt = np.linalg.svd(m, full_matrices=False)
    if s[-1] < 1e-14:
        raise ValueError(f"rank-deficient matricization (smallest singular value {s[-1]:.3g})")
    return p @ qt


def project_to_unitary(t, row_axes: Sequence[str] | None = None):
    """Replace ``t = P S Q^T`` by ``P Q^T``, the closest isometry.

    Accepts a :class:`Tensor` (with ``row_axes``) or a plain 2-D array.
    """
    if isinstance(t, Tensor):
        rows = tuple(row_axes)
        cols = tuple(a for a in t.axes if a not in rows)
        q = _polar(t.matricize(rows))
        shape = tuple(t.dim(a) for a in rows + cols)
        return Tensor(q.reshape(shape), rows + cols).transpose(t.axes)
    return _polar(np.asarray(t, dtype=np.float64))


def unitarity_error(t, row_axes: Sequence[str] | None = None) -> float:
    """Infinity norm of ``Q^T Q - I``."""
    m = t.matricize(row_axes) if isinstance(t, Tensor) else np.asarray(t)
    return float(np.abs(m.T @ m - np.eye(m.shape[1])).max())


def safe_divide(num, den):
    val = den.detach() if torch.is_tensor(den) else den
    if abs(float(val)) < 1e-300:
        raise ZeroDivisionError("normalization underflow: denominator below 1e-300")
    return num / den


def evaluate_with_gradients(
    program: Callable[[dict], "torch.Tensor"], params: Mapping[str, np.ndarray]
) -> tuple[float, dict[str, np.ndarray]]:
    """Value of a scalar ``program`` and its gradient with respect to ``params``.

    ``program`` receives a dict of torch leaf tensors (same keys as ``params``)
    and must return a 0-d tensor. Parameters the program ignores get an exact
    zero gradient.
    """
    leaves = {
        k: torch.tensor(np.asarray(v, dtype=np.float64), requires_grad=True)
        for k, v in params.items()
    }
    value = program(leaves)
    if not torch.is_tensor(value) or value.ndim != 0:
        raise ValueError("program must return a scalar tensor")
    keys = list(leaves)
    if value.requires_grad:
        grads = torch.autograd.grad(value, [leaves[k] for k in keys], allow_unused=True)
    else:
        grads = [None] * len(keys)
    out = {}
    for k, g in zip(keys, grads):
        out[k] = np.zeros_like(params[k], dtype=np.float64) if g is None else g.detach().numpy()
    return float(value.detach()), out
