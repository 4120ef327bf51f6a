"""Lattices, bipartitions and spin-1/2 Hamiltonians.

The default geometry is the zigzag-pentagon antiferromagnet (ZPAF): a chain
of 9-site unit cells, each made of an "up" pentagon ``s0-s1-s2-s3-s4`` and a
"down" pentagon ``s4-s5-s6-s7-s8`` sharing the vertex ``s4``. Neighbouring
cells are joined by the edge ``(s8, s0')``. Sites ``s0..s3`` of every cell form
the upper subsystem A, ``s4..s8`` the lower subsystem B, so the cut runs along
the chain and its length grows with the number of cells.

Site ``s_j`` of cell ``k`` has global index ``9 k + j``. For the infinite
lattice, indices ``>= cell_size`` in an edge or Hamiltonian term refer to the
next cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Lattice",
    "Bipartition",
    "Hamiltonian",
    "LatticeError",
    "SX",
    "SZ",
    "ISY",
    "ZPAF_CELL_SIZE",
    "build_zpaf",
    "zpaf_fragment",
    "load_lattice",
    "dump_lattice",
    "build_hamiltonian",
    "magnetization",
    "has_cycle",
]

SX = np.array([[0.0, 0.5], [0.5, 0.0]])
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])
# i * S^y is real; S^y (x) S^y = -(iS^y) (x) (iS^y)
ISY = np.array([[0.0, 0.5], [-0.5, 0.0]])
ID2 = np.eye(2)

OPEN, PERIODIC, INFINITE = "open", "periodic", "infinite"

ZPAF_CELL_SIZE = 9
_ZPAF_INTRA = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (4, 5), (5, 6), (6, 7), (7, 8), (4, 8)]
_ZPAF_INTER = [(8, 0)]
_ZPAF_PART_A = (0, 1, 2, 3)


class LatticeError(ValueError):
    pass


def _edge(i: int, j: int) -> tuple[int, int]:
    return (min(i, j), max(i, j))


@dataclass(frozen=True)
class Lattice:
    n_sites: int
    edges: tuple[tuple[int, int], ...]
    boundary: str = OPEN
    cell_size: int = 0
    inter_cell_edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.boundary not in (OPEN, PERIODIC, INFINITE):
            raise LatticeError(f"unknown boundary {self.boundary!r}")
        limit = self.cell_size if self.boundary == INFINITE else self.n_sites
        if limit <= 0:
            raise LatticeError("lattice needs at least one site")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise LatticeError(f"self-loop on site {i}")
            if not (0 <= i < limit and 0 <= j < limit):
                raise LatticeError(f"edge ({i}, {j}) out of range")
            e = _edge(i, j)
            if e in seen:
                raise LatticeError(f"duplicate edge {e}")
            seen.add(e)
        for i, j in self.inter_cell_edges:
            if not (0 <= i < limit and 0 <= j < limit):
                raise LatticeError(f"inter-cell edge ({i}, {j}) out of range")

    @property
    def infinite(self) -> bool:
        return self.boundary == INFINITE

    def cell_edges(self) -> list[tuple[int, int]]:
        """Edges owned by one cell, next-cell sites shifted by ``cell_size``."""
        if not self.infinite:
            return list(self.edges)
        return list(self.edges) + [(i, j + self.cell_size) for i, j in self.inter_cell_edges]

    def n_bonds(self) -> int:
        return len(self.cell_edges())


@dataclass(frozen=True)
class Bipartition:
    part_a: tuple[int, ...]
    part_b: tuple[int, ...]
    boundary_length: int

    @property
    def r_tilde(self) -> int:
        return min(len(self.part_a), len(self.part_b))

    def side(self, site: int) -> str:
        return "A" if site in self.part_a else "B"


def _bipartition(lattice: Lattice, part_a) -> Bipartition:
    n = lattice.cell_size if lattice.infinite else lattice.n_sites
    a = tuple(sorted(set(part_a)))
    if any(not 0 <= s < n for s in a):
        raise LatticeError(f"partA sites out of range: {a}")
    b = tuple(s for s in range(n) if s not in a)
    if not a or not b:
        raise LatticeError("both subsystems must be nonempty")
    sa = set(a)
    cut = sum((i in sa) != (j % n in sa) for i, j in lattice.cell_edges())
    return Bipartition(a, b, cut)


def build_zpaf(cells: int, boundary: str = OPEN) -> tuple[Lattice, Bipartition]:
    """ZPAF chain of ``cells`` unit cells and its horizontal bipartition."""
    if cells < 1:
        raise LatticeError("cells must be >= 1")
    c = ZPAF_CELL_SIZE
    if boundary == INFINITE:
        lat = Lattice(c, tuple(_ZPAF_INTRA), INFINITE, c, tuple(_ZPAF_INTER))
        return lat, _bipartition(lat, _ZPAF_PART_A)
    edges = []
    for k in range(cells):
        edges += [(c * k + i, c * k + j) for i, j in _ZPAF_INTRA]
    n_inter = cells if boundary == PERIODIC else cells - 1
    for k in range(n_inter):
        i, j = _ZPAF_INTER[0]
        edges.append((c * k + i, (c * (k + 1) + j) % (c * cells)))
    lat = Lattice(c * cells, tuple(edges), boundary)
    part_a = [c * k + s for k in range(cells) for s in _ZPAF_PART_A]
    return lat, _bipartition(lat, part_a)


def zpaf_fragment(n_sites: int) -> tuple[Lattice, Bipartition]:
    """First ``n_sites`` sites of an open ZPAF chain with the induced edges."""
    cells = -(-n_sites // ZPAF_CELL_SIZE)
    full, bip = build_zpaf(cells)
    edges = tuple(e for e in full.edges if e[1] < n_sites)
    lat = Lattice(n_sites, edges, OPEN)
    return lat, _bipartition(lat, [s for s in bip.part_a if s < n_sites])


def load_lattice(text: str) -> tuple[Lattice, Bipartition]:
    """Parse the edge-list format (``sites``, ``edge``, ``partA`` lines, ``#`` comments)."""
    n = None
    edges: list[tuple[int, int]] = []
    part_a: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            vals = [int(t) for t in tok[1:]]
        except ValueError:
            raise LatticeError(f"line {lineno}: expected integers in {raw!r}") from None
        key = tok[0]
        if key == "sites" and len(vals) == 1:
            if n is not None:
                raise LatticeError(f"line {lineno}: repeated 'sites'")
            n = vals[0]
        elif key == "edge" and len(vals) == 2:
            edges.append((vals[0], vals[1]))
        elif key == "partA" and len(vals) == 1:
            part_a.append(vals[0])
        else:
            raise LatticeError(f"line {lineno}: cannot parse {raw!r}")
    if n is None:
        raise LatticeError("missing 'sites' line")
    if len(set(part_a)) != len(part_a):
        raise LatticeError("site listed twice in partA")
    lat = Lattice(n, tuple(edges), OPEN)
    return lat, _bipartition(lat, part_a)


def dump_lattice(lattice: Lattice, bip: Bipartition) -> str:
    lines = [f"sites {lattice.n_sites}"]
    lines += [f"edge {i} {j}" for i, j in lattice.edges]
    lines += [f"partA {s}" for s in bip.part_a]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Hamiltonian:
    """Sum of two-site and one-site real symmetric terms.

    For an infinite lattice the terms are those of a single cell and site
    indices ``>= cell_size`` belong to the next cell.
    """

    two_site_terms: tuple[tuple[int, int, np.ndarray], ...]
    one_site_terms: tuple[tuple[int, np.ndarray], ...]
    kind: str
    params: dict = field(default_factory=dict)
    n_bonds: int = 0

    def terms(self) -> list[tuple[tuple[int, ...], np.ndarray]]:
        """All terms as ``(sites, matrix)`` with the matrix acting on ``sites`` in order."""
        out = [((i, j), m) for i, j, m in self.two_site_terms]
        out += [((i,), m) for i, m in self.one_site_terms]
        return out


def _two_site(kind: str) -> np.ndarray:
    zz = np.kron(SZ, SZ)
    xy = np.kron(SX, SX) - np.kron(ISY, ISY)
    if kind == "heisenberg":
        return xy + zz
    if kind == "xy":
        return xy
    if kind == "tim":
        return zz
    raise ValueError(f"unknown model kind {kind!r}")


def build_hamiltonian(lattice: Lattice, kind: str, params: dict | None = None) -> Hamiltonian:
    """Nearest-neighbour model on ``lattice``: ``heisenberg``, ``xy`` or ``tim``."""
    params = dict(params or {})
    h2 = _two_site(kind)
    one = []
    if kind == "tim":
        if "h_x" not in params:
            raise ValueError("tim requires the parameter h_x")
        hx = float(params["h_x"])
        if hx < 0:
            raise ValueError("h_x must be >= 0")
        n = lattice.cell_size if lattice.infinite else lattice.n_sites
        if hx != 0:
            one = [(s, -hx * SX) for s in range(n)]
    edges = lattice.cell_edges()
    two = tuple((i, j, h2.copy()) for i, j in edges)
    return Hamiltonian(two, tuple(one), kind, params, len(edges))


def magnetization(sz_expectations) -> float:
    """Average magnetization ``|sum_i <S^z_i>| / N``."""
    sz = np.asarray(sz_expectations, dtype=float)
    return float(abs(sz.sum()) / len(sz))


def has_cycle(lattice: Lattice, length: int = 5) -> bool:
    """True when ``lattice`` contains a simple cycle through ``length`` sites."""
    adj: dict[int, set[int]] = {}
    for i, j in lattice.edges:
        adj.setdefault(i, set()).add(j)
        adj.setdefault(j, set()).add(i)

    def walk(start, node, depth, seen):
        if depth == length:
            return start in adj[node]
        return any(
            walk(start, nxt, depth + 1, seen | {nxt})
            for nxt in adj[node]
            if nxt > start and nxt not in seen
        )

    return any(walk(s, s, 1, {s}) for s in adj)
