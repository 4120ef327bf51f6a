"""Schmidt tensor network states.

A state is stored in Schmidt form

    |Psi> = sum_r lambda_r  (U |r>) (x) (V |r>)

where ``r = (r_1 .. r_R)`` is a bitstring, ``U`` and ``V`` are circuits of
local orthogonal tensors acting on the two subsystems, and the coefficients
``lambda_r`` are the amplitudes of a matrix product state whose tensors are
elementwise squares of free parameters, hence nonnegative.

Wiring conventions::

    stack wire w      carries lattice site  stack.sites[w]  at the output
    stack input w     is |r_m> for m = stack.inputs[w], or |0> (ancilla)
    gate tensor       axes (o0 .. o{k-1}, i0 .. i{k-1}), shape (2,)*2k
    lambda tensor m   axes (r, left, right), shape (2, chi_m, chi_{m+1})

The subsystem with more sites than Schmidt wires gets ancilla wires that
start in |0>, which turns its circuit into an isometry. The lambda MPS is
closed by vectors of ones on both ends, so translation-invariant tensors can
be reused in finite chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .lattice import Bipartition, Lattice
from .tensor_core import SQUARED, UNITARY, Parameter, Tensor, project_to_unitary

__all__ = [
    "Gate",
    "Stack",
    "Architecture",
    "MpsLambda",
    "SchmidtTNS",
    "ArchitectureError",
    "make_architecture",
    "init_state",
    "deepen",
    "spin_flip",
    "spin_flip_frames",
    "apply_stack",
    "stack_matrix",
    "mps_amplitude",
    "materialize",
    "normalize_lambda",
    "unroll",
    "gate_axes",
    "bitstrings",
]

MAX_DENSE_QUBITS = 20


class ArchitectureError(ValueError):
    pass


def gate_axes(k: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    return tuple(f"o{i}" for i in range(k)), tuple(f"i{i}" for i in range(k))


def bitstrings(n: int) -> np.ndarray:
    """All ``2**n`` bitstrings in lexicographic order, shape ``(2**n, n)``."""
    idx = np.arange(2**n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)


@dataclass(frozen=True)
class Gate:
    name: str
    wires: tuple[int, ...]
    site: int | None = None


@dataclass(frozen=True)
class Stack:
    sites: tuple[int, ...]
    inputs: tuple[int | None, ...]
    gates: tuple[Gate, ...]

    @property
    def n_wires(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class Architecture:
    """Layer plan of a Schmidt TNS.

    ``blocks`` lists ``(A_sites, B_sites)`` groups; every block gets its own
    physical layer and contributes ``min(|A_b|, |B_b|)`` Schmidt wires. The
    entangling layers form a brick wall over all Schmidt wires in order.
    With ``shared`` set, tensor names repeat with period ``r_cell`` Schmidt
    wires, which is how translation invariance is expressed.
    """

    n_sites: int
    part_a: tuple[int, ...]
    part_b: tuple[int, ...]
    blocks: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    n_layers: int
    chi: int
    U: Stack
    V: Stack
    lam_names: tuple[str, ...]
    bond_dims: tuple[int, ...]
    shared: bool = False
    infinite: bool = False
    cell_size: int = 0
    r_cell: int = 0
    d_s: int = 2

    @property
    def R(self) -> int:
        return len(self.lam_names)

    def stack(self, which: str) -> Stack:
        return {"U": self.U, "V": self.V}[which]

    def param_specs(self) -> dict[str, tuple[str, tuple[int, ...]]]:
        """Ordered ``name -> (kind, shape)`` of every free tensor."""
        specs: dict[str, tuple[str, tuple[int, ...]]] = {}
        for st in (self.U, self.V):
            for g in st.gates:
                specs.setdefault(g.name, (UNITARY, (2,) * (2 * len(g.wires))))
        for m, name in enumerate(self.lam_names):
            shape = (self.d_s, self.bond_dims[m], self.bond_dims[m + 1])
            if specs.setdefault(name, (SQUARED, shape)) != (SQUARED, shape):
                raise ArchitectureError(f"inconsistent shapes for shared tensor {name}")
        return specs

    def unroll(self, n_cells: int) -> "Architecture":
        """Finite chain of ``n_cells`` cells reusing this infinite cell's tensors."""
        if not self.infinite:
            raise ArchitectureError("only infinite architectures can be unrolled")
        return _build(
            n_sites=self.cell_size * n_cells,
            blocks=_cell_blocks(self.blocks[0], self.cell_size, n_cells),
            n_layers=self.n_layers,
            chi=self.chi,
            shared=True,
            cell_size=self.cell_size,
        )

    def describe(self) -> dict:
        """Plain-data descriptor, enough to rebuild the architecture."""
        return {
            "n_sites": self.n_sites,
            "blocks": [[list(a), list(b)] for a, b in self.blocks],
            "n_layers": self.n_layers,
            "chi": self.chi,
            "shared": self.shared,
            "infinite": self.infinite,
            "cell_size": self.cell_size,
        }

    @classmethod
    def from_description(cls, d: dict) -> "Architecture":
        blocks = tuple((tuple(a), tuple(b)) for a, b in d["blocks"])
        if d["infinite"]:
            return _build_infinite(blocks[0], d["cell_size"], d["n_layers"], d["chi"])
        return _build(d["n_sites"], blocks, d["n_layers"], d["chi"], d["shared"], d["cell_size"])


def _cell_blocks(block, cell_size, n_cells):
    a, b = block
    return tuple(
        (tuple(s + k * cell_size for s in a), tuple(s + k * cell_size for s in b))
        for k in range(n_cells)
    )


def _stack_layout(prefix, block_sites, r_blocks, n_layers, shared, r_cell) -> Stack:
    sites, inputs, block_wires = [], [], []
    schmidt_wire = {}
    m = 0
    for blk, rb in zip(block_sites, r_blocks):
        ws = list(range(len(sites), len(sites) + len(blk)))
        for j, (w, s) in enumerate(zip(ws, blk)):
            sites.append(s)
            if j < rb:
                inputs.append(m)
                schmidt_wire[m] = w
                m += 1
            else:
                inputs.append(None)
        block_wires.append(ws)
    R = m
    gates = []
    for layer in range(n_layers):
        for mm in range(layer % 2, R - 1, 2):
            tag = mm % r_cell if shared else mm
            gates.append(Gate(f"{prefix}.ent{layer}.{tag}", (schmidt_wire[mm], schmidt_wire[mm + 1])))
        # ancillas join the entangling layers, each coupled to a Schmidt wire of
        # its block that shifts from layer to layer; without them the subspace
        # an isometric stack reaches is fixed by its physical layer alone
        for b, (ws, rb) in enumerate(zip(block_wires, r_blocks)):
            bb = 0 if shared else b
            for k, w in enumerate(ws[rb:]):
                partner = ws[(rb - 1 - layer - k) % rb]
                gates.append(Gate(f"{prefix}.ent{layer}.a{bb}.{k}", (partner, w)))
    for b, ws in enumerate(block_wires):
        bb = 0 if shared else b
        for j in range(len(ws) - 1):
            gates.append(Gate(f"{prefix}.phys{bb}.{j}", (ws[j], ws[j + 1]), sites[ws[j]]))
        gates.append(Gate(f"{prefix}.phys{bb}.{len(ws) - 1}", (ws[-1],), sites[ws[-1]]))
    return Stack(tuple(sites), tuple(inputs), tuple(gates))


def _build(n_sites, blocks, n_layers, chi, shared=False, cell_size=0) -> Architecture:
    if n_layers < 0 or chi < 1:
        raise ArchitectureError("n_layers must be >= 0 and chi >= 1")
    r_blocks = [min(len(a), len(b)) for a, b in blocks]
    R = sum(r_blocks)
    if R < 1:
        raise ArchitectureError("no Schmidt wires")
    r_cell = r_blocks[0] if shared else 0
    if shared:
        if len(set(r_blocks)) != 1:
            raise ArchitectureError("shared tensors need identical blocks")
        if n_layers > 0 and r_cell % 2:
            raise ArchitectureError("brick-wall layers need an even number of wires per cell")
    U = _stack_layout("U", [a for a, _ in blocks], r_blocks, n_layers, shared, r_cell)
    V = _stack_layout("V", [b for _, b in blocks], r_blocks, n_layers, shared, r_cell)
    if shared:
        lam_names = tuple(f"lam.{m % r_cell}" for m in range(R))
        bond_dims = (chi,) * (R + 1)
    else:
        lam_names = tuple(f"lam.{m}" for m in range(R))
        bond_dims = tuple(min(chi, 2**m, 2 ** (R - m)) for m in range(R + 1))
    arch = Architecture(
        n_sites=n_sites,
        part_a=tuple(sorted(s for a, _ in blocks for s in a)),
        part_b=tuple(sorted(s for _, b in blocks for s in b)),
        blocks=tuple(blocks),
        n_layers=n_layers,
        chi=chi,
        U=U,
        V=V,
        lam_names=lam_names,
        bond_dims=bond_dims,
        shared=shared,
        cell_size=cell_size,
        r_cell=r_cell,
    )
    _validate(arch)
    return arch


def _build_infinite(block, cell_size, n_layers, chi) -> Architecture:
    ref = _build(cell_size * 3, _cell_blocks(block, cell_size, 3), n_layers, chi, True, cell_size)
    return replace(ref, infinite=True, blocks=(block,), n_sites=cell_size)


def _validate(arch: Architecture) -> None:
    for which, st, part in (("U", arch.U, arch.part_a), ("V", arch.V, arch.part_b)):
        if sorted(st.sites) != sorted(part):
            raise ArchitectureError(f"{which} wires do not cover its subsystem")
        if sorted(m for m in st.inputs if m is not None) != list(range(arch.R)):
            raise ArchitectureError(f"{which} does not take all {arch.R} Schmidt indices")
        emitted = {}
        last_gate = {}
        for k, g in enumerate(st.gates):
            if len(set(g.wires)) != len(g.wires) or any(not 0 <= w < st.n_wires for w in g.wires):
                raise ArchitectureError(f"bad wires on {g.name}")
            for w in g.wires:
                last_gate[w] = k
            if g.site is not None:
                if g.site in emitted:
                    raise ArchitectureError(f"site {g.site} emitted twice in {which}")
                emitted[g.site] = k
        for w, s in enumerate(st.sites):
            if emitted.get(s) != last_gate.get(w):
                raise ArchitectureError(f"site {s} is not emitted by the last tensor on its wire")


def make_architecture(
    lattice: Lattice,
    bip: Bipartition,
    n_layers: int,
    chi: int = 2,
    cell_size: int | None = None,
    shared: bool = False,
) -> Architecture:
    """Default layer plan for ``lattice`` cut by ``bip``.

    ``cell_size`` splits the sites into consecutive blocks (one physical
    layer per block); by default a finite lattice is a single block.
    Infinite lattices always get shared, per-cell tensors.
    """
    if lattice.infinite:
        return _build_infinite((bip.part_a, bip.part_b), lattice.cell_size, n_layers, chi)
    n = lattice.n_sites
    if not cell_size:
        blocks = ((bip.part_a, bip.part_b),)
    else:
        if n % cell_size:
            raise ArchitectureError("cell_size must divide the number of sites")
        blocks = tuple(
            (
                tuple(s for s in bip.part_a if k * cell_size <= s < (k + 1) * cell_size),
                tuple(s for s in bip.part_b if k * cell_size <= s < (k + 1) * cell_size),
            )
            for k in range(n // cell_size)
        )
    return _build(n, blocks, n_layers, chi, shared, cell_size or 0)


class MpsLambda:
    """Nonnegative MPS over the Schmidt indices.

    ``raw`` holds the free tensors; amplitudes use ``raw**2`` and are closed
    with vectors of ones.
    """

    def __init__(self, raw: list[np.ndarray]):
        self.raw = [np.asarray(t, dtype=np.float64) for t in raw]
        for m, t in enumerate(self.raw):
            if t.ndim != 3:
                raise ValueError(f"lambda tensor {m} must have three axes")
            if m and t.shape[1] != self.raw[m - 1].shape[2]:
                raise ValueError(f"bond mismatch between lambda tensors {m - 1} and {m}")

    @property
    def R(self) -> int:
        return len(self.raw)

    def effective(self) -> list[np.ndarray]:
        return [t**2 for t in self.raw]

    def open_tensors(self) -> list[np.ndarray]:
        """Effective tensors with the boundary vectors absorbed (edge bonds of size 1)."""
        eff = self.effective()
        eff[0] = eff[0].sum(axis=1, keepdims=True)
        eff[-1] = eff[-1].sum(axis=2, keepdims=True)
        return eff

    def norm_squared(self) -> float:
        env = np.ones((1, 1))
        for a in self.open_tensors():
            env = np.einsum("ab,rac,rbd->cd", env, a, a)
        return float(env[0, 0])

    def dense(self) -> np.ndarray:
        """All ``2**R`` amplitudes in lexicographic order of ``r``."""
        if self.R > 24:
            raise ValueError("R above the enumeration limit of 24")
        vec = np.ones((1, 1))
        for a in self.open_tensors():
            vec = np.einsum("xa,rab->xrb", vec, a).reshape(-1, a.shape[2])
        return vec[:, 0]


def mps_amplitude(lam: MpsLambda, r) -> float:
    r = list(r)
    if len(r) != lam.R:
        raise ValueError(f"bitstring of length {len(r)} for R = {lam.R}")
    vec = np.ones(1)
    for a, bit in zip(lam.open_tensors(), r):
        vec = vec @ a[bit]
    return float(vec[0])


@dataclass(frozen=True)
class SchmidtTNS:
    arch: Architecture
    params: dict[str, Parameter] = field(default_factory=dict)

    def __post_init__(self):
        specs = self.arch.param_specs()
        if set(specs) != set(self.params):
            missing = sorted(set(specs) - set(self.params))
            extra = sorted(set(self.params) - set(specs))
            raise ArchitectureError(f"parameter mismatch: missing {missing}, unexpected {extra}")
        for name, (kind, shape) in specs.items():
            p = self.params[name]
            if p.kind != kind or p.raw.shape != shape:
                raise ArchitectureError(f"{name}: expected {kind} {shape}, got {p.kind} {p.raw.shape}")

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: p.raw.data for k, p in self.params.items()}

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "SchmidtTNS":
        return SchmidtTNS(self.arch, _wrap(self.arch, arrays))

    @property
    def lam(self) -> MpsLambda:
        return MpsLambda([self.params[n].raw.data for n in self.arch.lam_names])

    def gate_matrix(self, name: str) -> np.ndarray:
        t = self.params[name].raw.data
        d = int(np.sqrt(t.size))
        return t.reshape(d, d)

    def unitary_names(self) -> Iterator[str]:
        return (k for k, p in self.params.items() if p.kind == UNITARY)


def _wrap(arch: Architecture, arrays: dict[str, np.ndarray]) -> dict[str, Parameter]:
    out = {}
    for name, (kind, shape) in arch.param_specs().items():
        data = np.asarray(arrays[name], dtype=np.float64).reshape(shape)
        if kind == UNITARY:
            rows, cols = gate_axes(len(shape) // 2)
            out[name] = Parameter(Tensor(data, rows + cols), UNITARY, rows)
        else:
            out[name] = Parameter(Tensor(data, ("r", "left", "right")), SQUARED)
    return out


def normalize_lambda(arch: Architecture, arrays: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Rescale the lambda tensors so that <lambda|lambda> = 1.

    For infinite architectures the dominant eigenvalue of the one-cell norm
    transfer matrix is set to one instead.
    """
    out = dict(arrays)
    names = list(dict.fromkeys(arch.lam_names))
    if arch.infinite:
        cell = [arrays[n] ** 2 for n in arch.lam_names[: arch.r_cell]]
        T = np.eye(cell[0].shape[1] ** 2)
        for a in cell:
            T = T @ np.einsum("rac,rbd->abcd", a, a).reshape(T.shape[0], -1)
        mu = float(np.max(np.abs(np.linalg.eigvals(T))))
        scale = mu ** (-1.0 / (4 * len(names)))
    else:
        n2 = MpsLambda([arrays[n] for n in arch.lam_names]).norm_squared()
        if n2 <= 1e-300:
            raise ZeroDivisionError("lambda has zero norm")
        scale = n2 ** (-1.0 / (4 * arch.R))
    for n in names:
        out[n] = arrays[n] * scale
    return out


_PX = np.array([[0.0, 1.0], [1.0, 0.0]])
_PZ = np.diag([1.0, -1.0])


def _kron(mats):
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def spin_flip_frames(arch: Architecture) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-gate ``(F_out, F_in)`` under which the global spin flip acts on parameters.

    Replacing every gate ``G`` by ``F_out G F_in`` maps the state to
    ``X^{(x)N} |Psi>``: Schmidt inputs carry ``Z`` (the signs cancel between
    ``U`` and ``V``), ancillas carry the identity, and each physical gate
    turns its input frame into ``X`` on the emitted site and ``Z`` on the
    wire it passes on. Gates fixed by this map give a spin-flip-even state.
    """
    frames: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for which in ("U", "V"):
        st = arch.stack(which)
        cur = [_PZ if m is not None else np.eye(2) for m in st.inputs]
        for g in st.gates:
            f_in = [cur[w] for w in g.wires]
            if g.site is None:
                f_out = f_in
            else:
                f_out = [_PX] + [_PZ] * (len(g.wires) - 1)
            for w, f in zip(g.wires, f_out):
                cur[w] = f
            pair = (_kron(f_out), _kron(f_in))
            old = frames.setdefault(g.name, pair)
            if not (np.array_equal(old[0], pair[0]) and np.array_equal(old[1], pair[1])):
                raise ArchitectureError(f"inconsistent spin-flip frames on shared gate {g.name}")
    return frames


def spin_flip(state: "SchmidtTNS") -> "SchmidtTNS":
    """Parameters of ``X^{(x)N} |Psi>``; lambda is unchanged."""
    arrays = state.arrays()
    for name, (f_out, f_in) in spin_flip_frames(state.arch).items():
        shape = arrays[name].shape
        d = f_in.shape[0]
        arrays[name] = (f_out @ arrays[name].reshape(d, d) @ f_in).reshape(shape)
    return state.with_arrays(arrays)


def deepen(state: "SchmidtTNS", n_layers: int, eps: float = 0.0, seed: int = 0,
           parity_even: bool = False, lam_floor: float = 0.0) -> "SchmidtTNS":
    """The same state on an architecture with ``n_layers`` entangling layers.

    Tensors shared with the shallower plan are copied and every new
    entangling tensor starts at the identity, so the amplitudes (and the
    energy) are unchanged. Used to warm-start deeper circuits. A nonzero
    ``eps`` perturbs the new tensors (as in :func:`init_state`), which moves
    the start off the stationary points the identity tends to sit on.

    ``lam_floor`` lifts every raw lambda entry to at least that fraction of
    its tensor's largest entry. Entries at zero get zero gradient through the
    square, so without the lift a coefficient lost at a shallow depth stays
    lost at every deeper one.
    """
    if n_layers < state.arch.n_layers:
        raise ArchitectureError("deepen cannot remove layers")
    desc = dict(state.arch.describe(), n_layers=n_layers)
    arch = Architecture.from_description(desc)
    rng = np.random.default_rng(seed)
    frames = spin_flip_frames(arch) if parity_even else {}
    old = state.arrays()
    arrays = {}
    for name, (kind, shape) in arch.param_specs().items():
        if name in old and kind == SQUARED and lam_floor > 0:
            a = np.abs(old[name])
            arrays[name] = np.maximum(a, lam_floor * a.max())
        elif name in old:
            arrays[name] = old[name]
        else:
            d = int(np.prod(shape[: len(shape) // 2]))
            g = np.eye(d) + eps * rng.standard_normal((d, d))
            if name in frames:
                f_out, f_in = frames[name]
                g = g + f_out @ g @ f_in
            arrays[name] = project_to_unitary(g).reshape(shape)
    return SchmidtTNS(arch, _wrap(arch, arrays))


def init_state(arch: Architecture, seed: int = 0, eps: float = 0.1,
               parity_even: bool = False) -> SchmidtTNS:
    """Near-identity orthogonal tensors and a random positive, normalized lambda.

    With ``parity_even`` every gate is symmetrized under :func:`spin_flip_frames`
    before projection, so the state is even under the global spin flip.
    Gradient descent on a flip-symmetric Hamiltonian stays in that sector,
    which steers training away from symmetry-broken local minima.
    """
    rng = np.random.default_rng(seed)
    frames = spin_flip_frames(arch) if parity_even else {}
    arrays = {}
    for name, (kind, shape) in arch.param_specs().items():
        if kind == UNITARY:
            d = int(np.prod(shape[: len(shape) // 2]))
            g = np.eye(d) + eps * rng.standard_normal((d, d))
            if name in frames:
                f_out, f_in = frames[name]
                g = g + f_out @ g @ f_in
            arrays[name] = project_to_unitary(g).reshape(shape)
        else:
            arrays[name] = rng.uniform(0.5, 1.5, size=shape)
    arrays = normalize_lambda(arch, arrays)
    return SchmidtTNS(arch, _wrap(arch, arrays))


def _simulate(state: SchmidtTNS, which: str, psi: np.ndarray) -> np.ndarray:
    """Apply the gates of one stack to ``psi`` of shape ``(batch, 2, ..., 2)``."""
    st = state.arch.stack(which)
    for g in st.gates:
        k = len(g.wires)
        t = state.params[g.name].raw.data
        axes = [w + 1 for w in g.wires]
        psi = np.tensordot(t, psi, axes=(list(range(k, 2 * k)), axes))
        psi = np.moveaxis(psi, list(range(k)), axes)
    return psi


def _initial(st: Stack, rows: np.ndarray) -> np.ndarray:
    """Product input states for each bitstring row."""
    n = st.n_wires
    psi = np.zeros((rows.shape[0],) + (2,) * n)
    idx = [np.arange(rows.shape[0])]
    for m in st.inputs:
        idx.append(rows[:, m] if m is not None else np.zeros(rows.shape[0], dtype=np.int64))
    psi[tuple(idx)] = 1.0
    return psi


def stack_matrix(state: SchmidtTNS, which: str) -> np.ndarray:
    """Columns ``U|r>`` for all ``r`` in lexicographic order, wires as rows."""
    st = state.arch.stack(which)
    if st.n_wires > MAX_DENSE_QUBITS or state.arch.R > MAX_DENSE_QUBITS:
        raise ValueError(f"subsystem of {st.n_wires} sites too large for dense evaluation")
    if state.arch.infinite:
        raise ValueError("dense evaluation needs a finite state")
    rows = bitstrings(state.arch.R)
    psi = _simulate(state, which, _initial(st, rows))
    return psi.reshape(rows.shape[0], -1).T


def apply_stack(state: SchmidtTNS, which: str, r) -> np.ndarray:
    """The Schmidt state ``U|r>`` (or ``V|r>``) as a vector over the stack's wires."""
    st = state.arch.stack(which)
    if st.n_wires > MAX_DENSE_QUBITS:
        raise ValueError(f"subsystem of {st.n_wires} sites too large for dense evaluation")
    r = np.asarray(r, dtype=np.int64).reshape(1, -1)
    if r.shape[1] != state.arch.R:
        raise ValueError(f"bitstring of length {r.shape[1]} for R = {state.arch.R}")
    return _simulate(state, which, _initial(st, r)).reshape(-1)


def materialize(state: SchmidtTNS) -> np.ndarray:
    """Full ``2**N`` amplitude vector (site 0 most significant), unnormalized."""
    arch = state.arch
    if arch.n_sites > MAX_DENSE_QUBITS:
        raise ValueError(f"N = {arch.n_sites} above the dense limit of {MAX_DENSE_QUBITS}")
    u = stack_matrix(state, "U")
    v = stack_matrix(state, "V")
    lam = state.lam.dense()
    psi = (u * lam) @ v.T
    order = list(arch.U.sites) + list(arch.V.sites)
    psi = psi.reshape((2,) * len(order))
    return psi.transpose(np.argsort(order)).reshape(-1)


def unroll(state: SchmidtTNS, n_cells: int) -> SchmidtTNS:
    """Finite chain of ``n_cells`` cells built from an infinite state's tensors."""
    arch = state.arch.unroll(n_cells)
    arrays = state.arrays()
    return SchmidtTNS(arch, _wrap(arch, {k: arrays[k] for k in arch.param_specs()}))
