"""Energies and observables of Schmidt TNS by network contraction.

For a local operator the two circuits only matter inside its causal cone;
all other tensors meet their transposes and cancel. An operator
``O = sum_k a_k (x) b_k`` split across the cut then gives

    <Psi|O|Psi> = sum_{r, r'} lambda_r lambda_r'  <r|U^T a_k U|r'>  <r|V^T b_k V|r'>

so each Schmidt index inside both cones carries one ket label shared by the
lambda ket, the U ket and the V ket (a hyperedge, i.e. the delta tensor), and
one bra label likewise. An index outside either cone is forced diagonal. The
lambda MPS outside the window spanned by the cone is replaced by its norm
environments: exact sweeps for finite chains, transfer-matrix fixed points
for infinite ones.

Networks are compiled once per (architecture, Hamiltonian) and evaluated on
numpy arrays or on torch tensors (for gradients).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import opt_einsum as oe

from .lattice import Hamiltonian
from .schmidt_state import Architecture, SchmidtTNS, Stack
from .tensor_core import DEFAULT_MEMORY_CAP, network_expression, safe_divide

__all__ = [
    "EnergyReport",
    "Environment",
    "EnergyPlan",
    "ConvergenceError",
    "energy",
    "expectation",
    "fixed_point",
    "infinite_energy",
    "split_operator",
]

E0 = np.array([1.0, 0.0])


class ConvergenceError(RuntimeError):
    pass


@dataclass
class EnergyReport:
    E: float
    E_b: float
    norm: float
    terms: list[tuple[tuple[int, ...], float]] = field(default_factory=list)


@dataclass
class Environment:
    left: np.ndarray
    right: np.ndarray
    eigenvalue: float
    residual: float
    iterations: int = 0


def split_operator(matrix: np.ndarray, n_a: int, n_b: int, tol: float = 1e-13):
    """Operator-Schmidt split of a matrix on ``n_a`` A-sites followed by ``n_b`` B-sites.

    Returns ``(a, b)`` with ``a`` of shape ``(2,)*2n_a + (K,)`` (outputs, inputs,
    k) and ``b`` likewise, such that ``matrix = sum_k a_k (x) b_k``.
    """
    k = n_a + n_b
    t = np.asarray(matrix, dtype=np.float64).reshape((2,) * (2 * k))
    out_a, out_b = list(range(n_a)), list(range(n_a, k))
    in_a, in_b = [k + i for i in out_a], [k + i for i in out_b]
    m = t.transpose(out_a + in_a + out_b + in_b).reshape(4**n_a, 4**n_b)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    keep = s > tol * max(s[0], 1e-300)
    u, s, vt = u[:, keep], s[keep], vt[keep]
    a = (u * np.sqrt(s)).reshape((2,) * (2 * n_a) + (len(s),))
    b = (vt.T * np.sqrt(s)).reshape((2,) * (2 * n_b) + (len(s),))
    return a, b


class _Labels:
    """Union-find over string labels."""

    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[ry] = rx


def _cone(stack: Stack, wires):
    active = set(wires)
    gates = []
    for g in reversed(stack.gates):
        if active.intersection(g.wires):
            gates.append(g)
            active.update(g.wires)
    return gates[::-1], active


@dataclass
class _Net:
    """One compiled network. Sources are ('param', name), ('lam', name),
    ('const', array), ('left', m) or ('right', m)."""

    sources: list
    labels: list
    lo: int
    hi: int
    expr: object = None


def _circuit(prefix, stack, wires, cone_gates, active, ket, bra, nets, uf):
    """Add one cone of ``stack`` (ket and bra copies) to ``nets``; return output labels."""
    cur_k, cur_b = {}, {}
    for w in active:
        m = stack.inputs[w]
        if m is None:
            cur_k[w], cur_b[w] = f"{prefix}a{w}k", f"{prefix}a{w}b"
            nets.append((("const", E0), [cur_k[w]]))
            nets.append((("const", E0), [cur_b[w]]))
        else:
            cur_k[w], cur_b[w] = ket(m), bra(m)
    for gi, g in enumerate(cone_gates):
        for cur, side in ((cur_k, "k"), (cur_b, "b")):
            ins = [cur[w] for w in g.wires]
            outs = [f"{prefix}g{gi}w{w}{side}" for w in g.wires]
            nets.append((("param", g.name), outs + ins))
            for w, lab in zip(g.wires, outs):
                cur[w] = lab
    for w in active:
        if w not in wires:
            uf.union(cur_k[w], cur_b[w])
    return [cur_b[w] for w in wires], [cur_k[w] for w in wires]


def _term_network(arch: Architecture, sites, matrix, memory_cap) -> _Net:
    wire_of = {}
    for which in ("U", "V"):
        for w, s in enumerate(arch.stack(which).sites):
            wire_of[s] = (which, w)
    for s in sites:
        if s not in wire_of:
            raise ValueError(f"site {s} not in the state")
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site in {sites}")
    sa = [s for s in sites if wire_of[s][0] == "U"]
    sb = [s for s in sites if wire_of[s][0] == "V"]
    # reorder the operator so A-sites come first
    order = [sites.index(s) for s in sa + sb]
    k = len(sites)
    t = np.asarray(matrix, dtype=np.float64).reshape((2,) * (2 * k))
    t = t.transpose(order + [k + i for i in order]).reshape(2**k, 2**k)
    if sa and sb:
        a_op, b_op = split_operator(t, len(sa), len(sb))
    elif sa:
        a_op, b_op = t.reshape((2,) * (2 * k) + (1,)), None
    else:
        a_op, b_op = None, t.reshape((2,) * (2 * k) + (1,))

    uf = _Labels()
    nets: list = []
    ket = lambda m: f"k{m}"  # noqa: E731
    bra = lambda m: f"b{m}"  # noqa: E731
    cones = {}
    for which, part, op in (("U", sa, a_op), ("V", sb, b_op)):
        if op is None:
            cones[which] = set()
            continue
        stack = arch.stack(which)
        wires = [wire_of[s][1] for s in part]
        gates, active = _cone(stack, wires)
        outs_b, outs_k = _circuit(which, stack, wires, gates, active, ket, bra, nets, uf)
        nets.append((("const", op), outs_b + outs_k + ["K"]))
        cones[which] = {stack.inputs[w] for w in active if stack.inputs[w] is not None}
    both = cones["U"] & cones["V"]
    used = cones["U"] | cones["V"]
    lo, hi = (min(used), max(used)) if used else (0, -1)
    for m in range(lo, hi + 1):
        if m not in both:
            uf.union(ket(m), bra(m))
        nets.append((("lam", arch.lam_names[m]), [ket(m), f"x{m}", f"x{m + 1}"]))
        nets.append((("lam", arch.lam_names[m]), [bra(m), f"y{m}", f"y{m + 1}"]))
    nets.append((("left", lo), [f"x{lo}", f"y{lo}"]))
    nets.append((("right", hi + 1), [f"x{hi + 1}", f"y{hi + 1}"]))
    sources = [src for src, _ in nets]
    labels = [[uf.find(x) for x in lab] for _, lab in nets]
    return _Net(sources, labels, lo, hi)


def _compile(arch, net: _Net, memory_cap):
    specs = arch.param_specs()
    shapes = []
    for kind, key in net.sources:
        if kind in ("param", "lam"):
            shapes.append(specs[key][1])
        elif kind == "const":
            shapes.append(key.shape)
        else:
            shapes.append((arch.bond_dims[key],) * 2)
    net.expr = network_expression(net.labels, shapes, (), memory_cap)
    return net


def _norm_envs(arch: Architecture, lam: dict):
    """Left/right norm environments of the finite lambda chain at every bond."""
    R = arch.R
    tensors = [lam[n] for n in arch.lam_names]
    like = tensors[0]
    left = [None] * (R + 1)
    right = [None] * (R + 1)
    left[0] = _ones_like(like, arch.bond_dims[0])
    right[R] = _ones_like(like, arch.bond_dims[R])
    for m in range(R):
        left[m + 1] = oe.contract("ab,rac,rbd->cd", left[m], tensors[m], tensors[m])
    for m in range(R - 1, -1, -1):
        right[m] = oe.contract("rac,rbd,cd->ab", tensors[m], tensors[m], right[m + 1])
    return left, right


def _ones_like(like, d):
    if isinstance(like, np.ndarray):
        return np.ones((d, d))
    import torch

    return torch.ones((d, d), dtype=like.dtype)


class EnergyPlan:
    """Compiled term networks of a Hamiltonian on a finite or infinite state.

    ``evaluate`` accepts raw parameter arrays (numpy or torch) and, for
    infinite states, an :class:`Environment`.
    """

    def __init__(self, arch: Architecture, terms, memory_cap: int = DEFAULT_MEMORY_CAP):
        self.arch = arch
        self.terms = list(terms)
        if arch.infinite:
            self._init_infinite(memory_cap)
        else:
            self.work = arch
            self.nets = [
                _compile(arch, _term_network(arch, sites, m, memory_cap), memory_cap)
                for sites, m in self.terms
            ]

    def _init_infinite(self, memory_cap):
        arch = self.arch
        cell = arch.cell_size
        pad = arch.n_layers // arch.r_cell + 2
        n_cells = 2 * pad + 2
        self.work = arch.unroll(n_cells)
        shift = pad * cell
        self.nets, self.norm_nets = [], []
        for sites, m in self.terms:
            net = _term_network(self.work, tuple(s + shift for s in sites), m, memory_cap)
            lo = (net.lo // arch.r_cell) * arch.r_cell
            hi = (net.hi // arch.r_cell + 1) * arch.r_cell - 1
            if lo < arch.r_cell or hi >= self.work.R - arch.r_cell:
                raise RuntimeError("causal cone reaches the edge of the unrolled window")
            net = self._widen(net, lo, hi)
            self.nets.append(_compile(self.work, net, memory_cap))
            self.norm_nets.append(_compile(self.work, self._norm_net(lo, hi), memory_cap))

    def _widen(self, net: _Net, lo, hi) -> _Net:
        """Extend a term network's lambda window to [lo, hi] with diagonal transfers."""
        names = self.work.lam_names
        sources, labels = [], []
        for src, lab in zip(net.sources, net.labels):
            if src[0] in ("left", "right"):
                continue
            sources.append(src)
            labels.append(lab)
        for m in list(range(lo, net.lo)) + list(range(net.hi + 1, hi + 1)):
            sources += [("lam", names[m]), ("lam", names[m])]
            labels += [[f"d{m}", f"x{m}", f"x{m + 1}"], [f"d{m}", f"y{m}", f"y{m + 1}"]]
        sources += [("left", lo), ("right", hi + 1)]
        labels += [[f"x{lo}", f"y{lo}"], [f"x{hi + 1}", f"y{hi + 1}"]]
        return _Net(sources, labels, lo, hi)

    def _norm_net(self, lo, hi) -> _Net:
        names = self.work.lam_names
        sources, labels = [], []
        for m in range(lo, hi + 1):
            sources += [("lam", names[m]), ("lam", names[m])]
            labels += [[f"d{m}", f"x{m}", f"x{m + 1}"], [f"d{m}", f"y{m}", f"y{m + 1}"]]
        sources += [("left", lo), ("right", hi + 1)]
        labels += [[f"x{lo}", f"y{lo}"], [f"x{hi + 1}", f"y{hi + 1}"]]
        return _Net(sources, labels, lo, hi)

    @staticmethod
    def _run(net: _Net, arrays, lam, left, right):
        ops = []
        for kind, key in net.sources:
            if kind == "param":
                ops.append(arrays[key])
            elif kind == "lam":
                ops.append(lam[key])
            elif kind == "const":
                ops.append(key)
            elif kind == "left":
                ops.append(left(key))
            else:
                ops.append(right(key))
        backend = _backend(ops)
        if backend == "torch":
            import torch

            ops = [torch.as_tensor(o) if isinstance(o, np.ndarray) else o for o in ops]
        return net.expr(*ops, backend=backend)

    def evaluate(self, arrays: dict, env: Environment | None = None):
        """Return ``(per-term values, norm)`` with each value already divided by the norm."""
        lam = {n: arrays[n] ** 2 for n in dict.fromkeys(self.work.lam_names)}
        values = []
        if not self.arch.infinite:
            left, right = _norm_envs(self.work, lam)
            norm = left[-1].sum()
            for net in self.nets:
                v = self._run(net, arrays, lam, left.__getitem__, right.__getitem__)
                values.append(safe_divide(v, norm))
            return values, norm
        if env is None:
            raise ValueError("infinite states need an Environment")
        like = next(iter(lam.values()))
        l_env, r_env = _as_backend(env.left, like), _as_backend(env.right, like)
        norm = None
        for net, nnet in zip(self.nets, self.norm_nets):
            v = self._run(net, arrays, lam, lambda m: l_env, lambda m: r_env)
            n = self._run(nnet, arrays, lam, lambda m: l_env, lambda m: r_env)
            values.append(safe_divide(v, n))
            norm = n
        return values, norm


def _backend(ops):
    for o in ops:
        if not isinstance(o, np.ndarray):
            return "torch"
    return "numpy"


def _as_backend(x, like):
    if isinstance(like, np.ndarray):
        return np.asarray(x)
    import torch

    return torch.as_tensor(np.asarray(x), dtype=like.dtype)


_PLANS: dict = {}


def _plan(arch: Architecture, H: Hamiltonian) -> EnergyPlan:
    key = (id(arch), id(H))
    hit = _PLANS.get(key)
    if hit is None or hit[0] is not arch or hit[1] is not H:
        if len(_PLANS) > 64:
            _PLANS.clear()
        hit = (arch, H, EnergyPlan(arch, H.terms()))
        _PLANS[key] = hit
    return hit[2]


def _report(terms, values, norm, n_bonds):
    vals = [float(v) for v in values]
    E = float(sum(vals))
    return EnergyReport(E, E / n_bonds if n_bonds else float("nan"), float(norm),
                        [(s, v) for (s, _), v in zip(terms, vals)])


def energy(state: SchmidtTNS, H: Hamiltonian) -> EnergyReport:
    """``<Psi|H|Psi> / <lambda|lambda>`` of a finite state, with ``E_b`` per lattice edge."""
    if state.arch.infinite:
        raise ValueError("use infinite_energy for infinite states")
    plan = _plan(state.arch, H)
    values, norm = plan.evaluate(state.arrays())
    return _report(plan.terms, values, norm, H.n_bonds)


def expectation(state: SchmidtTNS, site_ops) -> float:
    """Normalized expectation of a product of single-site operators."""
    if state.arch.infinite:
        raise ValueError("expectation is defined for finite states")
    site_ops = list(site_ops)
    mat = np.ones((1, 1))
    for _, op in site_ops:
        mat = np.kron(mat, np.asarray(op, dtype=np.float64))
    plan = EnergyPlan(state.arch, [(tuple(s for s, _ in site_ops), mat)])
    values, _ = plan.evaluate(state.arrays())
    return float(values[0])


def _transfer_left(l, cell):
    for a in cell:
        l = np.einsum("ab,rac,rbd->cd", l, a, a)
    return l


def _transfer_right(r, cell):
    for a in cell[::-1]:
        r = np.einsum("rac,rbd,cd->ab", a, a, r)
    return r


def _power(apply, v, tol, max_iter):
    mu = 0.0
    res = np.inf
    history = []
    for it in range(1, max_iter + 1):
        w = apply(v)
        mu = float(np.sum(w * v) / np.sum(v * v))
        res = float(np.linalg.norm(w - mu * v) / np.linalg.norm(v))
        history.append(res)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            raise ConvergenceError("transfer operator annihilated the environment")
        v = w / nrm
        if res < tol:
            return v, mu, res, it
    tail = history[-50:]
    ratio = tail[-1] / tail[0] if tail[0] > 0 else 1.0
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (residual {res:.3g}, "
        f"residual ratio over 50 steps {ratio:.3g} suggests a near-degenerate top eigenvalue)"
    )


def fixed_point(state: SchmidtTNS, H: Hamiltonian | None = None, tol: float = 1e-10,
                max_iter: int = 10_000) -> Environment:
    """Dominant left/right eigenvectors of the one-cell lambda transfer operator.

    The environments are positive, normalized so that ``sum(left * right) = 1``.
    """
    arch = state.arch
    if not arch.infinite:
        raise ValueError("fixed_point needs an infinite state")
    cell = [state.params[n].raw.data ** 2 for n in arch.lam_names[: arch.r_cell]]
    chi = cell[0].shape[1]
    v0 = np.ones((chi, chi))
    left, mu_l, res_l, it_l = _power(lambda l: _transfer_left(l, cell), v0, tol, max_iter)
    right, mu_r, res_r, it_r = _power(lambda r: _transfer_right(r, cell), v0, tol, max_iter)
    overlap = float(np.sum(left * right))
    if overlap <= 0:
        raise ConvergenceError("left and right fixed points are orthogonal")
    left = left / np.sqrt(overlap)
    right = right / np.sqrt(overlap)
    return Environment(left, right, 0.5 * (mu_l + mu_r), max(res_l, res_r), max(it_l, it_r))


def infinite_energy(state: SchmidtTNS, H: Hamiltonian, env: Environment | None = None) -> EnergyReport:
    """Energy per cell and per bond of an infinite translation-invariant state."""
    if not state.arch.infinite:
        raise ValueError("infinite_energy needs an infinite state")
    env = env or fixed_point(state, H)
    plan = _plan(state.arch, H)
    values, norm = plan.evaluate(state.arrays(), env)
    return _report(plan.terms, values, norm, H.n_bonds)
