"""Gradient-descent ground-state search.

Each step moves every raw tensor against its energy gradient, then maps the
circuit tensors back to orthogonal matrices through the polar factor
``P Q^T`` of their SVD. The lambda tensors stay free; their squares enter
the network, so the Schmidt coefficients are nonnegative at every step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .contraction import EnergyPlan, Environment, energy, fixed_point, infinite_energy
from .lattice import Hamiltonian
from .schmidt_state import SchmidtTNS, deepen, init_state, normalize_lambda, spin_flip_frames
from .tensor_core import UNITARY, evaluate_with_gradients, project_to_unitary

__all__ = [
    "TrainConfig",
    "TrainTrace",
    "TrainingDiverged",
    "compute_gradients",
    "step",
    "train",
    "train_depth_series",
]


class TrainingDiverged(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class TrainConfig:
    eta: float = 0.05
    max_steps: int = 5000
    tol: float = 1e-8
    window: int = 50
    decay: float = 0.5
    seed: int = 0
    env_refresh: int = 1
    max_retries: int = 10
    parity_even: bool = False

    def __post_init__(self):
        if self.eta <= 0 or self.tol <= 0 or self.window < 1 or not 0 < self.decay < 1:
            raise ValueError("invalid TrainConfig")


@dataclass
class TrainTrace:
    E_b: list[float] = field(default_factory=list)
    norm: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    eta: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    reason: str = ""

    @property
    def best(self) -> float:
        return min(self.E_b)


class _Objective:
    """Energy per cell (infinite) or total energy (finite) with gradients."""

    def __init__(self, state: SchmidtTNS, H: Hamiltonian):
        self.arch = state.arch
        self.H = H
        self.plan = EnergyPlan(state.arch, H.terms())

    def __call__(self, state: SchmidtTNS, env: Environment | None = None):
        def program(leaves):
            values, _ = self.plan.evaluate(leaves, env)
            total = values[0]
            for v in values[1:]:
                total = total + v
            return total

        return evaluate_with_gradients(program, state.arrays())


def compute_gradients(state: SchmidtTNS, H: Hamiltonian, env: Environment | None = None):
    """``(E, dE/draw)`` for every parameter; infinite states use frozen environments."""
    if state.arch.infinite and env is None:
        env = fixed_point(state)
    return _Objective(state, H)(state, env)


def step(state: SchmidtTNS, gradients: dict, eta: float, frames: dict | None = None) -> SchmidtTNS:
    """One descent step followed by polar retraction and lambda renormalization.

    ``frames`` (from :func:`~schmidt_tns.schmidt_state.spin_flip_frames`)
    symmetrizes each circuit tensor before the retraction, which keeps the
    state in the spin-flip-even sector despite rounding.
    """
    frames = frames or {}
    arrays = {}
    for name, p in state.params.items():
        new = p.raw.data - eta * gradients[name]
        if p.kind == UNITARY:
            d = int(np.sqrt(new.size))
            m = new.reshape(d, d)
            if name in frames:
                f_out, f_in = frames[name]
                m = 0.5 * (m + f_out @ m @ f_in)
            new = project_to_unitary(m).reshape(new.shape)
        arrays[name] = new
    arrays = normalize_lambda(state.arch, arrays)
    return state.with_arrays(arrays)


def _safe_step(state, grads, eta, retries, frames):
    for _ in range(retries + 1):
        try:
            return step(state, grads, eta, frames), eta
        except (ValueError, ZeroDivisionError):
            eta /= 2
    raise RuntimeError("retraction failed after repeated step halving")


def train(state: SchmidtTNS, H: Hamiltonian, config: TrainConfig | None = None, callback=None):
    """Minimize the energy from ``state``; returns ``(best_state, TrainTrace)``.

    A step that raises the energy is retried with half the step size (at
    most ``max_retries`` times). The step size is also halved whenever a
    full window passes without improving the best energy. With
    ``parity_even`` the iterates are kept spin-flip symmetric; start from a
    symmetric state (``init_state(..., parity_even=True)``).
    """
    cfg = config or TrainConfig()
    frames = spin_flip_frames(state.arch) if cfg.parity_even else None
    objective = _Objective(state, H)
    n_bonds = H.n_bonds
    infinite = state.arch.infinite
    trace = TrainTrace()
    t0 = time.perf_counter()

    env = fixed_point(state) if infinite else None
    E, grads = objective(state, env)
    best_state, best = state, E / n_bonds
    eta = cfg.eta
    last_improve = 0
    for it in range(cfg.max_steps):
        gnorm = max(float(np.abs(g).max()) for g in grads.values())
        trace.E_b.append(E / n_bonds)
        trace.norm.append(1.0)
        trace.grad_norm.append(gnorm)
        trace.eta.append(eta)
        if callback is not None:
            callback(it, E / n_bonds, state)
        if gnorm == 0.0:
            trace.reason = "zero gradient"
            break
        if len(trace.E_b) > cfg.window:
            recent = trace.E_b[-cfg.window - 1 :]
            if max(recent) - min(recent) < cfg.tol:
                trace.reason = "converged"
                break
        if len(trace.E_b) > 100 and trace.E_b[-1] - trace.E_b[-101] > 1.0:
            trace.reason = "diverged"
            trace.wall_time = time.perf_counter() - t0
            raise TrainingDiverged("energy rose by more than 1 over 100 steps", trace)

        trial = eta
        for _ in range(cfg.max_retries + 1):
            new, trial = _safe_step(state, grads, trial, cfg.max_retries, frames)
            new_env = fixed_point(new) if infinite and (it + 1) % cfg.env_refresh == 0 else env
            E_new, g_new = objective(new, new_env)
            if E_new <= E + 1e-12:
                break
            trial /= 2
        state, E, grads, env = new, E_new, g_new, new_env
        if E / n_bonds < best - 1e-15:
            if E / n_bonds < best - cfg.tol:
                last_improve = it
            best, best_state = E / n_bonds, state
        if it - last_improve >= cfg.window:
            eta *= cfg.decay
            last_improve = it
    else:
        trace.reason = "max_steps"
        trace.E_b.append(E / n_bonds)
        trace.norm.append(1.0)
        trace.grad_norm.append(max(float(np.abs(g).max()) for g in grads.values()))
        trace.eta.append(eta)
    trace.wall_time = time.perf_counter() - t0
    return best_state, trace


def train_depth_series(arch, H: Hamiltonian, depths, config: TrainConfig | None = None,
                       warm_start: bool = True, init_eps: float = 0.1, noise: float = 0.05,
                       lam_floor: float = 0.0):
    """Train ``arch`` at each entangling depth in ``depths`` (ascending).

    With ``warm_start`` each depth starts from the previous result through
    :func:`~schmidt_tns.schmidt_state.deepen`, the new gates perturbed by
    ``noise`` and the lambda entries lifted to ``lam_floor``; otherwise (and
    at the first depth) from ``init_state`` with ``init_eps``. The unperturbed embedding of the shallower state is a valid
    deeper state too, so it is kept whenever training does not beat it; the
    energies are then non-increasing in depth. Returns ``[(n_layers, state,
    trace)]``.
    """
    cfg = config or TrainConfig()
    depths = sorted(depths)
    out, prev = [], None
    for n_layers in depths:
        if warm_start and prev is not None:
            embedded = deepen(prev, n_layers)
            start = deepen(prev, n_layers, eps=noise, seed=cfg.seed + n_layers,
                           parity_even=cfg.parity_even, lam_floor=lam_floor)
        else:
            embedded = None
            desc = dict(arch.describe(), n_layers=n_layers)
            start = init_state(type(arch).from_description(desc), seed=cfg.seed,
                               eps=init_eps, parity_even=cfg.parity_even)
        state, trace = train(start, H, cfg)
        if embedded is not None:
            measure = infinite_energy if embedded.arch.infinite else energy
            if measure(embedded, H).E_b < trace.best:
                state = embedded
        out.append((n_layers, state, trace))
        prev = state
    return out
