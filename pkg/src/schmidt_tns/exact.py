"""Exact diagonalization and entanglement analysis.

These routines work on dense ``2**N`` vectors (site 0 most significant) and
serve as ground truth for the variational states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from .lattice import Hamiltonian
from .schmidt_state import MpsLambda, bitstrings

__all__ = [
    "SchmidtSpectrum",
    "GroundState",
    "apply_hamiltonian",
    "dense_hamiltonian",
    "ed_ground_state",
    "schmidt_decompose",
    "reduced_density_eigenvalues",
    "entanglement_entropy",
    "top_k_schmidt",
    "mps_entanglement",
]

MAX_ED_SITES = 20
MAX_ENUM_R = 24


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Normalized Schmidt coefficients in descending order."""

    coefficients: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        g = np.asarray(self.coefficients, dtype=np.float64)
        if np.any(g < 0) or np.any(np.diff(g) > 1e-15):
            raise ValueError("Schmidt coefficients must be nonnegative and descending")
        if abs(float(np.sum(g**2)) - 1.0) > 1e-10:
            raise ValueError(f"sum of squared coefficients is {np.sum(g**2)}, not 1")
        object.__setattr__(self, "coefficients", g)

    def __len__(self):
        return len(self.coefficients)

    def entropy(self) -> float:
        return entanglement_entropy(self)


class GroundState(NamedTuple):
    energy: float
    vector: np.ndarray
    next_energy: float
    residual: float

    @property
    def degenerate(self) -> bool:
        return abs(self.next_energy - self.energy) < 1e-10


def _n_sites(H: Hamiltonian, n_sites: int | None) -> int:
    if n_sites is not None:
        return n_sites
    sites = [s for t, _ in H.terms() for s in t]
    return max(sites) + 1


def apply_hamiltonian(H: Hamiltonian, n_sites: int, v: np.ndarray) -> np.ndarray:
    """Matrix-free ``H v``."""
    psi = np.asarray(v, dtype=np.float64).reshape((2,) * n_sites)
    out = np.zeros_like(psi)
    for sites, m in H.terms():
        k = len(sites)
        t = m.reshape((2,) * (2 * k))
        res = np.tensordot(t, psi, axes=(list(range(k, 2 * k)), list(sites)))
        out += np.moveaxis(res, list(range(k)), list(sites))
    return out.reshape(-1)


def dense_hamiltonian(H: Hamiltonian, n_sites: int | None = None) -> sp.csr_matrix:
    """Sparse ``2**N`` matrix of ``H`` assembled from Kronecker products."""
    n = _n_sites(H, n_sites)
    dim = 2**n
    out = sp.csr_matrix((dim, dim))
    for sites, m in H.terms():
        if list(sites) != list(range(sites[0], sites[0] + len(sites))):
            # bring non-adjacent pairs into place through a basis permutation
            perm = np.arange(dim).reshape((2,) * n)
            rest = [s for s in range(n) if s not in sites]
            perm = perm.transpose(list(sites) + rest).reshape(-1)
            local = sp.kron(sp.csr_matrix(m), sp.identity(2 ** (n - len(sites))), format="csr")
            P = sp.csr_matrix((np.ones(dim), (perm, np.arange(dim))), shape=(dim, dim))
            out = out + P @ local @ P.T
        else:
            left = sp.identity(2 ** sites[0])
            right = sp.identity(2 ** (n - sites[0] - len(sites)))
            out = out + sp.kron(sp.kron(left, sp.csr_matrix(m)), right, format="csr")
    return out.tocsr()


def ed_ground_state(H: Hamiltonian, n_sites: int | None = None, tol: float = 1e-10) -> GroundState:
    """Lowest eigenpair of ``H`` by Lanczos on the matrix-free operator."""
    n = _n_sites(H, n_sites)
    if n > MAX_ED_SITES:
        raise ValueError(f"N = {n} above the ED limit of {MAX_ED_SITES}")
    dim = 2**n
    if dim <= 256:
        w, v = np.linalg.eigh(dense_hamiltonian(H, n).toarray())
        e0, e1, vec = w[0], w[1] if dim > 1 else np.inf, v[:, 0]
    else:
        op = LinearOperator((dim, dim), matvec=lambda x: apply_hamiltonian(H, n, x), dtype=np.float64)
        v0 = np.random.default_rng(0).standard_normal(dim)
        w, v = eigsh(op, k=2, which="SA", tol=1e-13, v0=v0, maxiter=20 * dim)
        order = np.argsort(w)
        e0, e1, vec = w[order[0]], w[order[1]], v[:, order[0]]
    vec = vec / np.linalg.norm(vec)
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    res = float(np.linalg.norm(apply_hamiltonian(H, n, vec) - e0 * vec))
    if res > tol:
        raise RuntimeError(f"ED residual {res:.3g} above {tol}")
    return GroundState(float(e0), vec, float(e1), res)


def _matricize(vec, part_a, n_sites):
    part_a = list(part_a)
    part_b = [s for s in range(n_sites) if s not in part_a]
    psi = np.asarray(vec, dtype=np.float64).reshape((2,) * n_sites)
    return psi.transpose(part_a + part_b).reshape(2 ** len(part_a), -1)


def schmidt_decompose(vec, part_a, n_sites: int | None = None) -> SchmidtSpectrum:
    """Schmidt coefficients of a unit vector across ``part_a`` | rest.

    ``part_a`` may also be a :class:`~schmidt_tns.lattice.Bipartition`.
    """
    part_a = getattr(part_a, "part_a", part_a)
    vec = np.asarray(vec, dtype=np.float64)
    n = n_sites or int(round(np.log2(vec.size)))
    nrm = np.linalg.norm(vec)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"vector norm {nrm} deviates from 1")
    s = np.linalg.svd(_matricize(vec / nrm, part_a, n), compute_uv=False)
    return SchmidtSpectrum(s / np.linalg.norm(s))


def reduced_density_eigenvalues(vec, part_a, n_sites: int | None = None) -> np.ndarray:
    part_a = getattr(part_a, "part_a", part_a)
    vec = np.asarray(vec, dtype=np.float64)
    n = n_sites or int(round(np.log2(vec.size)))
    m = _matricize(vec, part_a, n)
    w = np.linalg.eigvalsh(m @ m.T)
    return np.clip(w[::-1], 0.0, None)


def entanglement_entropy(spectrum) -> float:
    """Von Neumann entropy in bits, ``-sum g^2 log2 g^2``."""
    g = np.asarray(getattr(spectrum, "coefficients", spectrum), dtype=np.float64)
    g = g[g >= 1e-15]
    p = g**2
    return float(-np.sum(p * np.log2(p)))


def top_k_schmidt(lam: MpsLambda, k: int) -> list[tuple[tuple[int, ...], float]]:
    """The ``k`` largest normalized coefficients with their bitstrings.

    Ties are broken by lexicographic order of the bitstring.
    """
    if lam.R > MAX_ENUM_R:
        raise ValueError(f"R = {lam.R} above the enumeration limit of {MAX_ENUM_R}")
    if not 1 <= k <= 2**lam.R:
        raise ValueError(f"k must lie in [1, {2**lam.R}]")
    amps = lam.dense()
    amps = amps / np.linalg.norm(amps)
    # index order is lexicographic, so a stable sort on -amps breaks ties correctly
    order = np.argsort(-amps, kind="stable")[:k]
    rows = bitstrings(lam.R)[order]
    return [(tuple(int(b) for b in row), float(amps[i])) for row, i in zip(rows, order)]


def mps_entanglement(lam: MpsLambda, cut: int) -> float:
    """Entropy (bits) of the lambda MPS itself between Schmidt indices ``cut-1`` and ``cut``."""
    R = lam.R
    if not 1 <= cut <= R - 1:
        raise ValueError(f"cut must lie in [1, {R - 1}]")
    tensors = lam.open_tensors()
    # left-orthonormalize up to the cut
    carry = np.ones((1, 1))
    for a in tensors[:cut]:
        a = np.einsum("xa,rab->xrb", carry, a)
        q, carry = np.linalg.qr(a.reshape(-1, a.shape[2]))
    # right-orthonormalize from the end down to the cut
    rcarry = np.ones((1, 1))
    for a in tensors[cut:][::-1]:
        a = np.einsum("rab,by->ary", a, rcarry)
        q, rr = np.linalg.qr(a.reshape(a.shape[0], -1).T)
        rcarry = rr.T
    s = np.linalg.svd(carry @ rcarry, compute_uv=False)
    if s[0] == 0:
        raise ZeroDivisionError("lambda has zero norm")
    return entanglement_entropy(s / np.linalg.norm(s))
