"""Architecture plans, the lambda MPS and dense evaluation of states."""

import itertools

import numpy as np
import pytest

from schmidt_tns.lattice import build_zpaf, load_lattice, zpaf_fragment
from schmidt_tns.schmidt_state import (
    Architecture,
    ArchitectureError,
    MpsLambda,
    SchmidtTNS,
    _wrap,
    apply_stack,
    bitstrings,
    deepen,
    init_state,
    make_architecture,
    materialize,
    mps_amplitude,
    spin_flip,
    stack_matrix,
    unroll,
)
from schmidt_tns.tensor_core import unitarity_error

from conftest import random_state


def test_architecture_invariants():
    lat, bip = build_zpaf(2)
    arch = make_architecture(lat, bip, 3, chi=4, cell_size=9)
    assert arch.R == 8
    assert sorted(arch.U.sites) == list(bip.part_a)
    assert sorted(arch.V.sites) == list(bip.part_b)
    # every gate is square: k wires in, k wires out
    for name, (kind, shape) in arch.param_specs().items():
        if kind == "unitary":
            k = len(shape) // 2
            assert shape[:k] == shape[k:]
    # bond dimensions of an open chain never exceed the exact Schmidt ranks
    assert arch.bond_dims[0] == arch.bond_dims[-1] == 1
    assert max(arch.bond_dims) == 4


def test_description_round_trip():
    lat, bip = build_zpaf(1, "infinite")
    arch = make_architecture(lat, bip, 2, chi=3)
    assert Architecture.from_description(arch.describe()) == arch
    lat, bip = zpaf_fragment(10)
    arch = make_architecture(lat, bip, 1, chi=2)
    assert Architecture.from_description(arch.describe()) == arch


def test_bad_architectures():
    lat, bip = build_zpaf(1)
    with pytest.raises(ArchitectureError):
        make_architecture(lat, bip, -1)
    with pytest.raises(ArchitectureError):
        make_architecture(lat, bip, 1, chi=0)
    with pytest.raises(ArchitectureError):
        make_architecture(lat, bip, 1, cell_size=4)


def test_init_is_deterministic_and_normalized():
    lat, bip = zpaf_fragment(10)
    arch = make_architecture(lat, bip, 2, chi=3)
    a, b = init_state(arch, seed=7), init_state(arch, seed=7)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k].raw.data, b.params[k].raw.data)
    assert a.lam.norm_squared() == pytest.approx(1.0, abs=1e-12)
    for name in a.unitary_names():
        assert unitarity_error(a.gate_matrix(name)) < 1e-13
    c = init_state(arch, seed=8)
    assert any(not np.array_equal(a.params[k].raw.data, c.params[k].raw.data) for k in a.params)


def test_zero_noise_gives_identity_wiring():
    lat, bip = zpaf_fragment(8)
    st = init_state(make_architecture(lat, bip, 2), eps=0.0)
    for name in st.unitary_names():
        np.testing.assert_array_equal(st.gate_matrix(name), np.eye(st.gate_matrix(name).shape[0]))
    R = st.arch.R
    for r in bitstrings(R):
        vec = apply_stack(st, "U", r)
        idx = int("".join(map(str, r)), 2)
        np.testing.assert_array_equal(vec, np.eye(2**R)[idx])
    v0 = apply_stack(st, "V", np.zeros(R, dtype=int))
    assert v0[0] == 1.0 and np.count_nonzero(v0) == 1


def test_identity_stacks_with_product_lambda_give_basis_state():
    lat, bip = zpaf_fragment(8)
    arch = make_architecture(lat, bip, 1)
    st = init_state(arch, eps=0.0)
    arrays = st.arrays()
    for name in arch.lam_names:
        t = np.zeros_like(arrays[name])
        t[0, 0, 0] = 1.0
        arrays[name] = t
    psi = materialize(st.with_arrays(arrays))
    assert psi[0] == pytest.approx(1.0)
    assert np.count_nonzero(np.abs(psi) > 1e-15) == 1


def test_stack_columns_are_orthonormal():
    _, _, st = random_state(8, n_layers=3, seed=2)
    assert st.arch.R == 4
    for which in ("U", "V"):
        cols = np.array([apply_stack(st, which, r) for r in bitstrings(4)])
        np.testing.assert_allclose(cols @ cols.T, np.eye(16), atol=1e-12)
        np.testing.assert_allclose(stack_matrix(st, which), cols.T, atol=1e-14)


def test_mps_amplitude_examples(rng):
    lam = MpsLambda([np.array([1.0, 0.0]).reshape(2, 1, 1)] * 3)
    assert mps_amplitude(lam, [0, 0, 0]) == 1.0
    assert mps_amplitude(lam, [0, 1, 0]) == 0.0
    half = np.full((2, 1, 1), 2 ** -0.25)  # squared entries are 1/sqrt(2)
    lam = MpsLambda([half, half])
    for r in itertools.product((0, 1), repeat=2):
        assert mps_amplitude(lam, r) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        mps_amplitude(lam, [0])


def test_mps_amplitude_matches_dense_oracle(rng):
    R = 8
    dims = [1, 2, 3, 4, 4, 4, 3, 2, 1]
    raw = [rng.uniform(0.2, 1.2, (2, dims[m], dims[m + 1])) for m in range(R)]
    lam = MpsLambda(raw)
    # oracle: one einsum over the whole chain
    letters = "abcdefghi"
    phys = "rstuvwxy"
    eq = ",".join(f"{phys[m]}{letters[m]}{letters[m + 1]}" for m in range(R)) + "->" + phys
    dense = np.einsum(eq, *[t**2 for t in raw]).reshape(-1)
    np.testing.assert_allclose(lam.dense(), dense, rtol=1e-13)
    for r in bitstrings(R)[::17]:
        idx = int("".join(map(str, r)), 2)
        assert mps_amplitude(lam, r) == pytest.approx(dense[idx], rel=1e-13)
    assert lam.norm_squared() == pytest.approx(float(dense @ dense), rel=1e-13)
    assert np.all(lam.dense() >= 0)


@pytest.mark.parametrize("n_sites, n_layers", [(8, 0), (9, 2), (10, 3), (12, 2)])
def test_norm_identity_and_schmidt_property(n_sites, n_layers):
    lat, bip, st = random_state(n_sites, n_layers=n_layers, chi=3, seed=n_sites)
    psi = materialize(st)
    n2 = st.lam.norm_squared()
    assert float(psi @ psi) == pytest.approx(n2, rel=1e-10)
    m = psi.reshape((2,) * n_sites).transpose(list(bip.part_a) + list(bip.part_b))
    s = np.linalg.svd(m.reshape(2 ** len(bip.part_a), -1), compute_uv=False)
    lam = np.sort(st.lam.dense())[::-1] / np.sqrt(n2)
    k = len(lam)
    np.testing.assert_allclose(s[:k], lam, atol=1e-8)
    assert np.all(s[k:] < 1e-8)


def test_reduced_density_matrix_spectrum():
    lat, bip = load_lattice("sites 6\nedge 0 1\nedge 1 2\nedge 2 3\nedge 3 4\nedge 4 5\npartA 0\npartA 1\npartA 2\n")
    arch = make_architecture(lat, bip, 2, chi=2)
    st = init_state(arch, seed=3, eps=1.0)
    assert arch.R == 3
    psi = materialize(st).reshape(8, 8)
    rho = psi @ psi.T
    lam = st.lam.dense()
    np.testing.assert_allclose(np.linalg.eigvalsh(rho), np.sort(lam**2 / np.sum(lam**2)), atol=1e-12)


def test_dense_limits():
    lat, bip = build_zpaf(3)
    st = init_state(make_architecture(lat, bip, 0, chi=2, cell_size=9))
    with pytest.raises(ValueError):
        materialize(st)


def test_unroll_shares_cell_tensors():
    lat, bip = build_zpaf(1, "infinite")
    st = init_state(make_architecture(lat, bip, 2, chi=2), seed=1)
    fin = unroll(st, 3)
    assert fin.arch.n_sites == 27 and fin.arch.R == 12
    np.testing.assert_array_equal(fin.params["lam.0"].raw.data, st.params["lam.0"].raw.data)
    with pytest.raises(ArchitectureError):
        fin.arch.unroll(2)


def test_spin_flip_matches_global_flip():
    lat, bip, st = random_state(10, n_layers=3, seed=5)
    n = 10
    psi = materialize(st).reshape((2,) * n)
    flipped = materialize(spin_flip(st)).reshape((2,) * n)
    np.testing.assert_allclose(flipped, psi[(slice(None, None, -1),) * n], atol=1e-14)


def test_parity_even_start_is_symmetric():
    lat, bip = build_zpaf(1)
    st = init_state(make_architecture(lat, bip, 2, chi=4), seed=3, parity_even=True)
    psi = materialize(st).reshape((2,) * 9)
    np.testing.assert_allclose(psi, psi[(slice(None, None, -1),) * 9], atol=1e-13)


def test_deepen_keeps_the_state():
    lat, bip, st = random_state(9, n_layers=1, seed=4)
    deep = deepen(st, 3)
    assert deep.arch.n_layers == 3
    np.testing.assert_allclose(materialize(deep), materialize(st), atol=1e-13)
    with pytest.raises(ArchitectureError):
        deepen(deep, 1)


def test_noisy_deepen_stays_valid_and_even():
    lat, bip = build_zpaf(1)
    st = init_state(make_architecture(lat, bip, 1, chi=4), seed=2, parity_even=True)
    deep = deepen(st, 3, eps=0.3, seed=1, parity_even=True)
    for name in deep.unitary_names():
        assert unitarity_error(deep.gate_matrix(name)) < 1e-12
    psi = materialize(deep)
    assert not np.allclose(psi, materialize(deepen(st, 3)))
    psi = psi.reshape((2,) * 9)
    np.testing.assert_allclose(psi, psi[(slice(None, None, -1),) * 9], atol=1e-13)


def test_deepen_lifts_lambda_floor():
    lat, bip = build_zpaf(1)
    st = init_state(make_architecture(lat, bip, 1, chi=4), seed=3)
    arrays = {k: v.copy() for k, v in st.arrays().items()}
    arrays["lam.1"][0] = 0.0
    st = SchmidtTNS(st.arch, _wrap(st.arch, arrays))
    deep = deepen(st, 2, lam_floor=0.1).arrays()
    for name in st.arch.lam_names:
        a = deep[name]
        assert a.min() >= 0.1 * a.max() - 1e-15
    np.testing.assert_array_equal(deepen(st, 2).arrays()["lam.1"], arrays["lam.1"])
