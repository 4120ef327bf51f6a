"""ZPAF generator, lattice files, bipartitions and Hamiltonians."""

import numpy as np
import pytest

from schmidt_tns.lattice import (
    ISY,
    SX,
    SZ,
    LatticeError,
    build_hamiltonian,
    build_zpaf,
    dump_lattice,
    has_cycle,
    load_lattice,
    magnetization,
    zpaf_fragment,
)


def test_single_cell_counts():
    lat, bip = build_zpaf(1)
    assert lat.n_sites == 9
    assert len(lat.edges) == 10
    assert bip.r_tilde == 4
    assert bip.part_a == (0, 1, 2, 3)
    assert has_cycle(lat, 5)


def test_two_cell_counts():
    lat, bip = build_zpaf(2)
    assert lat.n_sites == 18
    assert len(lat.edges) == 21
    inter = [e for e in lat.edges if e[0] // 9 != e[1] // 9]
    assert inter == [(8, 9)]
    assert bip.r_tilde == 8


def test_periodic_adds_wraparound_edge():
    lat, _ = build_zpaf(3, "periodic")
    assert len(lat.edges) == 3 * 10 + 3
    assert (0, 26) in {tuple(sorted(e)) for e in lat.edges}


def test_infinite_cell():
    lat, bip = build_zpaf(1, "infinite")
    assert lat.infinite and lat.cell_size == 9
    assert len(lat.edges) == 10
    assert lat.inter_cell_edges == ((8, 0),)
    assert lat.n_bonds() == 11
    assert (8, 9) in lat.cell_edges()
    assert bip.r_tilde == 4


def test_loader_two_sites():
    lat, bip = load_lattice("sites 2\nedge 0 1\npartA 0\n")
    assert bip.boundary_length == 1
    assert bip.r_tilde == 1


def test_loader_triangle_with_comments():
    text = "# triangle\nsites 3\nedge 0 1\nedge 1 2  # trailing\nedge 0 2\n\npartA 0\n"
    lat, bip = load_lattice(text)
    assert bip.boundary_length == 2
    assert bip.r_tilde == 1
    assert has_cycle(lat, 3)


def test_loader_reproduces_generator():
    lat, bip = build_zpaf(1)
    lat2, bip2 = load_lattice(dump_lattice(lat, bip))
    assert lat2 == lat
    assert bip2 == bip


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("sites 2\nedge 0 1\nedge 1 0\npartA 0\n", "duplicate"),
        ("sites 2\nedge 0 0\npartA 0\n", "self-loop"),
        ("sites 2\nedge 0 5\npartA 0\n", "out of range"),
        ("sites 2\nedge 0 x\n", "line 2"),
        ("sites 2\nvertex 0\n", "line 2"),
        ("edge 0 1\n", "sites"),
        ("sites 2\nedge 0 1\npartA 0\npartA 1\n", "nonempty"),
    ],
)
def test_loader_errors(text, fragment):
    with pytest.raises(LatticeError, match=fragment):
        load_lattice(text)


def test_fragment_is_induced_subgraph():
    lat, bip = zpaf_fragment(8)
    assert lat.n_sites == 8
    assert all(j < 8 for _, j in lat.edges)
    assert len(lat.edges) == 8
    assert bip.part_a == (0, 1, 2, 3)
    lat10, _ = zpaf_fragment(10)
    assert (8, 9) in lat10.edges


def _one_edge(kind, **params):
    lat, _ = load_lattice("sites 2\nedge 0 1\npartA 0\n")
    H = build_hamiltonian(lat, kind, params)
    m = sum(mat for _, mat in H.terms())
    assert np.allclose(m, m.T)
    return np.linalg.eigvalsh(m)


def test_heisenberg_bond_spectrum():
    np.testing.assert_allclose(_one_edge("heisenberg"), [-0.75, 0.25, 0.25, 0.25], atol=1e-14)


def test_xy_bond_spectrum():
    np.testing.assert_allclose(_one_edge("xy"), [-0.5, 0.0, 0.0, 0.5], atol=1e-14)


def test_tim_without_field():
    w = _one_edge("tim", h_x=0.0)
    assert w[0] == pytest.approx(-0.25)


def test_tim_field_terms():
    lat, _ = build_zpaf(1)
    H = build_hamiltonian(lat, "tim", {"h_x": 0.3})
    ones = [m for s, m in H.terms() if len(s) == 1]
    assert len(ones) == 9
    np.testing.assert_allclose(ones[0], -0.3 * SX)
    with pytest.raises(ValueError):
        build_hamiltonian(lat, "tim", {"h_x": -1.0})
    with pytest.raises(ValueError):
        build_hamiltonian(lat, "tim")
    with pytest.raises(ValueError):
        build_hamiltonian(lat, "potts")


def test_spin_operators():
    # S^y S^y written through the real matrix i S^y
    sy = np.array([[0, -0.5j], [0.5j, 0]])
    np.testing.assert_allclose(np.kron(sy, sy).real, -np.kron(ISY, ISY))
    assert np.allclose(SZ @ SZ, 0.25 * np.eye(2))


def test_infinite_hamiltonian_has_cell_terms():
    lat, _ = build_zpaf(1, "infinite")
    H = build_hamiltonian(lat, "heisenberg")
    assert H.n_bonds == 11
    assert ((8, 9) in [s for s, _ in H.terms()])


def test_magnetization():
    assert magnetization([0.5, 0.5, -0.5, 0.5]) == pytest.approx(0.25)
    assert magnetization([-0.5, -0.5]) == pytest.approx(0.5)


def test_cut_length_linear_in_cells():
    lengths = [build_zpaf(c)[1].boundary_length for c in range(1, 6)]
    assert len(set(np.diff(lengths))) == 1
    assert lengths[0] > 0
    for c in range(1, 4):
        lat, _ = build_zpaf(c)
        assert has_cycle(lat, 5)
