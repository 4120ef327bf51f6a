"""Labeled tensors, network contraction, projections and gradients."""

import numpy as np
import pytest
import torch

from schmidt_tns.tensor_core import (
    ContractionError,
    Parameter,
    Tensor,
    contract,
    contract_network,
    evaluate_with_gradients,
    network_expression,
    project_to_unitary,
    safe_divide,
    superidentity,
    svd_split,
    unitarity_error,
)


def test_tensor_is_read_only_and_finite():
    t = Tensor(np.ones((2, 3)), ("a", "b"))
    with pytest.raises(ValueError):
        t.data[0, 0] = 2.0
    with pytest.raises(ValueError):
        Tensor(np.array([1.0, np.nan]), ("a",))
    with pytest.raises(ValueError):
        Tensor(np.ones((2, 2)), ("a", "a"))


def test_contract_matches_explicit_loops(rng):
    a = Tensor(rng.standard_normal((2, 3, 4)), ("i", "j", "k"))
    b = Tensor(rng.standard_normal((4, 3, 5)), ("k2", "j2", "l"))
    c = contract(a, b, [("j", "j2"), ("k", "k2")])
    assert c.axes == ("i", "l")
    ref = np.zeros((2, 5))
    for i in range(2):
        for l in range(5):
            for j in range(3):
                for k in range(4):
                    ref[i, l] += a.data[i, j, k] * b.data[k, j, l]
    np.testing.assert_allclose(c.data, ref, rtol=1e-12, atol=1e-12)


def test_contract_rejects_bad_pairs(rng):
    a = Tensor(rng.standard_normal((2, 3)), ("i", "j"))
    b = Tensor(rng.standard_normal((4, 2)), ("k", "i"))
    with pytest.raises(ContractionError):
        contract(a, b, [("j", "k")])
    with pytest.raises(ContractionError):
        contract(a, b, [("j", "j")])
    with pytest.raises(ContractionError):
        contract(a, Tensor(np.ones((3, 2)), ("j", "i")), [("j", "j")])


def test_hyperedge_equals_materialized_delta(rng):
    # sum_a x_a y_a z_a written once with a shared label and once through delta_abc
    for d in (2, 3, 8):
        x, y, z = (rng.standard_normal((d, 2)) for _ in range(3))
        hyper = contract_network([(x, "ap"), (y, "aq"), (z, "ar")], output="pqr")
        delta = contract_network(
            [(superidentity(d), "abc"), (x, "ap"), (y, "bq"), (z, "cr")], output="pqr"
        )
        np.testing.assert_allclose(hyper, delta, rtol=1e-12, atol=1e-13)


def test_network_memory_cap():
    with pytest.raises(ContractionError):
        network_expression([["a", "b"], ["c", "d"]], [(64, 64), (64, 64)], ("a", "b", "c", "d"), 1000)


def test_network_dimension_mismatch():
    with pytest.raises(ContractionError):
        network_expression([["a", "b"], ["b", "c"]], [(2, 3), (4, 2)])


def test_svd_split_reconstructs(rng):
    t = Tensor(rng.standard_normal((2, 3, 4, 2)), ("a", "b", "c", "d"))
    P, s, Q = svd_split(t, ("a", "c"))
    assert np.all(np.diff(s) <= 0)
    back = contract(Tensor(P.data * s, P.axes), Q, [("bond", "bond")])
    np.testing.assert_allclose(back.transpose(t.axes).data, t.data, atol=1e-12)


def test_polar_projection_is_nearest_orthogonal(rng):
    m = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    q = project_to_unitary(m)
    assert unitarity_error(q) < 1e-13
    # polar factor: q^T m is symmetric positive definite
    h = q.T @ m
    np.testing.assert_allclose(h, h.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(0.5 * (h + h.T)) > 0)
    # closer than a few random orthogonal competitors
    for _ in range(20):
        o, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        assert np.linalg.norm(m - q) <= np.linalg.norm(m - o) + 1e-12


def test_projection_of_labelled_tensor(rng):
    t = Tensor(rng.standard_normal((2, 2, 2, 2)), ("o0", "i0", "o1", "i1"))
    q = project_to_unitary(t, ("o0", "o1"))
    assert q.axes == t.axes
    assert unitarity_error(q, ("o0", "o1")) < 1e-13


def test_projection_rejects_singular_and_wide():
    with pytest.raises(ValueError):
        project_to_unitary(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        project_to_unitary(np.ones((2, 4)))


def test_parameter_kinds():
    t = Tensor(np.array([-2.0, 3.0]), ("r",))
    np.testing.assert_array_equal(Parameter(t, "squared-positive").effective(), [4.0, 9.0])
    with pytest.raises(ValueError):
        Parameter(t, "banana")
    with pytest.raises(ValueError):
        Parameter(t, "unitary")


def test_safe_divide():
    assert safe_divide(3.0, 2.0) == 1.5
    with pytest.raises(ZeroDivisionError):
        safe_divide(1.0, 1e-301)


def test_gradients_match_finite_differences(rng):
    a0 = rng.standard_normal((3, 3))
    b0 = rng.standard_normal(3)

    def program(p):
        return torch.einsum("ij,j,i->", p["a"], p["b"], p["b"]) ** 2

    val, grads = evaluate_with_gradients(program, {"a": a0, "b": b0, "unused": np.ones(2)})
    f = lambda a, b: float((b @ a @ b) ** 2)  # noqa: E731
    assert val == pytest.approx(f(a0, b0))
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (f(a0, b0 + e) - f(a0, b0 - e)) / (2 * h)
        assert grads["b"][i] == pytest.approx(fd, rel=1e-6)
    np.testing.assert_array_equal(grads["unused"], 0.0)
