"""Operator algebra on truncated composite spaces."""

from __future__ import annotations

import math

import numpy as np
import pytest

from magsense.errors import (
    HermiticityError,
    SpaceMismatchError,
    TruncationError,
    UnknownModeError,
)
from magsense.spaces import (
    DensityMatrix,
    ModeSpace,
    Operator,
    build_mode_operators,
    check_truncation,
    coherent_state,
    compose_operator,
    expectation,
    expectation_real,
    fock_state,
    fock_truncation,
    ket_state,
    tail_population,
)


def test_two_level_ladder():
    space = ModeSpace(("q",), (2,))
    a, n = build_mode_operators(space, "q")
    assert np.array_equal(a.matrix, np.array([[0, 1], [0, 0]], dtype=complex))
    assert np.array_equal(n.matrix, np.diag([0.0, 1.0]).astype(complex))


def test_three_level_ladder_matrix_elements():
    space = ModeSpace(("m",), (3,))
    a, n = build_mode_operators(space, "m")
    assert a.matrix[1, 2] == pytest.approx(math.sqrt(2))
    assert a.matrix[0, 1] == pytest.approx(1.0)
    assert np.allclose(np.diag(n.matrix), [0, 1, 2])


def test_embedded_number_operator_spectrum():
    # independent construction: kron by hand, then eigendecomposition
    space = ModeSpace(("q", "m"), (2, 3))
    _, n_m = build_mode_operators(space, "m")
    local = np.diag([0.0, 1.0, 2.0])
    expected = np.kron(np.eye(2), local)
    assert np.allclose(n_m.matrix, expected)
    evals = np.sort(np.linalg.eigvalsh(n_m.matrix))
    assert np.allclose(evals, [0, 0, 1, 1, 2, 2])


def test_basis_index_order_leftmost_slowest():
    space = ModeSpace(("q", "m"), (2, 3))
    assert space.basis_index({"q": 0, "m": 2}) == 2
    assert space.basis_index({"q": 1, "m": 0}) == 3
    assert space.occupations(4) == {"q": 1, "m": 1}


def test_unknown_mode_label():
    space = ModeSpace(("q",), (2,))
    with pytest.raises(UnknownModeError):
        build_mode_operators(space, "c")


def test_compose_pauli_x():
    space = ModeSpace(("q",), (2,))
    a, _ = build_mode_operators(space, "q")
    x = compose_operator([(1.0, [a]), (1.0, [a.dag()])], hermitian=True)
    assert np.array_equal(x.matrix, np.array([[0, 1], [1, 0]], dtype=complex))


def test_compose_zero():
    space = ModeSpace(("q",), (2,))
    a, _ = build_mode_operators(space, "q")
    z = compose_operator([(0.0, [a])])
    assert np.all(z.matrix == 0)


def test_compose_cross_kerr_diagonal():
    chi = -0.41
    space = ModeSpace(("q", "m"), (2, 3))
    _, n_q = build_mode_operators(space, "q")
    _, n_m = build_mode_operators(space, "m")
    op = compose_operator([(chi, [n_q, n_m])], hermitian=True)
    expected = np.kron(np.diag([0.0, 1.0]), np.diag([0.0, 1.0, 2.0])) * chi
    assert np.allclose(op.matrix, expected)
    assert np.allclose(np.diag(op.matrix), [0, 0, 0, 0, chi, 2 * chi])


def test_compose_space_mismatch():
    a1, _ = build_mode_operators(ModeSpace(("q",), (2,)), "q")
    a2, _ = build_mode_operators(ModeSpace(("m",), (3,)), "m")
    with pytest.raises(SpaceMismatchError):
        compose_operator([(1.0, [a1]), (1.0, [a2])])


def test_compose_hermitian_flag():
    space = ModeSpace(("q",), (2,))
    a, _ = build_mode_operators(space, "q")
    with pytest.raises(HermiticityError):
        compose_operator([(1.0, [a])], hermitian=True)


def test_expectation_ground_number():
    space = ModeSpace(("m",), (4,))
    _, n = build_mode_operators(space, "m")
    rho = fock_state(space, {"m": 0})
    assert expectation(rho, n) == 0


def test_expectation_mixed_pauli_z():
    space = ModeSpace(("q",), (2,))
    rho = DensityMatrix(space, 0.5 * np.eye(2))
    z = Operator(space, np.diag([1.0, -1.0]).astype(complex))
    assert expectation_real(rho, z) == pytest.approx(0.0, abs=1e-15)


def test_expectation_space_mismatch():
    rho = fock_state(ModeSpace(("q",), (2,)), {"q": 0})
    _, n = build_mode_operators(ModeSpace(("m",), (3,)), "m")
    with pytest.raises(SpaceMismatchError):
        expectation(rho, n)


def test_coherent_state_mean_occupation():
    # oracle: truncated Poisson sum evaluated independently
    alpha = 1.0
    space = ModeSpace(("m",), (20,))
    rho = coherent_state(space, "m", alpha)
    _, n = build_mode_operators(space, "m")
    weights = np.array(
        [abs(alpha) ** (2 * k) / math.factorial(k) for k in range(20)]
    )
    expected = (np.arange(20) * weights).sum() / weights.sum()
    assert expectation_real(rho, n) == pytest.approx(expected, abs=1e-12)
    assert expectation_real(rho, n) == pytest.approx(1.0, abs=1e-6)


def test_density_matrix_validate():
    space = ModeSpace(("q",), (2,))
    rho = fock_state(space, {"q": 1})
    rho.validate()
    bad = DensityMatrix(space, np.diag([0.6, 0.6]).astype(complex))
    with pytest.raises(ValueError):
        bad.validate()


def test_ket_state_superposition():
    space = ModeSpace(("q",), (2,))
    rho = ket_state(space, {0: 1.0, 1: 1.0})
    assert rho.matrix[0, 1] == pytest.approx(0.5)
    rho.validate()


def test_fock_truncation_rule():
    assert fock_truncation(0.0) == 5
    assert fock_truncation(3.0) == math.ceil(3 + 5 * math.sqrt(3) + 5)
    assert fock_truncation(100.0) == 155


def test_tail_population_and_guard():
    space = ModeSpace(("q", "m"), (2, 4))
    top = fock_state(space, {"q": 1, "m": 3})
    assert tail_population(top, "m") == pytest.approx(1.0)
    with pytest.raises(TruncationError):
        check_truncation(top, "m")
    ok = fock_state(space, {"q": 1, "m": 0})
    check_truncation(ok, "m")


def test_coherent_state_tail_within_rule():
    n_mean = 3.0
    dim = fock_truncation(n_mean)
    space = ModeSpace(("m",), (dim,))
    rho = coherent_state(space, "m", math.sqrt(n_mean))
    assert tail_population(rho, "m") < 1e-6
