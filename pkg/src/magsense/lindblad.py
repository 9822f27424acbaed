"""Fixed-step RK4 integration of the Lindblad master equation.

drho/dt = -i[H, rho] + sum_k gamma_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2)

The engine is frame-agnostic: callers pass Hamiltonians already written in
whatever rotating frame keeps the fast carriers out of the step budget. Pure
dephasing at rate gamma_phi enters as a collapse sqrt(gamma_phi/2)*sigma_z so
off-diagonals decay as exp(-gamma_phi t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrationError
from .spaces import DensityMatrix, Operator, check_truncation

MAX_TOTAL_DIM = 10_000
STIFFNESS_BUDGET = 0.1
TRACE_TOL_PER_UNIT = 1e-9


@dataclass
class CollapseTerm:
    """Collapse operator with its angular rate (1/s)."""

    operator: Operator
    rate: float

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError("collapse rate must be >= 0")


@dataclass
class DriveTerm:
    """Time-dependent Hamiltonian term env(t) * cos(omega t + phase) * O.

    The coupling operator must be Hermitian (supply O + O^dag for a ladder
    drive). ``envelope`` is either a constant amplitude in rad/s, a
    piecewise-constant ``(times, values)`` pair (left-closed segments, constant
    extension at the ends), or a callable of t.
    """

    operator: Operator
    envelope: float | tuple[np.ndarray, np.ndarray] | Callable[[float], float]
    carrier: float = 0.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        self.operator.require_hermitian("drive coupling")

    def _envelope_at(self, t: float) -> float:
        env = self.envelope
        if callable(env):
            val = float(env(t))
        elif isinstance(env, tuple):
            times, values = env
            idx = int(np.searchsorted(times, t, side="right")) - 1
            idx = min(max(idx, 0), len(values) - 1)
            val = float(values[idx])
        else:
            val = float(env)
        if not np.isfinite(val):
            raise IntegrationError(f"drive envelope not finite at t={t}")
        return val

    def amplitude(self, t: float) -> float:
        return self._envelope_at(t) * np.cos(self.carrier * t + self.phase)

    def envelope_bound(self, tspan: tuple[float, float]) -> float:
        """Coarse bound on |envelope| over the window, for the step-size guard."""
        env = self.envelope
        if isinstance(env, tuple):
            return float(np.abs(np.asarray(env[1])).max())
        samples = np.linspace(tspan[0], tspan[1], 33)
        return max(abs(self._envelope_at(t)) for t in samples)


@dataclass
class Trajectory:
    """Time series of recorded expectation values (and optionally states)."""

    times: np.ndarray
    expectations: np.ndarray  # shape (n_observables, n_times), complex
    states: list[DensityMatrix] = field(default_factory=list)
    final_state: DensityMatrix | None = None
    max_trace_drift: float = 0.0

    def expect(self, index: int) -> np.ndarray:
        return self.expectations[index]


def _hamiltonian_at(
    h0: np.ndarray | None, drives: Sequence[DriveTerm], t: float
) -> np.ndarray:
    h = None
    if h0 is not None:
        h = h0
    for d in drives:
        term = d.amplitude(t) * d.operator.matrix
        h = term if h is None else h + term
    if h is None:
        raise ValueError("evolution needs a Hamiltonian or at least one drive")
    return h


def _rhs(
    h: np.ndarray,
    rho: np.ndarray,
    collapse_ops: list[tuple[np.ndarray, np.ndarray, np.ndarray, float]],
) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for L, Ld, LdL, rate in collapse_ops:
        out += rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def _stiffness_bound(
    h0: np.ndarray | None,
    drives: Sequence[DriveTerm],
    collapses: Sequence[CollapseTerm],
    tspan: tuple[float, float],
) -> float:
    """Upper bound on the fastest rate in the rotated frame.

    Max row sum bounds the spectral radius of H; drive carriers and
    gamma*||L^dag L|| for each collapse are folded in as well.
    """
    acc = np.abs(h0) if h0 is not None else None
    for d in drives:
        term = d.envelope_bound(tspan) * np.abs(d.operator.matrix)
        acc = term if acc is None else acc + term
    bound = float(acc.sum(axis=1).max()) if acc is not None else 0.0
    carrier = max((abs(d.carrier) for d in drives), default=0.0)
    bound = max(bound, carrier)
    for c in collapses:
        LdL = c.operator.matrix.conj().T @ c.operator.matrix
        bound = max(bound, c.rate * float(np.abs(LdL).sum(axis=1).max()))
    return bound


def evolve_lindblad(
    rho0: DensityMatrix,
    hamiltonian: Operator | None,
    collapses: Sequence[CollapseTerm] = (),
    tspan: tuple[float, float] = (0.0, 0.0),
    dt: float = 0.0,
    observables: Sequence[Operator] = (),
    drives: Sequence[DriveTerm] = (),
    record_times: np.ndarray | None = None,
    record_states: bool = False,
    truncation_checks: Sequence[tuple[str, float]] = (),
) -> Trajectory:
    """Integrate the master equation with fixed-step RK4.

    Parameters
    ----------
    rho0 : DensityMatrix
        Initial state.
    hamiltonian : Operator or None
        Static part of H (rad/s). Time dependence goes into ``drives``.
    collapses : sequence of CollapseTerm
    tspan : (t0, t1)
        Integration window in seconds.
    dt : float
        Fixed step; must satisfy dt * (fastest rate) <= 0.1.
    observables : sequence of Operator
        Expectations recorded at every record time (complex values).
    record_times : array, optional
        Subset of the step grid to record; defaults to every step. Times must
        lie on the step grid.
    truncation_checks : sequence of (mode, tol)
        Bosonic tail guards applied to every recorded state.

    Returns
    -------
    Trajectory
    """
    t0, t1 = tspan
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if t1 < t0:
        raise ValueError("tspan must be increasing")
    if rho0.space.dim > MAX_TOTAL_DIM:
        raise ValueError(f"total dimension {rho0.space.dim} beyond supported ~{MAX_TOTAL_DIM}")

    h0 = None
    if hamiltonian is not None:
        hamiltonian.require_hermitian("Hamiltonian")
        if hamiltonian.space != rho0.space:
            raise ValueError("Hamiltonian space does not match the state")
        h0 = hamiltonian.matrix

    bound = _stiffness_bound(h0, drives, collapses, (t0, t1))
    if dt * bound > STIFFNESS_BUDGET:
        raise IntegrationError(
            f"dt={dt:.3e} too coarse: dt*max_rate = {dt * bound:.3f} > {STIFFNESS_BUDGET}"
        )

    n_steps = int(round((t1 - t0) / dt)) if t1 > t0 else 0
    if t1 > t0 and abs(t0 + n_steps * dt - t1) > 1e-9 * max(abs(t1), dt):
        raise ValueError("tspan length must be an integer multiple of dt")
    step_times = t0 + dt * np.arange(n_steps + 1)

    if record_times is None:
        record_idx = np.arange(n_steps + 1)
    else:
        record_times = np.asarray(record_times, dtype=float)
        if record_times.size == 0:
            raise ValueError("record_times must not be empty")
        if np.any(np.diff(record_times) <= 0):
            raise ValueError("record_times must be strictly increasing")
        record_idx = np.round((record_times - t0) / dt).astype(int)
        aligned = np.abs(t0 + record_idx * dt - record_times) <= 1e-6 * dt + 1e-15
        if not np.all(aligned) or record_idx.min() < 0 or record_idx.max() > n_steps:
            raise ValueError("record_times must lie on the integration step grid")
    record_set = {int(i) for i in record_idx}

    collapse_ops = []
    for c in collapses:
        if c.operator.space != rho0.space:
            raise ValueError("collapse operator space does not match the state")
        L = c.operator.matrix
        Ld = L.conj().T
        collapse_ops.append((L, Ld, Ld @ L, c.rate))
    obs_mats = []
    for op in observables:
        if op.space != rho0.space:
            raise ValueError("observable space does not match the state")
        obs_mats.append(op.matrix)

    max_rate = max([c.rate for c in collapses], default=0.0)
    rho = rho0.matrix.copy()
    n_rec = len(record_set)
    rec_times = np.empty(n_rec)
    rec_values = np.empty((len(obs_mats), n_rec), dtype=complex)
    states: list[DensityMatrix] = []
    max_drift = 0.0
    rec_pos = 0

    def record(step: int) -> None:
        nonlocal rec_pos, max_drift
        t = step_times[step]
        drift = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
        max_drift = max(max_drift, drift)
        elapsed = t - t0
        tol = TRACE_TOL_PER_UNIT * (1.0 + elapsed * max(max_rate, bound))
        if drift > tol:
            raise IntegrationError(
                f"trace drift {drift:.3e} at t={t:.3e} beyond tolerance {tol:.3e} "
                f"(max drift so far {max_drift:.3e})"
            )
        rec_times[rec_pos] = t
        for k, m in enumerate(obs_mats):
            rec_values[k, rec_pos] = np.trace(m @ rho)
        state = DensityMatrix(rho0.space, rho.copy())
        for mode, tol_tail in truncation_checks:
            check_truncation(state, mode, tol_tail)
        if record_states:
            states.append(state)
        rec_pos += 1

    time_dependent = bool(drives)
    if not time_dependent:
        h_static = _hamiltonian_at(h0, (), 0.0) if h0 is not None else None
        if h_static is None:
            h_static = np.zeros_like(rho)

    if 0 in record_set:
        record(0)
    for step in range(n_steps):
        t = step_times[step]
        if time_dependent:
            h_a = _hamiltonian_at(h0, drives, t)
            h_b = _hamiltonian_at(h0, drives, t + 0.5 * dt)
            h_c = _hamiltonian_at(h0, drives, t + dt)
        else:
            h_a = h_b = h_c = h_static
        k1 = _rhs(h_a, rho, collapse_ops)
        k2 = _rhs(h_b, rho + 0.5 * dt * k1, collapse_ops)
        k3 = _rhs(h_b, rho + 0.5 * dt * k2, collapse_ops)
        k4 = _rhs(h_c, rho + dt * k3, collapse_ops)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) in record_set:
            record(step + 1)

    final = DensityMatrix(rho0.space, rho.copy())
    return Trajectory(
        times=rec_times,
        expectations=rec_values,
        states=states,
        final_state=final,
        max_trace_drift=max_drift,
    )
