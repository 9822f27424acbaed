"""Hamiltonian builders for the coupled qubit-cavity-magnon system.

Three builders cover the models in use: the lab-frame coupled Hamiltonian, its
dispersive (cross-Kerr) form, and the parametrically activated qubit-magnon
conversion in the pump rotating frame. Mode labels are fixed as "q" (qubit),
"c" (cavity), "m" (magnon).
"""

from __future__ import annotations

import math

from .errors import ValidityError
from .params import SystemParams
from .spaces import ModeSpace, Operator, build_mode_operators, compose_operator


def full_hamiltonian(params: SystemParams, space: ModeSpace) -> Operator:
    """Coupled three-mode Hamiltonian with beam-splitter couplings.

    H = omega_c c^dag c + omega_m m^dag m + omega_q q^dag q
        + (alpha/2)(q^dag + q)^2
        + g_mc (m^dag c + m c^dag) + g_qc (q^dag c + q c^dag)

    A nonzero alpha needs >= 3 qubit levels to be meaningful; a two-level
    qubit is accepted when alpha = 0 (harmonic limit).
    """
    for label in ("q", "c", "m"):
        space.mode_index(label)
    if len(space.labels) != 3:
        raise ValueError("full Hamiltonian needs exactly the three modes q, c, m")
    if params.alpha != 0 and space.mode_dim("q") < 3:
        raise ValueError("qubit mode needs >= 3 levels for the anharmonic term")
    for name in ("omega_c", "omega_m", "omega_q", "alpha", "g_qc", "g_mc"):
        if not math.isfinite(getattr(params, name)):
            raise ValueError(f"non-finite parameter {name}")

    q, n_q = build_mode_operators(space, "q")
    c, n_c = build_mode_operators(space, "c")
    m, n_m = build_mode_operators(space, "m")
    x_q = q + q.dag()
    terms = [
        (params.omega_c, [n_c]),
        (params.omega_m, [n_m]),
        (params.omega_q, [n_q]),
        (0.5 * params.alpha, [x_q, x_q]),
        (params.g_mc, [m.dag(), c]),
        (params.g_mc, [m, c.dag()]),
        (params.g_qc, [q.dag(), c]),
        (params.g_qc, [q, c.dag()]),
    ]
    return compose_operator(terms, hermitian=True)


def dispersive_hamiltonian(params: SystemParams, space: ModeSpace) -> Operator:
    """Cross-Kerr Hamiltonian, diagonal in the number basis.

    H = omega_c c^dag c + omega_m m^dag m + omega_q q^dag q
        + (alpha/2)(q^dag q)^2
        + chi_qc q^dag q c^dag c + chi_qm q^dag q m^dag m
        + chi_mc m^dag m c^dag c

    Terms are included for the modes present in ``space`` (protocol
    simulations typically carry only q and m). For a two-level qubit the
    anharmonic term is dropped: it would only offset the 0-1 transition, which
    is defined to sit at omega_q.
    """
    params.dispersive_guard()
    space.mode_index("q")
    _, n_q = build_mode_operators(space, "q")
    terms = [(params.omega_q, [n_q])]
    if space.mode_dim("q") >= 3:
        terms.append((0.5 * params.alpha, [n_q, n_q]))
    has_c = "c" in space.labels
    has_m = "m" in space.labels
    if has_c:
        _, n_c = build_mode_operators(space, "c")
        terms.append((params.omega_c, [n_c]))
        terms.append((params.chi_qc, [n_q, n_c]))
    if has_m:
        _, n_m = build_mode_operators(space, "m")
        terms.append((params.omega_m, [n_m]))
        terms.append((params.chi_qm, [n_q, n_m]))
    if has_c and has_m:
        terms.append((params.chi_mc, [n_m, n_c]))
    return compose_operator(terms, hermitian=True)


def parametric_interaction(omega_qm: float, delta: float, space: ModeSpace) -> Operator:
    """Pump-activated conversion in the frame rotating with the pump.

    H = (omega_qm/2)(q^dag m + q m^dag) + delta m^dag m

    The detuning from the conversion resonance is assigned to the magnon mode;
    only |delta| enters measurable decay rates.
    """
    q, _ = build_mode_operators(space, "q")
    m, n_m = build_mode_operators(space, "m")
    terms = [
        (0.5 * omega_qm, [q.dag(), m]),
        (0.5 * omega_qm, [q, m.dag()]),
        (delta, [n_m]),
    ]
    return compose_operator(terms, hermitian=True)


def derived_chi_qm(g_mc: float, delta_mc: float, chi_qc: float) -> float:
    """Qubit-magnon shift implied by the cavity-mediated cascade.

    chi_qm = (g_mc/delta_mc)^2 * chi_qc
    """
    if delta_mc == 0:
        raise ValidityError("magnon-cavity detuning must be nonzero")
    return (g_mc / delta_mc) ** 2 * chi_qc
