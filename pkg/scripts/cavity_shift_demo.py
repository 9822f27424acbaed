"""Demonstrate the cavity line shift per magnon.

The magnon-cavity cross-Kerr chi_mc shifts the cavity resonance by chi_mc per
magnon, exactly as chi_qm shifts the qubit line. The reference parameter set
carries chi_mc = 0 because no value was measured for the device; this script
sets a nonzero chi_mc, reads the cavity transition frequencies out of the
dispersive Hamiltonian ladder, and prints the shift next to the qubit-based
shift used by the sensing protocols.

Run:
    python3 scripts/cavity_shift_demo.py --chi-mc-khz 1.1 --max-magnons 6
"""

import argparse
import math
from dataclasses import replace

import numpy as np

from magsense.hamiltonians import dispersive_hamiltonian
from magsense.params import SystemParams
from magsense.spaces import ModeSpace

TWO_PI = 2.0 * math.pi


def cavity_transition(params: SystemParams, n_magnons: int, qubit_excited: int) -> float:
    """Cavity 0->1 transition frequency at fixed magnon and qubit occupation."""
    space = ModeSpace(("q", "c", "m"), (2, 2, n_magnons + 1))
    h = dispersive_hamiltonian(params, space)
    diag = np.real(np.diag(h.matrix))
    upper = space.basis_index({"q": qubit_excited, "c": 1, "m": n_magnons})
    lower = space.basis_index({"q": qubit_excited, "c": 0, "m": n_magnons})
    return diag[upper] - diag[lower]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--chi-mc-khz",
        type=float,
        default=1.1,
        help="magnon-cavity shift per magnon, kHz (default 1.1)",
    )
    parser.add_argument(
        "--max-magnons",
        type=int,
        default=6,
        help="largest magnon occupation to tabulate (default 6)",
    )
    args = parser.parse_args(argv)
    if args.max_magnons < 1:
        parser.error("--max-magnons must be >= 1")

    params = replace(
        SystemParams.reference(), chi_mc=-TWO_PI * 1e3 * args.chi_mc_khz
    )
    base = cavity_transition(params, 0, 0)
    print(f"cavity 0->1 transition at n_m = 0: {base / TWO_PI / 1e9:.6f} GHz")
    print(
        f"qubit-state pull chi_qc/2pi: "
        f"{(cavity_transition(params, 0, 1) - base) / TWO_PI / 1e6:.3f} MHz"
    )
    print()
    print("n_m  cavity shift (kHz)  qubit shift (kHz)")
    for n in range(args.max_magnons + 1):
        cavity_shift = cavity_transition(params, n, 0) - base
        qubit_shift = params.chi_qm * n
        print(
            f"{n:3d}  {cavity_shift / TWO_PI / 1e3:17.3f}  "
            f"{qubit_shift / TWO_PI / 1e3:16.3f}"
        )
    slope = (cavity_transition(params, args.max_magnons, 0) - base) / args.max_magnons
    print()
    print(
        f"shift per magnon: {slope / TWO_PI / 1e3:.3f} kHz "
        f"(configured chi_mc/2pi = {params.chi_mc / TWO_PI / 1e3:.3f} kHz)"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
