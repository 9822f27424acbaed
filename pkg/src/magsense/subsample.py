"""Time-budget subsampling of shot-resolved sweep datasets.

A dataset recorded with N shots per point can stand in for any shorter
acquisition: drawing m < N shots per point without replacement reproduces
the statistics of an experiment that spent m * shot_duration per point.
Repeating the draw with different seeds turns one long run into an ensemble
of budget-limited runs, which is how per-root-hertz spreads of fitted
quantities are estimated here.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .errors import BudgetError, EstimationError
from .readout import ShotRecord
from .sweep import SweepDataset, point_seed

SUBSAMPLE_TAG = "subsample"


def shots_per_point(dataset: SweepDataset, budget: float) -> int:
    """Shots per grid point affordable within ``budget`` seconds."""
    if budget <= 0:
        raise BudgetError("time budget must be > 0")
    n_points = int(np.prod(dataset.grid_shape))
    exact = budget / (n_points * dataset.shot_duration)
    # guard against x.9999... from the division when the budget is an
    # exact multiple of the per-shot cost
    return math.floor(exact * (1.0 + 1e-12) + 1e-9)


def subsample_time_budget(
    dataset: SweepDataset, budget: float, seed: int = 0
) -> SweepDataset:
    """Restrict a dataset to the shots affordable in ``budget`` seconds.

    The budget is split evenly over the sweep grid; each point keeps a
    uniform without-replacement draw of its recorded shots and the excited
    fraction and its smoothed binomial error are recomputed from the draw.
    Draws use per-point seed streams, so the result does not depend on
    evaluation order.

    Parameters
    ----------
    dataset : SweepDataset
        Must retain raw shots and record the readout threshold in
        ``meta["readout_threshold"]``.
    budget : float
        Total wall time to emulate, seconds.
    seed : int
        Master seed for the subsample draws.

    Returns
    -------
    SweepDataset
        Same grid with reduced per-point shot counts. Returned unchanged
        when the budget covers all recorded shots.

    Raises
    ------
    EstimationError
        If the dataset has no raw shots or no recorded threshold.
    BudgetError
        If the budget affords less than one shot per point.
    """
    if dataset.shots is None:
        raise EstimationError("time-budget subsampling needs retained raw shots")
    threshold = dataset.meta.get("readout_threshold")
    if threshold is None:
        raise EstimationError(
            "dataset meta lacks 'readout_threshold'; cannot re-threshold shots"
        )
    n_keep = shots_per_point(dataset, budget)
    if n_keep < 1:
        raise BudgetError(
            f"budget {budget:g} s affords no shots on a "
            f"{int(np.prod(dataset.grid_shape))}-point grid"
        )
    n_recorded = dataset.shots.shape[-1]
    if n_keep >= n_recorded:
        return dataset
    flat_shots = dataset.shots.reshape(-1, n_recorded)
    n_points = flat_shots.shape[0]
    p_e = np.zeros(n_points)
    stderr = np.zeros(n_points)
    kept = np.zeros((n_points, n_keep))
    for idx in range(n_points):
        rng = np.random.default_rng(point_seed(seed, SUBSAMPLE_TAG, idx))
        pick = rng.choice(n_recorded, size=n_keep, replace=False)
        record = ShotRecord(
            coordinates={}, values=flat_shots[idx][pick], threshold=float(threshold)
        )
        p_e[idx] = record.excited_fraction()
        stderr[idx] = record.excited_stderr()
        kept[idx] = record.values
    shape = dataset.grid_shape
    return replace(
        dataset,
        p_e=p_e.reshape(shape),
        stderr=stderr.reshape(shape),
        n_shots=np.full(shape, n_keep, dtype=int),
        shots=kept.reshape(shape + (n_keep,)),
    )
