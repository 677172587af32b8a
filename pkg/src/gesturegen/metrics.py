"""Objective motion metrics on 3-D joint trajectories.

Trajectories are (T, J, 3) arrays in cm at 20 FPS (forward-kinematics
output). Velocity, acceleration, and jerk are successive first differences
scaled by the frame rate; reported acceleration/jerk are the mean Euclidean
magnitudes over frames and joints. RMSE pools frames, joints, and axes
jointly: one grand mean of squared coordinate differences before the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, TooShortError
from .features import FRAME_RATE


def _as_trajectory(tr, what: str) -> np.ndarray:
    tr = np.asarray(tr, dtype=np.float64)
    if tr.ndim != 3 or tr.shape[2] != 3:
        raise InvalidInputError(f"{what} must be (T, J, 3), got {tr.shape}")
    if not np.all(np.isfinite(tr)):
        raise InvalidInputError(f"{what} contains non-finite values")
    return tr


def motion_statistics(trajectory, fps: float = FRAME_RATE) -> tuple[float, float]:
    """Mean acceleration (cm/s^2) and jerk (cm/s^3) magnitudes of a trajectory."""
    tr = _as_trajectory(trajectory, "trajectory")
    if tr.shape[0] < 4:
        raise TooShortError(f"need at least 4 frames for jerk, got {tr.shape[0]}")
    velocity = np.diff(tr, axis=0) * fps
    acceleration = np.diff(velocity, axis=0) * fps
    jerk = np.diff(acceleration, axis=0) * fps
    acc_value = float(np.linalg.norm(acceleration, axis=2).mean())
    jerk_value = float(np.linalg.norm(jerk, axis=2).mean())
    return acc_value, jerk_value


def rmse(generated, reference) -> float:
    """Root of the grand mean of squared coordinate differences, in cm."""
    gen = _as_trajectory(generated, "generated trajectory")
    ref = _as_trajectory(reference, "reference trajectory")
    if gen.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: {gen.shape} vs {ref.shape}")
    return float(np.sqrt(np.mean((gen - ref) ** 2)))


@dataclass
class MetricsReport:
    """Mean +- population std of acceleration, jerk, and RMSE over samples."""

    acc_mean: float
    acc_std: float
    jerk_mean: float
    jerk_std: float
    rmse_mean: float
    rmse_std: float
    n_samples: int

    CSV_HEADER = (
        "variant", "acc_mean", "acc_std", "jerk_mean", "jerk_std",
        "rmse_mean", "rmse_std",
    )

    def csv_row(self, variant: str):
        return (
            variant,
            f"{self.acc_mean:.6g}", f"{self.acc_std:.6g}",
            f"{self.jerk_mean:.6g}", f"{self.jerk_std:.6g}",
            f"{self.rmse_mean:.6g}", f"{self.rmse_std:.6g}",
        )

    def __str__(self) -> str:
        return (
            f"acc {self.acc_mean:.2f} +- {self.acc_std:.2f} cm/s^2, "
            f"jerk {self.jerk_mean:.2f} +- {self.jerk_std:.2f} cm/s^3, "
            f"rmse {self.rmse_mean:.3f} +- {self.rmse_std:.3f} cm "
            f"({self.n_samples} samples)"
        )


def aggregate_samples(samples) -> MetricsReport:
    """Fold per-sample (acceleration, jerk, rmse) triples into a report."""
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise InvalidInputError("need a non-empty list of (acc, jerk, rmse) triples")
    means = arr.mean(axis=0)
    stds = arr.std(axis=0)  # population std
    return MetricsReport(
        acc_mean=means[0], acc_std=stds[0],
        jerk_mean=means[1], jerk_std=stds[1],
        rmse_mean=means[2], rmse_std=stds[2],
        n_samples=arr.shape[0],
    )
