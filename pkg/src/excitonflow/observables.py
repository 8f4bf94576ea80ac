"""Scalar observables computed from propagation trajectories.

Efficiency is the final reaction-center population. The trapping time is the
first moment of the RC population growth rate,

    <t> = integral_0^tmax  t * d/dt p_RC(t) dt,

evaluated up to the detected stop time and, following the printed definition,
NOT normalized by the efficiency (a normalized variant is available behind a
flag). Two discretizations are provided: centered differences plus trapezoid
quadrature, and the integration-by-parts form tmax*p_RC(tmax) - int p_RC dt,
which avoids differentiating the sampled signal; they must agree closely and
the second serves as a cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class Trajectory:
    """Uniformly sampled populations of one propagation run.

    ``populations[i]`` holds the real diagonal of the density matrix at
    ``times_fs[i]`` over the full basis. ``final_rho`` is the density matrix
    at the last sample. ``stop_reason`` is 'residual', 't_end' or None.
    """

    times_fs: np.ndarray
    populations: np.ndarray
    site_indices: tuple[int, ...]
    ground_index: Optional[int]
    rc_index: Optional[int]
    stop_reason: Optional[str]
    final_rho: np.ndarray
    residual_threshold: Optional[float] = None
    matrices: Optional[np.ndarray] = None

    def site_populations(self) -> np.ndarray:
        """(n_samples, n_sites) populations of the pigment sites."""
        return self.populations[:, list(self.site_indices)]

    def system_population(self) -> np.ndarray:
        """Total population remaining in the site manifold per sample."""
        return self.site_populations().sum(axis=1)

    def rc_population(self) -> np.ndarray:
        if self.rc_index is None:
            return np.zeros(len(self.times_fs))
        return self.populations[:, self.rc_index]

    def ground_population(self) -> np.ndarray:
        if self.ground_index is None:
            return np.zeros(len(self.times_fs))
        return self.populations[:, self.ground_index]

    def trace(self) -> np.ndarray:
        return self.populations.sum(axis=1)


def _warn_if_unresolved(traj: Trajectory) -> None:
    threshold = traj.residual_threshold if traj.residual_threshold is not None else 1e-5
    if traj.system_population()[-1] > threshold:
        warnings.warn(
            "run did not reach the residual threshold; efficiency and trapping "
            "time are lower bounds", stacklevel=3)


def efficiency(traj: Trajectory) -> float:
    """Final reaction-center population.

    For residual-policy runs the population bookkeeping closes:
    efficiency + final ground population = 1 up to the residual threshold.
    Warns when the run stopped before draining the site manifold.
    """
    _warn_if_unresolved(traj)
    return float(traj.rc_population()[-1])


def trapping_time(traj: Trajectory, method: str = "derivative",
                  normalized: bool = False) -> float:
    """First moment of the RC population growth rate, in ps.

    method='derivative' uses centered differences and trapezoid quadrature;
    method='parts' uses the integration-by-parts form (no differentiation).
    ``normalized=True`` divides by the final RC population; the default
    follows the unnormalized definition.
    """
    _warn_if_unresolved(traj)
    t = traj.times_fs
    p = traj.rc_population()
    if len(t) < 3:
        raise ValueError("need at least three samples")
    if method == "derivative":
        dp = np.gradient(p, t)
        value_fs = np.trapezoid(t * dp, t)
    elif method == "parts":
        value_fs = t[-1] * p[-1] - np.trapezoid(p, t)
    else:
        raise ValueError("method must be 'derivative' or 'parts'")
    if normalized:
        if p[-1] <= 0:
            raise ValueError("cannot normalize: no trapped population")
        value_fs /= p[-1]
    return float(value_fs) / 1000.0


def thermal_deviation(stationary: np.ndarray, gibbs: np.ndarray) -> float:
    """Largest absolute site-population difference between two site-block states."""
    a = np.real(np.diagonal(np.asarray(stationary)))
    b = np.real(np.diagonal(np.asarray(gibbs)))
    if a.shape != b.shape:
        raise ValueError("states must have the same dimension")
    return float(np.max(np.abs(a - b)))
