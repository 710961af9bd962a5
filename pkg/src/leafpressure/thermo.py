"""Weighted leaf integrals and pressure as their exponential growth rate."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import errors
from .dynamics import apply, evaluate_potential
from .kernels import pairwise_sum
from .leaf import DEFAULT_DELTA, DEFAULT_MAX_POINTS, evolve, sample_disk

DEFAULT_WINDOW = 6
OSCILLATION_TOL = 0.05


def logsumexp(a):
    """``log(sum(exp(a)))`` with a fixed-shape pairwise reduction."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise errors.EmptyCloud("nothing to sum")
    m = float(np.max(a))
    if not np.isfinite(m):
        return m
    return m + math.log(pairwise_sum(np.exp(a - m)))


def log_integrand(cloud, potential_index=None):
    """Per-point ``log w_i + S_nG(y_i) - S_nPhi(y_i)`` for the base-disk quadrature."""
    a = np.log(cloud.weights) + cloud.log_jacobians
    if potential_index is not None:
        a = a + cloud.birkhoff[:, potential_index]
    return a


def log_partition(cloud, potential_index=None):
    """``log Z_n`` for the cloud's time ``n``; ``potential_index=None`` means ``G = 0``."""
    if len(cloud) == 0:
        raise errors.EmptyCloud("cloud has no points")
    return logsumexp(log_integrand(cloud, potential_index))


def log_partition_image(cloud, system, splitting, potential):
    """``log Z_n`` integrated over the image leaf ``f^n W``.

    The image measure is ``w_i exp(log J_i)``; the weight ``exp(sum_{k=1}^n G(f^{-k} y))``
    is recomputed along backward orbits of the image points.
    """
    y = cloud.points
    acc = np.zeros(len(cloud))
    for _ in range(cloud.time):
        y = apply(system, y, -1)
        acc = acc + evaluate_potential(potential, system, splitting, y)
    return logsumexp(np.log(cloud.weights) + cloud.log_jacobians + acc)


@dataclass(frozen=True)
class PressureSeries:
    n: np.ndarray
    log_z: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.n) <= 0):
            raise ValueError("entries must be strictly increasing in n")

    @property
    def slope_diff(self):
        return np.diff(self.log_z) / np.diff(self.n)

    def __len__(self):
        return len(self.n)

    def rows(self):
        """CSV rows ``(n, log_Z, slope_diff)``; the first slope is empty."""
        sd = self.slope_diff
        out = [(int(self.n[0]), float(self.log_z[0]), None)]
        out += [(int(k), float(z), float(s)) for k, z, s in zip(self.n[1:], self.log_z[1:], sd)]
        return out


@dataclass(frozen=True)
class PressureEstimate:
    value: float
    oscillation: float
    non_convergence: bool
    window: int

    def as_dict(self):
        return {"value": self.value, "oscillation": self.oscillation,
                "non_convergence": self.non_convergence, "window": self.window}


def series_from_history(history, potential_index=None):
    """Pressure series over clouds with ``time >= 1``."""
    clouds = [c for c in history if c.time >= 1]
    return PressureSeries(
        n=np.array([c.time for c in clouds]),
        log_z=np.array([log_partition(c, potential_index) for c in clouds]),
    )


def pressure_estimate(series, window=DEFAULT_WINDOW, osc_tol=OSCILLATION_TOL):
    """Least-squares slope of ``log Z_n`` against ``n`` over the last ``window`` entries.

    The limsup is never claimed to be a limit: ``non_convergence`` is raised when the
    last ``window`` successive differences spread by more than ``osc_tol``.
    """
    if window < 2 or len(series) < window + 1:
        raise errors.InsufficientData("need at least window + 1 entries with window >= 2",
                                      entries=len(series), window=window)
    n = series.n[-window:].astype(np.float64)
    z = series.log_z[-window:]
    nc = n - n.mean()
    slope = float(np.dot(nc, z - z.mean()) / np.dot(nc, nc))
    tail = series.slope_diff[-window:]
    osc = float(tail.max() - tail.min())
    return PressureEstimate(slope, osc, osc > osc_tol, window)


@dataclass(frozen=True)
class AnalyticReference:
    leaf_growth: float
    true_pressure: float

    @property
    def gap(self):
        return self.true_pressure - self.leaf_growth


def analytic_reference(system, splitting, potential):
    """Closed-form leaf-growth exponent and variational pressure for linear systems.

    ``leaf_growth = (1 - q) * sum_leaf log|lambda| + c`` and
    ``true_pressure = sum_{|lambda| > 1} log|lambda| - q * sum_leaf log|lambda| + c``.
    """
    if not system.is_linear:
        raise errors.PreconditionError("analytic reference needs a linear system")
    if potential.kind == "geometric":
        q = potential.q
    elif potential.is_constant:
        q = 0.0
    else:
        raise errors.PotentialNotConstant("potential is not constant on the torus",
                                          potential=potential.describe())
    leaf = splitting.linear_log_jacobian
    expanding = math.fsum(math.log(abs(v)) for v in system.eigenvalues if abs(v) > 1.0 + 1e-12)
    c = potential.offset
    return AnalyticReference((1.0 - q) * leaf + c, expanding - q * leaf + c)


def leaf_pressure_table(system, splitting, potentials, base=None, delta=DEFAULT_DELTA,
                        resolution=101, n_max=18, h_max=None, keep_history=False,
                        max_points=DEFAULT_MAX_POINTS):
    """One leaf run shared by several potentials; returns ``(list of series, history)``."""
    if system.all_roots_of_unity:
        raise errors.RootOfUnityError("every eigenvalue is a root of unity; no growth to measure")
    potentials = tuple(potentials)
    cloud = sample_disk(system, splitting, base, delta, resolution, potentials=potentials,
                        h_max=h_max, max_points=max_points)
    log_z = [[] for _ in potentials]
    history = [cloud] if keep_history else []
    for _ in range(n_max):
        cloud = evolve(cloud, system, splitting, 1, keep_history=False)[-1]
        for i, acc in enumerate(log_z):
            acc.append(log_partition(cloud, i))
        if keep_history:
            history.append(cloud)
    if not keep_history:
        history = [cloud]
    ns = np.arange(1, n_max + 1)
    return [PressureSeries(ns, np.array(z)) for z in log_z], history


def leaf_pressure_series(system, splitting, potential, base=None, delta=DEFAULT_DELTA,
                         resolution=101, n_max=18, h_max=None, keep_history=False,
                         max_points=DEFAULT_MAX_POINTS):
    """Sample a leaf, push it ``n_max`` times and return ``(series, history)``."""
    series, history = leaf_pressure_table(system, splitting, (potential,), base, delta,
                                          resolution, n_max, h_max, keep_history, max_points)
    return series[0], history
