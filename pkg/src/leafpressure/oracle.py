"""Brute-force pressure from (n, eps)-separated sets on a candidate grid.

Independent of the leaf machinery: only ``f`` and ``G`` are used. A greedy maximal
separated set is also spanning for the grid, so one sum serves both sides.
"""
from __future__ import annotations

from dataclasses import dataclass
import itertools
import math

import numpy as np

from . import errors
from .dynamics import evaluate_potential, push_frames, leaf_frames, torus_distance, wrap
from .kernels import greedy_separated
from .parallel import map_chunks
from .thermo import logsumexp


def candidate_grid(d, per_axis, jitter=0.0, seed=0):
    """Cell-centred uniform grid in lexicographic order, optionally jittered within cells."""
    axis = (np.arange(per_axis) + 0.5) / per_axis
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if jitter:
        rng = np.random.default_rng(seed)
        pts = wrap(pts + jitter * (rng.random(pts.shape) - 0.5) / per_axis)
    return pts


@dataclass(frozen=True, eq=False)
class DnMetricContext:
    """Orbit segments ``x, f x, ..., f^{n-1} x`` for every candidate."""

    system: object
    orbits: np.ndarray  # (N, n, d)
    spacing: float

    @property
    def n(self):
        return self.orbits.shape[1]

    def dn(self, i, j, n=None):
        n = self.n if n is None else n
        return float(torus_distance(self.orbits[i, :n], self.orbits[j, :n]).max())


def orbit_context(system, points, n, spacing):
    """Precompute orbit segments of length ``n``; reused across eps values and shorter n."""
    def segment(x):
        out = np.empty((x.shape[0], n, x.shape[1]))
        for k in range(n):
            out[:, k] = x
            if k + 1 < n:
                x = system.forward(x)
        return out
    return DnMetricContext(system, map_chunks(segment, points), float(spacing))


def grid_context(system, per_axis, n, jitter=0.0, seed=0):
    return orbit_context(system, candidate_grid(system.dim, per_axis, jitter, seed), n, 1.0 / per_axis)


def greedy_separated_set(context, eps, n=None):
    """Indices of a greedy maximal (n, eps)-separated subset, candidates in index order."""
    n = context.n if n is None else n
    if not 1 <= n <= context.n:
        raise errors.PreconditionError("n outside the orbit table", n=n, table=context.n)
    if context.spacing >= eps / 4:
        raise errors.GridTooCoarse("grid spacing must be below eps/4",
                                   spacing=context.spacing, eps=eps)
    orbits = np.ascontiguousarray(context.orbits[:, :n])
    d = orbits.shape[2]
    cells = max(1, int(math.floor(1.0 / eps)))
    first = np.clip(np.floor(orbits[:, 0] * cells), 0, cells - 1)
    last = np.clip(np.floor(orbits[:, n - 1] * cells), 0, cells - 1)
    keys = np.concatenate([first, last], axis=1).astype(np.int64)
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=2 * d)), dtype=np.int64)
    return greedy_separated(orbits, keys, offsets, cells, float(eps))


def orbit_birkhoff(context, potential, idx, n, splitting=None):
    """``G^n`` along stored orbits of the selected candidates."""
    orbits = context.orbits[idx, :n]
    total = np.zeros(len(idx))
    frames = None
    if potential.kind == "geometric" and not context.system.is_linear:
        frames = leaf_frames(context.system, splitting, orbits[:, 0])
    for k in range(n):
        lj = None
        if potential.kind == "geometric":
            if context.system.is_linear:
                lj = np.full(len(idx), splitting.linear_log_jacobian)
            else:
                frames, lj = push_frames(context.system, orbits[:, k], frames)
        total = total + evaluate_potential(potential, context.system, splitting, orbits[:, k], lj)
    return total


@dataclass(frozen=True)
class OracleResult:
    n: int
    eps: float
    set_size: int
    log_sum: float
    lower: float
    upper: float
    candidates: int
    n_ref: int | None = None
    log_sum_ref: float | None = None

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def growth(self):
        """Prefactor-free rate ``(log_sum(n) - log_sum(n_ref)) / (n - n_ref)``."""
        if self.n_ref is None:
            return None
        return (self.log_sum - self.log_sum_ref) / (self.n - self.n_ref)

    @property
    def saturation(self):
        """Fraction of candidates selected; near 1 means the grid no longer resolves Bowen balls."""
        return self.set_size / self.candidates

    def row(self):
        return (self.n, self.eps, self.set_size, self.log_sum, self.lower, self.upper)

    def as_dict(self):
        return {"n": self.n, "epsilon": self.eps, "set_size": self.set_size,
                "log_sum": self.log_sum, "lower": self.lower, "upper": self.upper,
                "growth": self.growth, "n_ref": self.n_ref, "saturation": self.saturation}


def _log_sum(context, potential, eps, n, splitting):
    idx = greedy_separated_set(context, eps, n)
    return len(idx), logsumexp(orbit_birkhoff(context, potential, idx, n, splitting))


def oracle_pressure_bracket(context, potential, n, eps, splitting=None, n_ref=None):
    """``(1/n) log sum_{y in Sigma} exp(G^n(y))`` over the greedy separated set.

    The set is (n, eps)-separated, so the sum bounds ``Z_1(n, eps)`` from below, and it is
    (n, eps)-spanning for the grid, so it bounds ``Z_0(n, eps)`` from above; ``lower`` and
    ``upper`` are the same number. With ``n_ref`` the run is repeated at ``n_ref`` to give
    the growth rate between the two lengths.
    """
    size, ls = _log_sum(context, potential, eps, n, splitting)
    ref = None
    if n_ref is not None:
        if not 1 <= n_ref < n:
            raise errors.PreconditionError("need 1 <= n_ref < n", n=n, n_ref=n_ref)
        ref = _log_sum(context, potential, eps, n_ref, splitting)[1]
    return OracleResult(n, float(eps), size, ls, ls / n, ls / n, context.orbits.shape[0], n_ref, ref)


def oracle_table(system, potential, ns, epsilons, per_axis, splitting=None, jitter=0.0, seed=0):
    """Oracle results over an (n, eps) table sharing one orbit table."""
    ctx = grid_context(system, per_axis, max(ns), jitter, seed)
    out = []
    for n in ns:
        for eps in epsilons:
            n_ref = n // 2 if n >= 2 else None
            out.append(oracle_pressure_bracket(ctx, potential, n, eps, splitting, n_ref))
    return out
