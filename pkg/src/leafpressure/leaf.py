"""Sampled local leaves and their pushforwards.

A leaf cloud keeps its quadrature weights on the original disk. Stretching under
``f^n`` is carried by the accumulated log-Jacobians, so the image leaf is never
re-measured.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .dynamics import (
    apply,
    evaluate_potential,
    leaf_frames,
    push_frames,
    torus_distance,
    wrap,
)
from .parallel import map_chunks

DEFAULT_DELTA = 0.1
DEFAULT_H_MAX = 1e-3
DEFAULT_MAX_POINTS = 1 << 22


@dataclass(frozen=True, eq=False)
class LeafDisk:
    base: np.ndarray
    delta: float
    leaf_dim: int
    frame: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class LeafCloud:
    disk: LeafDisk
    points: np.ndarray
    base_points: np.ndarray
    params: np.ndarray
    weights: np.ndarray
    log_jacobians: np.ndarray
    birkhoff: np.ndarray
    potentials: tuple
    time: int = 0
    frames: np.ndarray | None = None
    h_max: float | None = None
    max_points: int = DEFAULT_MAX_POINTS
    param_error_bound: float = 0.0

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_weight(self):
        from .kernels import pairwise_sum
        return pairwise_sum(self.weights)


def _trapezoid(t):
    t = np.asarray(t, dtype=np.float64)
    w = np.empty_like(t)
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    w[0] = 0.5 * (t[1] - t[0])
    w[-1] = 0.5 * (t[-1] - t[-2])
    return w


def _embed(base, params, frame):
    out = base + params[:, 0:1] * frame[:, 0]
    for j in range(1, frame.shape[1]):
        out = out + params[:, j:j + 1] * frame[:, j]
    return wrap(out)


def sample_disk(system, splitting, base=None, delta=DEFAULT_DELTA, resolution=101,
                potentials=(), h_max=None, max_points=DEFAULT_MAX_POINTS):
    """Sample the local leaf through ``base`` as a cube of half-width ``delta`` in frame coordinates.

    Linear systems get a product grid with product-trapezoid weights (total = ``(2 delta)^k``).
    Perturbed systems are limited to 1-D leaves; the curve is the straight segment along the
    approximated leaf direction at ``base``, and ``param_error_bound`` records ``delta`` times the
    worst sine between the segment and the local leaf direction along it.
    """
    d, k = system.dim, splitting.leaf_dim
    base = wrap(np.zeros(d) if base is None else np.asarray(base, dtype=np.float64))
    if resolution < 2:
        raise errors.PreconditionError("resolution must be >= 2", resolution=resolution)
    if not 0 < delta <= 0.25:
        raise errors.PreconditionError("delta must lie in (0, 0.25]", delta=delta)
    if k > 3:
        raise errors.DimensionUnsupported("leaf dimension above 3", leaf_dim=k)
    if not system.is_linear and k != 1:
        raise errors.DimensionUnsupported("perturbed systems support 1-D leaves only", leaf_dim=k)
    if system.is_linear:
        frame = splitting.leaf_basis
    else:
        frame = leaf_frames(system, splitting, base[None, :])[0]

    t = np.linspace(-delta, delta, resolution)
    w1 = _trapezoid(t)
    if k == 1:
        params, weights = t[:, None], w1
    else:
        mesh = np.meshgrid(*([t] * k), indexing="ij")
        params = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*([w1] * k), indexing="ij")
        weights = wmesh[0].ravel()
        for wm in wmesh[1:]:
            weights = weights * wm.ravel()
    points = _embed(base, params, frame)

    frames, bound = None, 0.0
    if not system.is_linear:
        frames = leaf_frames(system, splitting, points)
        cos = np.abs(frames[:, :, 0] @ frame[:, 0])
        bound = float(delta * np.sqrt(np.clip(1.0 - cos * cos, 0.0, None)).max())
        if h_max is None:
            h_max = DEFAULT_H_MAX
    potentials = tuple(potentials)
    n = points.shape[0]
    return LeafCloud(
        disk=LeafDisk(base=base, delta=float(delta), leaf_dim=k, frame=frame),
        points=points,
        base_points=points.copy(),
        params=params,
        weights=weights,
        log_jacobians=np.zeros(n),
        birkhoff=np.zeros((n, len(potentials))),
        potentials=potentials,
        frames=frames,
        h_max=h_max,
        max_points=max_points,
        param_error_bound=bound,
    )


def _step(system, splitting, potentials, points, frames, logj, birk):
    """One application of f with Jacobian and Birkhoff bookkeeping at the pre-images."""
    if system.is_linear:
        lj = np.full(points.shape[0], splitting.linear_log_jacobian)
        new_frames = frames
    else:
        new_frames, lj = push_frames(system, points, frames)
    birk = birk.copy()
    for i, pot in enumerate(potentials):
        birk[:, i] += evaluate_potential(pot, system, splitting, points, log_jacobian=lj)
    return system.forward(points), new_frames, logj + lj, birk


def _step_chunked(system, splitting, potentials, points, frames, logj, birk):
    if frames is None:
        def fn(p, lj_, b_):
            p2, _, l2, b2 = _step(system, splitting, potentials, p, None, lj_, b_)
            return p2, l2, b2
        p, lj, b = map_chunks(fn, points, logj, birk)
        return p, None, lj, b

    def fn(p, f_, lj_, b_):
        return _step(system, splitting, potentials, p, f_, lj_, b_)
    return map_chunks(fn, points, frames, logj, birk)


def _trace(system, splitting, potentials, base_points, steps):
    """State at time ``steps`` of fresh points started on the base disk."""
    n = base_points.shape[0]
    frames = None if system.is_linear else leaf_frames(system, splitting, base_points)
    pts, lj, birk = base_points, np.zeros(n), np.zeros((n, len(potentials)))
    for _ in range(steps):
        pts, frames, lj, birk = _step_chunked(system, splitting, potentials, pts, frames, lj, birk)
    return pts, frames, lj, birk


def _refine(cloud, system, splitting):
    h_max = cloud.h_max
    c = cloud
    while True:
        gaps = torus_distance(c.points[1:], c.points[:-1])
        bad = np.flatnonzero(gaps > h_max)
        if bad.size == 0:
            return c
        if len(c) + bad.size > c.max_points:
            raise errors.RefinementBudgetExceeded(
                "adaptive refinement exceeds the point budget",
                needed=int(len(c) + bad.size), max_points=int(c.max_points), time=c.time)
        t = c.params[:, 0]
        mids = 0.5 * (t[bad] + t[bad + 1])
        if np.any((mids <= t[bad]) | (mids >= t[bad + 1])):
            raise errors.RefinementBudgetExceeded("parameter spacing underflow", time=c.time)
        new_base = _embed(c.disk.base, mids[:, None], c.disk.frame)
        pts, frames, lj, birk = _trace(system, splitting, c.potentials, new_base, c.time)
        at = bad + 1
        params = np.insert(c.params, at, mids[:, None], axis=0)
        c = replace(
            c,
            points=np.insert(c.points, at, pts, axis=0),
            base_points=np.insert(c.base_points, at, new_base, axis=0),
            params=params,
            weights=_trapezoid(params[:, 0]),
            log_jacobians=np.insert(c.log_jacobians, at, lj),
            birkhoff=np.insert(c.birkhoff, at, birk, axis=0),
            frames=None if frames is None else np.insert(c.frames, at, frames, axis=0),
        )


def push_cloud(cloud, system, splitting):
    """Advance the cloud by one application of ``f``.

    Jacobians and potentials are evaluated at the pre-images. 1-D leaves with ``h_max``
    set are refined afterwards by inserting base-parameter midpoints until every gap
    between consecutive image points is at most ``h_max``.
    """
    pts, frames, lj, birk = _step_chunked(system, splitting, cloud.potentials, cloud.points,
                                          cloud.frames, cloud.log_jacobians, cloud.birkhoff)
    out = replace(cloud, points=pts, frames=frames, log_jacobians=lj, birkhoff=birk,
                  time=cloud.time + 1)
    if out.h_max is not None and out.disk.leaf_dim == 1:
        out = _refine(out, system, splitting)
    return out


def evolve(cloud, system, splitting, n, keep_history=True):
    """Push ``n`` times; return the clouds at times ``cloud.time .. cloud.time + n``."""
    history = [cloud]
    for _ in range(n):
        cloud = push_cloud(cloud, system, splitting)
        if keep_history:
            history.append(cloud)
        else:
            history = [cloud]
    return history


def birkhoff_sum(system, potential, x, n, splitting=None):
    """``sum_{j<n} G(f^j x)``; ``splitting`` is needed for geometric potentials."""
    if n < 0:
        raise errors.PreconditionError("n must be >= 0", n=n)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = wrap(np.atleast_2d(x))
    frames = None
    if potential.kind == "geometric" and not system.is_linear:
        frames = leaf_frames(system, splitting, x)
    total = np.zeros(x.shape[0])
    for _ in range(n):
        lj = None
        if potential.kind == "geometric":
            if system.is_linear:
                lj = np.full(x.shape[0], splitting.linear_log_jacobian)
            else:
                frames, lj = push_frames(system, x, frames)
        total = total + evaluate_potential(potential, system, splitting, x, log_jacobian=lj)
        x = apply(system, x, 1)
    return float(total[0]) if single else total
