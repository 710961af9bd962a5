"""Centre-unstable variant: contraction probe, cu-leaf pressure and cu measures.

The leaf machinery is shared with the unstable case; only the splitting mode differs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import errors
from .dynamics import TWO_PI, leaf_frames, wrap
from .measures import build_lambda_n, build_mu_n
from .thermo import DEFAULT_WINDOW, leaf_pressure_series, pressure_estimate

RATE_TOL = 0.02
SUBEXPONENTIAL = "SUBEXPONENTIAL"
EXPONENTIAL = "EXPONENTIAL"
UNDETERMINED = "UNDETERMINED"


@dataclass(frozen=True)
class ContractionProfile:
    n: np.ndarray
    r_min: np.ndarray
    fitted_rate: float
    verdict: str
    rate_tol: float = RATE_TOL
    pairs: int = 0

    @property
    def rate_defined(self):
        return not math.isnan(self.fitted_rate)

    @property
    def log_g(self):
        return np.maximum(0.0, -np.log(self.r_min))

    def rows(self):
        """CSV rows ``(n, r_min, rate)`` with ``rate = log g(n) / n``."""
        return [(int(k), float(r), float(g / k)) for k, r, g in zip(self.n, self.r_min, self.log_g)]

    def as_dict(self):
        return {"verdict": self.verdict, "empirical": True, "fitted_rate": self.fitted_rate,
                "rate_tol": self.rate_tol, "pairs": self.pairs, "n_max": int(self.n[-1])}


def _push_pairs(system, y, delta):
    """Advance base points and their lifted displacements without cancellation."""
    A = system.matrix.astype(np.float64)
    new_delta = delta @ A.T
    if system.eps_p:
        a = TWO_PI * y[:, 1]
        h = TWO_PI * delta[:, 1]
        # sin(a + h) - sin(a) = 2 cos(a + h/2) sin(h/2)
        new_delta[:, 0] += system.eps_p * 2.0 * np.cos(a + 0.5 * h) * np.sin(0.5 * h) / TWO_PI
    return system.forward(y), new_delta


def _tangent_products(system, splitting, base, n_max):
    """``Df^n(base)`` restricted to the leaf frame, for n = 1..n_max."""
    frame = splitting.leaf_basis if system.is_linear else leaf_frames(system, splitting, base[None])[0]
    M, y, out = frame.copy(), base.copy(), []
    for _ in range(n_max):
        M = system.jacobian(y) @ M
        y = system.forward(y)
        out.append(M.copy())
    return frame, out


def contraction_probe(system, splitting, base=None, delta=0.1, n_max=12, pair_samples=200,
                      seed=0, rate_tol=RATE_TOL, window=None):
    """Minimum distance ratio ``d(f^n y, f^n z) / d(y, z)`` over pairs on the leaf.

    Pairs are stratified over short/medium/long separations with random directions,
    plus, for every n, the direction least stretched by ``Df^n`` at the base point.
    Distances are measured on the universal cover. The fitted rate is the tail slope
    of ``log g(n) = max(0, -log r_min(n))``; a sample can refute subexponential
    contraction but never prove it, so the verdict is empirical.
    """
    if splitting.mode != "cu":
        raise errors.PreconditionError("contraction probe needs a cu-mode splitting")
    if pair_samples < 100:
        raise errors.PreconditionError("pair_samples must be >= 100", pair_samples=pair_samples)
    d, k = system.dim, splitting.leaf_dim
    base = wrap(np.zeros(d) if base is None else np.asarray(base, dtype=np.float64))
    rng = np.random.default_rng(seed)
    frame, tangents = _tangent_products(system, splitting, base, n_max)

    seps = np.array([1e-3, 1e-1, 1.0]) * delta
    per = pair_samples // len(seps)
    dirs, lens, mids = [], [], []
    for s in seps:
        u = rng.standard_normal((per, k))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        room = max(delta - 0.5 * s, 0.0)
        dirs.append(u)
        lens.append(np.full(per, s))
        mids.append(rng.uniform(-room, room, (per, k)))
    for M in tangents:
        v = np.linalg.svd(M)[2][-1]
        for s in seps[:2]:
            dirs.append(v[None, :])
            lens.append(np.array([s]))
            mids.append(np.zeros((1, k)))
    u, s, c = np.concatenate(dirs), np.concatenate(lens), np.concatenate(mids)
    y = wrap(base + (c - 0.5 * s[:, None] * u) @ frame.T)
    disp = (s[:, None] * u) @ frame.T
    d0 = np.linalg.norm(disp, axis=1)

    r_min = []
    for _ in range(n_max):
        y, disp = _push_pairs(system, y, disp)
        r_min.append(float(np.min(np.linalg.norm(disp, axis=1) / d0)))
    r_min = np.array(r_min)
    ns = np.arange(1, n_max + 1)
    log_g = np.maximum(0.0, -np.log(r_min))
    if n_max < 2:
        rate, verdict = float("nan"), UNDETERMINED
    else:
        w = window or max(2, n_max // 2)
        nn, gg = ns[-w:].astype(float), log_g[-w:]
        nc = nn - nn.mean()
        rate = float(np.dot(nc, gg - gg.mean()) / np.dot(nc, nc))
        verdict = SUBEXPONENTIAL if rate <= rate_tol else EXPONENTIAL
    return ContractionProfile(ns, r_min, rate, verdict, rate_tol, len(d0))


@dataclass(frozen=True, eq=False)
class CuPressureResult:
    series: object
    estimate: object
    profile: ContractionProfile
    warnings: list = field(default_factory=list)
    history: list = field(default_factory=list, repr=False)


def cu_pressure_estimate(system, splitting, potential, base=None, delta=0.1, resolution=21,
                         n_max=12, window=DEFAULT_WINDOW, keep_history=False, probe_pairs=200,
                         seed=0):
    """Growth rate of the weighted cu-leaf integral, with the contraction probe as a guard.

    The estimate is always computed; an ``EXPONENTIAL`` probe verdict adds a warning record
    because the growth characterisation of pressure then need not hold.
    """
    if splitting.mode != "cu":
        raise errors.PreconditionError("cu pressure needs a cu-mode splitting")
    series, history = leaf_pressure_series(system, splitting, potential, base, delta,
                                           resolution, n_max, keep_history=keep_history)
    est = pressure_estimate(series, window)
    profile = contraction_probe(system, splitting, base, delta, n_max, probe_pairs, seed)
    warns = []
    if profile.verdict == EXPONENTIAL:
        warns.append({
            "level": "WARNING",
            "code": "exponential-cu-contraction",
            "message": "cu-leaf contracts exponentially; the leaf growth rate may differ from the pressure",
            "fitted_rate": profile.fitted_rate,
        })
    return CuPressureResult(series, est, profile, warns, history)


def cu_equilibrium_measures(history, potential_index=None, n=None, system=None):
    """``(lambda_n, mu_n)`` built on a cu-leaf; same construction as the unstable case."""
    by_time = {c.time: c for c in history}
    n = max(by_time) if n is None else n
    lam = build_lambda_n(by_time[n], potential_index, leaf_id="cu")
    mu = build_mu_n(history, potential_index, n, system, leaf_id="cu")
    return lam, mu
