"""Density measures on the base leaf and their averaged pushforwards, as weighted particles."""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from . import errors
from .dynamics import _matvec, apply
from .kernels import pairwise_sum
from .thermo import log_integrand, logsumexp

INVARIANCE_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    particles: np.ndarray
    masses: np.ndarray
    provenance: dict = field(default_factory=dict)
    times: np.ndarray | None = None  # orbit time of each particle (mu_n only)

    def __len__(self):
        return self.masses.shape[0]

    @property
    def kind(self):
        return self.provenance.get("kind")

    @property
    def n(self):
        return self.provenance.get("n")

    def total_mass(self):
        return pairwise_sum(self.masses)

    def rows(self):
        return [tuple(p) + (m,) for p, m in zip(self.particles.tolist(), self.masses.tolist())]


def build_lambda_n(cloud, potential_index=None, leaf_id=None):
    """Particles at the base-disk sample points, masses from the weighted density at time n."""
    if len(cloud) == 0:
        raise errors.EmptyCloud("cloud has no points")
    a = log_integrand(cloud, potential_index)
    masses = np.exp(a - logsumexp(a))
    pot = None if potential_index is None else cloud.potentials[potential_index].name
    return EmpiricalMeasure(
        particles=cloud.base_points.copy(),
        masses=masses,
        provenance={"kind": "lambda_n", "n": cloud.time, "potential": pot, "leaf": leaf_id},
    )


def build_mu_n(history, potential_index=None, n=None, system=None, leaf_id=None):
    """Average of ``f^k_* lambda_n`` over ``k < n``, each generation carrying mass ``1/n``.

    ``history`` holds clouds by time. Positions at time ``k`` come from the matching cloud
    when its particle set is unchanged; otherwise they are recomputed with ``system``.
    """
    by_time = {c.time: c for c in history}
    if n is None:
        n = max(by_time)
    if n < 1 or n not in by_time:
        raise errors.HistoryIncomplete("no cloud at time n", n=n, times=sorted(by_time))
    final = by_time[n]
    lam = build_lambda_n(final, potential_index, leaf_id)
    npart = len(final)
    generations = []
    pos = None
    for k in range(n):
        cloud = by_time.get(k)
        if cloud is not None and len(cloud) == npart:
            pos = cloud.points
        elif system is not None:
            pos = final.base_points if k == 0 else system.forward(pos)
        else:
            raise errors.HistoryIncomplete("history lacks time k and no system to recompute", k=k)
        generations.append(pos)
    particles = np.concatenate(generations)
    masses = np.tile(lam.masses / n, n)
    prov = dict(lam.provenance, kind="mu_n")
    return EmpiricalMeasure(particles, masses, prov, times=np.repeat(np.arange(n), npart))


def weight_deviation(lambda_n, cloud):
    """Max relative deviation of ``lambda_n`` masses from the normalised quadrature weights.

    Zero exactly when the weighted density is constant on the disk.
    """
    ref = cloud.weights / pairwise_sum(cloud.weights)
    return float(np.max(np.abs(lambda_n.masses / ref - 1.0)))


def _sum(values):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(pairwise_sum(values.real), pairwise_sum(values.imag))
    return pairwise_sum(values)


def integrate(measure, F):
    """``sum_i m_i F(x_i)`` for a vectorised test function ``F``."""
    return _sum(measure.masses * F(measure.particles))


def character(k):
    """The character ``x -> exp(2 pi i k.x)`` (sup norm 1)."""
    kv = np.asarray([k], dtype=np.float64)

    def F(x):
        return np.exp(2j * math.pi * _matvec(kv, x)[..., 0])
    F.frequency = tuple(int(v) for v in k)
    F.sup_norm = 1.0
    return F


def fourier_coefficient(measure, k):
    """``sum_j m_j exp(-2 pi i k.x_j)``."""
    return integrate(measure, character([-v for v in k]))


def frequency_set(d, radius=3, count=None):
    """Nonzero integer vectors with sup norm <= radius, ordered by sup norm then lexicographically."""
    ks = [k for k in itertools.product(range(-radius, radius + 1), repeat=d) if any(k)]
    ks.sort(key=lambda k: (max(abs(v) for v in k), k))
    return ks if count is None else ks[:count]


def character_test_set(d, count=48):
    """Characters used for the invariance check; for ``d = 2`` all 48 with sup norm <= 3."""
    return [character(k) for k in frequency_set(d, 3, count)]


def max_fourier(measure, radius=3):
    return max(abs(fourier_coefficient(measure, k)) for k in frequency_set(measure.particles.shape[1], radius))


@dataclass(frozen=True)
class DefectReport:
    max_defect: float
    values: tuple
    bounds: tuple
    failures: int

    def as_dict(self):
        return {"max_defect": self.max_defect, "failures": self.failures,
                "max_ratio_to_bound": max(v / b for v, b in zip(self.values, self.bounds))}


def invariance_defect(mu_n, system, test_functions, slack=INVARIANCE_SLACK):
    """``max_F |int F dmu_n - int F o f dmu_n|`` with the bound ``2 ||F|| / n + slack`` per F."""
    if mu_n.kind != "mu_n":
        raise errors.PreconditionError("invariance defect needs a mu_n measure")
    n = mu_n.n
    moved = system.forward(mu_n.particles)
    vals, bounds = [], []
    for F in test_functions:
        diff = _sum(mu_n.masses * (F(mu_n.particles) - F(moved)))
        vals.append(abs(diff))
        sup = getattr(F, "sup_norm", None)
        if sup is None:
            sup = float(np.max(np.abs(F(mu_n.particles))))
        bounds.append(2.0 * sup / n + slack)
    fails = sum(v > b for v, b in zip(vals, bounds))
    return DefectReport(max(vals), tuple(vals), tuple(bounds), int(fails))


def telescoped_defect(lambda_n, system, F):
    """``|(1/n)(int F o f^n dlambda_n - int F dlambda_n)|``."""
    n = lambda_n.n
    end = apply(system, lambda_n.particles, n)
    return abs(_sum(lambda_n.masses * (F(end) - F(lambda_n.particles)))) / n


def systematic_resample(measure, budget, seed=0):
    """Equal-mass systematic resampling to ``budget`` particles."""
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(measure.masses)
    cdf /= cdf[-1]
    u = (rng.random() + np.arange(budget)) / budget
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    prov = dict(measure.provenance, resampled=budget)
    times = None if measure.times is None else measure.times[idx]
    return EmpiricalMeasure(measure.particles[idx], np.full(budget, 1.0 / budget), prov, times)
