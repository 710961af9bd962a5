"""Box partitions of the torus and entropies of particle measures."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import errors
from .kernels import pairwise_sum

LABEL_BUDGET = 10_000_000
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class BoxPartition:
    """``m`` subdivisions per axis; the cell of ``x`` is ``floor(m * x)``."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")

    def cardinality(self, d):
        return self.m ** d

    def cells(self, x):
        return np.clip(np.floor(self.m * np.asarray(x)), 0, self.m - 1).astype(np.int64)

    def boundary_mass(self, measure):
        """Mass within ``BOUNDARY_TOL`` of a cell wall (assigned by the floor rule anyway)."""
        s = self.m * measure.particles
        near = np.any(np.abs(s - np.round(s)) < BOUNDARY_TOL * self.m, axis=1)
        return {"particles": int(near.sum()), "mass": float(measure.masses[near].sum())}


def _label_entropy(labels, masses):
    """Entropy of the distribution of ``masses`` over distinct rows of ``labels``."""
    if labels.shape[1] == 1:
        _, inv = np.unique(labels[:, 0], return_inverse=True)
    else:
        _, inv = np.unique(labels, axis=0, return_inverse=True)
    inv = inv.ravel()
    p = np.bincount(inv, weights=masses)
    if p.shape[0] > LABEL_BUDGET:
        raise errors.LabelExplosion("too many distinct itineraries", labels=int(p.shape[0]))
    p = p[p > 0]
    return max(0.0, -pairwise_sum(p * np.log(p)))


def _encode(cells, m):
    """Pack rows of cell indices into one integer column when it fits in int64."""
    width = cells.shape[1]
    if width * math.log2(m) < 62:
        code = np.zeros(cells.shape[0], dtype=np.int64)
        for j in range(width):
            code = code * m + cells[:, j]
        return code[:, None]
    return cells


def itineraries(particles, partition, system, depth):
    """Cell indices of ``x, f x, ..., f^{depth-1} x`` concatenated per particle."""
    if depth < 1:
        raise errors.PreconditionError("depth must be >= 1", depth=depth)
    cols, x = [], particles
    for k in range(depth):
        cols.append(partition.cells(x))
        if k + 1 < depth:
            x = system.forward(x)
    return np.concatenate(cols, axis=1)


def partition_entropy(measure, partition):
    """``H(P) = -sum nu(P_i) log nu(P_i)``."""
    cells = partition.cells(measure.particles)
    return _label_entropy(_encode(cells, partition.m), measure.masses)


def refined_entropy(measure, partition, system, q):
    """Entropy of the refinement ``P v f^-1 P v ... v f^-(q-1) P`` via itinerary labels."""
    labels = itineraries(measure.particles, partition, system, q)
    return _label_entropy(_encode(labels, partition.m), measure.masses)


def entropy_table(measure, partition, system, qs):
    """Rows ``(q, H, H/q)``."""
    out = []
    for q in qs:
        h = refined_entropy(measure, partition, system, q)
        out.append((q, h, h / q))
    return out


@dataclass(frozen=True)
class MisiurewiczReport:
    slack: float
    h_lambda: float
    h_mu: float
    q: int
    n: int
    card: int

    def as_dict(self):
        return {"slack": self.slack, "H_lambda": self.h_lambda, "H_mu": self.h_mu,
                "q": self.q, "n": self.n, "card": self.card}


def misiurewicz_check(lambda_n, mu_n, partition, q, system):
    """Slack ``n H_mu(P^q) + 2 q^2 log Card(P) - q H_lambda(P^n)``; the inequality says it is >= 0."""
    n = lambda_n.n
    if mu_n.n != n:
        raise errors.PreconditionError("lambda_n and mu_n come from different n",
                                       n_lambda=n, n_mu=mu_n.n)
    if not 0 < q < n:
        raise errors.PreconditionError("need 0 < q < n", q=q, n=n)
    d = lambda_n.particles.shape[1]
    card = partition.cardinality(d)
    h_lam = refined_entropy(lambda_n, partition, system, n)
    h_mu = refined_entropy(mu_n, partition, system, q)
    slack = n * h_mu + 2 * q * q * math.log(card) - q * h_lam
    return MisiurewiczReport(slack, h_lam, h_mu, q, n, card)
