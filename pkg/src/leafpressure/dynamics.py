"""Toral systems, invariant splittings and potentials.

Points on the torus T^d are float arrays of shape ``(..., d)`` with coordinates in
``[0, 1)``. A system is an integer unimodular matrix ``A`` with an optional smooth
displacement, ``x -> A x + eps * psi(x) mod 1`` where ``psi(x) = sin(2 pi x_1)/(2 pi) e_0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import _fallback, errors, kernels
from .parallel import map_chunks

TWO_PI = 2.0 * math.pi
MAX_STEPS = 100_000
K_STAB = 40
FRAME_TOL = 1e-10


def wrap(x):
    """Reduce coordinates into [0, 1)."""
    r = np.mod(np.asarray(x, dtype=np.float64), 1.0)
    # np.mod(-1e-18, 1.0) == 1.0
    return np.where(r >= 1.0, 0.0, r)


def torus_distance(x, y):
    """Euclidean distance on R^d/Z^d, minimised over integer translates."""
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    diff = diff - np.round(diff)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _matvec(M, X):
    """Row-wise ``M @ x`` with a fixed summation order (no BLAS)."""
    out = X[..., 0:1] * M[:, 0]
    for j in range(1, M.shape[1]):
        out = out + X[..., j:j + 1] * M[:, j]
    return out


def _is_root_of_unity(z, max_order=60, tol=1e-9):
    if abs(abs(z) - 1.0) > tol:
        return False
    return any(abs(z ** k - 1.0) < tol * k for k in range(1, max_order + 1))


@dataclass(frozen=True)
class EigenBlock:
    """A real invariant subspace: one real eigenvalue or one complex-conjugate pair."""

    values: tuple
    basis: np.ndarray = field(repr=False)

    @property
    def modulus(self):
        return abs(self.values[0])


@dataclass(frozen=True, eq=False)
class ToralSystem:
    matrix: np.ndarray
    eps_p: float = 0.0
    inverse: np.ndarray = field(default=None, repr=False)
    eigenvalues: np.ndarray = field(default=None, repr=False)
    blocks: tuple = field(default=(), repr=False)
    block_of: tuple = field(default=(), repr=False)
    some_root_of_unity: bool = False
    all_roots_of_unity: bool = False

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def is_linear(self):
        return self.eps_p == 0.0

    def describe(self):
        return {"matrix": self.matrix.tolist(), "eps_p": self.eps_p}

    # -- maps ---------------------------------------------------------------
    def forward(self, x):
        y = _matvec(self._fmat, x)
        if self.eps_p:
            y[..., 0] += self.eps_p * np.sin(TWO_PI * x[..., 1]) / TWO_PI
        return wrap(y)

    def backward(self, x):
        if not self.eps_p:
            return wrap(_matvec(self._bmat, x))
        return _fallback.preimage(np.asarray(x, dtype=np.float64), self._bmat, self.eps_p)

    def jacobian(self, x):
        x = np.asarray(x, dtype=np.float64)
        J = np.broadcast_to(self._fmat, x.shape[:-1] + self.matrix.shape).copy()
        if self.eps_p:
            J[..., 0, 1] += self.eps_p * np.cos(TWO_PI * x[..., 1])
        return J

    @property
    def _fmat(self):
        return self.matrix.astype(np.float64)

    @property
    def _bmat(self):
        return self.inverse.astype(np.float64)


def make_toral_system(matrix, eps_p=0.0, probe=64):
    """Validate ``matrix`` and build a system with eigen data.

    ``eps_p`` switches on the displacement ``eps_p * sin(2 pi x_1)/(2 pi)`` in coordinate 0.
    Raises ``DeterminantError``, ``SingularMatrixError`` or ``PerturbationTooLarge``.
    """
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise errors.InvalidSystem("matrix must be square", shape=list(A.shape))
    if not np.all(np.equal(np.round(A), A)):
        raise errors.InvalidSystem("matrix must have integer entries")
    A = np.round(A).astype(np.int64)
    det = int(round(np.linalg.det(A)))
    if det == 0:
        raise errors.SingularMatrixError("matrix is singular")
    if abs(det) != 1:
        raise errors.DeterminantError(f"|det A| = {abs(det)}, expected 1", det=det)
    inv = np.round(np.linalg.inv(A)).astype(np.int64)
    if not np.array_equal(A @ inv, np.eye(A.shape[0], dtype=np.int64)):
        raise errors.InvalidSystem("integer inverse failed")

    vals, vecs = np.linalg.eig(A.astype(np.float64))
    order = sorted(range(len(vals)), key=lambda i: (-abs(vals[i]), -vals[i].real, -vals[i].imag))
    vals = vals[order]
    vecs = vecs[:, order]
    blocks, block_of, i = [], [], 0
    while i < len(vals):
        v = vals[i]
        if abs(v.imag) > 1e-12 and i + 1 < len(vals) and abs(vals[i + 1] - v.conjugate()) < 1e-9:
            basis = np.column_stack([vecs[:, i].real, vecs[:, i].imag])
            basis, _ = np.linalg.qr(basis)
            blocks.append(EigenBlock((complex(v), complex(vals[i + 1])), basis))
            block_of += [len(blocks) - 1] * 2
            i += 2
        else:
            u = vecs[:, i].real
            u = u / np.linalg.norm(u)
            if u[np.flatnonzero(np.abs(u) > 1e-12)[0]] < 0:
                u = -u
            blocks.append(EigenBlock((float(v.real),), u[:, None]))
            block_of.append(len(blocks) - 1)
            i += 1
    roots = [_is_root_of_unity(complex(v)) for v in vals]

    system = ToralSystem(
        matrix=A,
        eps_p=float(eps_p),
        inverse=inv,
        eigenvalues=vals,
        blocks=tuple(blocks),
        block_of=tuple(block_of),
        some_root_of_unity=any(roots),
        all_roots_of_unity=all(roots),
    )
    if any(roots):
        warnings.warn("matrix has an eigenvalue that is a root of unity", stacklevel=2)
    if eps_p:
        if A.shape[0] < 2:
            raise errors.InvalidSystem("the displacement field needs d >= 2")
        if eps_p < 0:
            raise errors.PerturbationTooLarge("eps_p must be >= 0", eps_p=eps_p)
        grid = (np.arange(probe) + 0.5) / probe
        pts = np.zeros((probe, A.shape[0]))
        pts[:, 1] = grid
        smin = np.linalg.svd(system.jacobian(pts), compute_uv=False)[:, -1].min()
        # the scalar Newton solve in ``backward`` needs a monotone equation
        monotone = eps_p * abs(inv[1, 0]) < 1.0
        if smin <= 0 or not monotone:
            raise errors.PerturbationTooLarge(
                "perturbation too large for a diffeomorphism",
                eps_p=eps_p, min_singular_value=float(smin), monotone_inverse=bool(monotone),
            )
    return system


def apply(system, x, steps=1):
    """Return ``f^steps(x)``; negative ``steps`` iterates the inverse."""
    if abs(steps) > MAX_STEPS:
        raise errors.PreconditionError(f"|steps| > {MAX_STEPS}", steps=steps)
    y = wrap(np.asarray(x, dtype=np.float64))
    step = system.forward if steps >= 0 else system.backward
    for _ in range(abs(int(steps))):
        y = step(y)
    return y


# -- splittings ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Splitting:
    """Designated leaf bundle (``E^u`` in mode ``"u"``, ``E^cu`` in mode ``"cu"``) and its complement."""

    leaf_indices: tuple
    mode: str
    leaf_basis: np.ndarray = field(repr=False)
    complement_basis: np.ndarray = field(repr=False)
    leaf_log_moduli: tuple = ()
    constants: dict = field(default_factory=dict)

    @property
    def leaf_dim(self):
        return len(self.leaf_indices)

    @property
    def linear_log_jacobian(self):
        return math.fsum(self.leaf_log_moduli)

    def describe(self):
        return {"mode": self.mode, "leaf_indices": list(self.leaf_indices), **self.constants}


def make_splitting(system, leaf_indices=None, mode="u"):
    """Designate eigen-directions of the linear part as the leaf bundle.

    ``leaf_indices`` index ``system.eigenvalues`` (sorted by decreasing modulus);
    complex pairs must be included together. Default: every eigenvalue of modulus > 1.
    """
    if mode not in ("u", "cu"):
        raise errors.SplittingError(f"unknown mode {mode!r}")
    moduli = np.abs(system.eigenvalues)
    d = system.dim
    if leaf_indices is None:
        leaf_indices = [i for i in range(d) if moduli[i] > 1.0 + 1e-12]
    idx = tuple(sorted(int(i) for i in leaf_indices))
    if not idx or len(set(idx)) != len(idx) or idx[0] < 0 or idx[-1] >= d:
        raise errors.SplittingError("leaf indices invalid", leaf_indices=list(idx), dim=d)
    if len(idx) == d:
        raise errors.SplittingError("complement is empty", leaf_indices=list(idx))
    blocks = sorted({system.block_of[i] for i in idx})
    covered = [i for i in range(d) if system.block_of[i] in blocks]
    if tuple(covered) != idx:
        raise errors.SplittingError("complex-conjugate pairs must be designated together",
                                    leaf_indices=list(idx))
    rest = sorted(set(range(len(system.blocks))) - set(blocks))
    leaf_basis = _orthonormalize(np.hstack([system.blocks[b].basis for b in blocks]))
    comp_basis = _orthonormalize(np.hstack([system.blocks[b].basis for b in rest]))
    leaf_mod = moduli[list(idx)]
    comp_mod = np.delete(moduli, list(idx))
    if mode == "u":
        C1, C2 = float(leaf_mod.min()), float(comp_mod.max())
        if not (C1 > 1.0 and C1 > C2):
            raise errors.SplittingError("need C1 > 1 and C1 > C2", C1=C1, C2=C2)
        constants = {"C1": C1, "C2": C2}
    else:
        lam1, lam2 = float(comp_mod.max()), float(leaf_mod.min())
        if not (lam1 < 1.0 and lam1 < lam2):
            raise errors.SplittingError("need lambda1 < 1 and lambda1 < lambda2",
                                        lambda1=lam1, lambda2=lam2)
        constants = {"lambda1": lam1, "lambda2": lam2}
    if not system.is_linear and idx != tuple(range(len(idx))):
        raise errors.SplittingError("perturbed systems need the leaf bundle to be the dominant one",
                                    leaf_indices=list(idx))
    return Splitting(
        leaf_indices=idx,
        mode=mode,
        leaf_basis=leaf_basis,
        complement_basis=comp_basis,
        leaf_log_moduli=tuple(float(np.log(m)) for m in leaf_mod),
        constants=constants,
    )


def _orthonormalize(frames):
    q, r = np.linalg.qr(frames)
    # fix signs so the frame is a deterministic function of its span
    s = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    s = np.where(s == 0, 1.0, s)
    return q * s[..., None, :]


def push_frames(system, x, frames):
    """Push orthonormal frames at ``x`` by ``Df``; return (images, log volume factors)."""
    J = system.jacobian(x)
    img = np.einsum("...ij,...jk->...ik", J, frames)
    gram = np.einsum("...ji,...jk->...ik", img, img)
    if frames.shape[-1] == 1:
        norm = np.sqrt(gram[..., 0, 0])
        return img / norm[..., None, None], np.log(norm)
    _, logdet = np.linalg.slogdet(gram)
    return _orthonormalize(img), 0.5 * logdet


def leaf_frames(system, splitting, x, k_stab=K_STAB):
    """Tangent frames of the leaf bundle at ``x``, shape ``(..., d, k)``.

    Linear systems return the constant eigen-frame. Perturbed systems push the
    linear frame forward along the stored backward orbit from ``f^{-k_stab}(x)``; the result is compared against a
    run from ``f^{-k_stab-1}(x)`` and ``FrameDegenerate`` is raised if the principal
    angles differ by more than ``FRAME_TOL``.
    """
    x = np.asarray(x, dtype=np.float64)
    base = np.broadcast_to(splitting.leaf_basis, x.shape[:-1] + splitting.leaf_basis.shape).copy()
    if system.is_linear:
        return base

    if splitting.leaf_dim == 1:
        flat = x.reshape(-1, x.shape[-1])
        init = splitting.leaf_basis[:, 0]
        fr, angle = map_chunks(
            lambda p: kernels.perturbed_frames_1d(p, system._fmat, system._bmat, system.eps_p,
                                                  init, k_stab), flat)
        if angle.size and angle.max() > FRAME_TOL:
            raise errors.FrameDegenerate("leaf frame did not converge",
                                         max_angle=float(angle.max()), k_stab=k_stab)
        return fr.reshape(x.shape + (1,))

    # keep the backward orbit: re-iterating forward would amplify rounding by lambda^k
    orbit = [x]
    for _ in range(k_stab + 1):
        orbit.append(system.backward(orbit[-1]))

    def run(k):
        fr = base.copy()
        for j in range(k, 0, -1):
            fr, _ = push_frames(system, orbit[j], fr)
        return fr

    U = run(k_stab)
    V = run(k_stab + 1)
    resid = V - np.einsum("...ij,...kj,...kl->...il", U, U, V)
    angle = np.linalg.svd(resid, compute_uv=False).max(axis=-1) if resid.size else np.zeros(())
    if np.any(angle > FRAME_TOL):
        raise errors.FrameDegenerate("leaf frame did not converge",
                                     max_angle=float(np.max(angle)), k_stab=k_stab)
    return U


def unstable_log_jacobian(system, splitting, x, frames=None):
    """``log|det(Df|E_x)|`` for the splitting's leaf bundle ``E`` at points ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if system.is_linear:
        return np.full(x.shape[:-1], splitting.linear_log_jacobian)
    if frames is None:
        frames = leaf_frames(system, splitting, x)
    _, logvol = push_frames(system, x, frames)
    return logvol


# -- potentials ----------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """``kind`` is ``"zero"``, ``"geometric"`` (``-q log|det Df|E|``) or ``"trig"``.

    Trig potentials are ``sum_k c_k cos(2 pi k.x)``; ``offset`` is added to every kind.
    """

    kind: str = "zero"
    q: float = 0.0
    terms: tuple = ()
    offset: float = 0.0
    name: str = ""

    @classmethod
    def zero(cls):
        return cls("zero", name="zero")

    @classmethod
    def constant(cls, c):
        return cls("zero", offset=float(c), name=f"const({c})")

    @classmethod
    def geometric(cls, q=1.0):
        return cls("geometric", q=float(q), name=f"geometric(q={q})")

    @classmethod
    def trig(cls, coefficients):
        terms = tuple(sorted((tuple(int(v) for v in k), float(c)) for k, c in dict(coefficients).items()))
        return cls("trig", terms=terms, name="trig")

    def shifted(self, c):
        return Potential(self.kind, self.q, self.terms, self.offset + float(c), self.name)

    @property
    def is_constant(self):
        if self.kind == "zero":
            return True
        if self.kind == "trig":
            return all(not any(k) for k, _ in self.terms)
        return None  # geometric: constant exactly on linear systems

    def sup_norm_bound(self):
        if self.kind == "trig":
            return abs(self.offset) + sum(abs(c) for _, c in self.terms)
        if self.kind == "zero":
            return abs(self.offset)
        return None

    def describe(self):
        out = {"kind": self.kind, "offset": self.offset}
        if self.kind == "geometric":
            out["q"] = self.q
        if self.kind == "trig":
            out["terms"] = [[list(k), c] for k, c in self.terms]
        return out


def evaluate_potential(potential, system, splitting, x, log_jacobian=None):
    """Evaluate ``G`` at points ``x``.

    ``log_jacobian`` may carry precomputed ``log|det(Df|E_x)|`` values so geometric
    potentials reuse the frames tracked along a leaf.
    """
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape[:-1]
    if potential.kind == "zero":
        out = np.zeros(shape)
    elif potential.kind == "geometric":
        if log_jacobian is None:
            log_jacobian = unstable_log_jacobian(system, splitting, x)
        out = -potential.q * np.asarray(log_jacobian, dtype=np.float64)
    elif potential.kind == "trig":
        out = np.zeros(shape)
        for k, c in potential.terms:
            phase = _matvec(np.asarray([k], dtype=np.float64), x)[..., 0]
            out = out + c * np.cos(TWO_PI * phase)
    else:
        raise ValueError(f"unknown potential kind {potential.kind!r}")
    if potential.offset:
        out = out + potential.offset
    return out
