"""Pure numpy/Python implementations of the hot kernels.

Results must be bitwise identical to the compiled versions in ``_kernels.pyx``.
"""
import numpy as np


def pairwise_sum(x):
    """Sum ``x`` with a fixed-shape binary tree over the zero-padded power-of-two length."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        return 0.0
    size = 1
    while size < n:
        size *= 2
    buf = np.zeros(size, dtype=np.float64)
    buf[:n] = x
    while buf.shape[0] > 1:
        buf = buf[0::2] + buf[1::2]
    return float(buf[0])


def greedy_separated(orbits, keys, neighbor_offsets, cells, eps):
    """Greedy maximal eps-separated subset in the max-over-orbit metric.

    ``orbits`` is (N, n, d); ``keys`` is (N, 2d) integer cell coordinates at the first
    and last orbit time, each in ``range(cells)``; ``neighbor_offsets`` is (K, 2d).
    Candidates are visited in index order.
    """
    orbits = np.ascontiguousarray(orbits, dtype=np.float64)
    N = orbits.shape[0]
    eps2 = eps * eps
    buckets = {}
    chosen = []
    offsets = [tuple(int(v) for v in row) for row in neighbor_offsets]
    key_rows = keys.tolist()
    for i in range(N):
        base = key_rows[i]
        nearby = []
        for off in offsets:
            key = tuple((b + o) % cells for b, o in zip(base, off))
            bucket = buckets.get(key)
            if bucket:
                nearby.extend(bucket)
        ok = True
        if nearby:
            diff = np.abs(orbits[nearby] - orbits[i])
            diff = np.minimum(diff, 1.0 - diff)
            dist2 = diff[:, :, 0] * diff[:, :, 0]
            for c in range(1, diff.shape[2]):
                dist2 = dist2 + diff[:, :, c] * diff[:, :, c]
            # pair is eps-close in d_n iff every time slice is within eps
            if np.any(np.all(dist2 <= eps2, axis=1)):
                ok = False
        if ok:
            buckets.setdefault(tuple(base), []).append(i)
            chosen.append(i)
    return np.asarray(chosen, dtype=np.int64)


TWO_PI = 2.0 * np.pi
NEWTON_TOL = 1e-9
NEWTON_MAX = 60


def _wrap(r):
    r = np.mod(r, 1.0)
    return np.where(r >= 1.0, 0.0, r)


def _matvec(M, X):
    out = X[..., 0:1] * M[:, 0]
    for j in range(1, M.shape[1]):
        out = out + X[..., j:j + 1] * M[:, j]
    return out


def preimage(z, B, eps):
    """Pre-image under ``x -> A x + eps * (sin(2 pi x_1) / 2 pi) e_0`` with ``B = A^-1``.

    Coordinate 1 of the pre-image solves ``t + eps B10 s(t) = (B z)_1``; Newton runs per
    point and stops once the update falls below ``NEWTON_TOL``. The remaining error is at
    most ``M * step**2`` with ``M = pi |eps B10| / (1 - |eps B10|)``, i.e. rounding level.
    """
    y = _matvec(B, z)
    eb = eps * B[1, 0]
    c = y[..., 1].reshape(-1)
    t = c - eb * np.sin(TWO_PI * c) / TWO_PI
    active = np.arange(c.shape[0])
    for _ in range(NEWTON_MAX):
        if active.size == 0:
            break
        ta = t[active]
        g = ta + eb * np.sin(TWO_PI * ta) / TWO_PI - c[active]
        step = g / (1.0 + eb * np.cos(TWO_PI * ta))
        t[active] = ta - step
        active = active[np.abs(step) >= NEWTON_TOL]
    s = (np.sin(TWO_PI * t) / TWO_PI).reshape(y.shape[:-1])
    y = y - (eps * s)[..., None] * B[:, 0]
    return _wrap(y)


def perturbed_frames_1d(x, A, B, eps, init, k_stab):
    """Unit leaf directions at ``x`` pushed along stored backward orbits.

    Returns ``(frames (N, d), angles (N,))`` where ``angles`` is the sine between the
    runs started ``k_stab`` and ``k_stab + 1`` steps back.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    N, d = x.shape
    orbit, cosines = [x], [None]
    for _ in range(k_stab + 1):
        orbit.append(preimage(orbit[-1], B, eps))
        cosines.append(eps * np.cos(TWO_PI * orbit[-1][:, 1]))

    def run(k):
        w = np.broadcast_to(init, (N, d)).copy()
        for j in range(k, 0, -1):
            cs = cosines[j]
            out = np.empty_like(w)
            for r in range(d):
                acc = A[r, 0] * w[:, 0]
                for c in range(1, d):
                    a = A[r, c] + cs if (r == 0 and c == 1) else A[r, c]
                    acc = acc + a * w[:, c]
                out[:, r] = acc
            nrm = out[:, 0] * out[:, 0]
            for c in range(1, d):
                nrm = nrm + out[:, c] * out[:, c]
            w = out / np.sqrt(nrm)[:, None]
        return w

    u = run(k_stab)
    v = run(k_stab + 1)
    dot = u[:, 0] * v[:, 0]
    for c in range(1, d):
        dot = dot + u[:, c] * v[:, c]
    res = v - dot[:, None] * u
    r2 = res[:, 0] * res[:, 0]
    for c in range(1, d):
        r2 = r2 + res[:, c] * res[:, c]
    return u, np.sqrt(r2)
