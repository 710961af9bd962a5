import numpy as np
import pytest

from leafpressure import kernels, make_toral_system
from leafpressure.oracle import grid_context, greedy_separated_set
from leafpressure.parallel import CHUNK, get_threads, map_chunks, set_threads

BACKENDS = kernels.backends()


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("n", [0, 1, 7, 1000, 4097])
def test_pairwise_sum(n):
    x = np.random.default_rng(n).standard_normal(n)
    vals = {k: m.pairwise_sum(x) for k, m in BACKENDS.items()}
    ref = vals["python"]
    assert all(v == ref for v in vals.values())
    assert ref == pytest.approx(np.sum(x), abs=1e-10)


def test_greedy_parity(cat):
    ctx = grid_context(cat, 120, 4, jitter=0.3, seed=2)
    orbits = np.ascontiguousarray(ctx.orbits)
    ref = greedy_separated_set(ctx, 0.07)
    for m in BACKENDS.values():
        cells = int(1 / 0.07)
        first = np.clip(np.floor(orbits[:, 0] * cells), 0, cells - 1)
        last = np.clip(np.floor(orbits[:, -1] * cells), 0, cells - 1)
        keys = np.concatenate([first, last], axis=1).astype(np.int64)
        import itertools
        offs = np.array(list(itertools.product((-1, 0, 1), repeat=4)), dtype=np.int64)
        assert np.array_equal(m.greedy_separated(orbits, keys, offs, cells, 0.07), ref)


def test_frame_parity(pert, pert_u):
    x = np.random.default_rng(5).random((2000, 2))
    init = np.ascontiguousarray(pert_u.leaf_basis[:, 0])
    out = [m.perturbed_frames_1d(x, pert._fmat, pert._bmat, pert.eps_p, init, 40)
           for m in BACKENDS.values()]
    for u, a in out[1:]:
        assert np.array_equal(u, out[0][0])
        assert np.array_equal(a, out[0][1])
    assert out[0][1].max() < 1e-10


def test_preimage_inverts(pert):
    from leafpressure import _fallback
    z = np.random.default_rng(1).random((500, 2))
    y = _fallback.preimage(z, pert._bmat, pert.eps_p)
    d = np.abs(pert.forward(y) - z)
    assert np.minimum(d, 1 - d).max() < 1e-12


def test_map_chunks_thread_independent():
    x = np.random.default_rng(0).random((2 * CHUNK + 17, 3))
    fn = lambda a: np.sin(a) @ np.arange(3.0)
    old = get_threads()
    try:
        set_threads(1)
        a = map_chunks(fn, x)
        set_threads(4)
        b = map_chunks(fn, x)
    finally:
        set_threads(old)
    assert np.array_equal(a, b)
