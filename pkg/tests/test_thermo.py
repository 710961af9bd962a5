import math

import numpy as np
import pytest

from leafpressure import (
    CAT_MAP,
    Potential,
    PressureSeries,
    analytic_reference,
    evolve,
    leaf_pressure_series,
    log_partition,
    make_splitting,
    make_toral_system,
    pressure_estimate,
    sample_disk,
)
from leafpressure import errors
from leafpressure.thermo import leaf_pressure_table, log_partition_image, logsumexp

from conftest import LOG_L1, LOG_LU

TRIG = Potential.trig({(1, 0): 0.3})


def test_logsumexp():
    assert logsumexp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), abs=1e-12)
    assert logsumexp([-np.inf, 0.0]) == 0.0
    with pytest.raises(errors.EmptyCloud):
        logsumexp([])


@pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 2.0])
def test_log_partition_closed_form(cat, cat_u, q):
    c = sample_disk(cat, cat_u, potentials=(Potential.geometric(q),))
    for c in evolve(c, cat, cat_u, 12)[1:]:
        want = math.log(0.2) + (1 - q) * c.time * LOG_LU
        assert log_partition(c, 0) == pytest.approx(want, abs=1e-12)


def test_log_partition_zero_is_volume_growth(cat, cat_u):
    c = evolve(sample_disk(cat, cat_u), cat, cat_u, 5)[-1]
    assert log_partition(c) == pytest.approx(math.log(0.2) + 5 * LOG_LU, abs=1e-12)


def test_no_overflow_n40(cat, cat_u):
    c = evolve(sample_disk(cat, cat_u, resolution=11), cat, cat_u, 40, keep_history=False)[-1]
    v = log_partition(c)
    assert math.isfinite(v)
    assert v == pytest.approx(math.log(0.2) + 40 * LOG_LU, abs=1e-11)


def test_pressure_linear_series():
    n = np.arange(1, 12)
    est = pressure_estimate(PressureSeries(n, 0.3 + 1.7 * n))
    assert est.value == pytest.approx(1.7, abs=1e-12)
    assert est.oscillation < 1e-12
    assert not est.non_convergence


def test_pressure_errors():
    with pytest.raises(errors.InsufficientData):
        pressure_estimate(PressureSeries(np.arange(1, 6), np.zeros(5)), window=6)
    with pytest.raises(errors.InsufficientData):
        pressure_estimate(PressureSeries(np.arange(1, 6), np.zeros(5)), window=1)
    with pytest.raises(ValueError):
        PressureSeries(np.array([1, 1, 2]), np.zeros(3))


def test_oscillation_flag():
    n = np.arange(1, 15)
    z = n * 1.0 + 0.2 * (n % 2)
    est = pressure_estimate(PressureSeries(n, z))
    assert est.non_convergence
    assert est.oscillation == pytest.approx(0.4, abs=1e-12)


def test_cat_entropy(cat, cat_u):
    s, _ = leaf_pressure_series(cat, cat_u, Potential.zero(), n_max=18)
    assert pressure_estimate(s, 6).value == pytest.approx(LOG_LU, abs=1e-9)
    assert np.abs(s.slope_diff - LOG_LU).max() < 1e-12


def test_cat_geometric(cat, cat_u):
    s, _ = leaf_pressure_series(cat, cat_u, Potential.geometric(1), n_max=18)
    assert abs(pressure_estimate(s, 6).value) < 1e-12


def test_shared_table_matches_single(cat, cat_u):
    pots = (Potential.zero(), TRIG)
    table, _ = leaf_pressure_table(cat, cat_u, pots, resolution=257, n_max=8)
    for pot, s in zip(pots, table):
        single, _ = leaf_pressure_series(cat, cat_u, pot, resolution=257, n_max=8)
        assert np.array_equal(single.log_z, s.log_z)


def test_root_of_unity_rejected(quiet):
    ident = make_toral_system([[1, 0], [0, 1]])
    with pytest.raises(errors.RootOfUnityError):
        leaf_pressure_series(ident, None, Potential.zero())


def test_analytic_reference(cat, cat_u, product):
    r = analytic_reference(cat, cat_u, Potential.zero())
    assert r.leaf_growth == pytest.approx(LOG_LU, abs=1e-14)
    assert r.true_pressure == pytest.approx(LOG_LU, abs=1e-14)
    r = analytic_reference(product, make_splitting(product, [0]), Potential.zero())
    assert r.leaf_growth == pytest.approx(1.316958, abs=1e-6)
    assert r.true_pressure == pytest.approx(LOG_L1 + LOG_LU, abs=1e-12)
    assert r.true_pressure == pytest.approx(2.279382, abs=1e-6)
    r = analytic_reference(product, make_splitting(product, [0]), Potential.geometric(1))
    assert abs(r.leaf_growth) < 1e-15
    with pytest.raises(errors.PotentialNotConstant):
        analytic_reference(cat, cat_u, TRIG)


def test_image_viewpoint_equivalence(cat, cat_u, pert, pert_u):
    c = evolve(sample_disk(cat, cat_u, resolution=201, potentials=(TRIG,)), cat, cat_u, 10)[-1]
    assert log_partition_image(c, cat, cat_u, TRIG) == pytest.approx(log_partition(c, 0), abs=1e-10)
    p = sample_disk(pert, pert_u, resolution=201, potentials=(TRIG,), h_max=0.05)
    p = evolve(p, pert, pert_u, 6)[-1]
    assert log_partition_image(p, pert, pert_u, TRIG) == pytest.approx(log_partition(p, 0), abs=1e-10)


def test_base_and_delta_robustness(cat, cat_u):
    vals = []
    for base in ([0.0, 0.0], [0.31, 0.77]):
        for delta in (0.05, 0.1):
            s, _ = leaf_pressure_series(cat, cat_u, TRIG, base=base, delta=delta,
                                        resolution=1 << 16 | 1, n_max=16)
            vals.append(pressure_estimate(s).value)
    assert max(vals) - min(vals) < 0.02


def test_trig_second_order(cat, cat_u):
    # frequencies e1 A^k are pairwise distinct, so P(G) = h + int G^2 / 2 + O(|G|^3)
    s, _ = leaf_pressure_series(cat, cat_u, TRIG, resolution=1 << 17 | 1, n_max=16)
    assert pressure_estimate(s).value == pytest.approx(LOG_LU + 0.3 ** 2 / 4, abs=2e-3)


def test_perturbed_geometric_zero(pert, pert_u):
    s, _ = leaf_pressure_series(pert, pert_u, Potential.geometric(1), n_max=8, h_max=0.2)
    assert abs(pressure_estimate(s, 6).value) < 1e-12
