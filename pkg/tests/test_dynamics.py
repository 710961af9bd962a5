import math
import warnings

import numpy as np
import pytest

from leafpressure import (
    CAT_MAP,
    PRODUCT_MAP,
    Potential,
    apply,
    evaluate_potential,
    make_splitting,
    make_toral_system,
    torus_distance,
    unstable_log_jacobian,
    wrap,
)
from leafpressure import errors
from leafpressure.dynamics import leaf_frames, push_frames

from conftest import LOG_L1, LOG_LU


def test_cat_eigenvalues(cat):
    s5 = math.sqrt(5)
    assert np.allclose(cat.eigenvalues, [(3 + s5) / 2, (3 - s5) / 2], atol=1e-14)


def test_product_eigenvalues(product):
    s3, s5 = math.sqrt(3), math.sqrt(5)
    want = [2 + s3, (3 + s5) / 2, (3 - s5) / 2, 2 - s3]
    assert np.allclose(product.eigenvalues, want, atol=1e-12)


def test_bad_matrices():
    with pytest.raises(errors.DeterminantError):
        make_toral_system([[2, 0], [0, 1]])
    with pytest.raises(errors.SingularMatrixError):
        make_toral_system([[1, 1], [1, 1]])
    with pytest.raises(errors.InvalidSystem):
        make_toral_system([[1, 0, 0], [0, 1, 0]])
    with pytest.raises(errors.InvalidSystem):
        make_toral_system([[1.5, 0], [0, 1]])


def test_perturbation_too_large():
    # the inverse of the cat map has |B10| = 1, so eps_p >= 1 breaks monotonicity
    with pytest.raises(errors.PerturbationTooLarge):
        make_toral_system(CAT_MAP, eps_p=1.2)
    with pytest.raises(errors.PerturbationTooLarge):
        make_toral_system(CAT_MAP, eps_p=-0.1)


def test_identity_roots_of_unity():
    with pytest.warns(UserWarning):
        ident = make_toral_system([[1, 0], [0, 1]])
    assert ident.all_roots_of_unity
    with pytest.raises(errors.SplittingError):
        make_splitting(ident)


def test_rotation_block_grouped(quiet):
    # a 3x3 matrix with a complex pair; the pair must be designated together
    sys3 = make_toral_system([[0, 0, 1], [1, 0, -1], [0, 1, 3]])
    mods = np.abs(sys3.eigenvalues)
    assert mods[0] > 1
    assert sys3.dim == 3


def test_apply_examples(cat):
    assert np.array_equal(apply(cat, [0.0, 0.0], 5), [0.0, 0.0])
    assert np.allclose(apply(cat, [0.5, 0.5], 1), [0.5, 0.0], atol=1e-15)
    assert np.array_equal(apply(cat, [0.3, 0.7], 0), [0.3, 0.7])


def test_apply_guard(cat):
    with pytest.raises(errors.PreconditionError):
        apply(cat, [0.1, 0.2], 100001)


def test_perturbed_forward_formula(pert):
    x = np.array([[0.1, 0.37], [0.9, 0.05]])
    want = x @ np.array(CAT_MAP, dtype=float).T
    want[:, 0] += 0.05 * np.sin(2 * np.pi * x[:, 1]) / (2 * np.pi)
    assert np.allclose(pert.forward(x), want % 1.0, atol=1e-15)


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.3])
def test_inverse_identity(eps):
    sys_ = make_toral_system(CAT_MAP, eps_p=eps)
    x = np.random.default_rng(1).random((1000, 2))
    for n in (1, 3, 5):
        assert torus_distance(apply(sys_, apply(sys_, x, n), -n), x).max() < 1e-12


def test_round_trip_error_grows_like_lambda_n(cat):
    # rounding in the stable direction is expanded by the inverse
    x = np.random.default_rng(2).random((1000, 2))
    err = [torus_distance(apply(cat, apply(cat, x, n), -n), x).max() for n in (10, 20)]
    assert err[1] > err[0]
    assert err[1] < 1e-15 * math.exp(20 * LOG_LU) * 10


def test_wrap_range():
    x = wrap(np.array([-1e-18, 1.0, 2.5, -0.25]))
    assert np.all((x >= 0) & (x < 1))


def test_unstable_jacobian_linear(cat, cat_u, product):
    x = np.random.default_rng(0).random((1000, 2))
    lj = unstable_log_jacobian(cat, cat_u, x)
    assert np.ptp(lj) < 1e-14
    assert abs(lj[0] - LOG_LU) < 1e-14
    sp = make_splitting(product, [0])
    assert abs(unstable_log_jacobian(product, sp, np.zeros(4)) - LOG_L1) < 1e-14


def test_zero_perturbation_matches_linear(cat_u):
    z = make_toral_system(CAT_MAP, eps_p=0.0)
    x = np.random.default_rng(3).random((50, 2))
    assert np.array_equal(unstable_log_jacobian(z, make_splitting(z), x),
                          unstable_log_jacobian(make_toral_system(CAT_MAP), cat_u, x))


def test_perturbed_frames_invariant(pert, pert_u):
    x = np.random.default_rng(4).random((200, 2))
    E = leaf_frames(pert, pert_u, x)
    pushed, _ = push_frames(pert, x, E)
    E1 = leaf_frames(pert, pert_u, pert.forward(x))
    # pushed frame and frame at the image span the same line
    cross = pushed[:, 0, 0] * E1[:, 1, 0] - pushed[:, 1, 0] * E1[:, 0, 0]
    assert np.abs(cross).max() < 1e-9


def test_perturbed_jacobian_mean(pert, pert_u):
    # area preservation and the invariance of Haar make the Haar-average
    # of log J^u sit near the linear value; it is not equal to it
    x = np.random.default_rng(5).random((20000, 2))
    lj = unstable_log_jacobian(pert, pert_u, x)
    assert abs(lj.mean() - LOG_LU) < 0.01
    assert np.ptp(lj) > 1e-3


def test_splitting_constants(cat, cat_u, product):
    s5 = math.sqrt(5)
    assert cat_u.constants["C1"] == pytest.approx((3 + s5) / 2, abs=1e-14)
    assert cat_u.constants["C2"] == pytest.approx((3 - s5) / 2, abs=1e-14)
    cu = make_splitting(product, [0, 1, 2], mode="cu")
    assert cu.constants["lambda1"] == pytest.approx(2 - math.sqrt(3), abs=1e-12)
    assert cu.constants["lambda2"] == pytest.approx((3 - s5) / 2, abs=1e-12)


def test_splitting_errors(cat, product):
    with pytest.raises(errors.SplittingError):
        make_splitting(cat, [1])           # contracting direction cannot be E^u
    with pytest.raises(errors.SplittingError):
        make_splitting(cat, [0, 1])        # empty complement
    with pytest.raises(errors.SplittingError):
        make_splitting(cat, [0], mode="xx")
    with pytest.raises(errors.SplittingError):
        make_splitting(product, [0, 1, 2, 3], mode="cu")


def test_def21_inequalities(cat, cat_u):
    rng = np.random.default_rng(6)
    A = cat.matrix.astype(float)
    c = rng.standard_normal(1000)
    vu = cat_u.leaf_basis @ c[None, :]
    vs = cat_u.complement_basis @ c[None, :]
    ru = np.linalg.norm(A @ vu, axis=0) / np.linalg.norm(vu, axis=0)
    rs = np.linalg.norm(A @ vs, axis=0) / np.linalg.norm(vs, axis=0)
    assert np.all(ru >= cat_u.constants["C1"] * (1 - 1e-14))
    assert np.all(rs <= cat_u.constants["C2"] * (1 + 1e-14))


def test_potential_examples(cat, cat_u):
    x = np.random.default_rng(7).random((10, 2))
    assert np.array_equal(evaluate_potential(Potential.zero(), cat, cat_u, x), np.zeros(10))
    g = evaluate_potential(Potential.geometric(1), cat, cat_u, x)
    assert np.allclose(g, -LOG_LU, atol=1e-14)
    t = Potential.trig({(1, 0): 0.3})
    assert evaluate_potential(t, cat, cat_u, np.zeros(2)) == pytest.approx(0.3, abs=1e-15)
    assert t.sup_norm_bound() == pytest.approx(0.3)
    assert Potential.constant(2.0).is_constant
    assert not t.is_constant


def test_trig_sup_bound(cat, cat_u):
    t = Potential.trig({(1, 0): 0.3, (1, 2): -0.2, (0, 3): 0.05})
    x = np.random.default_rng(8).random((5000, 2))
    assert np.abs(evaluate_potential(t, cat, cat_u, x)).max() <= t.sup_norm_bound() + 1e-15


def test_system_immutable(cat):
    with pytest.raises(Exception):
        cat.eps_p = 1.0
