import numpy as np
import pytest
from scipy import linalg

from cospace.baselines import fit_lsma, fit_lusma, fit_pjdr, lpp_matrices
from cospace.data import ValidationError, stack_features
from cospace.synth import SynthSpec, generate


def test_pjdr_dominant_axis(rng):
    x1 = rng.standard_normal((3, 200)) * np.array([[0.1], [10.0], [0.1]])
    x2 = rng.standard_normal((2, 200)) * 0.1
    model = fit_pjdr(x1, x2, 1, standardize=False)
    np.testing.assert_allclose(np.abs(model.theta[0]), [0, 1, 0, 0, 0], atol=1e-3)


def test_pjdr_complete_basis_reconstructs(rng):
    x1 = rng.standard_normal((3, 20))
    x2 = rng.standard_normal((2, 20))
    model = fit_pjdr(x1, x2, 5, standardize=False)
    x = stack_features(x1, x2)
    xc = x - x.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(model.theta.T @ model.theta @ xc, xc, atol=1e-8)


def test_pjdr_variances_match_eigensolver(rng):
    x1 = rng.standard_normal((3, 40))
    x2 = rng.standard_normal((2, 40))
    model = fit_pjdr(x1, x2, 3, standardize=False)
    x = stack_features(x1, x2)
    xc = x - x.mean(axis=1, keepdims=True)
    proj_var = np.var(model.theta @ xc, axis=1, ddof=1)
    ref = np.sort(linalg.eigvals(np.cov(x)).real)[::-1][:3]
    np.testing.assert_allclose(proj_var, ref, rtol=1e-8)
    np.testing.assert_allclose(model.theta @ model.theta.T, np.eye(3), atol=1e-10)


def test_pjdr_permutation_invariant(rng):
    x1 = rng.standard_normal((4, 30))
    x2 = rng.standard_normal((3, 30))
    perm = rng.permutation(30)
    a = fit_pjdr(x1, x2, 3).theta
    b = fit_pjdr(x1[:, perm], x2[:, perm], 3).theta
    np.testing.assert_allclose(np.abs(np.sum(a * b, axis=1)), 1, atol=1e-8)


def test_pjdr_rank_check():
    x = np.ones((2, 5))
    with pytest.raises(ValidationError):
        fit_pjdr(x, x, 3, standardize=False)


def _two_cluster_toy(rng, n=20):
    labels = np.repeat([0, 1], n // 2)
    centers = np.array([[-5.0, 5.0], [0.0, 0.0]])
    x1 = centers[:, labels] + 0.1 * rng.standard_normal((2, n))
    x2 = centers[:, labels] + 0.1 * rng.standard_normal((2, n))
    return x1, x2, labels


def _mean_distances(z, labels):
    stacked = np.concatenate([labels, labels])
    d = np.linalg.norm(z[:, :, None] - z[:, None, :], axis=0)
    same = stacked[:, None] == stacked[None, :]
    off = ~np.eye(len(stacked), dtype=bool)
    return d[same & off].mean(), d[~same].mean()


def test_lusma_separates_clusters(rng):
    x1, x2, labels = _two_cluster_toy(rng)
    model = fit_lusma(x1, x2, 2, k=1, sigma=1.0, standardize=False)
    z = model.theta @ stack_features(x1, x2)
    assert np.all(np.isfinite(z))
    within, between = _mean_distances(z, labels)
    assert between > within


def test_lusma_duplicates_finite(rng):
    x = rng.standard_normal((2, 6))
    x[:, 1] = x[:, 0]
    model = fit_lusma(x, x.copy(), 2, k=2, sigma=1.0)
    assert np.all(np.isfinite(model.theta))


@pytest.mark.parametrize("method", ["lsma", "lusma"])
def test_lpp_eigen_residual(rng, method):
    x1 = rng.standard_normal((4, 30))
    x2 = rng.standard_normal((3, 30))
    labels = np.arange(30) % 3
    if method == "lsma":
        model = fit_lsma(x1, x2, labels, 3)
    else:
        model = fit_lusma(x1, x2, 3, k=5, sigma=2.0)
    a, b = lpp_matrices(model, x1, x2, labels)
    for v, lam in zip(model.theta, model.eigenvalues):
        assert np.linalg.norm(a @ v - lam * b @ v) <= 1e-6 * max(1.0, np.linalg.norm(a @ v))
    # B-orthonormal directions
    np.testing.assert_allclose(model.theta @ b @ model.theta.T, np.eye(3), atol=1e-8)


def test_lsma_pulls_classes_together(rng):
    x1, x2, labels = _two_cluster_toy(rng)
    model = fit_lsma(x1, x2, labels, 1, standardize=False)
    within, between = _mean_distances(model.theta @ stack_features(x1, x2), labels)
    assert within < between


def test_lsma_single_class_skips_trivial_direction(rng):
    # a constant feature in each block spans the null space of X L X^T when all samples share one class
    x1 = np.vstack([np.ones(12), rng.standard_normal((2, 12))])
    x2 = np.vstack([np.ones(12), rng.standard_normal((2, 12))])
    model = fit_lsma(x1, x2, np.zeros(12, int), 2, standardize=False)
    a, _ = lpp_matrices(model, x1, x2, np.zeros(12, int))
    assert np.all(model.eigenvalues > 1e-10)
    assert model.diagnostics["discarded_null"] >= 1
    assert np.all(np.abs(model.theta @ a @ model.theta.T).diagonal() > 1e-10)


def test_lsma_aligns_pairs_better_than_pjdr():
    wins = 0
    for seed in range(10):
        x1, x2, labels, _ = generate(SynthSpec(per_class=50, seed=seed))
        ratios = []
        for model in (fit_lsma(x1, x2, labels, 5), fit_pjdr(x1, x2, 5)):
            z1 = model.transform(x1, 1)
            z2 = model.transform(x2, 2)
            pair = np.linalg.norm(z1 - z2, axis=0).mean()
            spread = np.linalg.norm(np.hstack([z1, z2]) - np.hstack([z1, z2]).mean(axis=1, keepdims=True),
                                    axis=0).mean()
            ratios.append(pair / spread)
        wins += ratios[0] < ratios[1]
    assert wins >= 7
