import numpy as np
import pytest

from adanapg.core import RandomStream
from adanapg.problems import (LassoToyProblem, LogisticProblem, ParamEstimationProblem,
                              load_sparse_dataset, make_covariance, make_lasso_toy, make_logistic,
                              make_param_estimation, power_iteration)
from adanapg.prox import gradient_mapping


def mc_agrees(problem, x, m, seed=0, sigmas=6.0):
    draws = problem.sample_gradients(x, m, RandomStream(seed, 0))
    se = draws.std(axis=0, ddof=1) / np.sqrt(m)
    err = np.abs(draws.mean(axis=0) - problem.full_gradient(x))
    return np.all(err <= sigmas * se + 1e-12)


def central_difference(fun, x, h=1e-6):
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


# -- logistic ------------------------------------------------------------------------

def test_logistic_sample_at_origin():
    p = make_logistic(n_samples=30, dim=4, lambda1=0.0, lambda2=0.0, seed=1)
    idx = np.arange(30)
    got = p.example_gradients(np.zeros(4), idx)
    assert np.allclose(got, -(p.labels / 2)[:, None] * p.features, atol=1e-15)


def test_logistic_unbiased():
    p = make_logistic(seed=3)
    x = RandomStream(9, 0).generator.standard_normal(p.dim)
    assert mc_agrees(p, x, 10_000)


def test_logistic_single_row_is_exact():
    p = LogisticProblem(np.array([[1.0, -2.0]]), np.array([1.0]), lambda1=0.1)
    x = np.array([0.3, 0.4])
    draws = p.sample_gradients(x, 5, RandomStream(0, 0))
    assert np.allclose(draws, p.full_gradient(x), atol=1e-15)


def test_logistic_gradient_finite_differences():
    p = make_logistic(seed=4)
    g = np.random.default_rng(0)
    for _ in range(10):
        x = g.standard_normal(p.dim)
        fd = central_difference(p.smooth_value, x)
        ex = p.full_gradient(x)
        assert np.linalg.norm(fd - ex) <= 1e-6 * max(np.linalg.norm(ex), 1e-3)


def test_logistic_regularizer_dominates():
    p = make_logistic(lambda1=1e6, seed=0)
    x = np.ones(p.dim) / np.sqrt(p.dim)
    g = p.full_gradient(x)
    assert np.linalg.norm(g - 1e6 * x) <= 0.01 * 1e6


def test_logistic_symmetric_data_zero_gradient():
    Y = np.array([[1.0, 2.0], [1.0, 2.0], [-3.0, 0.5], [-3.0, 0.5]])
    z = np.array([1.0, -1.0, 1.0, -1.0])
    assert np.allclose(LogisticProblem(Y, z).full_gradient(np.zeros(2)), 0.0, atol=1e-15)


def test_logistic_value_stable_for_large_margins():
    p = LogisticProblem(np.array([[1.0]]), np.array([1.0]))
    assert np.isfinite(p.smooth_value(np.array([-1e4])))
    assert p.smooth_value(np.array([1e4])) == 0.0


def test_logistic_constants():
    p = make_logistic(n_samples=200, dim=20, seed=0)
    Y = p.features
    expected = 0.25 * np.linalg.eigvalsh(Y.T @ Y / 200)[-1] + 1 / 200
    assert p.lipschitz == pytest.approx(expected, rel=1e-12)
    assert p.mu == 1 / 200 and p.regularizer.lam1 == 1 / 200


def test_logistic_validation():
    with pytest.raises(ValueError):
        LogisticProblem(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        LogisticProblem(np.ones((2, 2)), np.array([1.0, 2.0]))


def test_multinomial_batches_are_unbiased():
    p = make_logistic(n_samples=20, dim=3, seed=0)
    x = np.ones(3)
    means = []
    for r in range(300):
        atoms, w = p.draw(x, 500, RandomStream(4, r))
        means.append((w @ atoms) / 500)
    means = np.array(means)
    se = means.std(axis=0, ddof=1) / np.sqrt(300)
    assert np.all(np.abs(means.mean(axis=0) - p.full_gradient(x)) <= 6 * se)


# -- parameter estimation --------------------------------------------------------------

def test_param_estimation_unbiased():
    p = make_param_estimation(dim=4, condition_number=5, sigma_v=0.7, seed=2)
    assert mc_agrees(p, np.ones(4), 10_000)


def test_param_estimation_zero_at_planted_without_noise():
    p = make_param_estimation(dim=3, sigma_v=0.0, seed=0)
    draws = p.sample_gradients(p.x_planted, 50, RandomStream(0, 0))
    assert np.max(np.abs(draws)) <= 1e-12


def test_param_estimation_scalar_example():
    p = ParamEstimationProblem(np.eye(1), np.zeros(1), sigma_v=0.0)
    draws = p.sample_gradients(np.ones(1), 100_000, RandomStream(1, 0))[:, 0]
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - 2.0) <= 5 * se


def test_param_estimation_constants_and_value():
    p = make_param_estimation(dim=5, condition_number=8, sigma_v=0.3, seed=1)
    eig = np.linalg.eigvalsh(p.covariance)
    assert p.mu == pytest.approx(2 * eig[0]) and p.lipschitz == pytest.approx(2 * eig[-1])
    assert p.lipschitz / p.mu == pytest.approx(8.0)
    g = np.random.default_rng(0)
    for _ in range(100):
        x = 3 * g.standard_normal(5)
        d = x - p.x_planted
        assert p.smooth_value(x) - 0.09 >= p.mu / 2 * (d @ d) - 1e-12
        assert np.allclose(p.full_gradient(x), 2 * p.covariance @ d)


def test_param_estimation_rejects_indefinite():
    with pytest.raises(ValueError):
        ParamEstimationProblem(np.diag([1.0, -1.0]), np.zeros(2))


def test_make_covariance_spectrum():
    R = make_covariance(6, condition_number=100.0, largest=2.0, seed=3)
    eig = np.linalg.eigvalsh(R)
    assert eig[-1] == pytest.approx(2.0) and eig[0] == pytest.approx(0.02)


# -- lasso toy --------------------------------------------------------------------------

def test_lasso_toy_closed_form_is_optimal():
    p = make_lasso_toy(dim=7, lam=1.0, seed=4)
    g = gradient_mapping(p, p.x_star, p.full_gradient(p.x_star), 1.0)
    assert np.linalg.norm(g) <= 1e-10
    assert np.any(p.x_star == 0)  # some coordinates are thresholded away


def test_lasso_toy_unbiased():
    p = make_lasso_toy(dim=3, noise_std=2.0, seed=0)
    assert mc_agrees(p, np.zeros(3), 10_000)


def test_lasso_toy_requires_orthogonal_design():
    with pytest.raises(ValueError):
        LassoToyProblem(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2), 0.5)


# -- dataset loading ---------------------------------------------------------------------

def test_load_csv_fixture(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("a,b,label\n1.5,-2,1\n0,3.25,0\n")
    p = load_sparse_dataset(f, lambda1=0.1, lambda2=0.2)
    assert np.array_equal(p.features, [[1.5, -2.0], [0.0, 3.25]])
    assert np.array_equal(p.labels, [1.0, -1.0])
    assert p.lambda1 == 0.1 and p.regularizer.lam1 == 0.2


def test_load_svmlight_fixture(tmp_path):
    f = tmp_path / "d.svm"
    f.write_text("+1 1:0.5 3:2\n-1 2:1.0\n")
    p = load_sparse_dataset(f)
    assert np.array_equal(p.features, [[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]])
    assert np.array_equal(p.labels, [1.0, -1.0])


def test_power_iteration_lipschitz(tmp_path):
    # rows chosen so Y^T Y / N = diag(4, 1)
    f = tmp_path / "diag.csv"
    f.write_text("2.8284271247461903,0,1\n0,1.4142135623730951,-1\n")
    p = load_sparse_dataset(f, lambda1=0.05)
    assert p.lipschitz == pytest.approx(0.25 * 4 + 0.05, abs=1e-4)
    assert power_iteration(np.diag([4.0, 1.0])) == pytest.approx(4.0, abs=1e-4)


def test_loader_reports_line_numbers(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1,2,1\n3,x,0\n")
    with pytest.raises(ValueError, match="line 2"):
        load_sparse_dataset(f)
    g = tmp_path / "lab.csv"
    g.write_text("1,2,1\n3,4,5\n")
    with pytest.raises(ValueError, match="line 2"):
        load_sparse_dataset(g)
    h = tmp_path / "bad.svm"
    h.write_text("1 0:1.0\n")
    with pytest.raises(ValueError, match="line 1"):
        load_sparse_dataset(h)
