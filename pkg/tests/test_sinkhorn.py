import numpy as np
import pytest

from attnlab.attention import dnas_weights
from attnlab.sinkhorn import ds_residual, sinkhorn_run, transport_objective, unas_closed_form
from attnlab.tensor_core import row_softmax

P_STAR = 1 / (1 + np.sqrt(3))


def _sinkhorn_oracle(K, iters):
    # plain alternating scaling on the raw kernel, independent of the library path
    P = np.array(K, dtype=float)
    for _ in range(iters):
        P = P / P.sum(axis=0, keepdims=True)
        P = P / P.sum(axis=1, keepdims=True)
    return P


def test_zero_logits_one_iteration(backend):
    rep = sinkhorn_run(np.zeros((4, 4)))
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_array_equal(rep.final, 0.25)


def test_two_by_two_limit(backend, z_rational):
    rep = sinkhorn_run(z_rational, max_iters=1000, tol=1e-13)
    limit = np.array([[P_STAR, 1 - P_STAR], [1 - P_STAR, P_STAR]])
    np.testing.assert_allclose(rep.final, limit, atol=1e-8)
    np.testing.assert_allclose(_sinkhorn_oracle([[1, 3], [2, 2]], 1000), limit, atol=1e-12)
    p = rep.final[0, 0]
    assert (p / (1 - p)) ** 2 == pytest.approx(1 / 3, abs=1e-10)


def test_rank_one_columns_become_uniform():
    rep = sinkhorn_run([[25.0, 0.0], [25.0, 0.0]], tol=1e-12)
    np.testing.assert_allclose(rep.final, 0.5, atol=1e-12)
    np.testing.assert_allclose(_sinkhorn_oracle(np.exp([[25.0, 0.0], [25.0, 0.0]]), 50), 0.5, atol=1e-12)


def test_first_iteration_is_dnas(backend):
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.normal(scale=3, size=(6, 6))
        assert np.array_equal(sinkhorn_run(z, max_iters=1).final, dnas_weights(z))


def test_random_kernels_converge_monotonically():
    rng = np.random.default_rng(1)
    for _ in range(10):
        z = rng.normal(size=(32, 32))
        rep = sinkhorn_run(z)
        assert rep.converged and rep.iterations <= 1000
        assert ds_residual(rep.final) < 1e-6
        assert all(b <= a for a, b in zip(rep.residual_history, rep.residual_history[1:]))
        np.testing.assert_allclose(rep.final, _sinkhorn_oracle(np.exp(z), rep.iterations), rtol=1e-10)


def test_max_iters_stops_unconverged():
    rep = sinkhorn_run(np.random.default_rng(2).normal(scale=5, size=(8, 8)), max_iters=2, tol=1e-15)
    assert rep.iterations == 2 and not rep.converged and len(rep.residual_history) == 2


@pytest.mark.parametrize("kw", [{"max_iters": 0}, {"tol": 0.0}])
def test_bad_arguments(kw):
    with pytest.raises(ValueError):
        sinkhorn_run(np.zeros((2, 2)), **kw)


def test_transport_objective_examples():
    assert transport_objective(np.full((2, 2), 0.5), np.zeros((2, 2))) == pytest.approx(-np.log(4), abs=1e-15)
    assert transport_objective(np.eye(3), np.zeros((3, 3))) == 0.0


def test_sinkhorn_limit_minimizes_over_ds_family(z_rational):
    final = sinkhorn_run(z_rational, tol=1e-13).final
    grid = np.linspace(1e-6, 1 - 1e-6, 20001)
    family = [transport_objective(np.array([[p, 1 - p], [1 - p, p]]), z_rational) for p in grid]
    best = int(np.argmin(family))
    assert abs(grid[best] - P_STAR) < 1e-4
    assert transport_objective(final, z_rational) <= min(family) + 1e-12
    one_iter = dnas_weights(z_rational)
    assert ds_residual(one_iter) > 1e-2


def test_sinkhorn_limit_beats_sampled_ds_matrices():
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = rng.normal(size=(5, 5))
        best = transport_objective(sinkhorn_run(z, tol=1e-12).final, z)
        for _ in range(50):
            sample = sinkhorn_run(rng.normal(scale=2, size=(5, 5)), tol=1e-12).final
            assert best <= transport_objective(sample, z) + 1e-10


def test_unas_closed_form():
    np.testing.assert_allclose(unas_closed_form(np.zeros((3, 3))), 1 / 3, atol=1e-15)
    z = np.log([[1.0, 3.0], [2.0, 2.0]])
    np.testing.assert_allclose(unas_closed_form(z), [[0.25, 0.75], [0.5, 0.5]], atol=1e-12)
    rng = np.random.default_rng(4)
    for _ in range(10):
        z = rng.normal(scale=2, size=(4, 5))
        p = unas_closed_form(z)
        np.testing.assert_allclose(p, row_softmax(z), atol=1e-12)
        best = transport_objective(p, z)
        samples = rng.dirichlet(np.ones(5), size=(100, 4))
        assert all(best <= transport_objective(s, z) for s in samples)


def test_ds_residual_examples():
    assert ds_residual(np.eye(3)[[2, 0, 1]]) == 0.0
    assert ds_residual([[1.0, 0.0], [1.0, 0.0]]) == 1.0
    assert ds_residual(np.full((4, 4), 0.25)) == 0.0
