import numpy as np
import pytest

from lrin.gauges import Flavor, NormSpec, ScaledNorm
from lrin.matprox import matrix_prox, random_low_rank
from lrin.solvers import (ProblemKind, ProblemSpec, ProxOracle, SolverConfig, SolverDivergence,
                          affine_oracle, box_quadratic_oracle, douglas_rachford, identity_oracle,
                          norm_oracle, observation_residual, prox_gradient, quadratic_oracle,
                          random_rls_problem, solve_douglas_rachford, solve_matrix_completion,
                          solve_prox_gradient)
from lrin.streams import stream

FRO = Flavor.FROBENIUS_R
SPEC = Flavor.SPECTRAL_R


def f(flavor, r, gamma=1.0, squared=False):
    return ScaledNorm(NormSpec(flavor, r), gamma, squared)


def rel(a, b):
    return np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b))


@pytest.mark.parametrize("fn", [f(FRO, 2, 0.8), f(SPEC, 2, 0.8), f(FRO, 1, 0.5, True),
                                f(SPEC, 3, 0.3, True)])
def test_one_prox_problem(fn):
    Z = stream(0, "one-prox").standard_normal((6, 5)) * 2
    P = ProblemSpec(ProblemKind.REGULARIZED_LEAST_SQUARES, Z, fn)
    target = matrix_prox(Z, fn)
    x_pg, rep = solve_prox_gradient(P)
    x_dr, rep_dr = solve_douglas_rachford(P)
    assert rep.converged and rep_dr.converged
    assert rel(x_pg, target) <= 1e-6
    assert rel(x_dr, target) <= 1e-6


def test_plain_gradient_descent():
    M = np.arange(6.0).reshape(2, 3)
    grad = lambda X: X - M
    x, rep = prox_gradient(grad, 2.0, identity_oracle(), np.zeros_like(M), SolverConfig(tol=1e-13))
    assert rep.converged
    np.testing.assert_allclose(x, M, atol=1e-11)


def test_prox_gradient_composite_residual():
    p = random_rls_problem(3)
    cfg = SolverConfig(tol=1e-9)
    x, rep = solve_prox_gradient(p, cfg)
    assert rep.fixed_point_residual <= 10 * cfg.tol
    assert rep.iterations >= 1 and rep.wall_time_ms >= 0


def test_prox_gradient_monotone_without_acceleration():
    for seed in range(5):
        p = random_rls_problem(seed)
        x, rep = solve_prox_gradient(p, SolverConfig(keep_trace=True))
        obj = [o for o, _ in rep.trace]
        assert all(b <= a + 1e-12 for a, b in zip(obj, obj[1:]))


def test_acceleration_same_solution_fewer_iterations():
    wins = 0
    for seed in range(20):
        p = random_rls_problem(seed)
        x0, r0 = solve_prox_gradient(p)
        x1, r1 = solve_prox_gradient(p, SolverConfig(accelerate=True))
        assert rel(x1, x0) <= 1e-6
        wins += r1.iterations < r0.iterations
    assert wins >= 16


def test_pg_dr_agree():
    for seed in range(15):
        p = random_rls_problem(seed)
        assert rel(solve_douglas_rachford(p)[0], solve_prox_gradient(p)[0]) <= 1e-5


def test_prox_gradient_max_iter_flagged():
    p = random_rls_problem(0)
    x, rep = solve_prox_gradient(p, SolverConfig(max_iter=2))
    assert not rep.converged and rep.iterations == 2


def test_prox_gradient_rejects_bad_L():
    with pytest.raises(ValueError):
        prox_gradient(lambda X: X, 0.0, identity_oracle(), np.zeros((2, 2)))


def test_dr_identity_second_prox():
    M = np.array([[1.0, -2.0], [0.5, 3.0]])
    x, rep = douglas_rachford(quadratic_oracle(M), identity_oracle(), np.zeros((2, 2)),
                              cfg=SolverConfig(tol=1e-12))
    assert rep.converged
    np.testing.assert_allclose(x, M, atol=1e-9)


def test_dr_same_affine_set_one_iteration():
    M = np.ones((3, 3))
    W = np.eye(3, dtype=bool)
    A = affine_oracle(M, W)
    x, rep = douglas_rachford(A, A, np.zeros((3, 3)), alpha=1.0)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_array_equal(x[W], M[W])


def test_dr_argument_checks():
    A = identity_oracle()
    with pytest.raises(ValueError):
        douglas_rachford(A, A, np.zeros(2), gamma=0.0)
    for alpha in (0.0, 2.0):
        with pytest.raises(ValueError):
            douglas_rachford(A, A, np.zeros(2), alpha=alpha)


def test_dr_divergence_detected():
    expand = ProxOracle(lambda y, step: 3.0 * y + 1.0, name="expansive")
    with pytest.raises(SolverDivergence):
        douglas_rachford(identity_oracle(), expand, np.ones((2, 2)), alpha=1.5)


def test_completion_fully_observed():
    M = stream(1, "full").standard_normal((4, 5))
    P = ProblemSpec(ProblemKind.MATRIX_COMPLETION, M, f(FRO, 2, 1.0, True))
    X, rep = solve_matrix_completion(P)
    assert np.array_equal(X, M) and rep.iterations == 1


def test_completion_rank_one_entry():
    recovered = 0
    for seed in range(10):
        rng = stream(seed, "rank-one-completion")
        u, v = rng.standard_normal(4), rng.standard_normal(4)
        M = np.outer(u, v)
        W = np.ones((4, 4), dtype=bool)
        i, j = (int(k) for k in rng.integers(0, 4, size=2))
        W[i, j] = False
        P = ProblemSpec(ProblemKind.MATRIX_COMPLETION, M, f(FRO, 1, 1.0, True), mask=W)
        X, rep = solve_matrix_completion(P, SolverConfig(gamma=0.1, alpha=1.5))
        assert observation_residual(P, X) == 0.0
        recovered += abs(X[i, j] - M[i, j]) <= 1e-6
    assert recovered >= 8


def test_completion_exact_on_observations():
    rng = stream(2, "completion-test")
    M = random_low_rank(12, 10, 2, rng)
    W = rng.random(M.shape) < 0.7
    P = ProblemSpec(ProblemKind.MATRIX_COMPLETION, M, f(FRO, 2, 1.0, True), mask=W)
    X, rep = solve_matrix_completion(P, SolverConfig(gamma=0.1, alpha=1.5, max_iter=5000))
    assert observation_residual(P, X) == 0.0
    assert rep.numerical_rank >= 1


def test_box_problem():
    rng = stream(3, "box")
    M = rng.standard_normal((5, 5)) * 3
    P = ProblemSpec(ProblemKind.BOX_CONSTRAINED_LOW_RANK_APPROX, M, f(SPEC, 2, 0.5, True),
                    bounds=(-1.0, 1.0))
    x, rep = solve_douglas_rachford(P)
    assert rep.converged
    assert np.all(x >= -1.0) and np.all(x <= 1.0)
    with pytest.raises(ValueError):
        ProblemSpec(ProblemKind.BOX_CONSTRAINED_LOW_RANK_APPROX, M, f(SPEC, 2))


def test_oracles_firmly_nonexpansive():
    rng = stream(4, "nonexpansive")
    M = rng.standard_normal((4, 4))
    W = rng.random((4, 4)) < 0.5
    for oracle in (affine_oracle(M, W), quadratic_oracle(M, W), box_quadratic_oracle(M, -1, 1),
                   norm_oracle(f(FRO, 2, 0.7)), norm_oracle(f(SPEC, 1, 0.4, True))):
        for _ in range(20):
            a, b = rng.standard_normal((2, 4, 4)) * 3
            pa, pb = oracle(a, 0.8), oracle(b, 0.8)
            assert np.sum((pa - pb) ** 2) <= np.sum((pa - pb) * (a - b)) + 1e-10


def test_problem_validation():
    M = np.ones((3, 3))
    with pytest.raises(ValueError):
        ProblemSpec(ProblemKind.MATRIX_COMPLETION, M, f(FRO, 1), mask=np.zeros((3, 3), dtype=bool))
    with pytest.raises(ValueError):
        ProblemSpec(ProblemKind.REGULARIZED_LEAST_SQUARES, M, f(FRO, 1), mask=[[5, 0]])
    with pytest.raises(ValueError):
        ProblemSpec(ProblemKind.BOX_CONSTRAINED_LOW_RANK_APPROX, M, f(FRO, 1), bounds=(1.0, 0.0))
    with pytest.raises(ValueError):
        ProblemSpec(ProblemKind.REGULARIZED_LEAST_SQUARES, M, f(FRO, 4))
    P = ProblemSpec("completion", M, f(FRO, 1), mask=[[0, 0], [1, 2]])
    assert P.observed.sum() == 2
    with pytest.raises(ValueError):
        solve_prox_gradient(P)
    with pytest.raises(ValueError):
        P.gradient(M)


def test_report_dict():
    p = random_rls_problem(1)
    _, rep = solve_prox_gradient(p, SolverConfig(keep_trace=True))
    d = rep.as_dict()
    assert set(d) == {"objective", "fixed_point_residual", "iterations", "numerical_rank",
                      "wall_time_ms", "converged"}
    assert len(rep.trace) == rep.iterations
