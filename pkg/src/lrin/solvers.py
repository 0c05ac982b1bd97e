"""Proximal gradient and Douglas-Rachford splitting, plus problem templates."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .gauges import Flavor, NormSpec, ScaledNorm
from .matprox import RANK_THRESHOLD, matrix_prox, numerical_rank, random_low_rank
from .streams import stream
from .vecprox import SearchMode

log = logging.getLogger(__name__)


class SolverDivergence(RuntimeError):
    """Douglas-Rachford residual blew up past the divergence factor."""


@dataclass
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 100_000
    accelerate: bool = False
    gamma: float = 1.0
    alpha: float = 1.0
    rank_threshold: float = RANK_THRESHOLD
    keep_trace: bool = False
    divergence_factor: float = 1e6
    mode: SearchMode = SearchMode.BINARY_SEARCH


@dataclass
class SolverReport:
    objective: float
    fixed_point_residual: float
    iterations: int
    numerical_rank: int
    wall_time_ms: float
    converged: bool
    trace: list | None = None

    def as_dict(self):
        d = {
            "objective": self.objective,
            "fixed_point_residual": self.fixed_point_residual,
            "iterations": self.iterations,
            "numerical_rank": self.numerical_rank,
            "wall_time_ms": self.wall_time_ms,
            "converged": self.converged,
        }
        return d


class ProxOracle:
    """``(point, step) -> prox_{step * h}(point)`` for some convex h."""

    def __init__(self, fn, is_indicator=False, name="prox"):
        self.fn = fn
        self.is_indicator = is_indicator
        self.name = name

    def __call__(self, point, step=1.0):
        return self.fn(point, step)

    def __repr__(self):
        return f"ProxOracle({self.name}, is_indicator={self.is_indicator})"


def identity_oracle():
    return ProxOracle(lambda y, step: np.array(y, dtype=float, copy=True), name="zero")


def norm_oracle(f, mode=SearchMode.BINARY_SEARCH):
    """Prox of ``step * f`` for a ScaledNorm f, lifted through the SVD."""

    def fn(Y, step):
        return matrix_prox(Y, ScaledNorm(f.spec, f.gamma * step, f.squared), mode)

    return ProxOracle(fn, name=f"norm[{f.spec.flavor.value},r={f.spec.r}]")


def _mask_array(mask, shape):
    if mask is None:
        return np.ones(shape, dtype=bool)
    mask = np.asarray(mask)
    if mask.dtype == bool:
        if mask.shape != shape:
            raise ValueError(f"mask shape {mask.shape} != data shape {shape}")
        return mask
    out = np.zeros(shape, dtype=bool)
    idx = np.asarray(mask, dtype=int).reshape(-1, 2)
    if idx.size and (idx.min() < 0 or np.any(idx.max(axis=0) >= shape)):
        raise ValueError("mask index out of range")
    out[idx[:, 0], idx[:, 1]] = True
    return out


def affine_oracle(M, mask):
    """Projection onto {X : X = M on the mask}: overwrite observed entries."""
    M = np.asarray(M, dtype=float)
    W = _mask_array(mask, M.shape)

    def fn(Y, step):
        X = np.array(Y, dtype=float, copy=True)
        X[W] = M[W]
        return X

    return ProxOracle(fn, is_indicator=True, name="observations")


def quadratic_oracle(M, mask=None):
    """Prox of ``1/2 ||P_mask(X - M)||_F^2``."""
    M = np.asarray(M, dtype=float)
    W = _mask_array(mask, M.shape)

    def fn(Y, step):
        X = np.array(Y, dtype=float, copy=True)
        X[W] = (Y[W] + step * M[W]) / (1.0 + step)
        return X

    return ProxOracle(fn, name="masked-quadratic")


def box_quadratic_oracle(M, lo, hi):
    """Prox of ``1/2 ||X - M||_F^2`` plus the indicator of lo <= X <= hi."""
    M = np.asarray(M, dtype=float)

    def fn(Y, step):
        return np.clip((Y + step * M) / (1.0 + step), lo, hi)

    return ProxOracle(fn, is_indicator=False, name="box-quadratic")


def _rel_change(new, old):
    return float(np.linalg.norm(new - old)) / max(1.0, float(np.linalg.norm(old)))


def _trailing_monotone(trace, window=50):
    res = [r for _, r in trace[-window:]]
    return all(b <= a for a, b in zip(res, res[1:]))


def prox_gradient(grad_f, L, g, x0, cfg=None, objective=None):
    """Minimize f + g with fixed step 1/L, optionally with Nesterov momentum.

    The accelerated variant restarts its momentum whenever the last step
    points against the gradient-mapping direction (adaptive restart).

    Stops when ``||x_{k+1} - x_k|| / max(1, ||x_k||) <= cfg.tol``.  The
    report's ``fixed_point_residual`` is the composite optimality residual
    ``||x - prox_{g/L}(x - grad_f(x)/L)||`` at the returned point.
    """
    cfg = cfg or SolverConfig()
    if not L > 0:
        raise ValueError("Lipschitz constant must be positive")
    t0 = time.perf_counter()
    step = 1.0 / L
    x = np.array(x0, dtype=float, copy=True)
    y = x.copy()
    theta = 1.0
    trace = [] if cfg.keep_trace else None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        x_new = g(y - step * grad_f(y), step)
        change = _rel_change(x_new, x)
        if cfg.accelerate:
            if np.sum((y - x_new) * (x_new - x)) > 0:
                # momentum points uphill: restart it
                theta = 1.0
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            theta = theta_new
        else:
            y = x_new
        x = x_new
        if trace is not None:
            trace.append((objective(x) if objective else float("nan"), change))
        if change <= cfg.tol:
            converged = True
            break
    fp = float(np.linalg.norm(x - g(x - step * grad_f(x), step)))
    if not converged:
        log.warning("prox_gradient stopped at max_iter=%d (change %.3g)", cfg.max_iter, change)
    if trace and len(trace) >= 50 and not _trailing_monotone(trace):
        log.warning("prox_gradient residual not monotone over the last 50 iterations")
    report = SolverReport(
        objective=objective(x) if objective else float("nan"),
        fixed_point_residual=fp,
        iterations=it,
        numerical_rank=numerical_rank(x, cfg.rank_threshold),
        wall_time_ms=1e3 * (time.perf_counter() - t0),
        converged=converged,
        trace=trace,
    )
    return x, report


def douglas_rachford(proxA, proxB, z0, gamma=1.0, alpha=1.0, cfg=None, objective=None):
    """Douglas-Rachford splitting for min A + B.

    x = proxA(z); y = proxB(2x - z); z += alpha (y - x).  Stops once
    ``||y - x|| <= cfg.tol * max(1, ||x||)``; the solution is proxA(z) at the
    final z.
    """
    cfg = cfg or SolverConfig()
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not 0 < alpha < 2:
        raise ValueError("relaxation alpha must lie in (0, 2)")
    t0 = time.perf_counter()
    z = np.array(z0, dtype=float, copy=True)
    trace = [] if cfg.keep_trace else None
    converged = False
    res0 = None
    res = float("inf")
    it = 0
    for it in range(1, cfg.max_iter + 1):
        x = proxA(z, gamma)
        y = proxB(2.0 * x - z, gamma)
        diff = y - x
        res = float(np.linalg.norm(diff))
        if res0 is None:
            res0 = res
        elif res > cfg.divergence_factor * max(res0, np.finfo(float).tiny):
            raise SolverDivergence(
                f"Douglas-Rachford diverging at iteration {it}: residual {res:.3g} "
                f"vs initial {res0:.3g} (gamma={gamma}, alpha={alpha})")
        z = z + alpha * diff
        if trace is not None:
            trace.append((objective(x) if objective else float("nan"), res))
        if res <= cfg.tol * max(1.0, float(np.linalg.norm(x))):
            converged = True
            break
    sol = proxA(z, gamma)
    if not converged:
        log.warning("douglas_rachford stopped at max_iter=%d (residual %.3g)", cfg.max_iter, res)
    if trace and len(trace) >= 50 and not _trailing_monotone(trace):
        log.warning("douglas_rachford residual not monotone over the last 50 iterations")
    report = SolverReport(
        objective=objective(sol) if objective else float("nan"),
        fixed_point_residual=res,
        iterations=it,
        numerical_rank=numerical_rank(sol, cfg.rank_threshold),
        wall_time_ms=1e3 * (time.perf_counter() - t0),
        converged=converged,
        trace=trace,
    )
    return sol, report


# --------------------------------------------------------------------------
# problem templates


class ProblemKind(enum.Enum):
    MATRIX_COMPLETION = "completion"
    BOX_CONSTRAINED_LOW_RANK_APPROX = "box"
    REGULARIZED_LEAST_SQUARES = "rls"


@dataclass
class ProblemSpec:
    """A low-rank problem over an n x m data matrix.

    completion  min f(X)  s.t. X = M on the mask
    rls         min 1/2 ||P_mask(X - M)||^2 + f(X)   (mask None = all entries)
    box         min 1/2 ||X - M||^2 + f(X)  s.t. lo <= X <= hi
    """

    kind: ProblemKind
    M: np.ndarray
    norm: ScaledNorm
    mask: np.ndarray | None = None
    bounds: tuple | None = None
    _W: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.kind = ProblemKind(self.kind)
        self.M = np.asarray(self.M, dtype=float)
        if self.M.ndim != 2:
            raise ValueError("data must be a matrix")
        self.norm.spec.check_dim(min(self.M.shape))
        self._W = _mask_array(self.mask, self.M.shape)
        if self.kind is ProblemKind.MATRIX_COMPLETION and not self._W.any():
            raise ValueError("observation set is empty")
        if self.bounds is not None:
            lo, hi = self.bounds
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError("box bounds need lo <= hi")
        elif self.kind is ProblemKind.BOX_CONSTRAINED_LOW_RANK_APPROX:
            raise ValueError("box problem needs bounds")

    @property
    def observed(self):
        return self._W

    def objective(self, X):
        reg = self.norm(np.linalg.svd(X, compute_uv=False))
        if self.kind is ProblemKind.MATRIX_COMPLETION:
            return reg
        if self.kind is ProblemKind.REGULARIZED_LEAST_SQUARES:
            R = np.where(self._W, X - self.M, 0.0)
        else:
            R = X - self.M
        return 0.5 * float(np.sum(R * R)) + reg

    def gradient(self, X):
        if self.kind is ProblemKind.MATRIX_COMPLETION:
            raise ValueError("completion has no smooth part; use Douglas-Rachford")
        if self.kind is ProblemKind.REGULARIZED_LEAST_SQUARES:
            return np.where(self._W, X - self.M, 0.0)
        return X - self.M

    def smooth_oracle(self):
        if self.kind is ProblemKind.MATRIX_COMPLETION:
            return affine_oracle(self.M, self._W)
        if self.kind is ProblemKind.REGULARIZED_LEAST_SQUARES:
            return quadratic_oracle(self.M, self._W)
        lo, hi = self.bounds
        return box_quadratic_oracle(self.M, lo, hi)


def solve_douglas_rachford(problem, cfg=None, z0=None):
    cfg = cfg or SolverConfig()
    z0 = np.zeros_like(problem.M) if z0 is None else z0
    return douglas_rachford(problem.smooth_oracle(), norm_oracle(problem.norm, cfg.mode), z0,
                            cfg.gamma, cfg.alpha, cfg, objective=problem.objective)


def solve_prox_gradient(problem, cfg=None, x0=None):
    cfg = cfg or SolverConfig()
    if problem.kind is not ProblemKind.REGULARIZED_LEAST_SQUARES:
        raise ValueError("prox_gradient template covers regularized least squares only")
    x0 = np.zeros_like(problem.M) if x0 is None else x0
    return prox_gradient(problem.gradient, 1.0, norm_oracle(problem.norm, cfg.mode), x0, cfg,
                         objective=problem.objective)


def solve_matrix_completion(problem, cfg=None):
    """Douglas-Rachford on observation overwrite + norm prox.

    A fully observed problem has the single feasible point M and returns it
    after one iteration.
    """
    cfg = cfg or SolverConfig()
    if problem.kind is not ProblemKind.MATRIX_COMPLETION:
        raise ValueError("expected a matrix completion problem")
    if problem.observed.all():
        t0 = time.perf_counter()
        X = problem.M.copy()
        rep = SolverReport(problem.objective(X), 0.0, 1, numerical_rank(X, cfg.rank_threshold),
                           1e3 * (time.perf_counter() - t0), True, [] if cfg.keep_trace else None)
        return X, rep
    return solve_douglas_rachford(problem, cfg)


def observation_residual(problem, X):
    W = problem.observed
    return float(np.max(np.abs(X[W] - problem.M[W]), initial=0.0))


def random_rls_problem(seed, n_range=(4, 10), observed=0.7):
    """Seeded masked least-squares problem with a squared-norm regularizer.

    The squared norms dominate a multiple of ||X||_F^2, so the objective is
    strongly convex and the minimizer is unique even where entries are
    unobserved.
    """
    rng = stream(seed, "rls")
    n, m = (int(v) for v in rng.integers(n_range[0], n_range[1] + 1, size=2))
    r = int(rng.integers(1, max(1, min(n, m) // 2) + 1))
    flavor = Flavor.FROBENIUS_R if rng.random() < 0.5 else Flavor.SPECTRAL_R
    gamma = float(10.0 ** rng.uniform(-1.0, 0.5))
    M = rng.standard_normal((n, m))
    W = rng.random((n, m)) < observed
    return ProblemSpec(ProblemKind.REGULARIZED_LEAST_SQUARES, M,
                       ScaledNorm(NormSpec(flavor, r), gamma, True), mask=W)


def completion_instance(seed, n=20, m=20, rank=2, observed=0.7):
    """Gaussian rank-``rank`` matrix and an i.i.d. Bernoulli(observed) mask."""
    rng = stream(seed, "completion")
    M = random_low_rank(n, m, rank, rng)
    W = rng.random((n, m)) < observed
    if not W.any():
        W[0, 0] = True
    return M, W
