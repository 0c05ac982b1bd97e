"""Matrix versions of the norms and proxes via the thin SVD.

The norms are unitarily invariant, so each acts on the singular values and
the prox keeps the singular vectors of its argument.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .gauges import ScaledNorm, dual_norm_value, make_profile, norm_value
from .vecprox import SearchMode, SearchResult, prox_vec_info

RANK_THRESHOLD = 1e-9
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def q(self):
        return self.sigma.shape[0]

    def compose(self, sigma=None):
        s = self.sigma if sigma is None else sigma
        return (self.U * s) @ self.V.T

    def check(self, Z=None):
        """Raise AssertionError if the factorization is off by more than 1e-10."""
        eye = np.eye(self.q)
        assert np.linalg.norm(self.U.T @ self.U - eye) <= ORTHO_TOL, "U not orthonormal"
        assert np.linalg.norm(self.V.T @ self.V - eye) <= ORTHO_TOL, "V not orthonormal"
        assert np.all(self.sigma >= 0) and np.all(np.diff(self.sigma) <= 0), "sigma not sorted"
        if Z is not None:
            err = np.linalg.norm(self.compose() - Z)
            assert err <= ORTHO_TOL * max(1.0, np.linalg.norm(Z)), f"reconstruction error {err:.3g}"


def _as_matrix(Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or 0 in Z.shape:
        raise ValueError(f"expected a non-empty 2-D array, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("matrix has non-finite entries")
    return Z


def svd_factors(Z):
    Z = _as_matrix(Z)
    try:
        U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD failed for a {Z.shape[0]}x{Z.shape[1]} matrix "
            f"(Frobenius norm {np.linalg.norm(Z):.6g}): {exc}") from exc
    return SvdFactors(U, s, Vt.T)


def singular_values(Z):
    return np.linalg.svd(_as_matrix(Z), compute_uv=False)


def numerical_rank(X_or_sigma, threshold=RANK_THRESHOLD):
    s = np.asarray(X_or_sigma, dtype=float)
    if s.ndim == 2:
        s = singular_values(s)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > threshold * s[0]))


def _check_rank(spec, shape):
    q = min(shape)
    if spec.r > q:
        raise ValueError(f"r={spec.r} exceeds min(n, m)={q} for a {shape[0]}x{shape[1]} matrix")


def matrix_norm_value(Z, spec):
    Z = _as_matrix(Z)
    _check_rank(spec, Z.shape)
    return norm_value(make_profile(singular_values(Z)), spec)


def matrix_dual_norm_value(Z, spec):
    Z = _as_matrix(Z)
    _check_rank(spec, Z.shape)
    return dual_norm_value(make_profile(singular_values(Z)), spec)


@dataclass(frozen=True)
class MatrixProxResult:
    X: np.ndarray
    factors: SvdFactors
    sigma_out: np.ndarray
    search: SearchResult
    numerical_rank: int


def matrix_prox_info(Z, f, mode=SearchMode.BINARY_SEARCH, rank_threshold=RANK_THRESHOLD,
                     debug=False):
    Z = _as_matrix(Z)
    _check_rank(f.spec, Z.shape)
    fac = svd_factors(Z)
    if debug:
        fac.check(Z)
    res = prox_vec_info(fac.sigma, f, mode, debug=debug)
    s_out = res.x
    X = fac.compose(s_out)
    return MatrixProxResult(X, fac, s_out, res, numerical_rank(s_out, rank_threshold))


def matrix_prox(Z, f, mode=SearchMode.BINARY_SEARCH):
    """``U diag(prox_f(sigma)) V^T`` for the thin SVD ``Z = U diag(sigma) V^T``."""
    return matrix_prox_info(Z, f, mode).X


def project_epigraph_vec(z, t, spec, mode=SearchMode.BINARY_SEARCH):
    """Projection of (z, t) onto {(x, s) : N(x) <= s}."""
    z = np.asarray(z, dtype=float)
    t = float(t)
    p = make_profile(z)
    n = norm_value(p, spec)
    if n <= t:
        return z.copy(), t
    g = dual_norm_value(p, spec)
    if g <= -t:
        # (z, t) lies in the polar cone
        return np.zeros_like(z), 0.0

    def excess(lam):
        if lam == 0:
            return n - t
        x = prox_vec_info(z, ScaledNorm(spec, lam), mode).x
        return norm_value(make_profile(x), spec) - t - lam

    hi = g + abs(t)
    lam = brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    x = prox_vec_info(z, ScaledNorm(spec, max(lam, 1e-300)), mode).x
    return x, t + lam


def project_epigraph(Z, t, spec, mode=SearchMode.BINARY_SEARCH):
    Z = _as_matrix(Z)
    _check_rank(spec, Z.shape)
    fac = svd_factors(Z)
    s_out, level = project_epigraph_vec(fac.sigma, t, spec, mode)
    return fac.compose(s_out), level


def certify_matrix_prox(Z, X, f, tol=None):
    """Matrix-level prox certificate, from singular values of X and Z - X."""
    from .oracle import CERT_TOL, Certificate

    tol = CERT_TOL if tol is None else tol
    Z = _as_matrix(Z)
    X = _as_matrix(X)
    Y = Z - X
    spec = f.spec
    g = dual_norm_value(make_profile(singular_values(Y)), spec)
    n = norm_value(make_profile(singular_values(X)), spec)
    pairing = float(np.sum(Y * X))
    bound, target = (f.gamma * n, f.gamma * n * n) if f.squared else (f.gamma, f.gamma * n)
    scale = max(1.0, float(np.linalg.norm(Z)))
    dual_res = max(0.0, g - bound)
    align_res = abs(pairing - target) / scale
    ok = dual_res <= tol * scale and align_res <= tol * scale
    return Certificate(dual_res, align_res, bool(ok), tol, scale)


def random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def random_low_rank(n, m, r, rng):
    return rng.standard_normal((n, r)) @ rng.standard_normal((r, m))

