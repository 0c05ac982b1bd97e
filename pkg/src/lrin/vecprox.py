"""Vector proximal mappings of the low-rank inducing norms.

Every operation here reduces to one of four problems on the sorted magnitudes
``z_1 >= ... >= z_q >= 0`` whose solution ``w`` has three regions:

    i <= k1          top, shrunk: z_i / (1 + mu)  (l2)   or  z_i - mu  (l1)
    k1 < i <= k2     plateau at a common level t
    i > k2           tail, untouched

with ``upper`` the level at which the shrunk top meets the plateau
(``(1 + mu) t`` for l2 and ``t + mu`` for l1).  The four problems are

    L2Ball   projection onto {sum of r largest w_i^2 <= c^2}
    L1Ball   projection onto {sum of r largest |w_i| <= c}       (Ky Fan r)
    L2Sq     prox of (mu/2) * sum of r largest w_i^2, mu fixed
    L1Sq     prox of (1/(2 gamma)) * (sum of r largest |w_i|)^2

The proxes of the norms follow from these via Moreau decomposition
``prox_f(z) = z - prox_{f*}(z)``: the unsquared norm has the indicator of
the scaled dual ball as conjugate, the squared norm ``(gamma/2) N^2`` has
``(1/(2 gamma)) g^2`` with g the truncated gauge.

A candidate (k1, k2) is accepted when its scalar solve satisfies

    mu >= 0, t >= 0,  z_k1 >= upper >= z_{k1+1},  z_k2 >= t >= z_{k2+1},

which are exactly the KKT conditions.  Enumerate sweeps all candidates.
BinarySearch fixes k1, bisects k2 on the sign of G(t) - H(t) at the
breakpoints (G(t) = sum_{i>k1} (z_i - t)_+ is decreasing, H the increasing
multiplier term), then bisects k1 on ``z_{k1+1} <= upper``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .gauges import Flavor, ScaledNorm, make_profile

log = logging.getLogger(__name__)

FEAS_TOL = 1e-12
GAMMA_FLOOR = 1e-300


class SearchMode(enum.Enum):
    ENUMERATE = "enumerate"
    BINARY_SEARCH = "binary"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower(), m.name.lower().replace("_", "")):
                return m
        raise ValueError(f"unknown search mode {name!r}")


@dataclass(frozen=True)
class CandidateSolution:
    k1: int
    k2: int
    mu: float
    t: float
    feasible: bool
    objective: float = float("nan")
    zero_plateau: bool = False


@dataclass(frozen=True)
class SearchResult:
    """Output of one prox or projection call plus its instrumentation."""

    x: np.ndarray
    candidate: CandidateSolution
    candidate_solves: int
    n_feasible: int = 1
    fallback: bool = False


def count_candidate_solves(result):
    return result.candidate_solves


# --------------------------------------------------------------------------
# per-problem scalar solves


class _Model:
    """Scalar relations of one of the four sorted problems.

    ``z`` is sorted, nonnegative and scaled to max <= 1; ``S1``/``S2`` carry a
    leading zero.
    """

    l2 = True

    def __init__(self, z, r, S1, S2):
        self.z, self.r, self.S1, self.S2 = z, r, S1, S2
        self.q = z.shape[0]

    def upper(self, t, mu):
        return (1.0 + mu) * t if self.l2 else t + mu

    def shrink(self, v, mu):
        return v / (1.0 + mu) if self.l2 else v - mu


class _L2Ball(_Model):
    def __init__(self, z, r, S1, S2, c):
        super().__init__(z, r, S1, S2)
        self.c = c

    def H(self, k1, t):
        m = self.r - k1
        den = self.c * self.c - m * t * t
        if k1 == 0:
            return -math.inf if den >= 0 else math.inf
        if den <= 0:
            return math.inf
        a = math.sqrt(self.S2[k1] / den)
        return m * (a - 1.0) * t

    def solve(self, k1, k2):
        t, mu, zp = self.solve_arrays(np.array([k1]), np.array([k2]))
        return float(t[0]), float(mu[0]), bool(zp[0])

    def solve_arrays(self, K1, K2):
        S1, S2, r, c = self.S1, self.S2, self.r, self.c
        T = S1[K2] - S1[K1]
        d = (K2 - K1).astype(float)
        m = (r - K1).astype(float)
        t = np.empty(K1.shape)
        mu = np.empty(K1.shape)
        head = K1 == 0
        if np.any(head):
            t0 = c / math.sqrt(r)
            t[head] = t0
            mu[head] = (T[head] - d[head] * t0) / (m[head] * t0)
        rest = ~head
        if np.any(rest):
            a = _l2_ball_newton(S2[K1[rest]], T[rest], d[rest], m[rest], c)
            mu[rest] = a - 1.0
            t[rest] = T[rest] / (d[rest] + m[rest] * (a - 1.0))
        return t, mu, np.zeros(K1.shape, dtype=bool)

    def top(self):
        return max(0.0, math.sqrt(self.S2[self.r]) / self.c - 1.0)


def _l2_ball_newton(S2, T, d, m, c):
    """Root a >= 1 of S2/a^2 + m (T/(d + m(a-1)))^2 = c^2.

    F is convex and decreasing in a, so Newton started below the root climbs
    to it monotonically.  Converged entries are frozen.
    """
    S2 = np.asarray(S2, dtype=float)
    c2 = c * c
    with np.errstate(divide="ignore", invalid="ignore"):
        lb1 = np.sqrt(S2) / c
        lb2 = 1.0 + (np.sqrt(m) * T / c - d) / m
    a = np.maximum(1.0, np.maximum(lb1, lb2))
    active = np.ones(a.shape, dtype=bool)
    for _ in range(200):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        aa, Si, Ti, di, mi = a[idx], S2[idx], T[idx], d[idx], m[idx]
        den = di + mi * (aa - 1.0)
        tt = Ti / den
        F = Si / (aa * aa) + mi * tt * tt - c2
        Fp = -2.0 * Si / (aa * aa * aa) - 2.0 * mi * mi * tt * tt / den
        with np.errstate(divide="ignore", invalid="ignore"):
            step = -F / Fp
        nxt = aa + step
        move = (F > 0) & (nxt > aa)
        a[idx] = np.where(move, nxt, aa)
        active[idx[~move | (step <= 4e-16 * aa)]] = False
    return a


class _L2Sq(_Model):
    def __init__(self, z, r, S1, S2, mu):
        super().__init__(z, r, S1, S2)
        self.mu = mu

    def H(self, k1, t):
        return (self.r - k1) * self.mu * t

    def solve(self, k1, k2):
        t, mu, zp = self.solve_arrays(np.array([k1]), np.array([k2]))
        return float(t[0]), float(mu[0]), bool(zp[0])

    def solve_arrays(self, K1, K2):
        T = self.S1[K2] - self.S1[K1]
        d = (K2 - K1).astype(float)
        m = (self.r - K1).astype(float)
        t = T / (d + m * self.mu)
        return t, np.full(K1.shape, self.mu), np.zeros(K1.shape, dtype=bool)

    def top(self):
        return self.mu


class _L1Ball(_Model):
    l2 = False

    def __init__(self, z, r, S1, S2, c):
        super().__init__(z, r, S1, S2)
        self.c = c

    def H(self, k1, t):
        m = self.r - k1
        if k1 == 0:
            return -math.inf if t <= self.c / self.r else math.inf
        lam = (self.S1[k1] + m * t - self.c) / k1
        return m * lam

    def solve(self, k1, k2):
        t, mu, zp = self.solve_arrays(np.array([k1]), np.array([k2]))
        return float(t[0]), float(mu[0]), bool(zp[0])

    def solve_arrays(self, K1, K2):
        S1, r, c, q = self.S1, self.r, self.c, self.q
        T = S1[K2] - S1[K1]
        d = (K2 - K1).astype(float)
        m = (r - K1).astype(float)
        k1f = K1.astype(float)
        t = (k1f * T - m * (S1[K1] - c)) / (m * m + k1f * d)
        lam = (T - d * t) / m
        zp = (t < 0) & (K2 == q) & (K1 > 0)
        if np.any(zp):
            t[zp] = 0.0
            lam[zp] = (S1[K1[zp]] - c) / k1f[zp]
        return t, lam, zp

    def top(self):
        return max(0.0, (self.S1[self.r] - self.c) / self.r)


class _L1Sq(_Model):
    l2 = False

    def __init__(self, z, r, S1, S2, gamma):
        super().__init__(z, r, S1, S2)
        self.gamma = gamma

    def H(self, k1, t):
        m = self.r - k1
        return m * (self.S1[k1] + m * t) / (self.gamma + k1)

    def solve(self, k1, k2):
        t, mu, zp = self.solve_arrays(np.array([k1]), np.array([k2]))
        return float(t[0]), float(mu[0]), bool(zp[0])

    def solve_arrays(self, K1, K2):
        S1, r, g, q = self.S1, self.r, self.gamma, self.q
        T = S1[K2] - S1[K1]
        d = (K2 - K1).astype(float)
        m = (r - K1).astype(float)
        gk = g + K1.astype(float)
        t = (T * gk - m * S1[K1]) / (d * gk + m * m)
        zp = (t < 0) & (K2 == q)
        t = np.where(zp, 0.0, t)
        lam = (S1[K1] + m * t) / gk
        return t, lam, zp

    def top(self):
        return self.S1[self.r] / (self.gamma + self.r)


# --------------------------------------------------------------------------
# candidate acceptance and assembly


def _zz(z, j):
    """Sorted magnitude at 0-based index j, with z_{q+1} = 0."""
    return z[j] if j < z.shape[0] else 0.0


def _feasible_arrays(model, K1, K2, t, mu, zp, tol):
    z, q, S1 = model.z, model.q, model.S1
    u = model.upper(t, mu)
    zpad = np.concatenate(([np.inf], z, [0.0]))
    ok = (mu >= -tol) & (t >= -tol)
    ok &= zpad[K1] >= u - tol  # z_{k1}, +inf when k1 = 0
    ok &= zpad[K1 + 1] <= u + tol  # z_{k1+1}
    ok &= (zpad[K2] >= t - tol) | zp  # z_{k2}
    ok &= zpad[K2 + 1] <= t + tol  # z_{k2+1}, zero past the end
    if np.any(zp):
        m = (model.r - K1).astype(float)
        tail = S1[q] - S1[K1]
        ok &= ~zp | (tail <= m * mu + tol * (1.0 + m))
        ok &= ~zp | (mu >= 0)
    return ok


def _top_feasible(model, mu, tol):
    z, r, q = model.z, model.r, model.q
    wr = model.shrink(z[r - 1], mu)
    ok = mu >= -tol and wr >= _zz(z, r) - tol
    if not model.l2:
        ok = ok and wr >= -tol
    return ok


def _assemble(model, k1, k2, t, mu):
    z = model.z
    w = z.copy()
    if k1 == model.r and k2 == model.r:
        w[:k1] = model.shrink(z[:k1], mu)
    else:
        w[:k1] = model.shrink(z[:k1], mu)
        w[k1:k2] = t
    np.maximum(w, 0.0, out=w)
    np.minimum.accumulate(w, out=w)
    return w


def _single_top_only(model):
    # r == q under an l2 gauge is the plain l2 ball / ridge; q == 1 is a clamp
    return model.q == 1 or (model.l2 and model.r == model.q)


def _enumerate(model, debug):
    z, r, q = model.z, model.r, model.q
    tol = FEAS_TOL
    mu_top = model.top()
    top_ok = _top_feasible(model, mu_top, tol)
    if _single_top_only(model):
        cand = CandidateSolution(r, r, mu_top, 0.0, top_ok)
        return cand, 1, 1
    K1, K2 = np.meshgrid(np.arange(r), np.arange(r, q + 1), indexing="ij")
    K1 = K1.ravel()
    K2 = K2.ravel()
    t, mu, zp = model.solve_arrays(K1, K2)
    ok = _feasible_arrays(model, K1, K2, t, mu, zp, tol)
    solves = K1.shape[0] + 1
    hits = np.flatnonzero(ok)
    n_feas = hits.shape[0] + int(top_ok)
    if hits.shape[0]:
        i = hits[0]
        cand = CandidateSolution(int(K1[i]), int(K2[i]), float(mu[i]), float(t[i]), True,
                                 zero_plateau=bool(zp[i]))
    elif top_ok:
        cand = CandidateSolution(r, r, mu_top, 0.0, True)
    else:
        cand = None
    if debug and n_feas > 1:
        ref = None
        outs = [(int(K1[i]), int(K2[i]), float(t[i]), float(mu[i])) for i in hits]
        if top_ok:
            outs.append((r, r, 0.0, mu_top))
        for k1, k2, tt, mm in outs:
            w = _assemble(model, k1, k2, tt, mm)
            if ref is None:
                ref = w
            assert np.max(np.abs(w - ref)) <= 1e-10, (
                f"accepted candidates disagree: ({k1},{k2}) vs first")
    if cand is None:
        cand = _least_violation(model, K1, K2, t, mu, zp, mu_top)
    return cand, solves, n_feas


def _least_violation(model, K1, K2, t, mu, zp, mu_top):
    z = model.z
    u = model.upper(t, mu)
    zpad = np.concatenate(([np.inf], z, [0.0]))
    viol = np.maximum.reduce([
        np.maximum(-mu, 0), np.maximum(-t, 0),
        np.maximum(u - zpad[K1], 0), np.maximum(zpad[K1 + 1] - u, 0),
        np.where(zp, 0.0, np.maximum(t - zpad[K2], 0)), np.maximum(zpad[K2 + 1] - t, 0),
    ])
    top_v = max(0.0, _zz(z, model.r) - model.shrink(z[model.r - 1], mu_top))
    i = int(np.argmin(viol))
    log.warning("no candidate passed the acceptance window; least violation %.3g",
                min(viol[i], top_v))
    if top_v <= viol[i]:
        return CandidateSolution(model.r, model.r, mu_top, 0.0, False)
    return CandidateSolution(int(K1[i]), int(K2[i]), float(mu[i]), float(t[i]), False,
                             zero_plateau=bool(zp[i]))


def _binary(model):
    z, r, q, S1 = model.z, model.r, model.q, model.S1
    tol = FEAS_TOL
    solves = 0
    mu_top = model.top()
    if _single_top_only(model):
        return CandidateSolution(r, r, mu_top, 0.0, _top_feasible(model, mu_top, tol)), 1

    def above(k1, k2):
        # root t* of G = H lies at or above z_{k2+1}
        tb = _zz(z, k2)
        G = S1[k2] - S1[k1] - (k2 - k1) * tb
        return G >= model.H(k1, tb)

    def inner(k1):
        nonlocal solves
        lo, hi = r - 1, q
        while lo < hi:
            mid = (lo + hi) // 2
            solves += 1
            if above(k1, mid):
                hi = mid
            else:
                lo = mid + 1
        if lo < r:
            return None
        solves += 1
        t, mu, zp = model.solve(k1, lo)
        return (k1, lo, t, mu, zp)

    lo, hi = 0, r
    found = {}
    while lo < hi:
        mid = (lo + hi) // 2
        c = inner(mid)
        if c is not None and z[mid] <= model.upper(c[2], c[3]) + tol:
            hi = mid
            found[mid] = c
        else:
            lo = mid + 1
    if lo == r:
        solves += 1
        return CandidateSolution(r, r, mu_top, 0.0, _top_feasible(model, mu_top, tol)), solves
    k1, k2, t, mu, zp = found[lo]
    ok = bool(_feasible_arrays(model, np.array([k1]), np.array([k2]), np.array([t]),
                               np.array([mu]), np.array([zp]), tol)[0])
    return CandidateSolution(k1, k2, mu, t, ok, zero_plateau=zp), solves


def _search(z_sorted, r, make_model, mode, debug):
    """Run the candidate search on sorted magnitudes; returns (w, cand, solves, n_feas, fb)."""
    q = z_sorted.shape[0]
    zmax = float(z_sorted[0])
    # power-of-two rescale keeps the arithmetic exact under scaling
    e = math.frexp(zmax)[1] if zmax > 0 else 0
    z = np.ldexp(z_sorted, -e)
    S1 = np.concatenate(([0.0], np.cumsum(z)))
    S2 = np.concatenate(([0.0], np.cumsum(z * z)))
    model = make_model(z, r, S1, S2, e)
    if model is None:  # inside the ball
        return z_sorted.copy(), CandidateSolution(r, r, 0.0, 0.0, True), 1, 1, False
    fallback = False
    n_feas = 1
    if mode is SearchMode.ENUMERATE:
        cand, solves, n_feas = _enumerate(model, debug)
    else:
        cand, solves = _binary(model)
        if not cand.feasible:
            log.warning("binary search produced an infeasible candidate (k1=%d, k2=%d); "
                        "falling back to enumeration", cand.k1, cand.k2)
            cand, extra, n_feas = _enumerate(model, debug)
            solves += extra
            fallback = True
    if cand.k1 == r and cand.k2 == r:
        t, mu = cand.t, cand.mu
    else:
        # final solve shared by both modes
        t, mu, zp = model.solve(cand.k1, cand.k2)
        cand = CandidateSolution(cand.k1, cand.k2, mu, t, cand.feasible, zero_plateau=zp)
    w = _assemble(model, cand.k1, cand.k2, t, mu)
    obj = 0.5 * float(np.sum((w - z) ** 2))
    w = np.ldexp(w, e)
    tl2 = model.l2
    # report mu/t/objective in the caller's units
    mu_out = cand.mu if tl2 else math.ldexp(cand.mu, e)
    cand = CandidateSolution(cand.k1, cand.k2, mu_out, math.ldexp(cand.t, e), cand.feasible,
                             math.ldexp(obj, 2 * e), cand.zero_plateau)
    return w, cand, solves, n_feas, fallback


def _check_args(z, r):
    p = make_profile(z)
    if int(r) != r or not 1 <= r <= p.q:
        raise ValueError(f"r={r!r} out of range [1, {p.q}]")
    return p, int(r)


def _ball_result(z, r, c, mode, debug, l2):
    mode = SearchMode.parse(mode)
    p, r = _check_args(z, r)
    c = float(c)
    if not c >= 0 or not math.isfinite(c):
        raise ValueError(f"radius must be a finite nonnegative number, got {c!r}")
    inside = (math.sqrt(p.prefix_sq[r]) if l2 else p.prefix_abs[r]) <= c
    if inside:
        cand = CandidateSolution(r, r, 0.0, 0.0, True, 0.0)
        return SearchResult(p.reconstruct(), cand, 1)
    if c == 0:
        cand = CandidateSolution(0, p.q, math.inf, 0.0, True, 0.5 * float(p.prefix_sq[p.q]))
        return SearchResult(np.zeros(p.q), cand, 1)

    def make(zs, r_, S1, S2, e):
        cs = math.ldexp(c, -e)
        return _L2Ball(zs, r_, S1, S2, cs) if l2 else _L1Ball(zs, r_, S1, S2, cs)

    w, cand, solves, n_feas, fb = _search(p.values_sorted, r, make, mode, debug)
    return SearchResult(p.unsort(w), cand, solves, n_feas, fb)


def project_truncated_l2_ball_info(z, r, c, mode=SearchMode.BINARY_SEARCH, debug=False):
    return _ball_result(z, r, c, mode, debug, l2=True)


def project_kyfan_l1_ball_info(z, r, c, mode=SearchMode.BINARY_SEARCH, debug=False):
    return _ball_result(z, r, c, mode, debug, l2=False)


def project_truncated_l2_ball(z, r, c, mode=SearchMode.BINARY_SEARCH):
    """Euclidean projection onto {w : sum of the r largest w_i^2 <= c^2}."""
    return project_truncated_l2_ball_info(z, r, c, mode).x


def project_kyfan_l1_ball(z, r, c, mode=SearchMode.BINARY_SEARCH):
    """Euclidean projection onto {w : sum of the r largest |w_i| <= c}."""
    return project_kyfan_l1_ball_info(z, r, c, mode).x


def prox_vec_info(z, f, mode=SearchMode.BINARY_SEARCH, debug=False):
    """Prox of ``f`` at ``z`` with the search record.

    The candidate in the record describes the conjugate-side solution
    ``w = z - prox_f(z)``.
    """
    if not isinstance(f, ScaledNorm):
        raise TypeError("f must be a ScaledNorm")
    mode = SearchMode.parse(mode)
    p, r = _check_args(z, f.spec.r)
    gamma = max(f.gamma, GAMMA_FLOOR)
    l2 = f.spec.flavor is Flavor.FROBENIUS_R
    if not f.squared:
        res = _ball_result(z, r, gamma, mode, debug, l2)
        x = p.reconstruct() - res.x
        xs = np.abs(x)[p.perm]
        np.minimum.accumulate(xs, out=xs)
        return SearchResult(p.unsort(xs), res.candidate, res.candidate_solves,
                            res.n_feasible, res.fallback)

    def make(zs, r_, S1, S2, e):
        if l2:
            return _L2Sq(zs, r_, S1, S2, 1.0 / gamma)
        return _L1Sq(zs, r_, S1, S2, gamma)

    w, cand, solves, n_feas, fb = _search(p.values_sorted, r, make, mode, debug)
    xs = p.values_sorted - w
    np.maximum(xs, 0.0, out=xs)
    np.minimum.accumulate(xs, out=xs)
    return SearchResult(p.unsort(xs), cand, solves, n_feas, fb)


def prox_vec(z, f, mode=SearchMode.BINARY_SEARCH):
    return prox_vec_info(z, f, mode).x
