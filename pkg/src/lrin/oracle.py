"""Independent checks for prox outputs.

``certify_prox`` tests the optimality conditions directly, the perturbation
probe compares objective values around a point, and ``reference_prox_slow``
re-solves the prox by nested water-filling on the conjugate side, sharing no
code with the sorted candidate search.

Randomized suites draw their instances from a plain-text manifest, one
``seed descriptor`` pair per line, so any failure can be replayed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .gauges import Flavor, NormSpec, ScaledNorm, make_profile, norm_value, truncated_gauge
from .streams import stream

log = logging.getLogger(__name__)

CERT_TOL = 1e-10


@dataclass(frozen=True)
class Certificate:
    """Residuals of the prox optimality conditions, in the units of ``z``.

    ``alignment_residual`` is the pairing defect divided by ``max(1, ||z||)``
    so both residuals compare against the same ``tol * scale``.
    """

    dual_residual: float
    alignment_residual: float
    pass_: bool
    tol: float
    scale: float

    def as_dict(self):
        return {
            "dual_residual": self.dual_residual,
            "alignment_residual": self.alignment_residual,
            "pass": self.pass_,
        }


def certify_prox(z, x, f, tol=CERT_TOL):
    """Check ``x == prox_f(z)``.

    For ``f = gamma N``: g(z - x) <= gamma and <z - x, x> = gamma N(x).
    For ``f = (gamma/2) N^2``: g(z - x) <= gamma N(x) and
    <z - x, x> = gamma N(x)^2.  Here g is the truncated gauge dual to N.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    spec = f.spec
    y = z - x
    g = truncated_gauge(make_profile(y), spec.dual_ell, spec.r)
    n = norm_value(make_profile(x), spec)
    pairing = float(np.dot(y, x))
    if f.squared:
        bound = f.gamma * n
        target = f.gamma * n * n
    else:
        bound = f.gamma
        target = f.gamma * n
    scale = max(1.0, float(np.linalg.norm(z)))
    dual_res = max(0.0, g - bound)
    align_res = abs(pairing - target) / scale
    ok = dual_res <= tol * scale and align_res <= tol * scale
    return Certificate(dual_res, align_res, bool(ok), tol, scale)


def prox_objective(z, x, f):
    d = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    return 0.5 * float(d @ d) + f(x)


def perturbation_probe(z, x, f, trials=200, radius=0.1, rng=None, slack=1e-12):
    """True iff no sampled nearby point improves the prox objective.

    For q = 1 an exhaustive grid on [x - radius, x + radius] replaces the
    random directions.
    """
    if trials < 1 or not radius > 0:
        raise ValueError("need trials >= 1 and radius > 0")
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    base = prox_objective(z, x, f)
    q = x.shape[0]
    if q == 1:
        # every flavor reduces to |x| in one dimension
        grid = x[0] + np.linspace(-radius, radius, 20001)
        n = np.abs(grid)
        vals = 0.5 * (grid - z[0]) ** 2 + (0.5 * f.gamma * n * n if f.squared else f.gamma * n)
        return bool(np.all(base <= vals + slack))
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(trials):
        d = rng.standard_normal(q)
        d /= np.linalg.norm(d)
        for delta in (radius, radius / 10, radius / 100):
            if base > prox_objective(z, x + delta * d, f) + slack:
                return False
    return True


def _root(fn, lo, hi):
    return brentq(fn, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)


def _fill_l2(a, mu, r):
    """Minimizer of 1/2 ||w - a||^2 + (mu/2) * (sum of r largest w_i^2), a >= 0.

    Uses the saddle form max over theta in {0 <= theta <= 1, sum theta = r} of
    sum theta_i w_i^2: for fixed theta, w_i = a_i / (1 + mu theta_i), and the
    optimal theta water-fills theta_i = clip((a_i s - 1) / mu, 0, 1).
    """
    if mu == 0:
        return a.copy()
    pos = a[a > 0]
    if pos.size <= r:
        return a / (1.0 + mu)

    def excess(s):
        return np.clip((a * s - 1.0) / mu, 0.0, 1.0).sum() - r

    s = _root(excess, 1.0 / pos.max(), (1.0 + mu) / pos.min())
    theta = np.clip((a * s - 1.0) / mu, 0.0, 1.0)
    return a / (1.0 + mu * theta)


def _fill_l1(a, lam, r):
    """Minimizer of 1/2 ||w - a||^2 + lam * (sum of r largest |w_i|), a >= 0.

    Saddle form with theta on the capped simplex: w_i = (a_i - lam theta_i)_+
    and theta_i = clip((a_i - tau) / lam, 0, 1).
    """
    if lam == 0:
        return a.copy()
    if np.minimum(a / lam, 1.0).sum() <= r:
        return np.maximum(a - lam, 0.0)

    def excess(tau):
        return np.clip((a - tau) / lam, 0.0, 1.0).sum() - r

    tau = _root(excess, 0.0, a.max())
    theta = np.clip((a - tau) / lam, 0.0, 1.0)
    return np.maximum(a - lam * theta, 0.0)


def _top_sum(v, r):
    return float(np.sort(v)[::-1][:r].sum())


def _conj_prox(a, f):
    """``prox_{f*}(a)`` for nonnegative ``a`` with max entry 1."""
    r, gam = f.spec.r, f.gamma
    if f.spec.flavor is Flavor.FROBENIUS_R:
        if f.squared:
            return _fill_l2(a, 1.0 / gam, r)
        c2 = gam * gam
        if _top_sum(a * a, r) <= c2:
            return a.copy()
        hi = 1.0
        while _top_sum(_fill_l2(a, hi, r) ** 2, r) > c2:
            hi *= 2.0
        mu = _root(lambda m: _top_sum(_fill_l2(a, m, r) ** 2, r) - c2, 0.0, hi)
        return _fill_l2(a, mu, r)
    if f.squared:
        lam = _root(lambda l: gam * l - _top_sum(_fill_l1(a, l, r), r), 0.0, _top_sum(a, r) / gam)
        return _fill_l1(a, lam, r)
    if _top_sum(a, r) <= gam:
        return a.copy()
    # past max(a, sum(a)/r) the fill is identically zero
    hi = max(a.max(), a.sum() / r)
    lam = _root(lambda l: _top_sum(_fill_l1(a, l, r), r) - gam, 0.0, hi)
    return _fill_l1(a, lam, r)


def reference_prox_slow(z, f):
    """Prox of ``f`` through nested scalar root finding on the conjugate side.

    Independent of the candidate search: no sorted prefix sums and no
    (k1, k2) structure, only separable water-filling and bracketed roots.
    Desk scale (q <= 50).
    """
    z = np.asarray(z, dtype=float)
    q = z.shape[0]
    if q > 50:
        raise ValueError("reference_prox_slow is meant for q <= 50")
    f.spec.check_dim(q)
    if not np.any(z):
        return np.zeros(q)
    s = float(np.max(np.abs(z)))
    a = np.abs(z) / s
    # the conjugate prox is homogeneous in (z, gamma) for the unsquared norm
    # and in z alone for the squared one
    g = f.gamma if f.squared else f.gamma / s
    fs = ScaledNorm(f.spec, g, f.squared)
    w = _conj_prox(a, fs)
    return np.sign(z) * (a - w) * s


# --------------------------------------------------------------------------
# seeded instances and the manifest format


@dataclass(frozen=True)
class Instance:
    seed: int
    q: int
    r: int
    flavor: Flavor
    gamma: float
    squared: bool

    @property
    def f(self):
        return ScaledNorm(NormSpec(self.flavor, self.r), self.gamma, self.squared)

    def vector(self):
        rng = stream(self.seed, "vector")
        z = rng.standard_normal(self.q)
        # occasional exact ties and zeros exercise the plateau boundaries
        if self.q > 2 and rng.random() < 0.25:
            k = int(rng.integers(2, self.q + 1))
            z[:k] = np.sign(z[:k]) * abs(z[0])
        if self.q > 2 and rng.random() < 0.15:
            z[rng.integers(0, self.q, size=self.q // 3)] = 0.0
        return z

    def descriptor(self):
        sq = "sq" if self.squared else "plain"
        return f"q={self.q} r={self.r} flavor={self.flavor.value} gamma={self.gamma!r} {sq}"


def random_instance(seed, q_max=50):
    rng = stream(seed, "instance")
    q = int(rng.integers(1, q_max + 1))
    r = int(rng.integers(1, q + 1))
    flavor = Flavor.FROBENIUS_R if rng.random() < 0.5 else Flavor.SPECTRAL_R
    gamma = float(10.0 ** rng.uniform(-3, 3))
    squared = bool(rng.random() < 0.5)
    return Instance(int(seed), q, r, flavor, gamma, squared)


def format_manifest_line(inst):
    return f"{inst.seed} {inst.descriptor()}"


def parse_manifest_line(line):
    parts = line.split()
    seed = int(parts[0])
    fields = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
    return Instance(seed, int(fields["q"]), int(fields["r"]), Flavor.parse(fields["flavor"]),
                    float(fields["gamma"]), "sq" in parts[1:])


def write_manifest(path, instances):
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(format_manifest_line(inst) + "\n")


def read_manifest(path):
    with open(path) as fh:
        return [parse_manifest_line(ln) for ln in fh if ln.strip() and not ln.startswith("#")]


def manifest_instances(master_seed, count, q_max=50):
    """``count`` instances whose seeds come from one named stream."""
    seeds = stream(master_seed, "manifest").integers(0, 2**63 - 1, size=count)
    return [random_instance(int(s), q_max) for s in seeds]


def is_close(a, b, atol):
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0) <= atol)


def noise_like(x, rng, size=1e-3):
    d = rng.standard_normal(np.shape(x))
    return np.asarray(x) + size * d / max(np.linalg.norm(d), 1e-300) * math.sqrt(np.size(x))
