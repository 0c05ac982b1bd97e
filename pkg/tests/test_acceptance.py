"""Acceptance suite: nine criteria, one PASS/FAIL line each.

Run under pytest (lines are repeated in the terminal summary) or directly:

    python3 tests/test_acceptance.py
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from lrin.gauges import Flavor, NormSpec, ScaledNorm
from lrin.matprox import (matrix_norm_value, matrix_prox, numerical_rank, random_low_rank,
                          random_orthogonal)
from lrin.oracle import certify_prox, format_manifest_line, manifest_instances, reference_prox_slow
from lrin.solvers import (ProblemKind, ProblemSpec, SolverConfig, completion_instance,
                          random_rls_problem, solve_douglas_rachford, solve_matrix_completion,
                          solve_prox_gradient)
from lrin.streams import stream
from lrin.vecprox import (SearchMode, project_kyfan_l1_ball, project_truncated_l2_ball,
                          prox_vec, prox_vec_info)

FRO = Flavor.FROBENIUS_R
SPEC = Flavor.SPECTRAL_R

RESULTS = {}


def record(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
    RESULTS[num] = line
    print(line)
    return ok


def bs_bound(q, r):
    return 4 * (1 + math.log2(r + 1)) * (1 + math.log2(q - r + 1))


# 1 ----------------------------------------------------------------------------


def test_criterion_1_certificates():
    insts = manifest_instances(101, 10_000)
    t0 = time.perf_counter()
    worst, failed = 0.0, []
    for inst in insts:
        z = inst.vector()
        x = prox_vec(z, inst.f)
        cert = certify_prox(z, x, inst.f, tol=1e-10)
        worst = max(worst, cert.dual_residual / cert.scale, cert.alignment_residual / cert.scale)
        if not cert.pass_:
            failed.append(format_manifest_line(inst))
    elapsed = time.perf_counter() - t0
    ok = not failed and elapsed <= 60.0
    record(1, ok, f"{len(insts) - len(failed)}/{len(insts)} certified, worst residual/scale "
                  f"{worst:.2e}, {elapsed:.1f} s")
    assert not failed, failed[:5]
    assert elapsed <= 60.0


# 2 ----------------------------------------------------------------------------


def test_criterion_2_mode_equivalence():
    insts = manifest_instances(202, 100_000)
    gap_worst, over_bound, differ = 0.0, [], []
    for inst in insts:
        z = inst.vector()
        a = prox_vec_info(z, inst.f, SearchMode.ENUMERATE)
        b = prox_vec_info(z, inst.f, SearchMode.BINARY_SEARCH)
        gap = float(np.max(np.abs(a.x - b.x)))
        gap_worst = max(gap_worst, gap)
        if gap > 1e-12:
            differ.append(format_manifest_line(inst))
        if b.candidate_solves > bs_bound(inst.q, inst.r):
            over_bound.append(format_manifest_line(inst))
    ok = not differ and not over_bound
    record(2, ok, f"{len(insts)} instances, max gap {gap_worst:.1e}, "
                  f"{len(differ)} differ, {len(over_bound)} over the solve bound")
    assert not differ, differ[:5]
    assert not over_bound, over_bound[:5]


# 3 ----------------------------------------------------------------------------


def test_criterion_3_moreau():
    insts = manifest_instances(303, 10_000)
    worst, bad = 0.0, []
    for inst in insts:
        z = inst.vector()
        f = ScaledNorm(inst.f.spec, inst.gamma, False)
        proj = project_truncated_l2_ball if inst.flavor is FRO else project_kyfan_l1_ball
        res = np.linalg.norm(prox_vec(z, f) + proj(z, inst.r, inst.gamma) - z)
        rel = res / max(1.0, np.linalg.norm(z))
        worst = max(worst, rel)
        if rel > 1e-13:
            bad.append(format_manifest_line(inst))
    record(3, not bad, f"{len(insts)} instances, worst residual {worst:.1e} (bound 1e-13)")
    assert not bad, bad[:5]


# 4 ----------------------------------------------------------------------------


def _soft(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def test_criterion_4_degenerations():
    rng = stream(404, "degenerations")
    worst = 0.0
    for _ in range(2000):
        q = int(rng.integers(1, 51))
        z = rng.standard_normal(q) * 10 ** rng.uniform(-2, 2)
        g = float(10 ** rng.uniform(-3, 3))
        checks = [
            (prox_vec(z, ScaledNorm(NormSpec(FRO, 1), g)), _soft(z, g)),
            (prox_vec(z, ScaledNorm(NormSpec(SPEC, 1), g)), _soft(z, g)),
            (prox_vec(z, ScaledNorm(NormSpec(FRO, q), g)),
             z * max(0.0, 1.0 - g / np.linalg.norm(z))),
            (prox_vec(z, ScaledNorm(NormSpec(FRO, q), g, True)), z / (1.0 + g)),
            (prox_vec(z, ScaledNorm(NormSpec(SPEC, q), g)), z - _l1_ball_sort(z, g)),
        ]
        for got, want in checks:
            worst = max(worst, float(np.max(np.abs(got - want))) / max(1.0, np.abs(z).max()))
    ok = worst <= 1e-10
    record(4, ok, f"2000 x 5 closed forms, worst deviation {worst:.1e} (bound 1e-10)")
    assert ok


def _l1_ball_sort(z, c):
    """Textbook l1-ball projection by sorting."""
    a = np.abs(z)
    if a.sum() <= c:
        return z.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, len(u) + 1) > css - c)[0][-1]
    tau = (css[k] - c) / (k + 1)
    return np.sign(z) * np.maximum(a - tau, 0.0)


# 5 ----------------------------------------------------------------------------


def test_criterion_5_matrix_lift():
    rng = stream(505, "matrix-lift")
    worst_u = 0.0
    for k in range(500):
        n, m = (int(v) for v in rng.integers(1, 13, size=2))
        Z = rng.standard_normal((n, m)) * 10 ** rng.uniform(-2, 2)
        f = ScaledNorm(NormSpec(FRO if k % 2 else SPEC, int(rng.integers(1, min(n, m) + 1))),
                       float(10 ** rng.uniform(-2, 1)), bool(rng.random() < 0.5))
        P, Q = random_orthogonal(n, rng), random_orthogonal(m, rng)
        lhs = matrix_prox(P @ Z @ Q.T, f)
        rhs = P @ matrix_prox(Z, f) @ Q.T
        worst_u = max(worst_u, np.linalg.norm(lhs - rhs) / np.linalg.norm(Z))
    worst_r = 0.0
    for _ in range(1000):
        n, m = (int(v) for v in rng.integers(1, 16, size=2))
        r = int(rng.integers(1, min(n, m) + 1))
        Z = random_low_rank(n, m, r, rng)
        fro = np.linalg.norm(Z)
        worst_r = max(worst_r, abs(matrix_norm_value(Z, NormSpec(FRO, r)) - fro) / fro)
    ok = worst_u <= 1e-8 and worst_r <= 1e-10
    record(5, ok, f"unitary invariance worst {worst_u:.1e} (bound 1e-8), "
                  f"rank-r agreement worst {worst_r:.1e} (bound 1e-10)")
    assert ok


# 6 ----------------------------------------------------------------------------


def test_criterion_6_slow_oracle():
    insts = manifest_instances(606, 1000, q_max=20)
    worst, bad = 0.0, []
    for inst in insts:
        z = inst.vector()
        d = float(np.max(np.abs(reference_prox_slow(z, inst.f) - prox_vec(z, inst.f))))
        worst = max(worst, d)
        if d > 1e-6:
            bad.append(format_manifest_line(inst))
    record(6, not bad, f"{len(insts)} instances q <= 20, worst deviation {worst:.1e} (bound 1e-6)")
    assert not bad, bad[:5]


# 7 ----------------------------------------------------------------------------


def test_criterion_7_solvers():
    worst = 0.0
    for seed in range(50):
        p = random_rls_problem(seed)
        x_pg, _ = solve_prox_gradient(p)
        x_dr, _ = solve_douglas_rachford(p)
        worst = max(worst, np.linalg.norm(x_pg - x_dr) / max(1.0, np.linalg.norm(x_pg)))
    rng = stream(707, "one-prox")
    worst_one = 0.0
    for k in range(20):
        n, m = (int(v) for v in rng.integers(2, 9, size=2))
        Z = rng.standard_normal((n, m)) * 2
        f = ScaledNorm(NormSpec(FRO if k % 2 else SPEC, int(rng.integers(1, min(n, m) + 1))),
                       float(10 ** rng.uniform(-1, 0.5)), bool(k % 4 < 2))
        p = ProblemSpec(ProblemKind.REGULARIZED_LEAST_SQUARES, Z, f)
        target = matrix_prox(Z, f)
        for solver in (solve_prox_gradient, solve_douglas_rachford):
            x, _ = solver(p)
            worst_one = max(worst_one, float(np.max(np.abs(x - target))))
    ok = worst <= 1e-5 and worst_one <= 1e-6
    record(7, ok, f"PG vs DR worst {worst:.1e} on 50 instances (bound 1e-5), "
                  f"one-prox worst {worst_one:.1e} (bound 1e-6)")
    assert ok


# 8 ----------------------------------------------------------------------------


def completion_ranks(r, seeds, cfg):
    out = []
    for seed in seeds:
        M, W = completion_instance(seed, 20, 20, 2, 0.7)
        p = ProblemSpec(ProblemKind.MATRIX_COMPLETION, M,
                        ScaledNorm(NormSpec(FRO, r), 1.0, True), mask=W)
        X, rep = solve_matrix_completion(p, cfg)
        out.append((seed, rep.numerical_rank, rep.converged,
                    np.linalg.norm(X - M) / np.linalg.norm(M)))
    return out


def test_criterion_8_rank_contrast():
    cfg = SolverConfig(tol=1e-9, gamma=0.1, alpha=1.5, max_iter=20_000)
    seeds = range(50)
    low = completion_ranks(2, seeds, cfg)
    full = completion_ranks(20, seeds, cfg)
    n_low = sum(rk <= 2 for _, rk, _, _ in low)
    n_full = sum(rk > 2 for _, rk, _, _ in full)
    n_recovered = sum(err <= 1e-6 for *_, err in low)
    ok = n_low >= 40 and n_full >= 40
    record(8, ok, f"r=2: numerical rank <= 2 on {n_low}/50 seeds (need 40; {n_recovered}/50 "
                  f"recover M to 1e-6); r=q: rank > 2 on {n_full}/50 (need 40)")
    assert n_full >= 40
    assert n_low >= 40, [(s, rk, conv) for s, rk, conv, _ in low if rk > 2]


# 9 ----------------------------------------------------------------------------


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "lrin.cli", *args, "--threads", "1"],
                          capture_output=True, cwd=cwd)


def _snapshot(tmp):
    outputs = {}
    steps = [
        ["generate", "--seed", "2026", "--output", "M.csv", "--mask", "W.txt"],
        ["norm", "--input", "M.csv", "--norm", "fro", "--r", "2"],
        ["prox", "--input", "M.csv", "--norm", "spec", "--r", "3", "--gamma", "0.5",
         "--squared", "--output", "P.csv", "--report", "P.json"],
        ["complete", "--input", "M.csv", "--mask", "W.txt", "--r", "2", "--squared",
         "--step", "0.1", "--alpha", "1.5", "--max-iter", "300", "--output", "X.csv",
         "--report", "X.json", "--trace", "T.csv"],
        ["selftest", "--seed", "2026", "--count", "200"],
    ]
    for k, args in enumerate(steps):
        res = _cli(args, tmp)
        outputs[f"step{k}.code"] = res.returncode
        outputs[f"step{k}.stdout"] = res.stdout
    for name in ("M.csv", "W.txt", "P.csv", "X.csv", "T.csv"):
        outputs[name] = (tmp / name).read_bytes()
    for name in ("P.json", "X.json"):
        report = json.loads((tmp / name).read_text())
        report.pop("wall_time_ms")
        outputs[name] = json.dumps(report, sort_keys=True)
    return outputs


def test_criterion_9_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    first, second = _snapshot(a), _snapshot(b)
    codes_ok = all(first[f"step{k}.code"] == 0 for k in range(5))
    differing = [k for k in first if first[k] != second[k]]
    ok = codes_ok and not differing
    record(9, ok, f"{len(first)} outputs compared across two --threads 1 runs, "
                  f"{len(differing)} differ (JSON compared without wall_time_ms)")
    assert codes_ok
    assert not differing, differing


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
