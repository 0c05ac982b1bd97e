"""Command-line front end.

    lrin norm     --input Z.csv --norm fro --r 2
    lrin prox     --input Z.csv --norm spec --r 2 --gamma 0.5 --output X.csv --report rep.json
    lrin complete --input M.csv --mask omega.txt --norm fro --r 2 --squared --output X.csv
    lrin generate --n 20 --m 20 --rank 2 --observed 0.7 --seed 7 --output M.csv --mask omega.txt
    lrin selftest --seed 0

Exit codes: 0 success, 2 bad input, 3 certificate failure, 4 selftest failure.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .gauges import Flavor, NormSpec, ScaledNorm
from .matprox import certify_matrix_prox, matrix_norm_value, matrix_prox_info
from .oracle import CERT_TOL, certify_prox, manifest_instances
from .solvers import (ProblemKind, ProblemSpec, SolverConfig, SolverDivergence, completion_instance,
                      solve_matrix_completion)
from .vecprox import SearchMode, count_candidate_solves, prox_vec_info

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CERT = 3
EXIT_SELFTEST = 4


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


@dataclass
class RunConfig:
    subcommand: str
    flavor: Flavor = Flavor.FROBENIUS_R
    r: int = 1
    gamma: float = 1.0
    squared: bool = False
    tol: float = 1e-9
    max_iter: int = 100_000
    seed: int = 0
    mode: SearchMode = SearchMode.BINARY_SEARCH
    input: str | None = None
    mask: str | None = None
    output: str | None = None
    report: str | None = None
    trace: str | None = None
    rank_threshold: float = 1e-9
    step: float = 1.0
    alpha: float = 1.0
    threads: int | None = None
    count: int = 1000
    inject_fault: bool = False

    @property
    def norm(self):
        return ScaledNorm(NormSpec(self.flavor, self.r), self.gamma, self.squared)

    def validate(self):
        if self.r < 1:
            raise InputError(f"--r must be a positive integer, got {self.r}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InputError(f"--gamma must be positive, got {self.gamma}")
        if not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.max_iter < 1:
            raise InputError("--max-iter must be at least 1")
        if not self.rank_threshold >= 0:
            raise InputError("--rank-threshold must be nonnegative")
        if not self.step > 0 or not 0 < self.alpha < 2:
            raise InputError("--step must be positive and --alpha in (0, 2)")
        if self.threads is not None and self.threads < 1:
            raise InputError("--threads must be at least 1")
        if self.count < 1:
            raise InputError("--count must be at least 1")
        inputs = ("input",) if self.subcommand == "generate" else ("input", "mask")
        for name in inputs:
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise InputError(f"--{name} {path!r} does not exist")


# --------------------------------------------------------------------------
# file formats


def read_matrix(path):
    try:
        with open(path) as fh:
            rows = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty matrix file")
    try:
        data = [[float(tok) for tok in row.split(",")] for row in rows]
    except ValueError as exc:
        raise InputError(f"{path}: malformed CSV ({exc})") from exc
    widths = {len(row) for row in data}
    if len(widths) != 1:
        raise InputError(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.array(data, dtype=float)


def format_matrix(X):
    return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in np.asarray(X))


def write_matrix(path, X):
    with open(path, "w") as fh:
        fh.write(format_matrix(X))


def read_mask(path, shape):
    """Coordinate lines ``i j`` (1-based); '%' and '#' lines are comments."""
    idx = []
    with open(path) as fh:
        for lineno, ln in enumerate(fh, 1):
            ln = ln.strip()
            if not ln or ln[0] in "%#":
                continue
            parts = ln.split()
            try:
                i, j = int(parts[0]), int(parts[1])
            except (ValueError, IndexError) as exc:
                raise InputError(f"{path}:{lineno}: expected 'i j', got {ln!r}") from exc
            if not (1 <= i <= shape[0] and 1 <= j <= shape[1]):
                raise InputError(f"{path}:{lineno}: index ({i}, {j}) outside {shape[0]}x{shape[1]}")
            idx.append((i - 1, j - 1))
    if not idx:
        raise InputError(f"{path}: mask has no observed entries")
    W = np.zeros(shape, dtype=bool)
    ii, jj = zip(*idx)
    W[list(ii), list(jj)] = True
    return W


def write_mask(path, W):
    with open(path, "w") as fh:
        for i, j in zip(*np.nonzero(W)):
            fh.write(f"{i + 1} {j + 1}\n")


def format_value(v):
    """Fifteen digits after the leading one, trailing zeros kept; zero prints as 0."""
    return "0" if v == 0 else format(float(v), "#.16g")


def _emit_report(cfg, report):
    text = json.dumps(report, indent=2) + "\n"
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_matrix(cfg, X):
    if cfg.output:
        write_matrix(cfg.output, X)
    elif cfg.report:
        sys.stdout.write(format_matrix(X))


def _check_shape(cfg, Z):
    q = min(Z.shape)
    if cfg.r > q:
        raise InputError(f"--r {cfg.r} exceeds min(n, m) = {q} for a {Z.shape[0]}x{Z.shape[1]} matrix")
    if not np.all(np.isfinite(Z)):
        raise InputError("matrix has non-finite entries")


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise InputError(f"{cfg.subcommand} needs --{name}")


# --------------------------------------------------------------------------
# subcommands


def cli_norm(cfg):
    _require(cfg, "input")
    Z = read_matrix(cfg.input)
    _check_shape(cfg, Z)
    print(format_value(matrix_norm_value(Z, NormSpec(cfg.flavor, cfg.r))))
    return EXIT_OK


def cli_prox(cfg):
    _require(cfg, "input")
    Z = read_matrix(cfg.input)
    _check_shape(cfg, Z)
    f = cfg.norm
    t0 = time.perf_counter()
    res = matrix_prox_info(Z, f, cfg.mode, cfg.rank_threshold)
    wall = 1e3 * (time.perf_counter() - t0)
    cert = certify_matrix_prox(Z, res.X, f)
    report = {
        "norm_value": matrix_norm_value(res.X, f.spec),
        "certificate": cert.as_dict(),
        "numerical_rank": res.numerical_rank,
        "candidate_solves": count_candidate_solves(res.search),
        "wall_time_ms": wall,
    }
    _emit_matrix(cfg, res.X)
    _emit_report(cfg, report)
    if not cert.pass_:
        print(f"error: prox certificate failed (dual {cert.dual_residual:.3g}, "
              f"alignment {cert.alignment_residual:.3g})", file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


def cli_complete(cfg):
    _require(cfg, "input", "mask")
    M = read_matrix(cfg.input)
    W = read_mask(cfg.mask, M.shape)
    if not np.all(np.isfinite(M[W])):
        raise InputError("observed entries must be finite")
    M = np.where(W, M, 0.0)
    _check_shape(cfg, M)
    problem = ProblemSpec(ProblemKind.MATRIX_COMPLETION, M, cfg.norm, mask=W)
    scfg = SolverConfig(tol=cfg.tol, max_iter=cfg.max_iter, gamma=cfg.step, alpha=cfg.alpha,
                        rank_threshold=cfg.rank_threshold, keep_trace=cfg.trace is not None,
                        mode=cfg.mode)
    try:
        X, rep = solve_matrix_completion(problem, scfg)
    except SolverDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if cfg.trace:
        with open(cfg.trace, "w") as fh:
            fh.write("iter,objective,residual\n")
            for k, (obj, res) in enumerate(rep.trace or [], 1):
                fh.write(f"{k},{obj:.17g},{res:.17g}\n")
    _emit_matrix(cfg, X)
    _emit_report(cfg, rep.as_dict())
    return EXIT_OK


def cli_generate(cfg, n, m, rank, observed):
    """Seeded low-rank completion instance: data CSV plus coordinate mask."""
    _require(cfg, "output", "mask")
    if not (1 <= rank <= min(n, m)) or not 0 < observed <= 1:
        raise InputError("need 1 <= rank <= min(n, m) and 0 < observed <= 1")
    M, W = completion_instance(cfg.seed, n, m, rank, observed)
    write_matrix(cfg.output, M)
    write_mask(cfg.mask, W)
    return EXIT_OK


def run_selftest(seed, count, tol=CERT_TOL, out=None):
    """Certificates and mode agreement on ``count`` manifest instances.

    Returns the number of failures; every failure prints its seed and
    descriptor so it can be replayed.
    """
    out = sys.stdout if out is None else out
    failures = 0
    for inst in manifest_instances(seed, count):
        z, f = inst.vector(), inst.f
        try:
            a = prox_vec_info(z, f, SearchMode.ENUMERATE)
            b = prox_vec_info(z, f, SearchMode.BINARY_SEARCH)
        except Exception as exc:  # report and keep going
            out.write(f"FAIL seed={inst.seed} {inst.descriptor()}: {exc}\n")
            failures += 1
            continue
        problems = []
        for name, res in (("enumerate", a), ("binary", b)):
            cert = certify_prox(z, res.x, f, tol)
            if not cert.pass_:
                problems.append(f"{name} certificate dual={cert.dual_residual:.3g} "
                                f"align={cert.alignment_residual:.3g}")
        gap = float(np.max(np.abs(a.x - b.x)))
        if gap > 1e-12:
            problems.append(f"modes differ by {gap:.3g}")
        if problems:
            out.write(f"FAIL seed={inst.seed} {inst.descriptor()}: {'; '.join(problems)}\n")
            failures += 1
    if failures:
        out.write(f"FAILED: {failures}/{count} instances\n")
    else:
        out.write(f"OK: {count}/{count} certified, modes agree\n")
    return failures


def cli_selftest(cfg):
    # the fault flag asks for a negative certificate tolerance, which nothing can meet
    tol = -1.0 if cfg.inject_fault else CERT_TOL
    return EXIT_SELFTEST if run_selftest(cfg.seed, cfg.count, tol) else EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _flavor(s):
    try:
        return Flavor.parse(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _mode(s):
    try:
        return SearchMode.parse(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--norm", dest="flavor", type=_flavor, default=Flavor.FROBENIUS_R,
                        help="fro (FrobeniusR) or spec (SpectralR)")
    common.add_argument("--r", type=int, default=1)
    common.add_argument("--gamma", type=float, default=1.0)
    common.add_argument("--squared", action="store_true")
    common.add_argument("--mode", type=_mode, default=SearchMode.BINARY_SEARCH,
                        help="binary (default) or enumerate")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/LAPACK threads (fallback: $LRIN_THREADS)")
    common.add_argument("--rank-threshold", type=float, default=1e-9)
    common.add_argument("--input")
    common.add_argument("--output")
    common.add_argument("--report")

    p = argparse.ArgumentParser(prog="lrin", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("norm", parents=[common], help="print the norm of a CSV matrix")
    sub.add_parser("prox", parents=[common], help="prox of a CSV matrix with a certificate")
    sp = sub.add_parser("complete", parents=[common], help="nuclear-style matrix completion")
    sp.add_argument("--mask", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--max-iter", type=int, default=100_000)
    sp.add_argument("--step", type=float, default=1.0, help="Douglas-Rachford step")
    sp.add_argument("--alpha", type=float, default=1.0, help="relaxation in (0, 2)")
    sp.add_argument("--trace", help="per-iteration CSV: iter,objective,residual")
    sp = sub.add_parser("generate", parents=[common], help="write a seeded completion instance")
    sp.add_argument("--mask", required=True)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--m", type=int, default=20)
    sp.add_argument("--rank", type=int, default=2)
    sp.add_argument("--observed", type=float, default=0.7)
    sp = sub.add_parser("selftest", parents=[common], help="randomized certificate suite")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


def _config(ns):
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in fields})


def _thread_limit(n):
    if n is None:
        env = os.environ.get("LRIN_THREADS")
        if not env:
            return contextlib.nullcontext()
        try:
            n = int(env)
        except ValueError as exc:
            raise InputError(f"LRIN_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise InputError("LRIN_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    ns = build_parser().parse_args(None if argv is None else [str(a) for a in argv])
    cfg = _config(ns)
    try:
        cfg.validate()
        with _thread_limit(cfg.threads):
            if cfg.subcommand == "norm":
                return cli_norm(cfg)
            if cfg.subcommand == "prox":
                return cli_prox(cfg)
            if cfg.subcommand == "complete":
                return cli_complete(cfg)
            if cfg.subcommand == "generate":
                return cli_generate(cfg, ns.n, ns.m, ns.rank, ns.observed)
            return cli_selftest(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
