"""Command-line interface.

Exit codes: 0 success, 1 malformed input, 2 infeasible problem (Pick test,
singular L, unusable prior), 3 solver failure, 4 certification failure.
The last line written to stdout is always a ``status=... exit=...`` record.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .cee import CeeInput, assemble_solution, cee_residual, continue_path
from .covext import (
    DEFAULT_SAMPLES,
    CovarianceSequence,
    estimate_covariances,
    exact_covariances,
    fit_covariances,
    reduce_model,
    simulate,
    singular_value_grid,
)
from .errors import (
    InfeasibleProblem,
    InterpolationError,
    InvalidProblem,
    SingularL,
    UnequalIndices,
    UnstableA,
)
from .matpoly import MatrixPolynomial
from .verify import certify, certify_solution

EXIT_OK, EXIT_MALFORMED, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_CERT = 0, 1, 2, 3, 4


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (InfeasibleProblem, SingularL, UnequalIndices, UnstableA)):
        return EXIT_INFEASIBLE
    if isinstance(exc, InvalidProblem):
        return EXIT_MALFORMED
    if isinstance(exc, InterpolationError):
        return EXIT_SOLVER
    return EXIT_MALFORMED


def _options(raw: dict, args):
    return io.solver_options(
        raw,
        grid=getattr(args, "grid", None),
        newton_tol=getattr(args, "newton_tol", None),
        rank_tol=getattr(args, "rank_tol", None),
        max_steps=getattr(args, "max_steps", None),
    )


def _roots(text: str | None):
    if text is None:
        return None
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_solve(args) -> int:
    problem, sigma, raw = io.problem_from_dict(io.load_json(args.problem))
    if sigma is None:
        raise InvalidProblem("problem file has no 'sigma' prior")
    opts = _options(raw, args)
    inp = CeeInput.prepare(problem, sigma)
    p, trace = continue_path(inp, opts)
    sol = assemble_solution(p, inp, opts, trace)
    report = certify_solution(sol, problem, opts.grid)
    residuals = {
        "cee": cee_residual(sol.P, inp),
        "interpolation": report.interp_residual,
        "spectral": report.spectral_residual,
        "pr_min_eig": report.pr_min_eig,
        "consistency": sol.consistency,
    }
    out = Path(args.output or Path(args.problem).with_suffix(".solution.json"))
    io.dump_json(io.solution_to_dict(sol, residuals), out)
    with np.printoptions(precision=4, suppress=True):
        print(f"A =\n{sol.A.coeff}\nB =\n{sol.B.coeff}\nR =\n{sol.R}")
        print(f"P eigenvalues: {sol.p_eigenvalues}")
    print(f"rank P: {sol.rank_P}")
    print(f"continuation: {len(trace.lambdas) - 1} steps, {trace.rejected} rejected")
    print(report.to_text(), end="")
    print(f"solution written to {out}")
    if not report.passed:
        raise CommandFailed(EXIT_CERT, "solution failed certification")
    return EXIT_OK


def cmd_verify(args) -> int:
    parts = io.solution_parts(io.load_json(args.solution))
    problem, _, _ = io.problem_from_dict(io.load_json(args.problem))
    report = certify(parts["A"], parts["B"], parts["Sigma"], parts["R"], problem,
                     G=parts["G"], rank_P=parts["rank_P"], grid=args.grid or 512)
    print(report.to_text(), end="")
    if not report.passed:
        raise CommandFailed(EXIT_CERT, "certification failed")
    return EXIT_OK


def _sv_header(grid) -> list[str]:
    return ["theta"] + [f"s{i + 1}" for i in range(grid.shape[1] - 1)]


def _write_fit(outdir: Path, prefix: str, fit, points: int):
    io.dump_json(io.solution_to_dict(fit.solution), outdir / f"{prefix}solution.json")
    grid = singular_value_grid(fit, points)
    io.write_csv(outdir / f"{prefix}svgrid.csv", _sv_header(grid), grid)


def _spectrum_rows(label, eig):
    return [[label, float(i), float(v)] for i, v in enumerate(eig)]


def cmd_covext(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    system = io.system_from_dict(io.load_json(args.system)) if args.system else None
    if system is None and args.series is None:
        raise InvalidProblem("give --system or --series")
    sigma_roots = _roots(args.sigma_roots)
    if system is not None:
        ell = system.A.spec.ell
        sigma = system.Sigma if sigma_roots is None else MatrixPolynomial.scalar_times_identity(ell, sigma_roots)
    else:
        if sigma_roots is None:
            raise InvalidProblem("--sigma-roots is required with --series")
        sigma = None
    if args.exact_cov:
        if system is None:
            raise InvalidProblem("--exact-cov needs --system")
        covs = exact_covariances(system, args.lags)
    else:
        if args.series:
            series = io.read_series(args.series)
        else:
            series = simulate(system, args.samples, args.seed)
        covs = estimate_covariances(series, args.lags)
    if sigma is None:
        sigma = MatrixPolynomial.scalar_times_identity(covs.ell, sigma_roots)
    io.write_covariances(outdir / "covariances.csv", covs)

    opts = _options({}, args)
    fit = fit_covariances(covs, sigma, opts)
    _write_fit(outdir, "", fit, args.points)
    spectrum = _spectrum_rows("full", fit.p_eigenvalues)
    lmax = float(np.max(fit.p_eigenvalues))
    small = int(np.sum(fit.p_eigenvalues < 1e-2 * lmax))
    print(f"order {fit.n}: P eigenvalues {' '.join(f'{x:.3g}' for x in fit.p_eigenvalues)}")
    print(f"eigenvalues below 1e-2 * max: {small}")
    if args.reduce_to is not None:
        reduced_roots = _roots(args.reduced_roots)
        if reduced_roots is None or len(reduced_roots) != args.reduce_to:
            raise InvalidProblem("--reduced-roots must list exactly --reduce-to roots")
        red = reduce_model(fit, covs, args.reduce_to, MatrixPolynomial.scalar_times_identity(covs.ell, reduced_roots), opts)
        _write_fit(outdir, "reduced_", red, args.points)
        spectrum += _spectrum_rows("reduced", red.p_eigenvalues)
        print(f"order {red.n}: P eigenvalues {' '.join(f'{x:.3g}' for x in red.p_eigenvalues)}")
    if system is not None:
        grid = singular_value_grid(system, args.points)
        io.write_csv(outdir / "true_svgrid.csv", _sv_header(grid), grid)
    io.write_csv(outdir / "p_spectrum.csv", ["model", "index", "eigenvalue"], spectrum)
    print(f"artifacts written to {outdir}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    covs: CovarianceSequence = io.read_covariances(args.covariances)
    roots = _roots(args.sigma_roots)
    if roots is None or len(roots) != args.order:
        raise InvalidProblem("--sigma-roots must list exactly --order roots")
    sigma = MatrixPolynomial.scalar_times_identity(covs.ell, roots)
    fit = fit_covariances(covs.truncated(args.order + 1), sigma, _options({}, args))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_fit(outdir, "", fit, args.points)
    io.write_csv(outdir / "p_spectrum.csv", ["model", "index", "eigenvalue"], _spectrum_rows("reduced", fit.p_eigenvalues))
    print(f"order {fit.n}: P eigenvalues {' '.join(f'{x:.3g}' for x in fit.p_eigenvalues)}")
    return EXIT_OK


def cmd_svgrid(args) -> int:
    if args.system:
        factor = io.system_from_dict(io.load_json(args.system))
    elif args.solution:
        parts = io.solution_parts(io.load_json(args.solution))
        from .matpoly import SpectralFactor

        factor = SpectralFactor(parts["A"], parts["Sigma"], parts["R"])
    else:
        raise InvalidProblem("give --system or --solution")
    grid = singular_value_grid(factor, args.points)
    header = _sv_header(grid)
    if args.output:
        io.write_csv(args.output, header, grid)
        print(f"grid written to {args.output}")
    else:
        print(io.format_csv(header, grid), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ratinterp", description="Multivariable analytic interpolation with degree constraint")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--grid", type=int, help="unit-circle sample points for certification")
        p.add_argument("--newton-tol", type=float)
        p.add_argument("--rank-tol", type=float)
        p.add_argument("--max-steps", type=int)

    p = sub.add_parser("solve", help="solve an interpolation problem file")
    p.add_argument("problem")
    p.add_argument("-o", "--output")
    solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="certify a solution against a problem")
    p.add_argument("solution")
    p.add_argument("problem")
    p.add_argument("--grid", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("covext", help="covariance extension from a system or a series")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--system")
    src.add_argument("--series")
    p.add_argument("--lags", type=int, default=5, help="highest covariance lag (= model order n)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="N; the series has N + 1 samples")
    p.add_argument("--exact-cov", action="store_true", help="use exact covariances of --system")
    p.add_argument("--sigma-roots", help="comma-separated roots of a scalar prior sigma(z) I")
    p.add_argument("--reduce-to", type=int)
    p.add_argument("--reduced-roots")
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--out", default="covext_out")
    solver_flags(p)
    p.set_defaults(func=cmd_covext)

    p = sub.add_parser("reduce", help="fit a reduced-order model from a covariance table")
    p.add_argument("--covariances", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--sigma-roots", required=True)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--out", default="reduce_out")
    solver_flags(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("svgrid", help="singular values of V(e^{i theta})")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--system")
    src.add_argument("--solution")
    p.add_argument("--points", type=int, default=256)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_svgrid)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = EXIT_OK if exc.code in (0, None) else EXIT_MALFORMED
        print(f"status={'ok' if code == 0 else 'error'} exit={code} command=none")
        return code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
        detail = "ok"
    except CommandFailed as exc:
        code, detail = exc.code, str(exc)
    except (InterpolationError, ValueError, KeyError, OSError) as exc:
        code, detail = _exit_code(exc), str(exc)
    if code != EXIT_OK:
        print(f"error: {detail}", file=sys.stderr)
    sys.stdout.flush()
    print(f"status={'ok' if code == EXIT_OK else 'error'} exit={code} command={args.command}"
          + ("" if code == EXIT_OK else f" reason={type_tag(code)}"))
    return code


def type_tag(code: int) -> str:
    return {EXIT_MALFORMED: "malformed", EXIT_INFEASIBLE: "infeasible", EXIT_SOLVER: "solver", EXIT_CERT: "certification"}[code]


if __name__ == "__main__":
    sys.exit(main())
