"""JSON problem/solution files and CSV tables.

Matrices are stored row-major with explicit dimensions::

    {"shape": [rows, cols], "data": [a11, a12, ..., a21, ...]}

Nested lists of rows are accepted on input as well.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import numpy as np

from .cee import CeeSolution, SolverOptions
from .covext import CovarianceSequence
from .errors import InvalidProblem
from .matpoly import MatrixPolynomial, SpectralFactor
from .problem import InterpolationProblem
from .structure import StructureSpec

SOLUTION_FORMAT = "ratinterp-solution"


def encode_matrix(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"shape": list(M.shape), "data": [float(x) for x in M.ravel(order="C")]}


def decode_matrix(obj) -> np.ndarray:
    if isinstance(obj, dict):
        try:
            rows, cols = (int(s) for s in obj["shape"])
            data = np.asarray(obj["data"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidProblem(f"malformed matrix entry: {exc}") from exc
        if data.size != rows * cols:
            raise InvalidProblem(f"matrix data has {data.size} entries, shape says {rows}x{cols}")
        return data.reshape(rows, cols)
    M = np.asarray(obj, dtype=float)
    if M.ndim != 2:
        raise InvalidProblem("matrix must be 2-D")
    return M


def decode_sigma(obj: dict, ell: int, n: int | None = None) -> MatrixPolynomial:
    """Prior from ``{"roots": [...]}`` (scalar times identity) or ``{"indices", "coeff"}``."""
    if "roots" in obj:
        poly = MatrixPolynomial.scalar_times_identity(ell, obj["roots"])
    else:
        coeff = decode_matrix(obj["coeff"])
        indices = obj.get("indices")
        if indices is None:
            if n is None:
                n = coeff.shape[0] // ell
            indices = [n] * ell
        spec = StructureSpec(ell, sum(indices) // ell, tuple(indices))
        poly = MatrixPolynomial(spec, coeff, "Sigma")
    return poly


def solver_options(obj: dict | None, **overrides) -> SolverOptions:
    names = {f.name for f in fields(SolverOptions)}
    kwargs = {k: v for k, v in (obj or {}).items() if k in names}
    unknown = set(obj or {}) - names
    if unknown:
        raise InvalidProblem(f"unknown solver options {sorted(unknown)}")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return SolverOptions(**kwargs)


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidProblem(f"{path}: not valid JSON ({exc})") from exc


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def problem_from_dict(obj: dict) -> tuple[InterpolationProblem, MatrixPolynomial | None, dict]:
    """Returns ``(problem, sigma or None, raw options)``."""
    try:
        ell = int(obj["ell"])
        values = {(int(v["j"]), int(v["k"])): decode_matrix(v["matrix"]) for v in obj["values"]}
        problem = InterpolationProblem(ell, tuple(obj["nodes"]), tuple(obj["multiplicities"]), values)
    except (KeyError, TypeError) as exc:
        raise InvalidProblem(f"problem file missing or malformed field: {exc}") from exc
    sigma = decode_sigma(obj["sigma"], ell, problem.n) if "sigma" in obj else None
    return problem, sigma, obj.get("options") or {}


def problem_to_dict(problem: InterpolationProblem, sigma: MatrixPolynomial | None = None,
                    options: SolverOptions | None = None) -> dict:
    out: dict[str, Any] = {
        "ell": problem.ell,
        "nodes": list(problem.nodes),
        "multiplicities": list(problem.multiplicities),
        "values": [
            {"j": j, "k": k, "matrix": encode_matrix(problem.values[(j, k)])}
            for j, nj in enumerate(problem.multiplicities)
            for k in range(nj)
        ],
    }
    if sigma is not None:
        out["sigma"] = {"indices": list(sigma.spec.indices), "coeff": encode_matrix(sigma.coeff)}
    if options is not None:
        out["options"] = asdict(options)
    return out


def solution_to_dict(sol: CeeSolution, residuals: dict | None = None) -> dict:
    spec = sol.A.spec
    out = {
        "format": SOLUTION_FORMAT,
        "ell": spec.ell,
        "n": spec.n,
        "indices": list(spec.indices),
        "A": encode_matrix(sol.A.coeff),
        "B": encode_matrix(sol.B.coeff),
        "Sigma": encode_matrix(sol.sigma.coeff),
        "R": encode_matrix(sol.R),
        "G": encode_matrix(sol.G),
        "P": encode_matrix(sol.P),
        "p_eigenvalues": [float(x) for x in sol.p_eigenvalues],
        "rank_P": int(sol.rank_P),
        "consistency": float(sol.consistency),
    }
    if sol.trace is not None:
        out["trace"] = {
            "steps": len(sol.trace.lambdas) - 1,
            "rejected": sol.trace.rejected,
            "newton_iters": list(sol.trace.newton_iters),
        }
    if residuals:
        out["residuals"] = {k: float(v) for k, v in residuals.items()}
    return out


def solution_parts(obj: dict) -> dict:
    """Decode the polynomials and matrices of a solution file."""
    try:
        if obj.get("format") != SOLUTION_FORMAT:
            raise InvalidProblem("not a ratinterp solution file")
        spec = StructureSpec(int(obj["ell"]), int(obj["n"]), tuple(obj["indices"]))
        return {
            "A": MatrixPolynomial(spec, decode_matrix(obj["A"]), "A"),
            "B": MatrixPolynomial(spec, decode_matrix(obj["B"]), "B"),
            "Sigma": MatrixPolynomial(spec, decode_matrix(obj["Sigma"]), "Sigma"),
            "R": decode_matrix(obj["R"]),
            "G": decode_matrix(obj["G"]),
            "rank_P": int(obj.get("rank_P", -1)),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProblem(f"solution file missing or malformed field: {exc}") from exc


def system_from_dict(obj: dict) -> SpectralFactor:
    """System file: ``A`` coefficients, a prior (``Sigma`` or ``sigma_roots``), optional ``R``."""
    try:
        A = decode_matrix(obj["A"])
        ell = A.shape[1]
        if "sigma_roots" in obj:
            sigma = MatrixPolynomial.scalar_times_identity(ell, obj["sigma_roots"])
        else:
            sigma = decode_sigma({"coeff": obj["Sigma"], "indices": obj.get("indices")}, ell)
        R = decode_matrix(obj["R"]) if "R" in obj else np.eye(ell)
    except (KeyError, TypeError) as exc:
        raise InvalidProblem(f"system file missing or malformed field: {exc}") from exc
    return SpectralFactor(MatrixPolynomial(sigma.spec, A, "A"), sigma, R)


def system_to_dict(factor: SpectralFactor) -> dict:
    return {
        "A": encode_matrix(factor.A.coeff),
        "Sigma": encode_matrix(factor.Sigma.coeff),
        "indices": list(factor.A.spec.indices),
        "R": encode_matrix(factor.R),
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def format_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, header: list[str], rows) -> None:
    Path(path).write_text(format_csv(header, rows))


def write_covariances(path, covs: CovarianceSequence) -> None:
    ell = covs.ell
    header = ["lag"] + [f"c{i + 1}{j + 1}" for i in range(ell) for j in range(ell)]
    write_csv(path, header, [[float(k)] + list(C.ravel()) for k, C in enumerate(covs.lags)])


def read_covariances(path) -> CovarianceSequence:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ell = int(round(np.sqrt(data.shape[1] - 1)))
    if ell * ell != data.shape[1] - 1:
        raise InvalidProblem(f"{path}: covariance table needs 1 + ell^2 columns")
    return CovarianceSequence(tuple(row[1:].reshape(ell, ell) for row in data), "estimated")


def read_series(path) -> np.ndarray:
    """CSV with one header line and one column per output channel."""
    try:
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise InvalidProblem(f"{path}: malformed series ({exc})") from exc
