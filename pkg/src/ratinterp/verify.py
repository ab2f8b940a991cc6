"""Independent certification of interpolants and a ground-truth generator."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from ._linalg import max_abs, psd_sqrt, unvec, vec
from .cee import CeeSolution
from .errors import RejectionExhausted, SingularBasis, UnstableA
from .matpoly import (
    DEFAULT_GRID,
    MatrixPolynomial,
    is_schur,
    positive_real_check,
    spectral_identity_residual,
    split_coefficients,
    stack_M,
    toeplitz_S,
)
from .problem import (
    InterpolationProblem,
    build_e,
    build_T_That,
    build_W,
    build_Z,
)
from .structure import StructureSpec, build_L, build_u_U, build_V

INTERP_TOL = 1e-8
SPECTRAL_TOL = 1e-8
PR_TOL = -1e-10


def _realization(A: MatrixPolynomial, B: MatrixPolynomial):
    if not is_schur(A).stable:
        raise UnstableA("A(z) is not Schur stable")
    can = A.canonical
    Fmat = can.J - A.coeff @ can.H
    G = 0.5 * (B.coeff - A.coeff)
    return Fmat, G, can.H


def taylor_from_realization(A: MatrixPolynomial, B: MatrixPolynomial, z: float, count: int) -> list[np.ndarray]:
    """``F^(k)(z)/k!`` for ``k < count`` via the resolvent of ``F = J - A H``."""
    Fmat, G, H = _realization(A, B)
    ell = H.shape[0]
    Rz = np.linalg.inv(np.eye(Fmat.shape[0]) - z * Fmat)
    FR = Fmat @ Rz
    out = []
    Rk_prev = None  # R (F R)^(k-1)
    Rk = Rz  # R (F R)^k
    for k in range(count):
        term = z * Rk if Rk_prev is None else z * Rk + Rk_prev
        Wk = H @ term @ G
        if k == 0:
            Wk = Wk + 0.5 * np.eye(ell)
        out.append(Wk)
        Rk_prev, Rk = Rk, Rk @ FR
    return out


def interpolation_residual(A: MatrixPolynomial, B: MatrixPolynomial, problem: InterpolationProblem) -> float:
    """Largest deviation ``|F^(k)(z_j)/k! - W_jk|`` over all conditions."""
    worst = 0.0
    for j, (z, nj) in enumerate(zip(problem.nodes, problem.multiplicities)):
        for k, Wk in enumerate(taylor_from_realization(A, B, z, nj)):
            worst = max(worst, max_abs(Wk - problem.values[(j, k)]))
    return worst


def interpolation_residual_matrix_function(
    A: MatrixPolynomial, B: MatrixPolynomial, problem: InterpolationProblem
) -> float:
    """Same quantity through ``F(Z x I) - W`` in closed form."""
    Fmat, G, H = _realization(A, B)
    Z = build_Z(problem)
    m = Z.shape[0]
    d = Fmat.shape[0]
    inner = np.linalg.solve(np.eye(m * d) - np.kron(Z, Fmat), np.kron(np.eye(m), G))
    FZ = 0.5 * np.eye(m * problem.ell) + np.kron(np.eye(m), H) @ np.kron(Z, np.eye(d)) @ inner
    return max_abs(FZ - build_W(problem))


def scalar_operators(problem: InterpolationProblem) -> tuple[np.ndarray, np.ndarray]:
    """``(u, U)`` from ``[u U] = [0 I] [e V]^{-1} (W + I/2)^{-1} (W - I/2) [e V]``."""
    if problem.ell != 1:
        raise ValueError("scalar construction needs ell = 1")
    n = problem.n
    Z, e, W = build_Z(problem), build_e(problem), build_W(problem)
    cols = [e]
    for _ in range(n):
        cols.append(Z @ cols[-1])
    basis = np.column_stack(cols)
    if np.linalg.cond(basis) > 1e12:
        raise SingularBasis("[e V] is singular")
    I = np.eye(n + 1)
    M = np.linalg.solve(basis, np.linalg.solve(W + 0.5 * I, (W - 0.5 * I) @ basis))
    return M[1:, 0], M[1:, 1:]


def scalar_uU_crosscheck(problem: InterpolationProblem) -> float:
    """Max deviation between the scalar ``(u, U)`` and the general operators."""
    u_s, U_s = scalar_operators(problem)
    spec = StructureSpec.uniform(1, problem.n)
    can = MatrixPolynomial.identity_like(spec).canonical
    Z, e = build_Z(problem), build_e(problem)
    _, That = build_T_That(build_W(problem), e, 1)
    L, _ = build_L(build_V(Z, e, spec), can.N, 1)
    ops = build_u_U(L, Z, can, That, spec)
    return max(max_abs(ops.u.ravel() - u_s), max_abs(ops.Umat - U_s))


def scalar_recovery_crosscheck(solution: CeeSolution, problem: InterpolationProblem) -> tuple[float, float]:
    """Recompute ``(a, b)`` with the scalar operators.

    Returns the max deviation from the solution's ``(A, B)`` and ``h P h'``.
    """
    u, U = scalar_operators(problem)
    can = solution.A.canonical
    h = can.H.ravel()
    sigma = solution.sigma.coeff.ravel()
    Gamma = can.J - np.outer(sigma, h)
    x = Gamma @ solution.P @ h + sigma
    a = x - U @ x - u
    b = x + U @ x + u
    dev = max(max_abs(a - solution.A.coeff.ravel()), max_abs(b - solution.B.coeff.ravel()))
    return dev, float(h @ solution.P @ h)


@dataclass(frozen=True)
class CertificationReport:
    interp_residual: float
    spectral_residual: float
    pr_min_eig: float
    stable_A: bool
    rank_P: int
    leading_coeff_residual: float
    gain_residual: float

    @property
    def passed(self) -> bool:
        return (
            self.stable_A
            and self.interp_residual <= INTERP_TOL
            and self.spectral_residual <= SPECTRAL_TOL
            and self.pr_min_eig >= PR_TOL
        )

    def to_text(self) -> str:
        rows = [
            ("interp_residual", f"{self.interp_residual:.6e}"),
            ("spectral_residual", f"{self.spectral_residual:.6e}"),
            ("pr_min_eig", f"{self.pr_min_eig:.6e}"),
            ("stable_A", str(self.stable_A).lower()),
            ("rank_P", str(self.rank_P)),
            ("leading_coeff_residual", f"{self.leading_coeff_residual:.6e}"),
            ("gain_residual", f"{self.gain_residual:.6e}"),
            ("pass", str(self.passed).lower()),
        ]
        return "\n".join(f"{k}: {v}" for k, v in rows) + "\n"


def leading_coeff_residual(A, B, sigma, R) -> float:
    """``|A_n + B_n - 2 Sigma_n R R'|``."""
    n = A.spec.n
    return max_abs(A.coefficient(n) + B.coefficient(n) - 2.0 * sigma.coefficient(n) @ R @ R.T)


def certify(
    A: MatrixPolynomial,
    B: MatrixPolynomial,
    sigma: MatrixPolynomial,
    R: np.ndarray,
    problem: InterpolationProblem,
    G: np.ndarray | None = None,
    rank_P: int = -1,
    grid: int = DEFAULT_GRID,
) -> CertificationReport:
    stable = is_schur(A).stable
    if stable:
        interp = interpolation_residual(A, B, problem)
        pr = positive_real_check(A, B, grid).min_eig
    else:
        interp, pr = np.inf, -np.inf
    gain = max_abs(B.coeff - A.coeff - 2.0 * G) if G is not None else 0.0
    return CertificationReport(
        interp_residual=float(interp),
        spectral_residual=spectral_identity_residual(A, B, sigma, R, grid),
        pr_min_eig=float(pr),
        stable_A=stable,
        rank_P=rank_P,
        leading_coeff_residual=leading_coeff_residual(A, B, sigma, R),
        gain_residual=gain,
    )


def certify_solution(solution: CeeSolution, problem: InterpolationProblem, grid: int = DEFAULT_GRID) -> CertificationReport:
    return certify(solution.A, solution.B, solution.sigma, solution.R, problem,
                   G=solution.G, rank_P=solution.rank_P, grid=grid)


# ---------------------------------------------------------------------------
# ground-truth generation


@dataclass(frozen=True)
class RoundTrip:
    problem: InterpolationProblem
    A: MatrixPolynomial
    B: MatrixPolynomial
    sigma: MatrixPolynomial
    R: np.ndarray
    degree: int


def reversed_coefficients(poly: MatrixPolynomial) -> list[np.ndarray]:
    return [poly.coefficient(k) for k in range(poly.spec.n + 1)]


def from_reversed_coefficients(coeffs: Sequence[np.ndarray], role: str = "A") -> MatrixPolynomial:
    """Inverse of :func:`reversed_coefficients` for equal indices."""
    ell = coeffs[0].shape[0]
    n = len(coeffs) - 1
    C = np.stack(coeffs[1:], axis=1)  # (ell, n, ell)
    return MatrixPolynomial(StructureSpec.uniform(ell, n), C.reshape(ell * n, ell), role)


def times_scalar(poly: MatrixPolynomial, roots: Sequence[float]) -> MatrixPolynomial:
    """``q(z) poly(z)`` with monic ``q`` of the given real roots."""
    if not len(roots):
        return poly
    q_rev = np.poly(np.asarray(roots, dtype=float)).real  # q_*(z) coefficients, ascending powers
    X = reversed_coefficients(poly)
    ell = X[0].shape[0]
    out = [np.zeros((ell, ell)) for _ in range(len(X) + len(q_rev) - 1)]
    for i, c in enumerate(q_rev):
        for k, Xk in enumerate(X):
            out[i + k] = out[i + k] + c * Xk
    return from_reversed_coefficients(out, poly.role)


def solve_numerator(A: MatrixPolynomial, sigma: MatrixPolynomial) -> tuple[MatrixPolynomial, np.ndarray]:
    """Find ``(B, X = R R')`` with ``A B~ + B A~ = 2 Sigma X Sigma~``.

    Coefficient matching on powers ``z^0..z^n`` of the two-sided identity; the
    ``z^0`` block is symmetric so only its upper triangle is kept, and the
    ``z^n`` block is the leading-coefficient relation ``A_n + B_n = 2 Sigma_n X``.
    The result is a square linear system in ``(B, X)``.
    """
    spec = A.spec
    ell, n = spec.ell, spec.n
    I = np.eye(ell)
    Ac = [I] + split_coefficients(A.coeff, ell, n)
    Sc = [I] + split_coefficients(sigma.coeff, ell, n)
    iu = np.triu_indices(ell)
    nB = spec.dim * ell
    nX = len(iu[0])

    def unpack(theta):
        Bcoef = unvec(theta[:nB], spec.dim, ell)
        X = np.zeros((ell, ell))
        X[iu] = theta[nB:]
        X = X + np.triu(X, 1).T
        return Bcoef, X

    def residual(theta):
        Bcoef, X = unpack(theta)
        Bc = [I] + split_coefficients(Bcoef, ell, n)
        SA, MA = toeplitz_S(Ac[1:]), stack_M(Ac[1:])
        SB, MB = toeplitz_S(Bc[1:]), stack_M(Bc[1:])
        SS, MS = toeplitz_S(Sc[1:]), stack_M(Sc[1:])
        full = SA @ MB + SB @ MA - 2.0 * SS @ np.kron(np.eye(n + 1), X) @ MS
        return np.concatenate([full[:ell][iu], vec(full[ell:])])

    size = nB + nX
    c0 = residual(np.zeros(size))
    M = np.column_stack([residual(np.eye(size)[i]) - c0 for i in range(size)])
    theta = np.linalg.solve(M, -c0)
    Bcoef, X = unpack(theta)
    return MatrixPolynomial(spec, Bcoef, "B"), X


def taylor_from_polynomials(A: MatrixPolynomial, B: MatrixPolynomial, z: float, count: int) -> list[np.ndarray]:
    """Taylor coefficients of ``A_*^{-1} B_* / 2`` at ``z`` by series division."""
    def shifted(poly):
        X = reversed_coefficients(poly)
        return [sum(comb(k, i) * z ** (k - i) * X[k] for k in range(i, len(X))) for i in range(len(X))]

    alpha, beta = shifted(A), shifted(B)
    ell = alpha[0].shape[0]
    pad = lambda seq, i: seq[i] if i < len(seq) else np.zeros((ell, ell))
    out = []
    for k in range(count):
        rhs = 0.5 * pad(beta, k) - sum(pad(alpha, i) @ out[k - i] for i in range(1, k + 1))
        out.append(np.linalg.solve(alpha[0], rhs))
    return out


def _random_stable(rng, spec, scale, radius, role):
    for _ in range(1000):
        poly = MatrixPolynomial(spec, scale * rng.standard_normal((spec.dim, spec.ell)), role)
        eig = is_schur(poly).eigenvalues
        if np.max(np.abs(eig), initial=0.0) < radius:
            return poly
    raise RejectionExhausted(f"no Schur-stable {role} with radius < {radius} in 1000 draws")


def _random_nodes(rng, n, max_nodes):
    count = int(rng.integers(1, min(n + 1, max_nodes) + 1))
    cuts = np.sort(rng.choice(np.arange(1, n + 1), size=count - 1, replace=False)) if count > 1 else []
    mults = np.diff(np.concatenate([[0], cuts, [n + 1]])).astype(int)
    nodes = [0.0]
    while len(nodes) < count:
        z = float(rng.uniform(-0.7, 0.7))
        if min(abs(z - w) for w in nodes) > 0.15:
            nodes.append(round(z, 6))
    return nodes, [int(m) for m in mults]


def roundtrip_oracle(
    spec: StructureSpec,
    rng_seed: int,
    drop: int = 0,
    nodes: Sequence[float] | None = None,
    multiplicities: Sequence[int] | None = None,
    max_nodes: int = 3,
    scale: float = 0.3,
    radius: float = 0.8,
) -> RoundTrip:
    """Random positive-real ground truth and the interpolation data it induces.

    ``A`` and ``Sigma`` are drawn Schur stable, ``B`` and ``R R'`` follow from
    the spectral identity, and ``drop`` common scalar roots are multiplied into
    ``A, B, Sigma`` so the McMillan degree is ``ell * (n - drop)``.
    """
    if not spec.equal_indices:
        raise ValueError("round-trip generation needs equal observability indices")
    rng = np.random.default_rng(rng_seed)
    core = StructureSpec.uniform(spec.ell, spec.n - drop)
    for _ in range(1000):
        A0 = _random_stable(rng, core, scale, radius, "A")
        S0 = _random_stable(rng, core, scale, radius, "Sigma")
        B0, X = solve_numerator(A0, S0)
        if np.linalg.eigvalsh(X)[0] < 0.05:
            continue
        if not is_schur(B0).stable or positive_real_check(A0, B0, 256).min_eig < 1e-3:
            continue
        break
    else:
        raise RejectionExhausted("no positive-real ground truth in 1000 draws")
    roots = [float(r) for r in rng.uniform(-0.6, 0.6, size=drop)]
    A, B, sigma = (times_scalar(P, roots) for P in (A0, B0, S0))
    if nodes is None:
        nodes, multiplicities = _random_nodes(rng, spec.n, max_nodes)
    values = {}
    for j, (z, nj) in enumerate(zip(nodes, multiplicities)):
        for k, Wk in enumerate(taylor_from_polynomials(A, B, z, nj)):
            values[(j, k)] = Wk
    problem = InterpolationProblem(spec.ell, tuple(nodes), tuple(multiplicities), values)
    return RoundTrip(problem, A, B, sigma, psd_sqrt(X), spec.ell * core.n)
