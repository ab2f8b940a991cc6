"""Covariance Extension Equation solver.

The unknown is ``p = P H'`` (``ell*n x ell``).  With

    A(p, lam) = Gamma p + Sigma - lam (u + U(Gamma p + Sigma))
    B(p, lam) = Gamma p + Sigma + lam (u + U(Gamma p + Sigma))

the homotopy residual is the top ``n`` block rows of

    S(A) M(B) + S(B) M(A) - 2 S(Sigma) (I x (I - H p)) M(Sigma),

which vanishes at ``(p, lam) = (0, 0)``.  The zero set is tracked to
``lam = 1`` by an Euler predictor and Newton corrector, after which ``P``
comes from a Stein equation and ``(A, B, R)`` from the recovery formulas.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._linalg import max_abs, psd_sqrt, stein_solve, sym, unvec, vec
from .errors import (
    InconsistentP,
    InfeasibleProblem,
    InvalidProblem,
    JacobianSingular,
    NotPSD,
    Saturated,
    StepCollapse,
    UnequalIndices,
    UnstableA,
)
from .matpoly import MatrixPolynomial, SpectralFactor, is_schur, split_coefficients
from .problem import DerivedProblemMatrices, InterpolationProblem
from .structure import (
    CanonicalMatrices,
    InterpolationOperators,
    StructureSpec,
    build_L,
    build_u_U,
    build_V,
)

logger = logging.getLogger(__name__)

CONSISTENCY_WARN = 1e-8
CONSISTENCY_FAIL = 1e-6
PSD_TOL = 1e-9
SATURATION_TOL = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    initial_step: float = 0.05
    min_step: float = 1e-6
    max_step: float = 0.5
    newton_tol: float = 1e-12
    max_newton: int = 20
    fast_newton: int = 3
    grow_after: int = 3
    max_steps: int = 10_000
    cond_limit: float = 1e14
    rank_tol: float = 1e-6
    grid: int = 512


@dataclass
class ContinuationTrace:
    lambdas: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    newton_iters: list[int] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    rejected: int = 0


@dataclass(frozen=True)
class CeeInput:
    """Everything the continuation needs, for a fixed prior ``Sigma``."""

    spec: StructureSpec
    canonical: CanonicalMatrices
    operators: InterpolationOperators
    sigma: MatrixPolynomial

    @cached_property
    def Gamma(self) -> np.ndarray:
        return self.canonical.gamma(self.sigma.coeff)

    @cached_property
    def sigma_coeffs(self) -> list[np.ndarray]:
        return split_coefficients(self.sigma.coeff, self.spec.ell, self.spec.n)

    @classmethod
    def prepare(cls, problem: InterpolationProblem, sigma: MatrixPolynomial) -> "CeeInput":
        """Validate ``(problem, sigma)`` and build the interpolation operators.

        Raises
        ------
        InfeasibleProblem
            If the Pick matrix is not positive definite.
        SingularL
            If the observability indices of ``sigma`` are unequal.
        UnstableA
            If ``sigma`` is not Schur stable.
        """
        spec = sigma.spec
        if spec.ell != problem.ell or spec.n != problem.n:
            raise InvalidProblem(
                f"prior has (ell, n) = ({spec.ell}, {spec.n}) but the data need ({problem.ell}, {problem.n})"
            )
        derived = DerivedProblemMatrices.from_problem(problem)
        pick = derived.pick(problem.ell)
        if not pick.feasible:
            raise InfeasibleProblem(f"Pick matrix not positive definite (min eigenvalue {pick.min_eig:.3e})")
        canonical = sigma.canonical
        V = build_V(derived.Z, derived.e, spec)
        L, _ = build_L(V, canonical.N, spec.ell)
        if not spec.equal_indices:
            raise UnequalIndices("the solver requires all observability indices equal to n")
        if not is_schur(sigma).stable:
            raise UnstableA("prior Sigma(z) is not Schur stable")
        ops = build_u_U(L, derived.Z, canonical, derived.That, spec, V=V)
        return cls(spec=spec, canonical=canonical, operators=ops, sigma=sigma)


def _top_blocks(X, Y, n):
    """Block rows ``0..n-1`` of ``S(X) M(Y)``; ``X[0]``/``Y[0]`` are the leading blocks."""
    return [sum(X[j] @ Y[i + j].T for j in range(n + 1 - i)) for i in range(n)]


def _pair(base, g):
    return base - g, base + g


def _coefs(X, ell, n, lead):
    return [lead] + split_coefficients(X, ell, n)


def homotopy_residual(p: np.ndarray, lam: float, inp: CeeInput) -> np.ndarray:
    ell, n = inp.spec.ell, inp.spec.n
    ops = inp.operators
    H = inp.canonical.H
    base = inp.Gamma @ p + inp.sigma.coeff
    A, B = _pair(base, ops.G_of(base, lam))
    I = np.eye(ell)
    Ac, Bc = _coefs(A, ell, n, I), _coefs(B, ell, n, I)
    Sc = [I] + inp.sigma_coeffs
    X = I - H @ p
    lhs = [a + b for a, b in zip(_top_blocks(Ac, Bc, n), _top_blocks(Bc, Ac, n))]
    rhs = _top_blocks([s @ X for s in Sc], Sc, n)
    return np.vstack([l - 2.0 * r for l, r in zip(lhs, rhs)])


def _bilinear_derivative(A, B, dA, dB, ell, n):
    """Derivative of the symmetric bilinear part for coefficient increments ``dA, dB``."""
    I, Z = np.eye(ell), np.zeros((ell, ell))
    Ac, Bc = _coefs(A, ell, n, I), _coefs(B, ell, n, I)
    dAc, dBc = _coefs(dA, ell, n, Z), _coefs(dB, ell, n, Z)
    parts = (
        _top_blocks(dAc, Bc, n),
        _top_blocks(Ac, dBc, n),
        _top_blocks(dBc, Ac, n),
        _top_blocks(Bc, dAc, n),
    )
    return [sum(blk) for blk in zip(*parts)]


def homotopy_jacobian(p: np.ndarray, lam: float, inp: CeeInput) -> np.ndarray:
    """d vec(residual) / d vec(p), assembled one direction at a time."""
    ell, n, dim = inp.spec.ell, inp.spec.n, inp.spec.dim
    ops = inp.operators
    H, Gamma = inp.canonical.H, inp.Gamma
    base = Gamma @ p + inp.sigma.coeff
    A, B = _pair(base, ops.G_of(base, lam))
    Sc = [np.eye(ell)] + inp.sigma_coeffs
    Jac = np.empty((dim * ell, dim * ell))
    for col in range(dim * ell):
        E = np.zeros(dim * ell)
        E[col] = 1.0
        dp = unvec(E, dim, ell)
        dbase = Gamma @ dp
        dg = lam * ops.apply_U(dbase)
        dA, dB = dbase - dg, dbase + dg
        lhs = _bilinear_derivative(A, B, dA, dB, ell, n)
        HdP = H @ dp
        rhs = _top_blocks([s @ HdP for s in Sc], Sc, n)
        Jac[:, col] = vec(np.vstack([l + 2.0 * r for l, r in zip(lhs, rhs)]))
    return Jac


def homotopy_lambda_derivative(p: np.ndarray, lam: float, inp: CeeInput) -> np.ndarray:
    ell, n = inp.spec.ell, inp.spec.n
    ops = inp.operators
    base = inp.Gamma @ p + inp.sigma.coeff
    g0 = ops.G_of(base, 1.0)
    A, B = _pair(base, lam * g0)
    return np.vstack(_bilinear_derivative(A, B, -g0, g0, ell, n))


def davidenko_rhs(p: np.ndarray, lam: float, inp: CeeInput) -> np.ndarray:
    """Path tangent ``dp/dlam = -(dH/dp)^{-1} dH/dlam``."""
    dim, ell = inp.spec.dim, inp.spec.ell
    Jac = homotopy_jacobian(p, lam, inp)
    rhs = vec(homotopy_lambda_derivative(p, lam, inp))
    return unvec(-np.linalg.solve(Jac, rhs), dim, ell)


def _newton(p, lam, inp, opts):
    """Returns ``(p, iterations, residual)``; ``p`` is None on failure."""
    dim, ell = inp.spec.dim, inp.spec.ell
    res = homotopy_residual(p, lam, inp)
    r = max_abs(res)
    r0 = r
    for it in range(1, opts.max_newton + 1):
        if r <= opts.newton_tol:
            return p, it - 1, r
        Jac = homotopy_jacobian(p, lam, inp)
        cond = np.linalg.cond(Jac)
        if not np.isfinite(cond) or cond > opts.cond_limit:
            raise JacobianSingular(f"corrector Jacobian condition {cond:.3e} at lambda={lam:.6g}")
        p = p - unvec(np.linalg.solve(Jac, vec(res)), dim, ell)
        res = homotopy_residual(p, lam, inp)
        r = max_abs(res)
        if not np.isfinite(r) or r > 1e3 * max(r0, 1e-8):
            return None, it, r
    if r <= opts.newton_tol:
        return p, opts.max_newton, r
    return None, opts.max_newton, r


def continue_path(inp: CeeInput, options: SolverOptions | None = None) -> tuple[np.ndarray, ContinuationTrace]:
    """Track ``H(p, lam) = 0`` from ``(0, 0)`` to ``lam = 1``."""
    opts = options or SolverOptions()
    dim, ell = inp.spec.dim, inp.spec.ell
    p = np.zeros((dim, ell))
    lam = 0.0
    h = opts.initial_step
    trace = ContinuationTrace()
    trace.lambdas.append(0.0)
    trace.step_sizes.append(0.0)
    trace.newton_iters.append(0)
    trace.residual_norms.append(max_abs(homotopy_residual(p, 0.0, inp)))
    streak = 0
    steps = 0
    while lam < 1.0:
        steps += 1
        if steps > opts.max_steps:
            raise StepCollapse(f"no convergence within {opts.max_steps} steps (lambda={lam:.6g})")
        h = min(h, opts.max_step, 1.0 - lam)
        target = 1.0 if 1.0 - lam - h < 1e-14 else lam + h
        tangent = davidenko_rhs(p, lam, inp)
        q, iters, r = _newton(p + (target - lam) * tangent, target, inp, opts)
        if q is None:
            trace.rejected += 1
            streak = 0
            h *= 0.5
            logger.debug("rejected step to %.6g (residual %.3e), halving to %.3g", target, r, h)
            if h < opts.min_step:
                raise StepCollapse(f"step size fell below {opts.min_step:g} at lambda={lam:.6g}")
            continue
        p, lam = q, target
        trace.lambdas.append(lam)
        trace.step_sizes.append(h)
        trace.newton_iters.append(iters)
        trace.residual_norms.append(r)
        streak = streak + 1 if iters <= opts.fast_newton else 0
        if streak >= opts.grow_after:
            h *= 2.0
            streak = 0
    return p, trace


@dataclass(frozen=True)
class CeeSolution:
    P: np.ndarray
    p: np.ndarray
    A: MatrixPolynomial
    B: MatrixPolynomial
    sigma: MatrixPolynomial
    R: np.ndarray
    G: np.ndarray
    K: np.ndarray
    rank_P: int
    p_eigenvalues: np.ndarray
    consistency: float
    trace: ContinuationTrace | None = None

    def F(self, z) -> np.ndarray:
        """Interpolant ``A_*(z)^{-1} B_*(z) / 2``."""
        return 0.5 * np.linalg.solve(self.A.reversed_at(z), self.B.reversed_at(z))

    def spectral_factor(self) -> SpectralFactor:
        return SpectralFactor(self.A, self.sigma, self.R)


def numerical_rank(eigenvalues: np.ndarray, rel_tol: float) -> int:
    lmax = float(np.max(eigenvalues, initial=0.0))
    if lmax <= 0.0:
        return 0
    return int(np.sum(eigenvalues >= rel_tol * lmax))


def assemble_solution(p: np.ndarray, inp: CeeInput, options: SolverOptions | None = None,
                      trace: ContinuationTrace | None = None) -> CeeSolution:
    """Recover ``(P, A, B, R, G, K)`` from the terminal ``p``."""
    opts = options or SolverOptions()
    ops, can = inp.operators, inp.canonical
    H, Gamma, Sig = can.H, inp.Gamma, inp.sigma.coeff
    ell = inp.spec.ell

    g_end = ops.G_of(Gamma @ p + Sig)
    Gp = Gamma @ p
    P = sym(stein_solve(Gamma, -Gp @ Gp.T + g_end @ g_end.T))
    consistency = max_abs(P @ H.T - p)
    if consistency > CONSISTENCY_FAIL:
        raise InconsistentP(f"|P H' - p| = {consistency:.3e}; path tracking drifted")
    if consistency > CONSISTENCY_WARN:
        logger.warning("P H' deviates from p by %.3e", consistency)
    eig = np.linalg.eigvalsh(P)
    if eig[0] < -PSD_TOL:
        raise NotPSD(f"P has eigenvalue {eig[0]:.3e}")

    PH = P @ H.T
    RR = sym(np.eye(ell) - H @ PH)
    rr_min = float(np.linalg.eigvalsh(RR)[0])
    if rr_min < SATURATION_TOL:
        raise Saturated(f"I - HPH' has eigenvalue {rr_min:.3e}")
    R = psd_sqrt(RR)

    base = Gamma @ PH + Sig
    G = ops.G_of(base)
    A = base - G
    B = A + 2.0 * G
    F = can.J - A @ H
    K = np.linalg.solve(R, (G - F @ PH).T).T  # (G - F P H') (R')^{-1}, R symmetric
    spec = inp.spec
    return CeeSolution(
        P=P,
        p=p,
        A=MatrixPolynomial(spec, A, "A"),
        B=MatrixPolynomial(spec, B, "B"),
        sigma=inp.sigma,
        R=R,
        G=G,
        K=K,
        rank_P=numerical_rank(eig, opts.rank_tol),
        p_eigenvalues=eig,
        consistency=consistency,
        trace=trace,
    )


def cee_residual(P: np.ndarray, inp: CeeInput) -> float:
    """Max-norm residual of the CEE at ``P``."""
    H, Gamma = inp.canonical.H, inp.Gamma
    G = inp.operators.G_of(Gamma @ P @ H.T + inp.sigma.coeff)
    X = P - Gamma @ (P - P @ H.T @ H @ P) @ Gamma.T - G @ G.T
    return max_abs(X)


def solve(problem: InterpolationProblem, sigma: MatrixPolynomial, options: SolverOptions | None = None) -> CeeSolution:
    """Prepare, continue and assemble in one call."""
    inp = CeeInput.prepare(problem, sigma)
    p, trace = continue_path(inp, options)
    return assemble_solution(p, inp, options, trace)
