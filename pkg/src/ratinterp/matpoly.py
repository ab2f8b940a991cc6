"""Matrix polynomials in observer-canonical parameterization.

A coefficient matrix ``X`` (``ell*n x ell``) defines

    X(z)  = D(z) + Pi(z) X,          D(z) = diag(z^t_i)
    X_*(z) = D(z) X(1/z) = I + sum_k N_k X z^k

and the companion matrix ``J - X H`` whose characteristic polynomial is
``det X(z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ._linalg import max_abs
from .errors import UnequalIndices, UnstableA, UnstableFactor
from .structure import CanonicalMatrices, StructureSpec, build_canonical

SCHUR_MARGIN = 1e-12
PR_TOL = -1e-10
DEFAULT_GRID = 512


@lru_cache(maxsize=64)
def canonical_for(spec: StructureSpec) -> CanonicalMatrices:
    return build_canonical(spec)


@dataclass(frozen=True)
class MatrixPolynomial:
    """Monic-structured matrix polynomial ``D(z) + Pi(z) coeff``."""

    spec: StructureSpec
    coeff: np.ndarray
    role: str = "A"

    def __post_init__(self):
        c = np.array(self.coeff, dtype=float)
        if c.shape != (self.spec.dim, self.spec.ell):
            raise ValueError(f"coefficient matrix has shape {c.shape}, expected {(self.spec.dim, self.spec.ell)}")
        c.setflags(write=False)
        object.__setattr__(self, "coeff", c)

    @classmethod
    def identity_like(cls, spec: StructureSpec, role: str = "A") -> "MatrixPolynomial":
        """The polynomial ``D(z)`` (all coefficients zero)."""
        return cls(spec, np.zeros((spec.dim, spec.ell)), role)

    @classmethod
    def scalar_times_identity(cls, ell: int, roots: Sequence[float], role: str = "Sigma") -> "MatrixPolynomial":
        """``sigma(z) I`` with ``sigma`` the monic polynomial with the given real roots."""
        c = np.poly(np.asarray(roots, dtype=float)).real[1:]
        n = len(c)
        spec = StructureSpec.uniform(ell, n)
        return cls(spec, np.kron(np.eye(ell), c.reshape(-1, 1)), role)

    @property
    def canonical(self) -> CanonicalMatrices:
        return canonical_for(self.spec)

    def Pi(self, z) -> np.ndarray:
        spec = self.spec
        out = np.zeros((spec.ell, spec.dim), dtype=np.result_type(z, float))
        for i, (t_i, off) in enumerate(zip(spec.indices, spec.offsets)):
            out[i, off:off + t_i] = z ** np.arange(t_i - 1, -1, -1)
        return out

    def D(self, z) -> np.ndarray:
        return np.diag(np.asarray([z ** t for t in self.spec.indices]))

    def __call__(self, z) -> np.ndarray:
        return self.D(z) + self.Pi(z) @ self.coeff

    def coefficient(self, k: int) -> np.ndarray:
        """``N_k coeff``, the coefficient of ``z^k`` in the reversed polynomial."""
        if k == 0:
            return np.eye(self.spec.ell)
        return self.canonical.N_k(k) @ self.coeff

    def reversed_at(self, z) -> np.ndarray:
        out = np.eye(self.spec.ell, dtype=np.result_type(z, float))
        for k in range(1, self.spec.t + 1):
            out = out + self.coefficient(k) * z ** k
        return out

    def companion(self) -> np.ndarray:
        c = self.canonical
        return c.J - self.coeff @ c.H


def evaluate(poly: MatrixPolynomial, z) -> np.ndarray:
    return poly(z)


def reverse(poly: MatrixPolynomial) -> Callable[[complex], np.ndarray]:
    """Evaluation handle for ``D(z) poly(1/z)``."""
    return poly.reversed_at


class StabilityResult(NamedTuple):
    stable: bool
    eigenvalues: np.ndarray


def is_schur(poly: MatrixPolynomial) -> StabilityResult:
    """Schur stability through the companion eigenvalues."""
    eig = np.linalg.eigvals(poly.companion())
    stable = bool(np.all(np.abs(eig) < 1.0 - SCHUR_MARGIN))
    return StabilityResult(stable, eig)


class PositiveRealResult(NamedTuple):
    ok: bool
    min_eig: float


def unit_circle(grid: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(grid) / grid - np.pi
    return np.exp(1j * theta)


def positive_real_check(A: MatrixPolynomial, B: MatrixPolynomial, grid: int = DEFAULT_GRID) -> PositiveRealResult:
    """Sample ``Phi_+ + Phi_+^H`` on the unit circle, ``Phi_+ = A^{-1} B / 2``."""
    if not is_schur(A).stable:
        raise UnstableA("A(z) is not Schur stable")
    lo = np.inf
    for z in unit_circle(grid):
        Phi = 0.5 * np.linalg.solve(A(z), B(z))
        lo = min(lo, float(np.linalg.eigvalsh(Phi + Phi.conj().T)[0]))
    return PositiveRealResult(lo >= PR_TOL, lo)


def toeplitz_S(coeffs: Sequence[np.ndarray]) -> np.ndarray:
    """Upper block-Toeplitz matrix of ``(I, X_1, ..., X_n)``."""
    ell = coeffs[0].shape[0]
    n = len(coeffs)
    S = np.zeros((ell * (n + 1), ell * (n + 1)))
    blocks = [np.eye(ell)] + list(coeffs)
    for i in range(n + 1):
        for j in range(i, n + 1):
            S[i * ell:(i + 1) * ell, j * ell:(j + 1) * ell] = blocks[j - i]
    return S


def stack_M(coeffs: Sequence[np.ndarray]) -> np.ndarray:
    """``[I; X_1'; ...; X_n']``."""
    ell = coeffs[0].shape[0]
    return np.vstack([np.eye(ell)] + [X.T for X in coeffs])


def split_coefficients(coeff: np.ndarray, ell: int, n: int) -> list[np.ndarray]:
    """``[N_1 X, ..., N_n X]`` for equal indices, without building ``N``."""
    X = coeff.reshape(ell, n, ell)
    return [X[:, k, :] for k in range(n)]


def build_S_M(poly: MatrixPolynomial) -> tuple[np.ndarray, np.ndarray]:
    if not poly.spec.equal_indices:
        raise UnequalIndices("S/M matrices need all observability indices equal to n")
    coeffs = split_coefficients(poly.coeff, poly.spec.ell, poly.spec.n)
    return toeplitz_S(coeffs), stack_M(coeffs)


def spectral_identity_residual(
    A: MatrixPolynomial,
    B: MatrixPolynomial,
    Sigma: MatrixPolynomial,
    R: np.ndarray,
    grid: int = DEFAULT_GRID,
) -> float:
    """Worst relative mismatch of ``A(z)B(1/z)' + B(z)A(1/z)' = 2 Sigma(z) R R' Sigma(1/z)'`` on |z| = 1."""
    RR = R @ R.T
    worst = 0.0
    for z in unit_circle(grid):
        w = 1.0 / z
        lhs = A(z) @ B(w).T + B(z) @ A(w).T
        rhs = 2.0 * Sigma(z) @ RR @ Sigma(w).T
        worst = max(worst, max_abs(lhs - rhs) / (1.0 + max_abs(rhs)))
    return worst


@dataclass(frozen=True)
class SpectralFactor:
    """``V(z) = A(z)^{-1} Sigma(z) R`` with realization ``(F, K, H, R)``."""

    A: MatrixPolynomial
    Sigma: MatrixPolynomial
    R: np.ndarray

    def __call__(self, z) -> np.ndarray:
        return np.linalg.solve(self.A(z), self.Sigma(z) @ self.R)

    def realization(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(F, K, H, D)`` with ``V(z) = H (zI - F)^{-1} K + D``."""
        F = self.A.companion()
        K = (self.Sigma.coeff - self.A.coeff) @ self.R
        return F, K, self.A.canonical.H, np.asarray(self.R, dtype=float)

    def check_stable(self) -> None:
        if not is_schur(self.A).stable:
            raise UnstableFactor("spectral factor denominator is not Schur stable")
