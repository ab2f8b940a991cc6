"""Observer canonical form and the linear interpolation operators.

State coordinates are ordered block by block: block ``i`` holds ``t_i``
consecutive coordinates, and ``H`` picks the first coordinate of each block.
Coefficient matrices (``ell*n x ell``) follow the same row ordering, so row
``offset_i + r`` of a coefficient matrix multiplies ``z^(t_i - 1 - r)`` in
row ``i`` of the matrix polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag

from ._linalg import max_abs, unvec, vec
from .errors import InvalidProblem, SingularL

L_COND_LIMIT = 1e12
VN_TOP_TOL = 1e-14


@dataclass(frozen=True)
class StructureSpec:
    """Dimension ``ell``, degree parameter ``n`` and observability indices."""

    ell: int
    n: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(t) for t in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.ell < 1 or self.n < 1:
            raise InvalidProblem(f"ell and n must be positive (got ell={self.ell}, n={self.n})")
        if len(idx) != self.ell:
            raise InvalidProblem(f"expected {self.ell} observability indices, got {len(idx)}")
        if any(t < 1 for t in idx):
            raise InvalidProblem("observability indices must be positive")
        if sum(idx) != self.n * self.ell:
            raise InvalidProblem(f"observability indices sum to {sum(idx)}, expected n*ell = {self.n * self.ell}")

    @classmethod
    def uniform(cls, ell: int, n: int) -> "StructureSpec":
        return cls(ell, n, (n,) * ell)

    @property
    def t(self) -> int:
        return max(self.indices)

    @property
    def dim(self) -> int:
        return self.n * self.ell

    @property
    def equal_indices(self) -> bool:
        return all(t == self.n for t in self.indices)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.indices)[:-1]]))


@dataclass(frozen=True)
class CanonicalMatrices:
    J: np.ndarray
    H: np.ndarray
    N: np.ndarray  # (ell*t, ell*n): N_1 stacked over ... over N_t

    def N_k(self, k: int) -> np.ndarray:
        ell = self.H.shape[0]
        return self.N[(k - 1) * ell:k * ell]

    def gamma(self, sigma_coeff: np.ndarray) -> np.ndarray:
        """``J - Sigma H``, the companion matrix of the prior."""
        return self.J - np.asarray(sigma_coeff, dtype=float) @ self.H


def build_canonical(spec: StructureSpec) -> CanonicalMatrices:
    J = block_diag(*[np.eye(t, k=1) for t in spec.indices])
    H = np.zeros((spec.ell, spec.dim))
    N = np.zeros((spec.ell * spec.t, spec.dim))
    for i, (t_i, off) in enumerate(zip(spec.indices, spec.offsets)):
        H[i, off] = 1.0
        for k in range(1, t_i + 1):
            N[(k - 1) * spec.ell + i, off + k - 1] = 1.0
    return CanonicalMatrices(J=J, H=H, N=N)


def build_V(Z: np.ndarray, e: np.ndarray, spec: StructureSpec) -> np.ndarray:
    """Columns ``(Z^k e) x I`` for ``k = 1..t``."""
    e = np.asarray(e, dtype=float).reshape(-1, 1)
    cols = []
    v = e
    for _ in range(spec.t):
        v = Z @ v
        cols.append(np.kron(v, np.eye(spec.ell)))
    return np.hstack(cols)


class LResult(NamedTuple):
    L: np.ndarray
    cond: float


def build_L(V: np.ndarray, N: np.ndarray, ell: int) -> LResult:
    """Lower square block of ``V N``; its top ``ell`` rows must vanish."""
    VN = V @ N
    top = max_abs(VN[:ell])
    if top > VN_TOP_TOL:
        raise InvalidProblem(f"top block of VN is not zero ({top:.3e}); is the first node 0?")
    L = VN[ell:]
    cond = float(np.linalg.cond(L))
    if not np.isfinite(cond) or cond > L_COND_LIMIT:
        raise SingularL(
            f"L singular: unequal observability indices or degenerate nodes (cond={cond:.3e})"
        )
    return LResult(L, cond)


@dataclass(frozen=True)
class InterpolationOperators:
    """``u`` and the dense matrix of ``U`` acting on column-stacked arguments."""

    V: np.ndarray
    L: np.ndarray
    u: np.ndarray
    Umat: np.ndarray

    def apply_U(self, Q: np.ndarray) -> np.ndarray:
        rows, cols = self.u.shape
        return unvec(self.Umat @ vec(Q), rows, cols)

    def G_of(self, Q: np.ndarray, lam: float = 1.0) -> np.ndarray:
        """``lam * (u + U Q)``."""
        return lam * (self.u + self.apply_U(Q))


def _apply_pinv(L: np.ndarray, X: np.ndarray, ell: int) -> np.ndarray:
    # (VN)^dagger = [0 | L^{-1}]
    return np.linalg.solve(L, X[ell:])


def operator_U_raw(Q: np.ndarray, Z: np.ndarray, canonical: CanonicalMatrices, That: np.ndarray, t: int) -> np.ndarray:
    """``(Z x N_1 Q + ... + Z^t x N_t Q) That`` before the pseudo-inverse."""
    size = Z.shape[0] * Q.shape[1]
    acc = np.zeros((size, size))
    Zk = np.eye(Z.shape[0])
    for k in range(1, t + 1):
        Zk = Zk @ Z
        acc += np.kron(Zk, canonical.N_k(k) @ Q)
    return acc @ That


def build_u_U(
    L: np.ndarray,
    Z: np.ndarray,
    canonical: CanonicalMatrices,
    That: np.ndarray,
    spec: StructureSpec,
    V: np.ndarray | None = None,
) -> InterpolationOperators:
    ell, dim = spec.ell, spec.dim
    u = _apply_pinv(L, That, ell)
    Umat = np.zeros((dim * ell, dim * ell))
    for col in range(dim * ell):
        E = np.zeros(dim * ell)
        E[col] = 1.0
        Q = unvec(E, dim, ell)
        Umat[:, col] = vec(_apply_pinv(L, operator_U_raw(Q, Z, canonical, That, spec.t), ell))
    if V is None:
        V = np.zeros((0, 0))
    return InterpolationOperators(V=V, L=L, u=u, Umat=Umat)


def pinv_VN(L: np.ndarray, ell: int) -> np.ndarray:
    """Explicit ``[0 | L^{-1}]``."""
    m = L.shape[0]
    return np.hstack([np.zeros((m, ell)), np.linalg.inv(L)])

