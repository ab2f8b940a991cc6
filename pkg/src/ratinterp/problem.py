"""Interpolation data and the structured matrices derived from it.

The data are values ``W_jk = F^(k)(z_j) / k!`` of an ``ell x ell`` function
``F`` analytic in the open unit disc, at real nodes ``z_0 = 0, z_1, ..., z_m``
with multiplicities ``n_j``.  The normalization ``z_0 = 0`` and
``W_00 = I/2`` is required, not enforced by a transformation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.linalg import block_diag

from ._linalg import max_abs, stein_solve
from .errors import (
    InvalidProblem,
    NonConvergent,
    PathSingular,
    SingularNormalization,
)

W00_TOL = 1e-12
LYAPUNOV_TOL = 1e-12
COND_LIMIT = 1e12
PICK_REL_TOL = 1e-10


@dataclass(frozen=True)
class InterpolationProblem:
    """Matrix interpolation data.

    Parameters
    ----------
    ell : int
        Matrix dimension.
    nodes : sequence of float
        Distinct real nodes in ``(-1, 1)``; the first one must be exactly 0.
    multiplicities : sequence of int
        Number of Taylor coefficients prescribed at each node.
    values : mapping ``(j, k) -> (ell, ell) array``
        Normalized Taylor coefficients ``F^(k)(z_j)/k!``.
    """

    ell: int
    nodes: tuple[float, ...]
    multiplicities: tuple[int, ...]
    values: Mapping[tuple[int, int], np.ndarray] = field(repr=False)

    def __post_init__(self):
        if any(np.iscomplexobj(z) and np.imag(z) != 0 for z in self.nodes):
            raise InvalidProblem("complex nodes are not supported; nodes must be real")
        nodes = tuple(float(np.real(z)) for z in self.nodes)
        mults = tuple(int(m) for m in self.multiplicities)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "multiplicities", mults)
        ell = int(self.ell)
        if ell < 1:
            raise InvalidProblem(f"ell must be positive, got {self.ell}")
        object.__setattr__(self, "ell", ell)
        if not nodes:
            raise InvalidProblem("at least one node is required")
        if len(nodes) != len(mults):
            raise InvalidProblem("nodes and multiplicities differ in length")
        if nodes[0] != 0.0:
            raise InvalidProblem(f"first node must be exactly 0, got {nodes[0]}")
        if any(abs(z) >= 1.0 for z in nodes):
            raise InvalidProblem("all nodes must lie in the open unit disc")
        if len(set(nodes)) != len(nodes):
            raise InvalidProblem("nodes must be pairwise distinct")
        if any(m < 1 for m in mults):
            raise InvalidProblem("multiplicities must be positive")

        vals = {}
        for j, nj in enumerate(mults):
            for k in range(nj):
                if (j, k) not in self.values:
                    raise InvalidProblem(f"missing value W[{j},{k}]")
                W = np.array(self.values[(j, k)])
                if np.iscomplexobj(W):
                    raise InvalidProblem(f"W[{j},{k}] is complex; only real data are supported")
                W = W.astype(float)
                if W.shape != (ell, ell):
                    raise InvalidProblem(f"W[{j},{k}] has shape {W.shape}, expected {(ell, ell)}")
                W.setflags(write=False)
                vals[(j, k)] = W
        extra = set(self.values) - set(vals)
        if extra:
            raise InvalidProblem(f"values given for undeclared indices {sorted(extra)}")
        if max_abs(vals[(0, 0)] - 0.5 * np.eye(ell)) > W00_TOL:
            raise InvalidProblem("W[0,0] must equal I/2 (normalize the data first)")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        """Degree parameter: total number of conditions minus one."""
        return sum(self.multiplicities) - 1

    @classmethod
    def from_lists(cls, ell, nodes, multiplicities, values: Sequence[Sequence]) -> "InterpolationProblem":
        """Build from ``values[j][k]`` nested sequences."""
        vals = {(j, k): np.asarray(Wk) for j, row in enumerate(values) for k, Wk in enumerate(row)}
        return cls(ell, tuple(nodes), tuple(multiplicities), vals)

    @classmethod
    def covariance_extension(cls, covariances: Sequence[np.ndarray]) -> "InterpolationProblem":
        """Single node at 0 with ``W_00 = C_0/2`` and ``W_0k = C_k``.

        ``C_0`` must already be the identity.
        """
        C = [np.atleast_2d(np.asarray(c, dtype=float)) for c in covariances]
        vals = {(0, 0): 0.5 * C[0]}
        vals.update({(0, k): C[k] for k in range(1, len(C))})
        return cls(C[0].shape[0], (0.0,), (len(C),), vals)


def build_Z(problem: InterpolationProblem) -> np.ndarray:
    """Block diagonal of lower Jordan blocks, one per node."""
    blocks = []
    for z, nj in zip(problem.nodes, problem.multiplicities):
        blocks.append(z * np.eye(nj) + np.eye(nj, k=-1))
    return block_diag(*blocks)


def build_e(problem: InterpolationProblem) -> np.ndarray:
    e = np.zeros(problem.n + 1)
    offset = 0
    for nj in problem.multiplicities:
        e[offset] = 1.0
        offset += nj
    return e


def build_W(problem: InterpolationProblem) -> np.ndarray:
    """Block diagonal of lower block-Toeplitz value matrices."""
    ell = problem.ell
    blocks = []
    for j, nj in enumerate(problem.multiplicities):
        Wj = np.zeros((ell * nj, ell * nj))
        for r in range(nj):
            for c in range(r + 1):
                Wj[r * ell:(r + 1) * ell, c * ell:(c + 1) * ell] = problem.values[(j, r - c)]
        blocks.append(Wj)
    return block_diag(*blocks)


def solve_S(Z: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Solve ``S = Z S Z' + e e'`` (real nodes, so ``Z* = Z'``)."""
    Z = np.asarray(Z, dtype=float)
    e = np.asarray(e, dtype=float).reshape(-1, 1)
    rho = max(np.abs(np.linalg.eigvals(Z)), default=0.0)
    if rho >= 1.0:
        raise InvalidProblem(f"Z has spectral radius {rho:.6g} >= 1")
    S = stein_solve(Z, e @ e.T)
    S = 0.5 * (S + S.T)
    resid = max_abs(S - Z @ S @ Z.T - e @ e.T)
    if resid > LYAPUNOV_TOL * max(1.0, max_abs(S)):
        raise NonConvergent(f"Lyapunov residual {resid:.3e} exceeds tolerance")
    return S


class PickResult(NamedTuple):
    feasible: bool
    min_eig: float


def pick_matrix(Wmat: np.ndarray, S: np.ndarray, ell: int) -> np.ndarray:
    E = np.kron(S, np.eye(ell))
    P = Wmat @ E + E @ Wmat.T
    return 0.5 * (P + P.T)


def pick_check(Wmat: np.ndarray, S: np.ndarray, ell: int) -> PickResult:
    """Generalized Pick test ``W (S x I) + (S x I) W' > 0``.

    Counts as feasible only if the smallest eigenvalue exceeds a small
    multiple of the Pick matrix magnitude.
    """
    P = pick_matrix(Wmat, S, ell)
    lam = float(np.linalg.eigvalsh(P)[0])
    return PickResult(lam > PICK_REL_TOL * max_abs(P), lam)


def build_T_That(Wmat: np.ndarray, e: np.ndarray, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Cayley-type transform ``T = (W - I/2)(W + I/2)^{-1}`` and ``T (e x I)``."""
    I = np.eye(Wmat.shape[0])
    Wp = Wmat + 0.5 * I
    cond = np.linalg.cond(Wp)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularNormalization(f"W + I/2 has condition number {cond:.3e}")
    T = np.linalg.solve(Wp.T, (Wmat - 0.5 * I).T).T
    That = T @ np.kron(np.asarray(e, dtype=float).reshape(-1, 1), np.eye(ell))
    return T, That


def deform_W(T: np.ndarray, lam: float) -> np.ndarray:
    """Value matrix ``(I - lam T)^{-1} - I/2`` along the homotopy."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    I = np.eye(T.shape[0])
    M = I - lam * T
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise PathSingular(f"I - {lam:g} T has condition number {cond:.3e}")
    return np.linalg.inv(M) - 0.5 * I


@dataclass(frozen=True)
class DerivedProblemMatrices:
    Z: np.ndarray
    Wmat: np.ndarray
    e: np.ndarray
    S: np.ndarray
    T: np.ndarray
    That: np.ndarray

    @classmethod
    def from_problem(cls, problem: InterpolationProblem) -> "DerivedProblemMatrices":
        Z = build_Z(problem)
        e = build_e(problem)
        Wmat = build_W(problem)
        S = solve_S(Z, e)
        T, That = build_T_That(Wmat, e, problem.ell)
        return cls(Z=Z, Wmat=Wmat, e=e, S=S, T=T, That=That)

    def pick(self, ell: int) -> PickResult:
        return pick_check(self.Wmat, self.S, ell)

