"""Covariance extension from data and degree reduction.

Workflow: simulate ``y = V(z) w`` for a known spectral factor, estimate
matrix covariances, solve the covariance-extension instance with a chosen
prior, inspect the spectrum of ``P`` and re-solve with fewer lags and a
lower-degree prior.

Covariances are normalized by congruence, ``C_k -> C_0^{-1/2} C_k C_0^{-1/2}``,
so that the interpolation data satisfy ``W_00 = I/2``; fitted models are
mapped back through :attr:`CovarianceFit.scale`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import psd_sqrt, stein_solve, sym
from .cee import CeeSolution, SolverOptions, solve
from .errors import InfeasibleProblem, InsufficientData, InvalidProblem
from .matpoly import MatrixPolynomial, SpectralFactor
from .problem import InterpolationProblem

DEFAULT_SAMPLES = 100_000

# Model-reduction example system: ell = 2, t1 = t2 = 5.
EXAMPLE_A = np.array([
    [-0.11, -0.02],
    [-0.08, -0.15],
    [0.05, 0.10],
    [-0.05, -0.09],
    [-0.13, -0.09],
    [0.11, 0.07],
    [0.09, 0.19],
    [-0.03, -0.03],
    [-0.10, -0.13],
    [0.12, 0.05],
])
EXAMPLE_SIGMA_ROOTS = (0.1, 0.3, 0.6, -0.2, -0.95)
EXAMPLE_REDUCED_ROOTS = (0.1, 0.3, -0.95)


def example_system() -> SpectralFactor:
    """Degree-10 factor ``A(z)^{-1} sigma(z) I`` with ``R = I``."""
    sigma = MatrixPolynomial.scalar_times_identity(2, EXAMPLE_SIGMA_ROOTS)
    A = MatrixPolynomial(sigma.spec, EXAMPLE_A, "A")
    return SpectralFactor(A, sigma, np.eye(2))


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray  # (N + 1, ell)
    seed: int | None = None

    @property
    def N(self) -> int:
        return self.samples.shape[0] - 1


@dataclass(frozen=True)
class CovarianceSequence:
    lags: tuple[np.ndarray, ...]
    source: str = "estimated"

    @property
    def ell(self) -> int:
        return self.lags[0].shape[0]

    def truncated(self, count: int) -> "CovarianceSequence":
        if count > len(self.lags):
            raise InsufficientData(f"need {count} lags, have {len(self.lags)}")
        return CovarianceSequence(self.lags[:count], self.source)


def simulate(factor: SpectralFactor, N: int, seed: int) -> TimeSeries:
    """Drive the state-space realization of ``V`` with unit Gaussian noise.

    The initial state is drawn from the stationary distribution, so the
    output is stationary from ``t = 0``.
    """
    factor.check_stable()
    F, K, H, D = factor.realization()
    ell = D.shape[0]
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((N + 1, ell))
    Pi = sym(stein_solve(F, K @ K.T))
    x = psd_sqrt(Pi, clip=1e-10) @ rng.standard_normal(F.shape[0])
    y = np.empty((N + 1, ell))
    for t in range(N + 1):
        y[t] = H @ x + D @ w[t]
        x = F @ x + K @ w[t]
    return TimeSeries(y, seed)


def estimate_covariances(series: TimeSeries | np.ndarray, K: int) -> CovarianceSequence:
    """``C_k = 1/(N-k+1) sum_{t=k}^{N} y_t y_{t-k}'`` for ``k = 0..K``."""
    y = series.samples if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    N = y.shape[0] - 1
    if K > N:
        raise InsufficientData(f"{K} lags requested from {N + 1} samples")
    lags = tuple(y[k:].T @ y[:N + 1 - k] / (N - k + 1) for k in range(K + 1))
    return CovarianceSequence(lags, "estimated")


def exact_covariances(factor: SpectralFactor, K: int) -> CovarianceSequence:
    """``E[y_{t+k} y_t']`` from the realization and its state covariance."""
    factor.check_stable()
    F, Kg, H, D = factor.realization()
    Pi = sym(stein_solve(F, Kg @ Kg.T))
    lags = [H @ Pi @ H.T + D @ D.T]
    X = F @ Pi @ H.T + Kg @ D.T
    for _ in range(K):
        lags.append(H @ X)
        X = F @ X
    return CovarianceSequence(tuple(lags), "exact")


def normalize(covs: CovarianceSequence) -> tuple[list[np.ndarray], np.ndarray]:
    """Congruence so the zeroth lag becomes ``I``; returns ``(lags, C_0^{1/2})``."""
    C0 = sym(covs.lags[0])
    w, V = np.linalg.eigh(C0)
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        raise InfeasibleProblem("C_0 is singular; Pick matrix cannot be positive definite")
    root = (V * np.sqrt(w)) @ V.T
    inv_root = (V / np.sqrt(w)) @ V.T
    return [inv_root @ C @ inv_root for C in covs.lags], root


@dataclass(frozen=True)
class CovarianceFit:
    solution: CeeSolution
    scale: np.ndarray  # C_0^{1/2}
    covariances: CovarianceSequence

    @property
    def p_eigenvalues(self) -> np.ndarray:
        return self.solution.p_eigenvalues

    @property
    def n(self) -> int:
        return self.solution.A.spec.n

    def __call__(self, z) -> np.ndarray:
        """Spectral factor in the original (unnormalized) coordinates."""
        return self.scale @ self.solution.spectral_factor()(z)


def fit_covariances(covs: CovarianceSequence, sigma: MatrixPolynomial, options: SolverOptions | None = None) -> CovarianceFit:
    """Solve the covariance extension problem with lags ``C_0..C_n``."""
    n = sigma.spec.n
    if len(covs.lags) < n + 1:
        raise InsufficientData(f"prior of degree {n} needs {n + 1} lags, got {len(covs.lags)}")
    lags, root = normalize(covs.truncated(n + 1))
    problem = InterpolationProblem.covariance_extension(lags)
    return CovarianceFit(solve(problem, sigma, options), root, covs)


def reduce_model(
    fit: CovarianceFit,
    covs: CovarianceSequence,
    new_n: int,
    new_sigma: MatrixPolynomial,
    options: SolverOptions | None = None,
) -> CovarianceFit:
    """Re-solve with lags ``C_0..C_new_n`` and a prior of degree ``new_n``.

    ``new_n == fit.n`` with the original prior reproduces ``fit``.
    """
    if new_n > fit.n:
        raise InvalidProblem(f"reduced order {new_n} exceeds the current order {fit.n}")
    if new_sigma.spec.n != new_n:
        raise InvalidProblem(f"reduced prior has degree {new_sigma.spec.n}, expected {new_n}")
    return fit_covariances(covs.truncated(new_n + 1), new_sigma, options)


def singular_value_grid(factor, points: int) -> np.ndarray:
    """Rows ``(theta, s_1, ..., s_ell)`` for ``theta`` uniform on ``[0, pi]``."""
    if isinstance(factor, SpectralFactor):
        factor.check_stable()
    theta = np.linspace(0.0, np.pi, points)
    rows = []
    for th in theta:
        s = np.linalg.svd(factor(np.exp(1j * th)), compute_uv=False)
        rows.append(np.concatenate([[th], s]))
    return np.array(rows)
