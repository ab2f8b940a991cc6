"""Small dense linear-algebra helpers."""

from __future__ import annotations

import numpy as np

MAX_STEIN_DIM = 200


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacked vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(x).reshape((rows, cols), order="F")


def stein_solve(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``X = A X A' + Q`` through the Kronecker-stacked linear system.

    Only intended for the small sizes used here; ``A`` must have spectral
    radius below one for the solution to be unique.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    m = A.shape[0]
    if m > MAX_STEIN_DIM:
        raise ValueError(f"Stein equation of order {m} exceeds the supported size {MAX_STEIN_DIM}")
    K = np.eye(m * m) - np.kron(A, A)
    X = unvec(np.linalg.solve(K, vec(Q)), m, m)
    return X


def sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def psd_sqrt(X: np.ndarray, clip: float = 1e-12) -> np.ndarray:
    """Symmetric square root of a PSD matrix.

    Eigenvalues in ``[-clip, 0)`` are treated as rounding noise and set to zero.
    """
    w, V = np.linalg.eigh(sym(X))
    if w.min(initial=0.0) < -clip:
        raise ValueError(f"matrix has eigenvalue {w.min():.3e} below -{clip:g}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def max_abs(X) -> float:
    X = np.asarray(X)
    return float(np.max(np.abs(X))) if X.size else 0.0
