"""Small dense linear algebra and gradient utilities.

Matrices are plain float64 numpy arrays. The pseudoinverse here is the
full-column-rank one, ``(A^T A)^-1 A^T``, solved through the k x k normal
equations; every caller in the package has k <= 3.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ShapeMismatch, SingularSystem, ZeroMatrix

# cosine is kept this far from +-1 so arccos and its derivative stay finite
COS_CLAMP = 1e-12
PIVOT_TOL = 1e-14


def as_matrix(a, ndim: int | None = None) -> np.ndarray:
    """Return ``a`` as a finite float64 array, raising on NaN/Inf."""
    arr = np.asarray(a, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def solve(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``M X = B`` by Gaussian elimination with partial pivoting.

    ``M`` is k x k, ``B`` is k x r. A pivot whose magnitude falls below
    ``PIVOT_TOL`` times the largest entry of ``M`` raises SingularSystem.
    """
    M = np.array(M, dtype=np.float64)
    B = np.array(B, dtype=np.float64)
    vector_rhs = B.ndim == 1
    if vector_rhs:
        B = B[:, None]
    k = M.shape[0]
    if M.shape != (k, k) or B.shape[0] != k:
        raise ShapeMismatch(f"cannot solve {M.shape} system with rhs {B.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0.0:
        raise SingularSystem("normal matrix is zero")
    for col in range(k):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        if abs(M[piv, col]) < PIVOT_TOL * scale:
            raise SingularSystem(f"pivot {M[piv, col]:.3e} in column {col}")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
            B[[col, piv]] = B[[piv, col]]
        for row in range(col + 1, k):
            f = M[row, col] / M[col, col]
            if f != 0.0:
                M[row, col:] -= f * M[col, col:]
                B[row] -= f * B[col]
    X = np.empty_like(B)
    for row in range(k - 1, -1, -1):
        X[row] = (B[row] - M[row, row + 1:] @ X[row + 1:]) / M[row, row]
    return X[:, 0] if vector_rhs else X


def pseudoinverse(A) -> np.ndarray:
    """Left inverse ``(A^T A)^-1 A^T`` of a tall full-column-rank matrix."""
    A = as_matrix(A, ndim=2)
    m, k = A.shape
    if m < k:
        raise ShapeMismatch(f"pseudoinverse needs rows >= cols, got {A.shape}")
    return solve(A.T @ A, A.T)


def _cosine(U: np.ndarray, V: np.ndarray) -> tuple[float, float, float, float]:
    nu = float(np.sqrt(np.sum(U * U)))
    nv = float(np.sqrt(np.sum(V * V)))
    if nu == 0.0 or nv == 0.0:
        raise ZeroMatrix("angle against a zero matrix is undefined")
    dot = float(np.sum(U * V))
    return dot / (nu * nv), dot, nu, nv


def angular_distance(U, V) -> float:
    """Angle between two same-shape arrays seen as flat vectors, in radians."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.shape != V.shape:
        raise ShapeMismatch(f"{U.shape} vs {V.shape}")
    c = _cosine(U, V)[0]
    return float(np.arccos(np.clip(c, -1.0 + COS_CLAMP, 1.0 - COS_CLAMP)))


def angular_distance_grad(U, V) -> tuple[float, np.ndarray, np.ndarray]:
    """Angle plus its gradients with respect to ``U`` and ``V``.

    The arccos derivative is evaluated at the clamped cosine, so the
    gradient stays finite when the inputs are (nearly) parallel.
    """
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.shape != V.shape:
        raise ShapeMismatch(f"{U.shape} vs {V.shape}")
    c, _, nu, nv = _cosine(U, V)
    cc = float(np.clip(c, -1.0 + COS_CLAMP, 1.0 - COS_CLAMP))
    theta = float(np.arccos(cc))
    k = -1.0 / np.sqrt(1.0 - cc * cc)
    dU = k * (V / (nu * nv) - c * U / (nu * nu))
    dV = k * (U / (nu * nv) - c * V / (nv * nv))
    return theta, dU, dV


def grad_check(fun: Callable, X, eps: float = 1e-6, entries=None) -> float:
    """Largest relative gap between an analytic and a central-difference gradient.

    ``fun(X)`` must return ``(value, grad)``. The error per entry is
    ``|analytic - numeric| / max(1, |numeric|)``. ``entries`` optionally
    restricts the check to a subset of flat indices.
    """
    X = np.array(X, dtype=np.float64)
    _, grad = fun(X)
    grad = np.asarray(grad, dtype=np.float64).reshape(-1)
    flat = X.reshape(-1)
    idx = range(flat.size) if entries is None else entries
    worst = 0.0
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        fp = fun(X)[0]
        flat[i] = orig - eps
        fm = fun(X)[0]
        flat[i] = orig
        num = (fp - fm) / (2.0 * eps)
        worst = max(worst, abs(grad[i] - num) / max(1.0, abs(num)))
    return worst
