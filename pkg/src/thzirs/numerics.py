"""Complex linear algebra and special functions shared by the other modules.

Matrices are plain ``numpy`` arrays (complex128 or float64). Everything here
is a pure function of its inputs.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import DomainError, NotPSDError, NumericalError, ShapeError

DEFAULT_RANK_RTOL = 1e-10


class SvdFactors(NamedTuple):
    """Thin SVD ``a = u @ diag(s) @ vh``; ``s`` is descending and non-negative."""

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def bessel_j1(x):
    """First-order Bessel function of the first kind, J1(x).

    Accepts scalars or arrays. Backed by the Cephes implementation in
    ``scipy.special`` (series near zero, Hankel asymptotics far out).
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"bessel_j1 needs finite input, got {x!r}")
    out = special.j1(arr)
    return float(out) if out.ndim == 0 else out


def svd(a) -> SvdFactors:
    a = _as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK gesdd reports the number of superdiagonals that failed to converge
        raise NumericalError(f"SVD did not converge for {a.shape} matrix: {exc}") from exc
    return SvdFactors(u, s, vh)


def matrix_rank(a, rank_tol: float | None = None) -> int:
    s = svd(a).s
    if s.size == 0:
        return 0
    tol = DEFAULT_RANK_RTOL * s[0] if rank_tol is None else rank_tol
    return int(np.count_nonzero(s > tol))


def pseudo_inverse(a, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse via truncated SVD.

    Singular values at or below ``rank_tol`` (default ``1e-10 * s_max``) are
    treated as zero, so rank-deficient systems are handled without forming
    ``(A^H A)^{-1}``.
    """
    a = _as_matrix(a)
    if a.size == 0:
        raise DomainError("pseudo_inverse of an empty matrix")
    if rank_tol is not None and not rank_tol > 0:
        raise DomainError(f"rank_tol must be > 0, got {rank_tol}")
    u, s, vh = svd(a)
    tol = DEFAULT_RANK_RTOL * s[0] if rank_tol is None else rank_tol
    keep = s > tol
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * s_inv) @ u.conj().T


def least_squares_min_norm(a, c, rank_tol: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares solution ``A^+ C``.

    ``c`` may be a vector or a matrix with ``a.shape[0]`` rows; the result has
    the matching shape.
    """
    a = _as_matrix(a)
    c = np.asarray(c)
    if c.shape[0] != a.shape[0]:
        raise ShapeError(f"rows of a ({a.shape[0]}) != rows of c ({c.shape[0]})")
    return pseudo_inverse(a, rank_tol) @ c


def psd_sqrt(r, clamp_tol: float = 1e-10) -> np.ndarray:
    """Square-root factor ``S`` with ``S @ S^H == r`` for Hermitian PSD ``r``.

    Uses an eigendecomposition, so singular matrices (e.g. an all-ones
    correlation at rho = 1) are fine. Eigenvalues in ``[-clamp_tol*scale, 0)``
    are clamped to zero; anything more negative raises :class:`NotPSDError`.
    """
    r = _as_matrix(r)
    if r.shape[0] != r.shape[1]:
        raise ShapeError(f"psd_sqrt needs a square matrix, got {r.shape}")
    scale = max(1.0, float(np.max(np.abs(r)))) if r.size else 1.0
    if not np.allclose(r, r.conj().T, rtol=0.0, atol=1e-10 * scale):
        raise DomainError("psd_sqrt needs a Hermitian matrix")
    r = 0.5 * (r + r.conj().T)
    w, v = np.linalg.eigh(r)
    if w.size and w.min() < -clamp_tol * scale:
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3e} < -{clamp_tol * scale:.1e}")
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def wrap_to_pi(x):
    """Map angles into (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if y.ndim == 0 else y


def wrap_to_2pi(x):
    """Map angles into [0, 2*pi)."""
    y = np.mod(np.asarray(x, dtype=float), 2 * np.pi)
    # np.mod can return exactly 2*pi for tiny negative inputs
    y = np.where(y >= 2 * np.pi, 0.0, y)
    return float(y) if y.ndim == 0 else y


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    return a
