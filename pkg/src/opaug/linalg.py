"""Dense matrix primitives and the weighted trace semi-norm.

Matrices are plain float64 ``ndarray`` objects validated on entry; the
helpers ``as_square``, ``as_vector`` and ``as_spd`` are the constructors
for the square, vector and symmetric positive semi-definite roles.
"""

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, SingularMatrixError

SYMMETRY_RTOL = 1e-12
PSD_TOL = 1e-10
EIG_SYMMETRY_TOL = 1e-10
PIVOT_RTOL = 1e-14


def as_square(a, name="matrix"):
    """Validate ``a`` as a finite, nonempty square matrix and return it as float64."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f"{name} must be a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_vector(b, dim=None, name="vector"):
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.size < 1:
        raise DimensionError(f"{name} must be a nonempty 1-D array, got shape {b.shape}")
    if dim is not None and b.shape[0] != dim:
        raise DimensionError(f"{name} has length {b.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"{name} has non-finite entries")
    return b


def as_spd(m, name="matrix"):
    """Validate ``m`` as symmetric positive semi-definite.

    Symmetry is checked entrywise as ``|M_ij - M_ji| <= 1e-12 * max(1, |M_ij|)``
    and the smallest eigenvalue must be at least ``-1e-10``.
    """
    m = as_square(m, name)
    scale = np.maximum(1.0, np.abs(m))
    if np.any(np.abs(m - m.T) > SYMMETRY_RTOL * scale):
        raise ValueError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
        raise ValueError(f"{name} is not positive semi-definite")
    return m


def _check_same_dim(*mats):
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def weighted_inner(a1, a2, b, r):
    """Trace inner product ``tr(R A2^T B A1)`` weighted by norm matrix B and autocorrelation R.

    This equals ``tr(R^{1/2} A2^T B A1 R^{1/2})`` by cyclicity, so no matrix
    square root is formed.
    """
    a1, a2 = as_square(a1, "a1"), as_square(a2, "a2")
    b, r = as_spd(b, "b"), as_spd(r, "r")
    _check_same_dim(a1, a2, b, r)
    return _inner(a1, a2, b, r)


def _inner(a1, a2, b, r):
    # unvalidated kernel: tr(R M) == sum(R * M^T)
    m = a2.T @ b @ a1
    return float(np.sum(r * m.T))


def weighted_seminorm_sq(a, b, r):
    a = as_square(a, "a")
    b, r = as_spd(b, "b"), as_spd(r, "r")
    _check_same_dim(a, b, r)
    return _inner(a, a, b, r)


def residual_norm_matrix(a):
    """Return ``A^T A``, the norm matrix of the residual norm ``||A v||_2``."""
    a = as_square(a)
    m = a.T @ a
    return 0.5 * (m + m.T)


def min_eig_sym(m):
    m = as_square(m)
    if np.max(np.abs(m - m.T)) > EIG_SYMMETRY_TOL:
        raise ValueError("min_eig_sym requires a symmetric matrix; pass the symmetric part")
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


class LUFactor:
    """LU factorization of a square matrix with an explicit singularity check.

    A pivot smaller than ``1e-14`` times the largest pivot in magnitude is
    treated as singular.
    """

    def __init__(self, a):
        a = as_square(a)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(a, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.max() == 0.0 or pivots.min() < PIVOT_RTOL * pivots.max():
            raise SingularMatrixError(
                f"matrix is singular to working precision (pivot ratio "
                f"{pivots.min() / max(pivots.max(), np.finfo(float).tiny):.3e})"
            )
        self.matrix = a
        self._lu_piv = (lu, piv)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def solve(self, b, trans=False):
        """Solve ``A x = b`` (or ``A^T x = b``). ``b`` may be a vector or an (n, k) block."""
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.dim:
            raise DimensionError(f"right-hand side has leading dimension {b.shape[0]}, expected {self.dim}")
        return sla.lu_solve(self._lu_piv, b, trans=1 if trans else 0, check_finite=False)


def factorize(a):
    return a if isinstance(a, LUFactor) else LUFactor(a)


def solve(a, b):
    """Solve ``a x = b`` by LU factorization; raises SingularMatrixError on singular ``a``."""
    factor = factorize(a)
    b = as_vector(b, factor.dim, "b")
    return factor.solve(b)
