"""Complex vector and small matrix primitives.

Vectors are 1-D ``complex128`` arrays and matrices are 2-D ``complex128``
arrays. Everything here is a pure function of its inputs.
"""

import numpy as np

from . import config


class SingularMatrixError(ValueError):
    """Raised when a matrix is numerically rank deficient."""


def as_cvector(a) -> np.ndarray:
    v = np.asarray(a, dtype=complex)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_cmatrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or 0 in m.shape:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def herm_inner(a, b) -> complex:
    """Return ``a^H b``."""
    a = as_cvector(a)
    b = as_cvector(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return complex(np.vdot(a, b))


def largest_singular_value(a) -> float:
    a = as_cmatrix(a)
    return float(np.linalg.norm(a, 2))


def orth_projector(z) -> np.ndarray:
    """Orthogonal projector onto the column space of ``z``.

    Parameters
    ----------
    z : array_like, shape (N, M)
        Matrix with full column rank. A 1-D input is treated as a single
        column.

    Returns
    -------
    numpy.ndarray
        ``Z (Z^H Z)^{-1} Z^H``, computed through an orthonormal basis of the
        column space so the result is Hermitian and idempotent to rounding.

    Raises
    ------
    SingularMatrixError
        If the smallest singular value of ``z`` is below the configured
        fraction of the largest one.
    """
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z[:, None]
    z = as_cmatrix(z)
    if z.shape[1] > z.shape[0]:
        raise SingularMatrixError(
            f"{z.shape[1]} columns cannot be independent in dimension {z.shape[0]}")
    u, sv, _ = np.linalg.svd(z, full_matrices=False)
    if sv[0] == 0.0 or sv[-1] <= config.get().rank_rel * sv[0]:
        raise SingularMatrixError("matrix is rank deficient")
    p = u @ u.conj().T
    return 0.5 * (p + p.conj().T)


def complement_projector(z) -> np.ndarray:
    """``I - orth_projector(z)``."""
    p = orth_projector(z)
    return np.eye(p.shape[0]) - p


def realify(v) -> np.ndarray:
    """Stack real and imaginary parts: ``[Re(v); Im(v)]``."""
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])


def complexify(x) -> np.ndarray:
    """Inverse of :func:`realify`."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def realify_row(h) -> np.ndarray:
    """Real 2 x 2N map ``M`` with ``M @ realify(w) == [Re(h^H w), Im(h^H w)]``."""
    h = np.asarray(h, dtype=complex)
    a, b = h.real, h.imag
    # h^H w = (a - jb)^T (x + jy) = (a.x + b.y) + j(a.y - b.x)
    return np.block([[a[None, :], b[None, :]], [-b[None, :], a[None, :]]])


def realify_matrix(m) -> np.ndarray:
    """Real 2N' x 2N image of a complex matrix acting on realified vectors."""
    m = np.asarray(m, dtype=complex)
    a, b = m.real, m.imag
    return np.block([[a, -b], [b, a]])
