"""Dense complex linear algebra shared by the physics modules.

Everything here operates on small (2 to 16 dimensional) complex matrices:
a guarded matrix exponential, column-stacking vectorization used to build
superoperators, and a closed-form 2x2 eigendecomposition that flags the
defective (exceptional-point) case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError

#: Eigenvalue gap below DEGENERACY_TOL * ||A||_F counts as degenerate.
DEGENERACY_TOL = 1e-9


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {a.shape}")
    return a


def frobenius(a) -> float:
    """Frobenius norm of a matrix."""
    return float(np.linalg.norm(a))


def is_hermitian(a, tol: float = 1e-12) -> bool:
    """True if A equals its adjoint within `tol`, relative to the Frobenius norm."""
    a = _as_square(a)
    scale = max(frobenius(a), 1.0)
    return frobenius(a - a.conj().T) <= tol * scale


def is_unitary(a, tol: float = 1e-12) -> bool:
    """True if A^dagger A equals the identity within `tol` (Frobenius, relative)."""
    a = _as_square(a)
    eye = np.eye(a.shape[0])
    scale = max(frobenius(a) ** 2, 1.0)
    return frobenius(a.conj().T @ a - eye) <= tol * scale


def expm(a, t: float = 1.0) -> np.ndarray:
    """e^{A t} by scaling-and-squaring (Pade order 13).

    Raises InvalidArgumentError on non-finite input.
    """
    a = _as_square(a)
    if not np.all(np.isfinite(a.view(float))):
        raise InvalidArgumentError("matrix exponential of a non-finite matrix")
    if not np.isfinite(t):
        raise InvalidArgumentError("non-finite time")
    return scipy.linalg.expm(a * t)


def vectorize(rho) -> np.ndarray:
    """Column-stack a square matrix into a vector.

    Convention: vec(A rho B) = (B^T kron A) vec(rho).
    """
    rho = _as_square(rho)
    return rho.reshape(-1, order="F").copy()


def devectorize(v) -> np.ndarray:
    """Inverse of `vectorize`; the length must be a perfect square."""
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise InvalidArgumentError("expected a flat vector")
    n = round(len(v) ** 0.5)
    if n * n != len(v):
        raise InvalidArgumentError(f"length {len(v)} is not a perfect square")
    return v.reshape((n, n), order="F").copy()


@dataclass(frozen=True)
class Eig2:
    """Eigendecomposition of a 2x2 matrix.

    values are sorted by (real, imag) descending; column k of `vectors`
    pairs with values[k].  For a defective (exceptional-point) matrix both
    columns hold the single eigenvector and `degenerate` is set.
    """

    values: np.ndarray
    vectors: np.ndarray
    degenerate: bool


def _phase_fix(v: np.ndarray) -> np.ndarray:
    """Normalize and rotate the largest component to the positive real axis."""
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    ph = v[k] / abs(v[k])
    return v * ph.conjugate()


def eig2(a) -> Eig2:
    """Closed-form eigendecomposition of a 2x2 complex matrix.

    Eigenvalues come from the trace/determinant quadratic.  A gap below
    DEGENERACY_TOL * ||A||_F sets `degenerate`; if the matrix is also
    defective, the single eigenvector is duplicated.
    """
    a = _as_square(a)
    if a.shape != (2, 2):
        raise InvalidArgumentError(f"eig2 needs a 2x2 matrix, got {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise InvalidArgumentError("eig2 of a non-finite matrix")

    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = np.sqrt(tr * tr - 4.0 * det + 0j)
    lam = sorted(
        [(tr + disc) / 2.0, (tr - disc) / 2.0],
        key=lambda z: (z.real, z.imag),
        reverse=True,
    )
    scale = frobenius(a)
    degenerate = abs(lam[0] - lam[1]) < DEGENERACY_TOL * max(scale, 1e-300)

    vectors = []
    for lm in lam:
        # Null vectors of (A - lam), from whichever row is better conditioned.
        v_row1 = np.array([a[0, 1], lm - a[0, 0]])
        v_row2 = np.array([lm - a[1, 1], a[1, 0]])
        v = v_row1 if np.linalg.norm(v_row1) >= np.linalg.norm(v_row2) else v_row2
        if np.linalg.norm(v) <= 1e-14 * max(scale, 1.0):
            v = None  # scalar matrix: any vector is an eigenvector
        vectors.append(v)

    if vectors[0] is None and vectors[1] is None:
        vecs = np.eye(2, dtype=complex)
    else:
        cols = [_phase_fix(v) if v is not None else None for v in vectors]
        if cols[0] is None:
            cols[0] = cols[1]
        if cols[1] is None:
            cols[1] = cols[0]
        vecs = np.column_stack(cols)

    return Eig2(values=np.array(lam), vectors=vecs, degenerate=bool(degenerate))
