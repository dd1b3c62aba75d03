"""Dense complex matrix kernels.

Every operator in the package is a plain ``complex128`` numpy array of
shape ``(d, d)``. The helpers here wrap LAPACK (through numpy/scipy) with
the conventions the rest of the package relies on: Hermiticity gates,
a deterministic eigenvector phase, and domain-checked matrix functions.
"""

from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import BranchAmbiguity, DomainError, NotHermitian, ShapeMismatch

HERMITIAN_TOL = 1e-12
IDENTITY_TOL = 1e-10
BRANCH_TOL = 1e-8


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a square complex128 array or raise ShapeMismatch."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ShapeMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def fro(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def scaled_tol(tol: float, m: np.ndarray) -> float:
    return tol * max(1.0, fro(m))


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_residual(m) <= scaled_tol(tol, m)


def is_unitary(m: np.ndarray, tol: float = IDENTITY_TOL) -> bool:
    d = m.shape[0]
    return fro(dagger(m) @ m - np.eye(d)) <= tol * max(1.0, np.sqrt(d))


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Ties go to the lowest row index.
    """
    vecs = np.array(vectors, dtype=np.complex128, copy=True)
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    return vecs * np.conj(phases)


def hermitian_eig(h, tol: float = HERMITIAN_TOL) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises:
        NotHermitian: if ``h`` fails the Hermiticity gate.
    """
    h = as_matrix(h)
    res = hermiticity_residual(h)
    if res > scaled_tol(tol, h):
        raise NotHermitian(f"matrix is not Hermitian (max asymmetry {res:.3e})")
    hs = 0.5 * (h + dagger(h))
    w, q = np.linalg.eigh(hs)
    return HermitianEig(w, fix_phases(q))


def func_of_hermitian(
    h,
    f: Callable[[np.ndarray], np.ndarray],
    domain: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """Return ``Q f(L) Q^dagger`` for ``h = Q L Q^dagger``.

    ``domain`` is an optional elementwise predicate on the eigenvalues; when
    it fails, or when ``f`` produces non-finite values, DomainError is
    raised carrying the first offending eigenvalue.
    """
    eig = hermitian_eig(h)
    w = eig.eigenvalues
    if domain is not None:
        ok = np.asarray(domain(w), dtype=bool)
        if not ok.all():
            bad = float(w[np.argmin(ok)])
            raise DomainError(f"eigenvalue {bad!r} outside the function domain", bad)
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w))
    if not np.all(np.isfinite(fw)):
        bad = float(w[np.argmin(np.isfinite(fw))])
        raise DomainError(f"function not finite at eigenvalue {bad!r}", bad)
    q = eig.eigenvectors
    return (q * fw) @ q.conj().T


def sqrt_psd(h, tol: float = IDENTITY_TOL) -> np.ndarray:
    """Square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as rounding noise and set to zero.
    """
    return func_of_hermitian(
        h, lambda w: np.sqrt(np.clip(w, 0.0, None)), lambda w: w >= -tol
    )


def inv_sqrt_pd(h, floor: float = 1e-12) -> np.ndarray:
    return func_of_hermitian(h, lambda w: 1.0 / np.sqrt(w), lambda w: w > floor)


def polar_decompose(m) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``m = V @ P`` with V unitary and ``P = (m^dagger m)^(1/2)``.

    Computed from the SVD ``m = U S W^dagger`` as ``V = U W^dagger`` and
    ``P = W S W^dagger``, which fixes V on the kernel of P as well.
    """
    m = as_matrix(m)
    u, s, wh = np.linalg.svd(m)
    v = u @ wh
    p = (dagger(wh) * s) @ wh
    p = 0.5 * (p + dagger(p))
    return v, p


def _unitary_spectrum(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Complex Schur form of a normal matrix is diagonal, and unlike eig()
    # its Schur vectors stay orthonormal inside degenerate eigenspaces.
    t, z = scipy.linalg.schur(w, output="complex")
    return np.diag(t).copy(), z


def unitary_log(w, tol: float = IDENTITY_TOL) -> np.ndarray:
    """Principal logarithm of a unitary; eigenphases in ``(-pi, pi]``.

    Raises:
        BranchAmbiguity: if some eigenvalue is within 1e-8 of -1.
    """
    w = as_matrix(w)
    if not is_unitary(w, tol):
        raise DomainError("matrix is not unitary")
    lam, z = _unitary_spectrum(w)
    near = np.abs(lam + 1.0)
    if np.any(near < BRANCH_TOL):
        raise BranchAmbiguity(
            f"eigenvalue {lam[np.argmin(near)]!r} lies on the branch cut at -1"
        )
    theta = np.angle(lam)
    k = (z * (1j * theta)) @ z.conj().T
    return 0.5 * (k - dagger(k))


def expm_skew(k) -> np.ndarray:
    """Exponential of a skew-Hermitian matrix; the result is unitary by construction."""
    k = as_matrix(k)
    eig = hermitian_eig(-1j * k, tol=1e-10)
    q = eig.eigenvectors
    return (q * np.exp(1j * eig.eigenvalues)) @ q.conj().T


def trace_distance(rho, sigma) -> float:
    rho = as_matrix(rho)
    sigma = as_matrix(sigma)
    if rho.shape != sigma.shape:
        raise ShapeMismatch(f"shapes differ: {rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    diff = 0.5 * (diff + dagger(diff))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def trace_distance_batch(rhos: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Trace distance of every matrix in a ``(n, d, d)`` stack to ``sigma``."""
    diff = rhos - sigma
    diff = 0.5 * (diff + dagger(diff))
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)), axis=-1)
