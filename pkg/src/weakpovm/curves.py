"""Operator curves and the weak measurement operators built on them.

Conventions used throughout:

* ``+x`` points toward the second operator: ``M(0, x) -> m2`` as
  ``x -> +inf`` and ``M(0, x) -> m1`` as ``x -> -inf``.
* Positive-class quantities are evaluated spectrally. With ``a_i`` the
  eigenvalues of the first positive part and ``b_i = sqrt(1 - a_i^2)``,
  ``A(x)`` and ``B(x)`` have eigenvalues
  ``sqrt(s-) a_i / r_i`` and ``sqrt(s+) b_i / r_i`` where
  ``s-, s+ = (1 -/+ tanh x) / 2`` and ``r_i^2 = s- a_i^2 + s+ b_i^2``.
* Doubled-space operators are stored ancilla-major: block ``(i, j)`` is the
  ``<i| . |j>`` ancilla component, each block a ``d x d`` system operator.
"""

import math

import numpy as np
from scipy.special import expit

from . import matcore as mc
from .errors import ClampExceeded, WrongClass
from .instrument import Instrument, InstrumentClass

X_CLAMP = 20.0
_CLAMP_SLACK = 1e-12


def half_minus(x):
    """``(1 - tanh x) / 2`` without cancellation for large ``x``."""
    return expit(-2.0 * np.asarray(x, dtype=float))


def half_plus(x):
    """``(1 + tanh x) / 2`` without cancellation for large ``-x``."""
    return expit(2.0 * np.asarray(x, dtype=float))


def _log_cosh(u: float) -> float:
    u = abs(u)
    return u + math.log1p(math.exp(-2.0 * u)) - math.log(2.0)


def compose_constant(x: float, y: float) -> float:
    """Proportionality constant in ``P(x) P(y) = c P(x + y)``.

    ``c = (cosh(x+y) / (2 cosh x cosh y))^(1/2)``; evaluated through
    ``log cosh`` once either argument exceeds 20 in magnitude.
    """
    if abs(x) > 20.0 or abs(y) > 20.0:
        log_c = 0.5 * (_log_cosh(x + y) - math.log(2.0) - _log_cosh(x) - _log_cosh(y))
        return math.exp(log_c)
    return math.sqrt(math.cosh(x + y) / (2.0 * math.cosh(x) * math.cosh(y)))


class OperatorCurve:
    """Precomputed spectral data for evaluating the curves of one instrument.

    Args:
        instrument: a validated two-outcome instrument.
        x_clamp: largest ``|x|`` at which the curve may be evaluated.

    Raises:
        BranchAmbiguity: for a General instrument whose polar unitary has an
            eigenvalue within 1e-8 of -1.
    """

    def __init__(self, instrument: Instrument, x_clamp: float = X_CLAMP):
        if x_clamp <= 0:
            raise ValueError("x_clamp must be positive")
        self.instrument = instrument
        self.x_clamp = float(x_clamp)
        self.basis = mc.hermitian_eig(instrument.p1pos, tol=1e-10)
        # b from the second operator itself: sqrt(1 - a^2) loses all digits when a ~ 1
        q = self.basis.eigenvectors
        a = np.clip(self.basis.eigenvalues, 0.0, None)
        b = np.clip(np.real(np.einsum("ji,jk,ki->i", q.conj(), instrument.p2pos, q)), 0.0, None)
        r = np.hypot(a, b)
        self.a = a / r
        self.b = b / r
        self.k1 = self.k2 = None
        self._gen = None
        if instrument.kind is InstrumentClass.GENERAL:
            self.k1 = mc.unitary_log(instrument.v1)
            self.k2 = mc.unitary_log(instrument.v2)
            self._gen = (
                mc.hermitian_eig(-1j * self.k1, tol=1e-10),
                mc.hermitian_eig(-1j * self.k2, tol=1e-10),
            )

    @property
    def kind(self) -> InstrumentClass:
        return self.instrument.kind

    @property
    def dim(self) -> int:
        return self.instrument.dim

    def check_x(self, *xs: float) -> None:
        for x in xs:
            if not abs(x) <= self.x_clamp + _CLAMP_SLACK:
                raise ClampExceeded(f"|x| = {abs(x)!r} exceeds clamp {self.x_clamp}")

    def alpha_beta(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues of ``A(x)`` and ``B(x)`` in the shared basis."""
        sm, sp = half_minus(x), half_plus(x)
        r = np.sqrt(sm * self.a**2 + sp * self.b**2)
        return np.sqrt(sm) * self.a / r, np.sqrt(sp) * self.b / r

    def weak_eigs(self, x: float, y: float) -> np.ndarray:
        """Eigenvalues of the positive-part weak operator ``M_p(x, y)``."""
        al0, be0 = self.alpha_beta(x)
        al1, be1 = self.alpha_beta(x + y)
        return np.sqrt(half_minus(y)) * al0 * al1 + np.sqrt(half_plus(y)) * be0 * be1

    def effective_eigs(self, x: float) -> np.ndarray:
        return np.sqrt(half_minus(x) * self.a**2 + half_plus(x) * self.b**2)

    def from_eigs(self, values: np.ndarray) -> np.ndarray:
        q = self.basis.eigenvectors
        return (q * values) @ q.conj().T

    def interp_unitary(self, x: float) -> np.ndarray:
        if self._gen is None:
            return np.eye(self.dim, dtype=np.complex128)
        if x == 0:
            return np.eye(self.dim, dtype=np.complex128)
        eig = self._gen[1] if x > 0 else self._gen[0]
        q = eig.eigenvectors
        phase = np.exp(1j * math.tanh(abs(x)) * eig.eigenvalues)
        return (q * phase) @ q.conj().T

    def frame(self, x: float) -> np.ndarray:
        """``V(x) Q``: maps eigen-coordinates of the positive parts to the lab frame at ``x``."""
        return self.interp_unitary(x) @ self.basis.eigenvectors


def proj_curve(curve: OperatorCurve, x: float) -> np.ndarray:
    """``P(x) = sqrt((1 - tanh x)/2) P1 + sqrt((1 + tanh x)/2) P2``."""
    if curve.kind is not InstrumentClass.PROJECTIVE:
        raise WrongClass(f"proj_curve needs a Projective instrument, got {curve.kind}")
    curve.check_x(x)
    inst = curve.instrument
    return np.sqrt(half_minus(x)) * inst.m1 + np.sqrt(half_plus(x)) * inst.m2


def ab_pair(curve: OperatorCurve, x: float) -> tuple[np.ndarray, np.ndarray]:
    """``A(x)`` and ``B(x)`` built from the positive parts of the instrument."""
    curve.check_x(x)
    al, be = curve.alpha_beta(x)
    return curve.from_eigs(al), curve.from_eigs(be)


def block_unitary(curve: OperatorCurve, x: float) -> np.ndarray:
    """The ``2d x 2d`` unitary ``[[A, B], [B, -A]]``; Hermitian and an involution."""
    if curve.kind is InstrumentClass.GENERAL:
        raise WrongClass("block_unitary is defined for positive instruments only")
    a, b = ab_pair(curve, x)
    return np.block([[a, b], [b, -a]])


def unitary_interp(curve: OperatorCurve, x: float) -> np.ndarray:
    """``V(x) = exp(tanh|x| K)`` with ``K = log V2`` for ``x > 0`` and ``log V1`` for ``x < 0``."""
    if curve.kind is not InstrumentClass.GENERAL:
        raise WrongClass("unitary_interp is defined for General instruments only")
    curve.check_x(x)
    return curve.interp_unitary(x)


def weak_op(curve: OperatorCurve, x: float, y: float) -> np.ndarray:
    """The measurement operator ``M(x, y)`` applied at position ``x`` for a step ``y``.

    Positive part ``sqrt(s-(y)) A(x) A(x+y) + sqrt(s+(y)) B(x) B(x+y)``,
    dressed as ``V(x+y) M_p(x, y) V(x)^dagger`` for General instruments.
    """
    curve.check_x(x, x + y)
    mp = curve.from_eigs(curve.weak_eigs(x, y))
    if curve.kind is not InstrumentClass.GENERAL:
        return mp
    return curve.interp_unitary(x + y) @ mp @ mc.dagger(curve.interp_unitary(x))


def effective_op(curve: OperatorCurve, x: float) -> np.ndarray:
    """``M(0, x)``: the net operator of a walk that has reached position ``x``."""
    curve.check_x(x)
    mp = curve.from_eigs(curve.effective_eigs(x))
    if curve.kind is not InstrumentClass.GENERAL:
        return mp
    return curve.interp_unitary(x) @ mp


def generator_spread(curve: OperatorCurve) -> float:
    """Largest distance from a scalar, in spectral norm, of the ``V(x)`` generators.

    Zero for projective and positive instruments.
    """
    if curve.k1 is None:
        return 0.0
    spreads = []
    for eig in curve._gen:
        w = eig.eigenvalues
        spreads.append(0.5 * float(w[-1] - w[0]))
    return max(spreads)


def weakness_constant(curve: OperatorCurve) -> float:
    """``c`` such that ``weakness(weak_op(x, eps)).deviation <= c * eps``.

    2 for positive instruments; General instruments add the spread of the
    polar generators because ``V(x + eps) V(x)^dagger`` contributes about
    ``eps * spread`` of non-scalar motion per step.
    """
    return 2.0 + generator_spread(curve)
