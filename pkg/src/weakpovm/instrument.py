"""Two-outcome instruments, n-outcome reduction and the weakness metric."""

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import matcore as mc
from .errors import CompletenessViolation, ShapeMismatch, SingularResidual

COMPLETENESS_TOL = 1e-10
POSITIVE_PAIR_TOL = 1e-8
RESIDUAL_TOL = 1e-8
PINV_RCOND = 1e-10


class InstrumentClass(enum.Enum):
    PROJECTIVE = "Projective"
    POSITIVE = "Positive"
    GENERAL = "General"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class Instrument:
    """A validated two-outcome measurement ``(m1, m2)``.

    ``p1pos``/``p2pos`` are the positive parts ``(m^dagger m)^(1/2)`` and
    ``v1``/``v2`` the unitary polar factors. For projective and positive
    instruments the polar factors are the identity.
    """

    dim: int
    m1: np.ndarray
    m2: np.ndarray
    kind: InstrumentClass
    v1: np.ndarray
    v2: np.ndarray
    p1pos: np.ndarray
    p2pos: np.ndarray
    residual: float = 0.0

    @property
    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        return self.m1, self.m2

    def outcome_probs(self, rho: np.ndarray) -> np.ndarray:
        return born_probs(self.operators, rho)

    def conditional_states(self, rho: np.ndarray) -> list[Optional[np.ndarray]]:
        return conditional_states(self.operators, rho)


@dataclass(frozen=True, eq=False)
class MultiInstrument:
    dim: int
    operators: tuple

    @property
    def n(self) -> int:
        return len(self.operators)

    def outcome_probs(self, rho: np.ndarray) -> np.ndarray:
        return born_probs(self.operators, rho)


@dataclass(frozen=True)
class WeaknessReport:
    scalar: complex
    deviation: float

    @property
    def is_scalar_free(self) -> bool:
        return not np.isfinite(self.deviation)


def born_probs(operators: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Outcome probabilities ``Tr(M_j rho M_j^dagger)``."""
    return np.array(
        [float(np.real(np.trace(m @ rho @ mc.dagger(m)))) for m in operators]
    )


def conditional_states(operators, rho) -> list[Optional[np.ndarray]]:
    """Post-measurement states ``M_j rho M_j^dagger / p_j`` (None when p_j == 0)."""
    out = []
    for m in operators:
        s = m @ rho @ mc.dagger(m)
        p = float(np.real(np.trace(s)))
        out.append(s / p if p > 0 else None)
    return out


def completeness_residual(operators: Sequence[np.ndarray]) -> float:
    d = operators[0].shape[0]
    total = sum(mc.dagger(m) @ m for m in operators)
    return mc.fro(total - np.eye(d))


def _check_shapes(operators) -> tuple[list[np.ndarray], int]:
    ops = [mc.as_matrix(m) for m in operators]
    d = ops[0].shape[0]
    for m in ops[1:]:
        if m.shape != (d, d):
            raise ShapeMismatch(f"operator shapes differ: {(d, d)} vs {m.shape}")
    return ops, d


def _is_projector_pair(m1, m2) -> bool:
    tol = mc.IDENTITY_TOL
    if not (mc.is_hermitian(m1) and mc.is_hermitian(m2)):
        return False
    return (
        mc.fro(m1 @ m1 - m1) <= tol
        and mc.fro(m2 @ m2 - m2) <= tol
        and mc.fro(m1 @ m2) <= tol
    )


def _is_positive_pair(m1, m2) -> bool:
    if not (mc.is_hermitian(m1) and mc.is_hermitian(m2)):
        return False
    for m in (m1, m2):
        if np.linalg.eigvalsh(0.5 * (m + mc.dagger(m)))[0] < -mc.IDENTITY_TOL:
            return False
    d = m1.shape[0]
    try:
        complement = mc.sqrt_psd(np.eye(d) - m1 @ m1)
    except Exception:
        return False
    return mc.fro(m2 - complement) <= POSITIVE_PAIR_TOL


def validate(m1, m2) -> Instrument:
    """Check completeness and classify a two-outcome measurement.

    Classes are tried in the order Projective, Positive, General; a pair that
    is Hermitian and positive but whose second operator is not the positive
    complement of the first is treated as General.

    Raises:
        ShapeMismatch: operators are not square or differ in size.
        CompletenessViolation: ``m1^dagger m1 + m2^dagger m2`` misses the
            identity by more than 1e-10 (Frobenius).
    """
    (m1, m2), d = _check_shapes([m1, m2])
    residual = completeness_residual([m1, m2])
    if residual > COMPLETENESS_TOL:
        raise CompletenessViolation(
            f"sum of M^dagger M differs from identity by {residual:.3e}", residual
        )
    eye = np.eye(d, dtype=np.complex128)
    if _is_projector_pair(m1, m2):
        kind = InstrumentClass.PROJECTIVE
    elif _is_positive_pair(m1, m2):
        kind = InstrumentClass.POSITIVE
    else:
        kind = InstrumentClass.GENERAL
    if kind is InstrumentClass.GENERAL:
        v1, p1 = mc.polar_decompose(m1)
        v2, p2 = mc.polar_decompose(m2)
    else:
        h1 = 0.5 * (m1 + mc.dagger(m1))
        h2 = 0.5 * (m2 + mc.dagger(m2))
        v1, v2, p1, p2 = eye, eye.copy(), h1, h2
    return Instrument(d, m1, m2, kind, v1, v2, p1, p2, residual)


def validate_multi(operators: Sequence) -> MultiInstrument:
    """Validate an n-outcome measurement (n >= 1)."""
    if len(operators) < 1:
        raise ShapeMismatch("a measurement needs at least one operator")
    ops, d = _check_shapes(operators)
    residual = completeness_residual(ops)
    if residual > COMPLETENESS_TOL:
        raise CompletenessViolation(
            f"sum of M^dagger M differs from identity by {residual:.3e}", residual
        )
    return MultiInstrument(d, tuple(ops))


def weakness(m) -> WeaknessReport:
    """Fit ``m ~ q (I + e)`` with ``q = Tr(m)/d`` and report ``||e||_2``.

    A traceless operator has no scalar part; its deviation is ``inf``.
    """
    m = mc.as_matrix(m)
    d = m.shape[0]
    q = complex(np.trace(m) / d)
    if abs(q) < 1e-12:
        return WeaknessReport(q, float("inf"))
    dev = np.linalg.norm(m / q - np.eye(d), ord=2)
    return WeaknessReport(q, float(dev))


@dataclass(frozen=True, eq=False)
class ReductionNode:
    """One binary split of an n-outcome measurement.

    The first outcome of ``instrument`` ends the chain with label
    ``stop_label`` after applying ``stop_unitary``; the second moves on to
    the next node, or, on the last node, ends with label ``stop_label + 1``
    after ``continue_unitary``. ``support`` projects onto the subspace that
    states entering this node occupy.
    """

    instrument: Instrument
    stop_label: int
    stop_unitary: np.ndarray
    continue_unitary: Optional[np.ndarray]
    support: np.ndarray

    @property
    def is_last(self) -> bool:
        return self.continue_unitary is not None


def binary_reduce(m: MultiInstrument) -> list[ReductionNode]:
    """Split an n-outcome measurement into a chain of two-outcome instruments.

    Node k measures ``A_k = |N_k|`` against ``B_k = (I - A_k^2)^(1/2)``, where
    ``N_j = M_j C^+`` are the remaining operators pulled back through the
    product ``C`` of earlier "continue" operators. The leaf for outcome j
    applies the polar factor of ``N_j``, so the composite operator on that
    branch equals ``M_j``.

    With two outcomes the measurement itself is the only node.

    Raises:
        SingularResidual: the pulled-back family is not complete on the
            support of ``C`` to within 1e-8.
    """
    ops = list(m.operators)
    n, d = len(ops), m.dim
    eye = np.eye(d, dtype=np.complex128)
    if n < 2:
        raise ShapeMismatch("binary reduction needs at least two outcomes")
    if n == 2:
        inst = validate(ops[0], ops[1])
        return [ReductionNode(inst, 0, eye, eye.copy(), eye.copy())]

    nodes = []
    c = eye.copy()
    for k in range(n - 1):
        c_pinv = np.linalg.pinv(c, rcond=PINV_RCOND)
        support = c @ c_pinv
        support = 0.5 * (support + mc.dagger(support))
        pulled = [ops[j] @ c_pinv for j in range(k, n)]
        gram = sum(mc.dagger(x) @ x for x in pulled)
        res = mc.fro(gram - support)
        if res > RESIDUAL_TOL:
            raise SingularResidual(
                f"residual family at node {k + 1} misses completeness by {res:.3e}"
            )
        a = mc.sqrt_psd(mc.dagger(pulled[0]) @ pulled[0])
        b = mc.sqrt_psd(eye - a @ a)
        stop_u, _ = mc.polar_decompose(pulled[0])
        cont_u = None
        if k == n - 2:
            cont_u, _ = mc.polar_decompose(pulled[1])
        nodes.append(ReductionNode(validate(a, b), k, stop_u, cont_u, support))
        c = b @ c
    return nodes


def branch_operator(nodes: Sequence[ReductionNode], label: int) -> np.ndarray:
    """Composite operator the chain applies on the branch ending in ``label``."""
    d = nodes[0].instrument.dim
    c = np.eye(d, dtype=np.complex128)
    for node in nodes:
        inst = node.instrument
        if label == node.stop_label:
            return node.stop_unitary @ inst.m1 @ c
        if node.is_last and label == node.stop_label + 1:
            return node.continue_unitary @ inst.m2 @ c
        c = inst.m2 @ c
    raise IndexError(f"no branch ends in outcome {label}")
