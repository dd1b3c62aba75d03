"""Ancilla-based construction on the doubled space, kept as an audit oracle.

The system is coupled to a qubit ancilla by ``U(0) = m1 (x) Z + m2 (x) X``,
the ancilla is measured weakly along its projective curve, and ``U(x)``
re-encodes the extended state as ``rho(x) (x) |0><0|`` after every step.
Doubled-space matrices are ancilla-major (see :mod:`weakpovm.curves`), so
``U(0)`` reads ``[[m1, m2], [m2, -m1]]``. Nothing here is used by the
production walk.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from . import matcore as mc
from .curves import OperatorCurve, block_unitary, half_minus, half_plus
from .errors import DegenerateProbability, WrongClass
from .instrument import InstrumentClass
from .walk import QuantumState, WalkConfig, step, step_probabilities

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
KET0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)


def _require_positive(curve: OperatorCurve) -> None:
    if curve.kind is InstrumentClass.GENERAL:
        raise WrongClass("the ancilla construction needs a positive instrument")


def ancilla_major(ancilla_op: np.ndarray, system_op: np.ndarray) -> np.ndarray:
    """``system_op (x) ancilla_op`` laid out with ancilla blocks outermost."""
    return np.kron(ancilla_op, system_op)


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    upper_left: np.ndarray
    upper_right: np.ndarray
    lower_left: np.ndarray
    lower_right: np.ndarray

    @classmethod
    def split(cls, op: np.ndarray) -> "BlockDecomposition":
        d = op.shape[0] // 2
        return cls(op[:d, :d], op[:d, d:], op[d:, :d], op[d:, d:])

    def full(self) -> np.ndarray:
        return np.block([[self.upper_left, self.upper_right], [self.lower_left, self.lower_right]])


@dataclass(frozen=True, eq=False)
class ExtendedModel:
    system_dim: int
    u0: np.ndarray

    @classmethod
    def from_curve(cls, curve: OperatorCurve) -> "ExtendedModel":
        _require_positive(curve)
        inst = curve.instrument
        u0 = ancilla_major(PAULI_Z, inst.p1pos) + ancilla_major(PAULI_X, inst.p2pos)
        return cls(inst.dim, u0)

    def embed(self, rho: np.ndarray) -> np.ndarray:
        """``rho (x) |0><0|``."""
        return ancilla_major(KET0, rho)


def ancilla_curve(y: float, dim: int) -> np.ndarray:
    """``I (x) P(y)`` with ``P1 = |0><0|``, ``P2 = |1><1|`` on the ancilla."""
    p = np.diag([np.sqrt(half_minus(y)), np.sqrt(half_plus(y))]).astype(np.complex128)
    return ancilla_major(p, np.eye(dim))


def extended_weak_op_matrix(curve: OperatorCurve, x: float, y: float) -> np.ndarray:
    _require_positive(curve)
    return block_unitary(curve, x + y) @ ancilla_curve(y, curve.dim) @ block_unitary(curve, x)


def extended_weak_op(curve: OperatorCurve, x: float, y: float) -> BlockDecomposition:
    """Blocks of ``U(x + y) (I (x) P(y)) U(x)``; the lower-left block vanishes."""
    return BlockDecomposition.split(extended_weak_op_matrix(curve, x, y))


def extended_state_expand(curve: OperatorCurve, rho) -> np.ndarray:
    """``U(0) (rho (x) |0><0|) U(0)^dagger``, blocks ``m_i rho m_j``."""
    model = ExtendedModel.from_curve(curve)
    rho = rho.rho if isinstance(rho, QuantumState) else np.asarray(rho, dtype=np.complex128)
    return model.u0 @ model.embed(rho) @ mc.dagger(model.u0)


@dataclass
class EquivalenceReport:
    steps: int
    directions_match: bool
    max_trace_distance: float
    max_prob_difference: float
    max_lower_left: float
    max_ancilla_leak: float
    terminated: bool
    directions: list

    @property
    def ok(self) -> bool:
        return self.directions_match and self.max_trace_distance <= 1e-9


def oracle_walk_equivalence(
    curve: OperatorCurve,
    rho,
    config: WalkConfig,
    max_pairs: Optional[int] = None,
    index: int = 0,
) -> EquivalenceReport:
    """Drive the ancilla protocol and the direct walk with the same draws.

    Runs until the walk terminates, or for ``max_pairs`` steps when given
    (``max_pairs`` caps rather than extends the walk). At each step the
    ancilla side reads its probabilities from the extended state and the
    system state is recovered from the upper-left block.
    """
    _require_positive(curve)
    config.check_clamp(curve.x_clamp)
    state = rho if isinstance(rho, QuantumState) else QuantumState(rho)
    model = ExtendedModel.from_curve(curve)
    key = _kernels.trajectory_key(config.seed, index)
    ext = model.embed(state.rho)
    k, eps, K = config.k_start, config.epsilon, config.k_max
    limit = config.max_steps if max_pairs is None else min(max_pairs, config.max_steps)

    dirs_ok = True
    max_td = max_dp = max_ll = max_leak = 0.0
    directions = []
    s = 0
    while s < limit and abs(k) < K:
        x = k * eps
        u = _kernels.uniform(key, s)
        ops = {+1: extended_weak_op_matrix(curve, x, eps), -1: extended_weak_op_matrix(curve, x, -eps)}
        probs = {sgn: float(np.real(np.trace(op @ ext @ mc.dagger(op)))) for sgn, op in ops.items()}
        a_dir = 1 if u < probs[+1] else -1
        if probs[a_dir] < _kernels.DEGENERATE_P:
            raise DegenerateProbability(f"ancilla branch probability {probs[a_dir]:.3e}")
        ext = ops[a_dir] @ ext @ mc.dagger(ops[a_dir]) / probs[a_dir]
        max_ll = max(max_ll, mc.fro(BlockDecomposition.split(ops[a_dir]).lower_left))

        p_plus = step_probabilities(curve, state.rho, x, eps)[0]
        state, _, w_dir = step(curve, state, x, eps, u)
        max_dp = max(max_dp, abs(p_plus - probs[+1]))
        dirs_ok &= a_dir == w_dir
        directions.append(w_dir)

        blocks = BlockDecomposition.split(ext)
        sys_state = blocks.upper_left / np.real(np.trace(blocks.upper_left))
        max_leak = max(max_leak, mc.fro(blocks.lower_right), mc.fro(blocks.upper_right))
        max_td = max(max_td, mc.trace_distance(sys_state, state.rho))
        k += w_dir
        s += 1
    return EquivalenceReport(s, dirs_ok, max_td, max_dp, max_ll, max_leak, abs(k) >= K, directions)
