"""The random-walk measurement protocol.

A walk starts at position ``x0`` (normally 0) and repeatedly applies the
weak measurement ``{M(x, +eps), M(x, -eps)}``, moving to ``x +/- eps``
according to the outcome. It stops once ``|x| >= X``; the ``-X`` side is
outcome 1 and the ``+X`` side outcome 2. Positions are tracked as integer
lattice sites ``k`` with ``x = k * eps``.

Because every step operator of an instrument is diagonal in one fixed basis
(up to the ``V(x)`` dressing, which telescopes), the batch engine only
evolves eigenbasis populations and the diagonal of the accumulated operator
product; see :mod:`weakpovm._kernels`. :func:`step` is the full
density-matrix reference for a single step.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import _kernels
from . import matcore as mc
from .curves import OperatorCurve, half_minus, half_plus, weak_op
from .errors import (
    ConfigError,
    DegenerateProbability,
    MaxStepsExceeded,
    OffLattice,
    ShapeMismatch,
)
from .instrument import InstrumentClass

TRACE_TOL = 1e-10
PSD_TOL = 1e-10
LATTICE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A density matrix; validated on construction and stored Hermitian-symmetrized."""

    rho: np.ndarray

    def __post_init__(self):
        rho = mc.as_matrix(self.rho)
        res = mc.hermiticity_residual(rho)
        if res > mc.scaled_tol(mc.HERMITIAN_TOL, rho):
            raise mc.NotHermitian(f"density matrix not Hermitian (asymmetry {res:.3e})")
        rho = 0.5 * (rho + mc.dagger(rho))
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lo = float(np.linalg.eigvalsh(rho)[0])
        if lo < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lo!r}")
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def from_psi(cls, psi) -> "QuantumState":
        psi = np.asarray(psi, dtype=np.complex128).ravel()
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ValueError("zero state vector")
        psi = psi / nrm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "QuantumState":
        return cls(np.eye(dim, dtype=np.complex128) / dim)


@dataclass(frozen=True)
class WalkConfig:
    """Step size, stopping threshold, step cap and seed of a walk.

    ``max_steps`` defaults to ``ceil(10 (X / eps)^2)``. ``x0`` is the starting
    position and must lie on the lattice ``eps * Z``.
    """

    epsilon: float
    threshold: float
    seed: int = 0
    max_steps: Optional[int] = None
    x0: float = 0.0

    def __post_init__(self):
        eps, X = self.epsilon, self.threshold
        if not (eps > 0 and math.isfinite(eps)):
            raise ConfigError(f"epsilon must be positive, got {eps!r}")
        if not (X > 0 and math.isfinite(X)):
            raise ConfigError(f"threshold must be positive, got {X!r}")
        if eps > X:
            raise ConfigError(f"epsilon {eps} exceeds threshold {X}")
        floor = self.min_steps_cap
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", floor)
        elif self.max_steps < floor:
            raise ConfigError(f"max_steps {self.max_steps} below 10 (X/eps)^2 = {floor}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        k0 = self.x0 / eps
        if abs(k0 - round(k0)) > LATTICE_TOL:
            raise ConfigError(f"start x0={self.x0} is not a multiple of epsilon")
        if abs(self.x0) >= X:
            raise ConfigError("start position already beyond the threshold")

    @property
    def min_steps_cap(self) -> int:
        return int(math.ceil(10.0 * (self.threshold / self.epsilon) ** 2 - 1e-9))

    @property
    def k_max(self) -> int:
        """Lattice site of the +X boundary: the first ``k`` with ``k eps >= X``."""
        return int(math.ceil(self.threshold / self.epsilon - LATTICE_TOL))

    @property
    def k_start(self) -> int:
        return int(round(self.x0 / self.epsilon))

    def check_clamp(self, x_clamp: float) -> None:
        if self.threshold > x_clamp - self.epsilon + 1e-12:
            raise ConfigError(
                f"threshold {self.threshold} exceeds x_clamp - epsilon = {x_clamp - self.epsilon}"
            )


@dataclass(eq=False)
class TrajectoryRecord:
    index: int
    steps: int
    final_x: float
    outcome: Optional[int]
    final_state: Optional[QuantumState]
    seed_used: int
    step_log: Optional[np.ndarray] = None
    status: str = "done"

    def to_json_dict(self) -> dict:
        out = {
            "index": int(self.index),
            "steps": int(self.steps),
            "finalX": float(self.final_x),
            "outcome": self.outcome,
            "seedUsed": int(self.seed_used),
        }
        if self.status != "done":
            out["status"] = self.status
        if self.step_log is not None:
            out["stepLog"] = [int(v) for v in self.step_log]
        return out


@dataclass(frozen=True)
class OnCurveState:
    """``sqrt(w1) |psi1> + sqrt(w2) |psi2>`` with ``w1, w2 = (1 -/+ tanh x0) / 2``."""

    x0: float
    psi1: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        p1 = np.asarray(self.psi1, dtype=np.complex128).ravel()
        p2 = np.asarray(self.psi2, dtype=np.complex128).ravel()
        if p1.shape != p2.shape:
            raise ShapeMismatch("psi1 and psi2 differ in dimension")
        if abs(np.vdot(p1, p2)) > 1e-10:
            raise ValueError("psi1 and psi2 are not orthogonal")
        if abs(np.linalg.norm(p1) - 1) > 1e-10 or abs(np.linalg.norm(p2) - 1) > 1e-10:
            raise ValueError("psi1 and psi2 must be normalized")
        object.__setattr__(self, "psi1", p1)
        object.__setattr__(self, "psi2", p2)

    @property
    def weights(self) -> tuple[float, float]:
        return float(half_minus(self.x0)), float(half_plus(self.x0))


def on_curve_state(params: OnCurveState) -> QuantumState:
    w1, w2 = params.weights
    return QuantumState.from_psi(math.sqrt(w1) * params.psi1 + math.sqrt(w2) * params.psi2)


def step_probabilities(curve: OperatorCurve, rho: np.ndarray, x: float, epsilon: float):
    mp = weak_op(curve, x, epsilon)
    mm = weak_op(curve, x, -epsilon)
    p_plus = float(np.real(np.trace(mp @ rho @ mc.dagger(mp))))
    p_minus = float(np.real(np.trace(mm @ rho @ mc.dagger(mm))))
    return p_plus, p_minus, mp, mm


def step(curve: OperatorCurve, state: QuantumState, x: float, epsilon: float, draw: float):
    """Apply one weak measurement at position ``x`` with the given uniform draw.

    The walk moves up when ``draw < p_plus``.

    Returns:
        ``(new_state, new_x, direction)`` with ``direction`` in ``{+1, -1}``.

    Raises:
        DegenerateProbability: the chosen branch has probability below 1e-14.
    """
    p_plus, p_minus, mp, mm = step_probabilities(curve, state.rho, x, epsilon)
    if draw < p_plus:
        m, p, direction = mp, p_plus, 1
    else:
        m, p, direction = mm, p_minus, -1
    if p < _kernels.DEGENERATE_P:
        raise DegenerateProbability(f"branch probability {p:.3e} at x={x}")
    new = m @ state.rho @ mc.dagger(m)
    new = new / np.real(np.trace(new))
    return QuantumState(new), x + direction * epsilon, direction


def step_table(curve: OperatorCurve, epsilon: float, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of ``M_p(k eps, +eps)`` and ``M_p(k eps, -eps)`` for ``|k| < k_max``."""
    ks = np.arange(-k_max + 1, k_max)
    x = ks * epsilon
    a, b = curve.a, curve.b

    def ab(pos):
        sm = half_minus(pos)[:, None]
        sp = half_plus(pos)[:, None]
        r = np.sqrt(sm * a**2 + sp * b**2)
        return np.sqrt(sm) * a / r, np.sqrt(sp) * b / r

    al0, be0 = ab(x)
    al_up, be_up = ab((ks + 1) * epsilon)
    al_dn, be_dn = ab((ks - 1) * epsilon)
    sm, sp = math.sqrt(half_minus(epsilon)), math.sqrt(half_plus(epsilon))
    m_plus = sm * al0 * al_up + sp * be0 * be_up
    m_minus = sp * al0 * al_dn + sm * be0 * be_dn
    return m_plus, m_minus


@dataclass(eq=False)
class WalkBatch:
    """Raw results of a batch of walks sharing one instrument and config."""

    curve: OperatorCurve
    config: WalkConfig
    indices: np.ndarray
    keys: np.ndarray
    sigma0: np.ndarray
    steps: np.ndarray
    final_k: np.ndarray
    g: np.ndarray
    status: np.ndarray
    step_logs: Optional[list] = None
    _states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def final_x(self) -> np.ndarray:
        return self.final_k * self.config.epsilon

    @property
    def completed(self) -> np.ndarray:
        return self.status == _kernels.STATUS_DONE

    @property
    def outcomes(self) -> np.ndarray:
        """1 or 2 per trajectory; 0 for aborted ones."""
        out = np.where(self.final_k >= self.config.k_max, 2, 1)
        return np.where(self.completed, out, 0)

    def final_states(self) -> np.ndarray:
        """``(n, d, d)`` normalized final density matrices in the lab frame."""
        if self._states is not None:
            return self._states
        g = self.g
        sig = self.sigma0 if self.sigma0.ndim == 3 else self.sigma0[None]
        local = g[:, :, None] * sig * g[:, None, :]
        out = np.empty_like(local)
        for k in np.unique(self.final_k):
            sel = self.final_k == k
            f = self.curve.frame(k * self.config.epsilon)
            out[sel] = f @ local[sel] @ mc.dagger(f)
        tr = np.real(np.trace(out, axis1=1, axis2=2))
        out /= tr[:, None, None]
        self._states = out
        return out

    def record(self, t: int) -> TrajectoryRecord:
        status = {0: "done", 1: "max_steps", 2: "degenerate"}[int(self.status[t])]
        outcome = int(self.outcomes[t]) or None
        state = QuantumState(self.final_states()[t]) if status == "done" else None
        log = self.step_logs[t] if self.step_logs is not None else None
        return TrajectoryRecord(
            int(self.indices[t]), int(self.steps[t]), float(self.final_x[t]),
            outcome, state, int(self.keys[t]), log, status,
        )


def _initial_frame(curve: OperatorCurve, rho: np.ndarray, x0: float):
    f = curve.frame(x0)
    sigma = mc.dagger(f) @ rho @ f
    pops = np.clip(np.real(np.diagonal(sigma, axis1=-2, axis2=-1)), 0.0, None)
    pops = pops / pops.sum(axis=-1, keepdims=True)
    return sigma, pops


def simulate_batch(
    curve: OperatorCurve,
    rho,
    config: WalkConfig,
    n: Optional[int] = None,
    indices=None,
    stream: int = 0,
    log_steps: bool = False,
    backend: Optional[str] = None,
) -> WalkBatch:
    """Run walks for trajectory ``indices`` (default ``range(n)``).

    ``rho`` is either one ``(d, d)`` starting state shared by all walks or a
    ``(n, d, d)`` stack. Each trajectory draws from the stream keyed by
    ``(config.seed, index, stream)``, so results do not depend on batching.
    """
    config.check_clamp(curve.x_clamp)
    if indices is None:
        if n is None:
            raise ValueError("pass n or indices")
        indices = np.arange(n)
    indices = np.asarray(indices, dtype=np.int64)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape[-1] != curve.dim:
        raise ShapeMismatch(f"state dimension {rho.shape[-1]} != instrument dimension {curve.dim}")
    if config.x0 != 0 and curve.kind is not InstrumentClass.PROJECTIVE:
        # off-origin starts are only given a reference meaning for projective curves
        raise ConfigError("nonzero start positions are supported for projective instruments only")
    sigma, pops = _initial_frame(curve, rho, config.x0)
    if pops.ndim == 1:
        pops = np.broadcast_to(pops, (len(indices), curve.dim))
    keys = _kernels.trajectory_keys(config.seed, indices, stream)
    k_max = config.k_max
    m_plus, m_minus = step_table(curve, config.epsilon, k_max)
    args = (pops, keys, m_plus, m_minus, config.k_start, k_max, config.max_steps)
    steps, final_k, g, status = _kernels.walk_batch(*args, backend=backend)
    logs = None
    if log_steps:
        offsets = np.zeros(len(indices) + 1, dtype=np.int64)
        np.cumsum(steps, out=offsets[1:])
        buf = np.zeros(int(offsets[-1]), dtype=np.int8)
        _kernels.walk_batch(*args, log_offsets=offsets, log_buf=buf, backend=backend)
        logs = [buf[offsets[t]:offsets[t + 1]].copy() for t in range(len(indices))]
    return WalkBatch(curve, config, indices, keys, sigma, steps, final_k, g, status, logs)


def run_trajectory(
    curve: OperatorCurve,
    initial_state: QuantumState,
    config: WalkConfig,
    index: int = 0,
    log_steps: bool = False,
    backend: Optional[str] = None,
) -> TrajectoryRecord:
    """Run one seeded walk to completion.

    Raises:
        MaxStepsExceeded: the walk hit ``config.max_steps``; the partial
            record is attached as ``exc.record``.
        DegenerateProbability: numerical breakdown of a step probability.
    """
    batch = simulate_batch(
        curve, initial_state.rho, config, indices=[index], log_steps=log_steps, backend=backend
    )
    rec = batch.record(0)
    if rec.status == "max_steps":
        exc = MaxStepsExceeded(f"trajectory {index} exceeded {config.max_steps} steps")
        exc.record = rec
        raise exc
    if rec.status == "degenerate":
        raise DegenerateProbability(f"trajectory {index} hit a vanishing branch probability")
    return rec


def hitting_prob_closed(x: float, threshold: float) -> float:
    """Probability of ending at ``+X`` from ``x``: ``(1 + tanh x / tanh X) / 2``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if abs(x) > threshold:
        raise ValueError(f"|x| = {abs(x)} exceeds threshold {threshold}")
    return 0.5 * (1.0 + math.tanh(x) / math.tanh(threshold))


def _lattice_steps(value: float, epsilon: float, what: str) -> int:
    q = value / epsilon
    r = round(q)
    if abs(q - r) > LATTICE_TOL:
        raise OffLattice(f"{what} = {value} is not a multiple of epsilon = {epsilon}")
    return int(r)


def hitting_prob_lattice(threshold: float, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve the discrete hitting-probability recursion on the whole lattice.

    Unknowns ``p_j`` at ``x_j = (j - K) eps``, ``j = 0 .. 2K``, satisfy
    ``p_j = (p_{j+1} + p_{j-1})/2 + tanh(eps) tanh(x_j) (p_{j+1} - p_{j-1})/2``
    with ``p_0 = 0`` and ``p_2K = 1``; solved as a tridiagonal system.

    Returns:
        ``(x, p)`` arrays over all ``2K + 1`` lattice sites.
    """
    K = _lattice_steps(threshold, epsilon, "threshold")
    if K < 1:
        raise OffLattice("threshold must span at least one step")
    x = (np.arange(2 * K + 1) - K) * epsilon
    p = np.zeros(2 * K + 1)
    p[-1] = 1.0
    m = 2 * K - 1
    c = 0.5 * math.tanh(epsilon) * np.tanh(x[1:-1])
    ab = np.zeros((3, m))
    ab[0, 1:] = -(0.5 + c[:-1])
    ab[1, :] = 1.0
    ab[2, :-1] = -(0.5 - c[1:])
    rhs = np.zeros(m)
    rhs[-1] = 0.5 + c[-1]
    p[1:-1] = scipy.linalg.solve_banded((1, 1), ab, rhs)
    return x, p


def hitting_prob_oracle(x0: float, threshold: float, epsilon: float) -> float:
    """Hitting probability of ``+X`` from lattice site ``x0`` by direct linear solve.

    Raises:
        OffLattice: ``X / eps`` is not an integer or ``x0`` is off the lattice.
    """
    K = _lattice_steps(threshold, epsilon, "threshold")
    j = _lattice_steps(x0, epsilon, "x0") + K
    if not 0 <= j <= 2 * K:
        raise OffLattice(f"x0 = {x0} lies outside [-X, X]")
    _, p = hitting_prob_lattice(threshold, epsilon)
    return float(p[j])


def difference_residual(p, x: np.ndarray, epsilon: float) -> np.ndarray:
    """Residual of the hitting recursion for values ``p`` on lattice points ``x``."""
    p = np.asarray(p, dtype=float)
    lo, mid, hi = p[:-2], p[1:-1], p[2:]
    t = math.tanh(epsilon) * np.tanh(x[1:-1])
    return mid - 0.5 * (hi + lo) - 0.5 * t * (hi - lo)
