"""Monte Carlo ensembles of walks compared against direct measurement."""

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from . import matcore as mc
from .curves import OperatorCurve
from .errors import SingularResidual
from .instrument import (
    MultiInstrument,
    binary_reduce,
    born_probs,
    conditional_states,
)
from .walk import WalkBatch, WalkConfig, simulate_batch

Z_SOFT = 3.0
Z_HARD = 4.0
GATE_BLOCK = 20
ABORT_RATE_LIMIT = 1e-3


def z_score(freq: float, target: float, n: int) -> float:
    if n == 0 or not math.isfinite(freq):
        return float("nan")
    if target <= 0.0 or target >= 1.0:
        return 0.0 if freq == target else float("inf")
    return (freq - target) / math.sqrt(target * (1.0 - target) / n)


def gate_passes(z_scores: Sequence[float]) -> bool:
    """Multiple-comparison gate over independent z-scores.

    Nothing may exceed 4 sigma, and at most one comparison per block of 20
    (never fewer than one) may fall in (3, 4] sigma.
    """
    z = np.abs(np.asarray(z_scores, dtype=float))
    if z.size == 0 or np.any(~np.isfinite(z)) or np.any(z > Z_HARD):
        return False
    soft = int(np.count_nonzero(z > Z_SOFT))
    return soft <= max(1, z.size // GATE_BLOCK)


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class EnsembleReport:
    n_trajectories: int
    labels: list
    outcome_counts: list
    empirical_freqs: list
    target_probs: list
    z_scores: list
    mean_trace_distance: list
    max_trace_distance: list
    aborted: int
    degenerate: int
    mean_steps: float
    wall_clock: float
    epsilon: float
    threshold: float
    seed: int
    rows: Optional[list] = field(default=None, repr=False)

    @property
    def completed(self) -> int:
        return self.n_trajectories - self.aborted - self.degenerate

    @property
    def comparison_z(self) -> list:
        """Independent comparisons: one for a binary measurement, one per outcome otherwise."""
        return self.z_scores[:1] if len(self.z_scores) == 2 else list(self.z_scores)

    @property
    def abort_rate(self) -> float:
        return (self.aborted + self.degenerate) / self.n_trajectories

    @property
    def abort_breach(self) -> bool:
        return self.abort_rate > ABORT_RATE_LIMIT

    @property
    def gate_ok(self) -> bool:
        return gate_passes(self.comparison_z)

    def to_json_dict(self) -> dict:
        return {
            "nTrajectories": self.n_trajectories,
            "labels": list(self.labels),
            "outcomeCounts": [int(c) for c in self.outcome_counts],
            "empiricalFreqs": [_finite_or_none(f) for f in self.empirical_freqs],
            "targetProbs": [float(p) for p in self.target_probs],
            "zScores": [_finite_or_none(z) for z in self.z_scores],
            "meanFinalStateTraceDistance": [_finite_or_none(t) for t in self.mean_trace_distance],
            "maxFinalStateTraceDistance": [_finite_or_none(t) for t in self.max_trace_distance],
            "aborted": int(self.aborted),
            "degenerate": int(self.degenerate),
            "abortRate": self.abort_rate,
            "meanSteps": self.mean_steps,
            "gatePassed": self.gate_ok,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "seed": self.seed,
            "wallClock": self.wall_clock,
        }

    def summary_rows(self) -> list:
        return [
            (lab, self.target_probs[i], self.empirical_freqs[i], self.z_scores[i])
            for i, lab in enumerate(self.labels)
        ]

    def write_csv(self, path) -> None:
        if self.rows is None:
            raise ValueError("report was built without per-trajectory rows")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "steps", "finalX", "outcome", "seedUsed", "traceDistance"])
            for r in self.rows:
                w.writerow([r["index"], r["steps"], repr(r["finalX"]), r["outcome"],
                            r["seedUsed"], repr(r["traceDistance"])])


def _aggregate(labels, outcomes, trace_d, targets, status, steps, config, n, started, rows):
    done = status == _kernels.STATUS_DONE
    n_eff = int(done.sum())
    counts, freqs, zs, mean_td, max_td = [], [], [], [], []
    for lab, target in zip(labels, targets):
        sel = outcomes == lab
        c = int(sel.sum())
        f = c / n_eff if n_eff else float("nan")
        counts.append(c)
        freqs.append(f)
        zs.append(z_score(f, float(target), n_eff))
        mean_td.append(float(np.mean(trace_d[sel])) if c else float("nan"))
        max_td.append(float(np.max(trace_d[sel])) if c else float("nan"))
    return EnsembleReport(
        n_trajectories=n,
        labels=list(labels),
        outcome_counts=counts,
        empirical_freqs=freqs,
        target_probs=[float(t) for t in targets],
        z_scores=zs,
        mean_trace_distance=mean_td,
        max_trace_distance=max_td,
        aborted=int(np.count_nonzero(status == _kernels.STATUS_MAX_STEPS)),
        degenerate=int(np.count_nonzero(status == _kernels.STATUS_DEGENERATE)),
        mean_steps=float(np.mean(steps)) if len(steps) else 0.0,
        wall_clock=time.perf_counter() - started,
        epsilon=config.epsilon,
        threshold=config.threshold,
        seed=config.seed,
        rows=rows,
    )


def projective_offset_target(rho: np.ndarray, curve: OperatorCurve, config: WalkConfig) -> float:
    """Exact probability of outcome 2 for a projective walk started at ``config.x0``.

    ``tanh`` of the state position is a martingale of the projective walk;
    the state position starts at ``atanh(q2 - q1)`` and shifts with the walk.
    """
    q1, q2 = born_probs(curve.instrument.operators, rho)
    if q1 <= 0.0:
        return 1.0
    if q2 <= 0.0:
        return 0.0
    u0 = 0.5 * math.log(q2 / q1)
    x0, X = config.x0, config.threshold
    lo = math.tanh(u0 - X - x0)
    hi = math.tanh(u0 + X - x0)
    return (math.tanh(u0) - lo) / (hi - lo)


def _batch_rows(batch: WalkBatch, outcomes, trace_d):
    rows = []
    for t in range(batch.n):
        rows.append({
            "index": int(batch.indices[t]),
            "steps": int(batch.steps[t]),
            "finalX": float(batch.final_x[t]),
            "outcome": int(outcomes[t]) or None,
            "seedUsed": int(batch.keys[t]),
            "traceDistance": float(trace_d[t]),
        })
    return rows


def run_ensemble(
    curve: OperatorCurve,
    rho,
    config: WalkConfig,
    n: int,
    keep_rows: bool = False,
    log_steps: bool = False,
    backend: Optional[str] = None,
) -> EnsembleReport:
    """Run ``n`` seeded walks and compare with direct application of the instrument.

    Targets are ``Tr(M_j rho M_j^dagger)``; for a projective walk started off
    the origin they are the exact hitting probabilities instead. Trace
    distances compare every final state with ``M_j rho M_j^dagger / p_j``.
    """
    if n < 100:
        raise ValueError("an ensemble needs at least 100 trajectories")
    started = time.perf_counter()
    rho = np.asarray(rho.rho if hasattr(rho, "rho") else rho, dtype=np.complex128)
    batch = simulate_batch(curve, rho, config, n=n, log_steps=log_steps, backend=backend)
    ops = curve.instrument.operators
    if config.x0 != 0:
        p2 = projective_offset_target(rho, curve, config)
        targets = [1.0 - p2, p2]
    else:
        targets = list(born_probs(ops, rho))
    ideal = conditional_states(ops, rho)
    outcomes = batch.outcomes
    trace_d = np.full(n, np.nan)
    states = batch.final_states()
    for j, lab in enumerate((1, 2)):
        sel = outcomes == lab
        if sel.any() and ideal[j] is not None:
            trace_d[sel] = mc.trace_distance_batch(states[sel], ideal[j])
    rows = _batch_rows(batch, outcomes, trace_d) if keep_rows else None
    if rows is not None and log_steps:
        for r, log in zip(rows, batch.step_logs):
            r["stepLog"] = [int(v) for v in log]
    return _aggregate((1, 2), outcomes, trace_d, targets, batch.status, batch.steps,
                      config, n, started, rows)


def compare_multi(
    m: MultiInstrument,
    rho,
    config: WalkConfig,
    n: int,
    keep_rows: bool = False,
    backend: Optional[str] = None,
) -> EnsembleReport:
    """Run an n-outcome measurement as a chain of two-outcome walks.

    Node k of :func:`binary_reduce` is walked with random stream ``k``; the
    leaf unitaries are applied to the final states afterwards. Targets are
    ``Tr(M_j rho M_j^dagger)``.
    """
    if n < 100:
        raise ValueError("an ensemble needs at least 100 trajectories")
    rho = np.asarray(rho.rho if hasattr(rho, "rho") else rho, dtype=np.complex128)
    nodes = binary_reduce(m)
    if len(m.operators) == 2:
        curve = OperatorCurve(nodes[0].instrument)
        return run_ensemble(curve, rho, config, n, keep_rows=keep_rows, backend=backend)
    if config.x0 != 0:
        raise ValueError("multi-outcome chains always start at x = 0")

    started = time.perf_counter()
    d = m.dim
    labels = list(range(1, m.n + 1))
    outcomes = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int64)
    final = np.zeros((n, d, d), dtype=np.complex128)
    states = np.broadcast_to(rho, (n, d, d)).copy()
    active = np.arange(n)
    leak_tol = 1.0 - math.tanh(config.threshold) + 1e-8
    for k, node in enumerate(nodes):
        if not active.size:
            break
        leak = 1.0 - np.real(np.einsum("ij,nji->n", node.support, states[active]))
        # a finished walk keeps weight ~(1 - tanh X)/2 on the wrong side
        if np.max(np.abs(leak)) > leak_tol:
            raise SingularResidual(f"state left the support of node {k + 1} (leak {np.max(leak):.3e})")
        curve = OperatorCurve(node.instrument)
        batch = simulate_batch(curve, states[active], config, indices=active, stream=k, backend=backend)
        steps[active] += batch.steps
        bad = ~batch.completed
        status[active[bad]] = batch.status[bad]
        fs = batch.final_states()
        stop = batch.outcomes == 1
        cont = batch.outcomes == 2
        u = node.stop_unitary
        final[active[stop]] = u @ fs[stop] @ mc.dagger(u)
        outcomes[active[stop]] = node.stop_label + 1
        if node.is_last:
            u = node.continue_unitary
            final[active[cont]] = u @ fs[cont] @ mc.dagger(u)
            outcomes[active[cont]] = node.stop_label + 2
        else:
            states[active[cont]] = fs[cont]
        active = active[cont] if not node.is_last else active[:0]

    targets = born_probs(m.operators, rho)
    ideal = conditional_states(m.operators, rho)
    trace_d = np.full(n, np.nan)
    for j, lab in enumerate(labels):
        sel = outcomes == lab
        if sel.any() and ideal[j] is not None:
            trace_d[sel] = mc.trace_distance_batch(final[sel], ideal[j])
    rows = None
    if keep_rows:
        rows = [{"index": t, "steps": int(steps[t]), "finalX": None, "outcome": int(outcomes[t]) or None,
                 "seedUsed": config.seed, "traceDistance": float(trace_d[t])} for t in range(n)]
    return _aggregate(labels, outcomes, trace_d, targets, status, steps, config, n, started, rows)

