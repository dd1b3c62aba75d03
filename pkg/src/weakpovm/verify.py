"""Named invariant suites over random instruments.

Each suite returns :class:`Check` rows holding the largest residual seen
for one identity together with its tolerance.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import ancilla as an
from . import curves as cv
from . import matcore as mc
from . import sampling
from . import walk as wk
from .instrument import InstrumentClass, weakness

SUITES = ("identities", "ancilla", "hitting", "composition", "weakness")
X_GRID = (-3.0, -1.0, -0.25, 0.0, 0.5, 2.0, 3.0)
EPS_GRID = (1e-3, 0.1, 0.5)


@dataclass
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)


class _Tracker:
    def __init__(self):
        self.rows: dict[str, Check] = {}

    def add(self, name: str, residual: float, tol: float) -> None:
        r = float(residual)
        if name in self.rows:
            self.rows[name].residual = max(self.rows[name].residual, r)
        else:
            self.rows[name] = Check(name, r, tol)

    def checks(self) -> list:
        return list(self.rows.values())


def instrument_family(seeds: int, base_seed: int = 0, kinds=("positive", "general", "projective")):
    """Deterministic random instruments, cycling kinds and dimensions 2..4."""
    for i in range(seeds):
        rng = np.random.default_rng([base_seed, i])
        kind = kinds[i % len(kinds)]
        dim = 2 + (i // len(kinds)) % 3
        yield sampling.random_instrument(dim, rng, (kind,)), rng


def _eye(d):
    return np.eye(d, dtype=np.complex128)


def suite_identities(seeds: int = 100, base_seed: int = 0) -> list:
    t = _Tracker()
    for inst, rng in instrument_family(seeds, base_seed):
        c = cv.OperatorCurve(inst)
        d = inst.dim
        for x in X_GRID:
            t.add("M(x,0) = I/sqrt2", mc.fro(cv.weak_op(c, x, 0.0) - _eye(d) / math.sqrt(2)), 1e-10)
            for e in EPS_GRID:
                mp, mm = cv.weak_op(c, x, e), cv.weak_op(c, x, -e)
                t.add("completeness M(x,e),M(x,-e)",
                      mc.fro(mc.dagger(mp) @ mp + mc.dagger(mm) @ mm - _eye(d)), 1e-10)
            a, b = cv.ab_pair(c, x)
            t.add("[A(x),B(x)] = 0", mc.fro(a @ b - b @ a), 1e-10)
            t.add("A^2+B^2 = I", mc.fro(a @ a + b @ b - _eye(d)), 1e-10)
            t.add("M(0,x) = effective_op(x)", mc.fro(cv.effective_op(c, x) - cv.weak_op(c, 0.0, x)), 1e-10)
            if inst.kind is not InstrumentClass.GENERAL:
                u = cv.block_unitary(c, x)
                t.add("U(x) unitary", mc.fro(mc.dagger(u) @ u - _eye(2 * d)), 1e-10)
                t.add("U(x)^2 = I", mc.fro(u @ u - _eye(2 * d)), 1e-10)
                t.add("U(x) Hermitian", mc.fro(u - mc.dagger(u)), 1e-10)
            else:
                v = cv.unitary_interp(c, x)
                t.add("V(x) unitary", mc.fro(mc.dagger(v) @ v - _eye(d)), 1e-10)
        t.add("M(0,-20) -> m1", mc.fro(cv.effective_op(c, -20.0) - inst.m1), 1e-7)
        t.add("M(0,+20) -> m2", mc.fro(cv.effective_op(c, 20.0) - inst.m2), 1e-7)
        t.add("A(0),B(0) = positive parts",
              max(mc.fro(cv.ab_pair(c, 0.0)[0] - inst.p1pos), mc.fro(cv.ab_pair(c, 0.0)[1] - inst.p2pos)),
              1e-8)

        proj = cv.OperatorCurve(sampling.random_projective_instrument(d, rng))
        for x in np.linspace(-10, 10, 21):
            p, q = cv.proj_curve(proj, x), cv.proj_curve(proj, -x)
            t.add("P(x)^2 + P(-x)^2 = I", mc.fro(p @ p + q @ q - _eye(d)), 1e-10)
            t.add("P(-x)P(x) = sech(x)/2 I", mc.fro(q @ p - _eye(d) / (2 * math.cosh(x))), 1e-10)
            t.add("P(x) = M(0,x) (projective)", mc.fro(p - cv.effective_op(proj, x)), 1e-10)
        t.add("P(0) = I/sqrt2", mc.fro(cv.proj_curve(proj, 0.0) - _eye(d) / math.sqrt(2)), 1e-15)
    return t.checks()


def suite_composition(seeds: int = 100, base_seed: int = 0) -> list:
    """``M(x+y, z) M(x, y) = lambda M(x, y+z)`` with ``lambda`` extracted by projection."""
    t = _Tracker()
    for inst, rng in instrument_family(seeds, base_seed):
        c = cv.OperatorCurve(inst)
        for _ in range(10):
            x, y, z = rng.uniform(-3, 3, size=3)
            lhs = cv.weak_op(c, x + y, z) @ cv.weak_op(c, x, y)
            rhs = cv.weak_op(c, x, y + z)
            lam = np.vdot(rhs, lhs) / np.vdot(rhs, rhs)
            t.add("telescoping proportionality (relative)", mc.fro(lhs - lam * rhs) / mc.fro(rhs), 1e-9)
            t.add("lambda imaginary part", abs(lam.imag), 1e-8)
            t.add("lambda = compose_constant(y,z)", abs(lam.real - cv.compose_constant(y, z)), 1e-8)
            p = cv.compose_constant(x, y)
            t.add("compose_constant log-space branch",
                  abs(p - math.exp(0.5 * (cv._log_cosh(x + y) - math.log(2) - cv._log_cosh(x) - cv._log_cosh(y)))),
                  1e-12)
    return t.checks()


def suite_ancilla(seeds: int = 20, base_seed: int = 0, walk_steps: int = 100,
                  kinds=("positive", "projective")) -> list:
    t = _Tracker()
    for inst, rng in instrument_family(seeds, base_seed, kinds=kinds):
        c = cv.OperatorCurve(inst)
        d = inst.dim
        model = an.ExtendedModel.from_curve(c)
        t.add("U(0) = block_unitary(0)", mc.fro(model.u0 - cv.block_unitary(c, 0.0)), 1e-10)
        for x in (-2.0, 0.0, 2.0):
            for e in (0.1, -0.1):
                blk = an.extended_weak_op(c, x, e)
                t.add("lower-left block", mc.fro(blk.lower_left), 1e-10)
                t.add("upper-left = weak_op", mc.fro(blk.upper_left - cv.weak_op(c, x, e)), 1e-10)
            mp = an.extended_weak_op_matrix(c, x, 0.1)
            mm = an.extended_weak_op_matrix(c, x, -0.1)
            t.add("doubled-space completeness",
                  mc.fro(mc.dagger(mp) @ mp + mc.dagger(mm) @ mm - _eye(2 * d)), 1e-10)
            ul_p, ul_m = mp[:d, :d], mm[:d, :d]
            t.add("system-block completeness",
                  mc.fro(mc.dagger(ul_p) @ ul_p + mc.dagger(ul_m) @ ul_m - _eye(d)), 1e-10)
        rho = sampling.random_density(d, rng)
        ext = an.extended_state_expand(c, rho)
        m1, m2 = inst.p1pos, inst.p2pos
        blocks = an.BlockDecomposition.split(ext)
        t.add("extended state blocks",
              max(mc.fro(blocks.upper_left - m1 @ rho @ m1), mc.fro(blocks.upper_right - m1 @ rho @ m2),
                  mc.fro(blocks.lower_left - m2 @ rho @ m1), mc.fro(blocks.lower_right - m2 @ rho @ m2)),
              1e-10)
        cfg = wk.WalkConfig(0.1, 8.0, seed=int(rng.integers(2**32)))
        rep = an.oracle_walk_equivalence(c, rho, cfg, max_pairs=walk_steps)
        t.add("paired walk direction mismatches", 0.0 if rep.directions_match else 1.0, 0.0)
        t.add("paired walk trace distance", rep.max_trace_distance, 1e-9)
    return t.checks()


def suite_hitting() -> list:
    t = _Tracker()
    for X, eps in ((4.0, 0.5), (4.0, 0.1), (2.0, 1.0)):
        x, p = wk.hitting_prob_lattice(X, eps)
        closed = np.array([wk.hitting_prob_closed(v, X) for v in x])
        t.add("closed form vs tridiagonal solve", np.max(np.abs(p - closed)), 1e-10)
    for eps in (0.05, 0.3, 1.0):
        for X in (eps * 2, 3.0, 6.0, 9.9, 10.0):
            K = round(X / eps)
            if abs(K * eps - X) > 1e-9 or K < 1:
                continue
            x = (np.arange(2 * K + 1) - K) * eps
            closed = np.array([wk.hitting_prob_closed(v, X) for v in x])
            t.add("closed form satisfies the recursion", np.max(np.abs(wk.difference_residual(closed, x, eps))), 1e-12)
    h = 1e-4
    for X in (2.0, 6.0):
        for x in np.linspace(-X + 0.01, X - 0.01, 41):
            f = lambda v: wk.hitting_prob_closed(v, X)  # noqa: E731
            d1 = (f(x + h) - f(x - h)) / (2 * h)
            d2 = (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
            t.add("ODE p'' + 2 tanh(x) p' = 0", abs(d2 + 2 * math.tanh(x) * d1), 1e-6)
    t.add("p(X) = 1, p(-X) = 0",
          max(abs(wk.hitting_prob_closed(8.0, 8.0) - 1), abs(wk.hitting_prob_closed(-8.0, 8.0))), 1e-15)
    return t.checks()


def suite_weakness(seeds: int = 20, base_seed: int = 0) -> list:
    """``deviation <= c eps`` with ``c = weakness_constant`` and monotone decrease in ``eps``."""
    t = _Tracker()
    for inst, _ in instrument_family(seeds, base_seed):
        c = cv.OperatorCurve(inst)
        const = cv.weakness_constant(c)
        for x in np.linspace(-5, 5, 11):
            devs = []
            for e in (1e-1, 1e-2, 1e-3):
                dev = weakness(cv.weak_op(c, x, e)).deviation
                devs.append(dev)
                t.add("deviation / (c eps)", dev / (const * e), 1.0)
            t.add("non-monotone deviation in eps", 0.0 if devs[0] > devs[1] > devs[2] else 1.0, 0.0)
    return t.checks()


def run_suite(name: str, seeds: int = 100, base_seed: int = 0) -> dict:
    """Run one suite (or ``"all"``); returns ``{suite: [Check, ...]}``."""
    runners = {
        "identities": lambda: suite_identities(seeds, base_seed),
        "composition": lambda: suite_composition(seeds, base_seed),
        "ancilla": lambda: suite_ancilla(seeds, base_seed),
        "hitting": suite_hitting,
        "weakness": lambda: suite_weakness(seeds, base_seed),
    }
    if name == "all":
        return {k: runners[k]() for k in SUITES}
    if name not in runners:
        raise KeyError(name)
    return {name: runners[name]()}
