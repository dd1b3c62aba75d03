import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakpovm import _kernels as kn
from weakpovm import curves as cv
from weakpovm import matcore as mc
from weakpovm import sampling
from weakpovm import walk as wk
from weakpovm.errors import (
    ConfigError,
    DegenerateProbability,
    MaxStepsExceeded,
    NotHermitian,
    OffLattice,
    ShapeMismatch,
)

SQ = math.sqrt
KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])


class TestQuantumState:
    def test_from_psi_normalizes(self):
        s = wk.QuantumState.from_psi([3.0, 4.0])
        np.testing.assert_allclose(np.diag(s.rho).real, [0.36, 0.64])

    @pytest.mark.parametrize("rho, exc", [
        (np.array([[1.0, 1.0], [0.0, 0.0]]), NotHermitian),
        (np.diag([0.6, 0.6]), ValueError),
        (np.diag([1.5, -0.5]), ValueError),
    ])
    def test_rejects(self, rho, exc):
        with pytest.raises(exc):
            wk.QuantumState(rho)

    def test_maximally_mixed(self):
        assert mc.fro(wk.QuantumState.maximally_mixed(3).rho - np.eye(3) / 3) == 0.0


class TestWalkConfig:
    def test_default_cap(self):
        cfg = wk.WalkConfig(0.1, 8.0)
        assert cfg.max_steps == 64000
        assert cfg.k_max == 80

    def test_non_multiple_threshold(self):
        assert wk.WalkConfig(0.1, 1.05).k_max == 11

    def test_single_step_allowed(self):
        assert wk.WalkConfig(1.0, 1.0).k_max == 1

    @pytest.mark.parametrize("kwargs", [
        dict(epsilon=0.0, threshold=1.0),
        dict(epsilon=2.0, threshold=1.0),
        dict(epsilon=0.1, threshold=-1.0),
        dict(epsilon=0.1, threshold=1.0, max_steps=10),
        dict(epsilon=0.1, threshold=1.0, x0=0.05),
        dict(epsilon=0.1, threshold=1.0, x0=1.0),
        dict(epsilon=0.1, threshold=1.0, seed=-1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            wk.WalkConfig(**kwargs)

    def test_clamp_check(self):
        wk.WalkConfig(0.1, 19.9).check_clamp(20.0)
        with pytest.raises(ConfigError):
            wk.WalkConfig(0.1, 19.95).check_clamp(20.0)


class TestOnCurveState:
    def test_origin_equal_weights(self):
        s = wk.OnCurveState(0.0, KET0, KET1)
        assert s.weights == (0.5, 0.5)
        np.testing.assert_allclose(wk.on_curve_state(s).rho, np.full((2, 2), 0.5), atol=1e-15)

    def test_far_point(self):
        s = wk.on_curve_state(wk.OnCurveState(20.0, KET0, KET1))
        assert mc.trace_distance(s.rho, np.diag([0.0, 1.0])) <= 3e-9

    def test_half(self):
        w1, w2 = wk.OnCurveState(0.5, KET0, KET1).weights
        assert w2 == pytest.approx(0.7310586, abs=1e-7)
        assert w1 + w2 == pytest.approx(1.0, abs=1e-15)

    def test_rejects_non_orthogonal(self):
        with pytest.raises(ValueError):
            wk.OnCurveState(0.0, KET0, np.array([1.0, 1.0]) / SQ(2))


class TestStep:
    def test_trivial_instrument(self, trivial_qubit, rng):
        c = cv.OperatorCurve(trivial_qubit)
        state = wk.QuantumState(sampling.random_density(2, rng))
        assert wk.step_probabilities(c, state.rho, 0.0, 0.1)[0] == pytest.approx(0.5, abs=1e-15)
        # away from the origin the position alone biases the walk outward
        p_plus = wk.step_probabilities(c, state.rho, 0.7, 0.1)[0]
        assert p_plus == pytest.approx(0.5 * (1 + math.tanh(0.1) * math.tanh(0.7)), abs=1e-14)
        for x in (0.0, 0.7):
            new, _, _ = wk.step(c, state, x, 0.1, 0.3)
            assert mc.fro(new.rho - state.rho) <= 1e-14

    @pytest.mark.parametrize("x", [-1.0, 0.0, 0.5, 2.0])
    def test_projective_on_curve(self, proj_qubit, x):
        c = cv.OperatorCurve(proj_qubit)
        s = wk.OnCurveState(x, KET0, KET1)
        w1, w2 = s.weights
        eps = 0.1
        p_plus = wk.step_probabilities(c, wk.on_curve_state(s).rho, x, eps)[0]
        assert p_plus == pytest.approx(0.5 * (1 + math.tanh(eps) * (w2 - w1)), abs=1e-14)

    def test_zero_draw_goes_up(self, pos_qubit, rng):
        c = cv.OperatorCurve(pos_qubit)
        state = wk.QuantumState(sampling.random_density(2, rng))
        _, x, direction = wk.step(c, state, 0.3, 0.1, 0.0)
        assert direction == 1 and x == pytest.approx(0.4)

    def test_degenerate(self, proj_qubit):
        c = cv.OperatorCurve(proj_qubit)
        with pytest.raises(DegenerateProbability):
            wk.step(c, wk.QuantumState.from_psi(KET0), 0.0, 17.0, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4), x=st.floats(-5, 5),
           eps=st.floats(1e-3, 1.0))
    def test_probabilities_sum_to_one(self, seed, d, x, eps):
        rng = np.random.default_rng(seed)
        c = cv.OperatorCurve(sampling.random_instrument(d, rng))
        p_plus, p_minus, _, _ = wk.step_probabilities(c, sampling.random_density(d, rng), x, eps)
        assert p_plus + p_minus == pytest.approx(1.0, abs=1e-10)


class TestRunTrajectory:
    def test_single_step_walk(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        state = wk.QuantumState.from_psi(KET0)
        p_plus = wk.step_probabilities(c, state.rho, 0.0, 1.0)[0]
        for i in range(20):
            cfg = wk.WalkConfig(1.0, 1.0, seed=5)
            rec = wk.run_trajectory(c, state, cfg, index=i)
            assert rec.steps == 1
            u = kn.uniform(kn.trajectory_key(5, i), 0)
            assert rec.outcome == (2 if u < p_plus else 1)

    def test_single_step_statistics(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        rho = np.diag([1.0, 0.0])
        p_plus = wk.step_probabilities(c, rho, 0.0, 1.0)[0]
        batch = wk.simulate_batch(c, rho, wk.WalkConfig(1.0, 1.0, seed=9), n=20000)
        freq = float(np.mean(batch.outcomes == 2))
        assert abs(freq - p_plus) <= 4 * SQ(p_plus * (1 - p_plus) / 20000)

    def test_record_invariants(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        cfg = wk.WalkConfig(0.1, 1.05, seed=2)
        batch = wk.simulate_batch(c, np.eye(2) / 2, cfg, n=300)
        fx = batch.final_x
        assert np.all((np.abs(fx) >= 1.05) & (np.abs(fx) < 1.05 + 0.1))
        np.testing.assert_array_equal(batch.outcomes == 2, fx >= 1.05)
        rec = batch.record(0)
        js = rec.to_json_dict()
        assert set(js) == {"index", "steps", "finalX", "outcome", "seedUsed"}
        assert js["seedUsed"] == kn.trajectory_key(2, 0)

    def test_max_steps(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        cfg = wk.WalkConfig(0.1, 8.0, seed=1, max_steps=64000)
        object.__setattr__(cfg, "max_steps", 5)
        with pytest.raises(MaxStepsExceeded) as info:
            wk.run_trajectory(c, wk.QuantumState.maximally_mixed(2), cfg)
        rec = info.value.record
        assert rec.status == "max_steps" and rec.outcome is None and rec.steps == 5
        assert rec.to_json_dict()["status"] == "max_steps"

    def test_shape_mismatch(self, pos_qubit):
        with pytest.raises(ShapeMismatch):
            wk.simulate_batch(cv.OperatorCurve(pos_qubit), np.eye(3) / 3, wk.WalkConfig(0.1, 1.0), n=2)

    def test_offset_start_needs_projective(self, pos_qubit):
        with pytest.raises(ConfigError):
            wk.simulate_batch(cv.OperatorCurve(pos_qubit), np.eye(2) / 2,
                              wk.WalkConfig(0.1, 1.0, x0=0.5), n=2)


def _replay(curve, rho, cfg, index, log):
    """Direct density-matrix walk driven by the same draws as the kernel."""
    state = wk.QuantumState(rho)
    key = kn.trajectory_key(cfg.seed, index)
    k = cfg.k_start
    dirs = []
    for s in range(len(log)):
        state, _, d = wk.step(curve, state, k * cfg.epsilon, cfg.epsilon, kn.uniform(key, s))
        dirs.append(d)
        k += d
    return state, k, dirs


class TestKernelAgainstReference:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4),
           kind=st.sampled_from(["positive", "general", "projective"]))
    def test_directions_and_final_states(self, seed, d, kind):
        rng = np.random.default_rng(seed)
        c = cv.OperatorCurve(sampling.random_instrument(d, rng, (kind,)))
        rho = sampling.random_density(d, rng)
        cfg = wk.WalkConfig(0.25, 1.5, seed=seed)
        batch = wk.simulate_batch(c, rho, cfg, n=8, log_steps=True)
        states = batch.final_states()
        for t in range(8):
            log = batch.step_logs[t]
            state, k, dirs = _replay(c, rho, cfg, t, log)
            np.testing.assert_array_equal(dirs, log)
            assert k == batch.final_k[t]
            assert mc.trace_distance(state.rho, states[t]) <= 1e-9


class TestTelescoping:
    def test_seven_step_trajectory(self, rng):
        inst = sampling.random_general_instrument(3, rng)
        c = cv.OperatorCurve(inst)
        cfg = wk.WalkConfig(0.5, 1.5, seed=4)
        batch = wk.simulate_batch(c, np.eye(3) / 3, cfg, n=200, log_steps=True)
        t = int(np.flatnonzero(batch.steps == 7)[0])
        log = batch.step_logs[t]
        assert len(log) == 7
        prod = np.eye(3, dtype=complex)
        x = 0.0
        for d in log:
            prod = cv.weak_op(c, x, d * cfg.epsilon) @ prod
            x += d * cfg.epsilon
        assert x == pytest.approx(batch.final_x[t])
        eff = cv.effective_op(c, x)
        lam = np.vdot(eff, prod) / np.vdot(eff, eff)
        assert mc.fro(prod - lam * eff) <= 1e-8 * mc.fro(prod)


class TestReproducibility:
    def test_same_seed_same_batch(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        cfg = wk.WalkConfig(0.2, 2.0, seed=77)
        a = wk.simulate_batch(c, np.eye(2) / 2, cfg, n=100)
        b = wk.simulate_batch(c, np.eye(2) / 2, cfg, n=100)
        np.testing.assert_array_equal(a.steps, b.steps)
        assert a.g.tobytes() == b.g.tobytes()

    def test_order_independent(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        cfg = wk.WalkConfig(0.2, 2.0, seed=77)
        full = wk.simulate_batch(c, np.eye(2) / 2, cfg, n=100)
        idx = np.array([93, 5, 41])
        part = wk.simulate_batch(c, np.eye(2) / 2, cfg, indices=idx)
        np.testing.assert_array_equal(part.steps, full.steps[idx])
        np.testing.assert_array_equal(part.final_k, full.final_k[idx])

    def test_seed_changes_walks(self, pos_qubit):
        c = cv.OperatorCurve(pos_qubit)
        a = wk.simulate_batch(c, np.eye(2) / 2, wk.WalkConfig(0.2, 2.0, seed=1), n=50)
        b = wk.simulate_batch(c, np.eye(2) / 2, wk.WalkConfig(0.2, 2.0, seed=2), n=50)
        assert not np.array_equal(a.steps, b.steps)


class TestHitting:
    def test_closed_examples(self):
        assert wk.hitting_prob_closed(0.0, 3.0) == 0.5
        assert wk.hitting_prob_closed(0.5, 8.0) == pytest.approx(0.7310586, abs=1e-7)
        assert wk.hitting_prob_closed(8.0, 8.0) == 1.0
        assert wk.hitting_prob_closed(-8.0, 8.0) == 0.0

    def test_closed_out_of_range(self):
        with pytest.raises(ValueError):
            wk.hitting_prob_closed(2.0, 1.0)

    @pytest.mark.parametrize("X, eps", [(4.0, 0.5), (4.0, 0.1), (2.0, 1.0)])
    def test_oracle_matches_closed(self, X, eps):
        x, p = wk.hitting_prob_lattice(X, eps)
        closed = np.array([wk.hitting_prob_closed(v, X) for v in x])
        assert np.max(np.abs(p - closed)) <= 1e-10

    @pytest.mark.parametrize("eps", [0.05, 0.25, 1.0])
    def test_origin_is_half(self, eps):
        assert wk.hitting_prob_oracle(0.0, 2.0, eps) == pytest.approx(0.5, abs=1e-12)

    def test_two_site_lattice(self):
        # X = eps = 1: the only interior unknown is p(0) = 1/2
        x, p = wk.hitting_prob_lattice(1.0, 1.0)
        np.testing.assert_allclose(p, [0.0, 0.5, 1.0], atol=1e-15)

    def test_off_lattice(self):
        with pytest.raises(OffLattice):
            wk.hitting_prob_oracle(0.0, 1.05, 0.1)
        with pytest.raises(OffLattice):
            wk.hitting_prob_oracle(0.05, 1.0, 0.1)

    @pytest.mark.parametrize("eps", [0.05, 0.3, 1.0])
    def test_closed_form_satisfies_recursion(self, eps):
        K = int(round(6.0 / eps))
        x = (np.arange(2 * K + 1) - K) * eps
        X = K * eps
        p = [wk.hitting_prob_closed(v, X) for v in x]
        assert np.max(np.abs(wk.difference_residual(p, x, eps))) <= 1e-12

    @given(x=st.floats(-5.9, 5.9))
    def test_ode(self, x):
        h = 1e-4
        f = lambda v: wk.hitting_prob_closed(v, 6.0)  # noqa: E731
        d1 = (f(x + h) - f(x - h)) / (2 * h)
        d2 = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
        assert abs(d2 + 2 * math.tanh(x) * d1) <= 1e-6

    def test_projective_walk_from_offset(self, proj_qubit):
        # on-curve start x0 with the walker at x0: outcome 2 with the closed-form probability
        x0, X, n = -1.0, 3.0, 20000
        c = cv.OperatorCurve(proj_qubit)
        state = wk.on_curve_state(wk.OnCurveState(x0, KET0, KET1))
        cfg = wk.WalkConfig(0.1, X, seed=31, x0=x0)
        batch = wk.simulate_batch(c, state.rho, cfg, n=n)
        p = wk.hitting_prob_closed(x0, X)
        freq = float(np.mean(batch.outcomes == 2))
        assert abs(freq - p) <= 4 * SQ(p * (1 - p) / n)
