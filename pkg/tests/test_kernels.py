import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakpovm import _kernels as kn
from weakpovm import curves as cv
from weakpovm import sampling
from weakpovm.walk import WalkConfig, simulate_batch, step_table

# First outputs of the reference SplitMix64 generator started from state 0.
SPLITMIX64_FROM_ZERO = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

needs_numba = pytest.mark.skipif(not kn.HAVE_NUMBA, reason="numba not importable")


class TestRandomStream:
    def test_reference_sequence(self):
        for s, expected in enumerate(SPLITMIX64_FROM_ZERO):
            assert kn.mix64((s + 1) * kn.GOLDEN) == expected
            assert kn.uniform(0, s) == (expected >> 11) * 2.0**-53

    @given(key=st.integers(0, 2**64 - 1), s=st.integers(0, 10**7))
    def test_uniform_range(self, key, s):
        u = kn.uniform(key, s)
        assert 0.0 <= u < 1.0

    @settings(max_examples=30)
    @given(seed=st.integers(0, 2**64 - 1), s=st.integers(0, 10**6))
    def test_vectorized_matches_scalar(self, seed, s):
        keys = kn.trajectory_keys(seed, range(5))
        np.testing.assert_array_equal(kn.uniforms_np(keys, s), [kn.uniform(int(k), s) for k in keys])

    def test_keys_distinct_across_index_and_stream(self):
        keys = {kn.trajectory_key(3, i, s) for i in range(200) for s in range(3)}
        assert len(keys) == 600

    def test_uniformity(self):
        u = kn.uniforms_np(kn.trajectory_keys(1, range(20000)), 0)
        counts = np.histogram(u, bins=10, range=(0, 1))[0]
        chi2 = float(np.sum((counts - 2000.0) ** 2 / 2000.0))
        assert chi2 < 27.9  # 99.9% quantile, 9 dof


def _tables(inst, eps, X):
    c = cv.OperatorCurve(inst)
    cfg = WalkConfig(eps, X)
    mp, mm = step_table(c, eps, cfg.k_max)
    return c, cfg, mp, mm


@needs_numba
class TestBackendParity:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4),
           kind=st.sampled_from(["positive", "general", "projective"]),
           eps=st.sampled_from([0.1, 0.25, 0.5]))
    def test_bit_identical(self, seed, d, kind, eps):
        rng = np.random.default_rng(seed)
        inst = sampling.random_instrument(d, rng, (kind,))
        rho = sampling.random_density(d, rng)
        c = cv.OperatorCurve(inst)
        cfg = WalkConfig(eps, 3.0, seed=seed)
        a = simulate_batch(c, rho, cfg, n=64, log_steps=True, backend="numba")
        b = simulate_batch(c, rho, cfg, n=64, log_steps=True, backend="numpy")
        for name in ("steps", "final_k", "status"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        assert a.g.tobytes() == b.g.tobytes()
        for la, lb in zip(a.step_logs, b.step_logs):
            np.testing.assert_array_equal(la, lb)

    def test_degenerate_branch_flagged(self):
        pops = np.array([[1.0, 0.0]])
        keys = kn.trajectory_keys(0, [0])
        m_plus = np.zeros((5, 2))
        m_minus = np.full((5, 2), 1e-8)
        for backend in ("numba", "numpy"):
            steps, k, g, status = kn.walk_batch(pops, keys, m_plus, m_minus, 0, 3, 100, backend=backend)
            assert status[0] == kn.STATUS_DEGENERATE
            assert steps[0] == 0

    def test_max_steps_flagged(self):
        pops = np.array([[0.5, 0.5]])
        keys = kn.trajectory_keys(0, [0])
        half = np.full((199, 2), np.sqrt(0.5))
        for backend in ("numba", "numpy"):
            steps, k, g, status = kn.walk_batch(pops, keys, half, half, 0, 100, 10, backend=backend)
            assert status[0] == kn.STATUS_MAX_STEPS
            assert steps[0] == 10


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kn.walk_batch(np.ones((1, 1)), kn.trajectory_keys(0, [0]), np.ones((1, 1)), np.ones((1, 1)),
                      0, 1, 10, backend="cuda")


def test_env_selects_numpy(monkeypatch):
    monkeypatch.setenv("WEAKPOVM_BACKEND", "numpy")
    assert kn._env_backend() == "numpy"
    monkeypatch.setenv("WEAKPOVM_BACKEND", "numba")
    monkeypatch.setenv("WEAKPOVM_DISABLE_NUMBA", "1")
    assert kn._env_backend() == "numpy"
    monkeypatch.delenv("WEAKPOVM_DISABLE_NUMBA")
    assert kn._env_backend() == "numba"
