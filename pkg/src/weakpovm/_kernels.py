"""Batch random-walk kernel with a numba path and a pure-numpy path.

The backend is picked once at import: numba when it imports cleanly, unless
``WEAKPOVM_BACKEND=numpy`` (or ``WEAKPOVM_DISABLE_NUMBA=1``) is set. Every
public entry point also takes an explicit ``backend=`` override.

Both paths consume the same precomputed step tables and the same
counter-based random stream, and accumulate in the same order, so they
return bit-identical results.

Random stream: SplitMix64's output function applied to a counter. A
trajectory's key is derived from ``(seed, index, stream)``; draw number
``s`` is ``mix64(key + (s + 1) * GOLDEN) >> 11`` scaled to ``[0, 1)``.
"""

import os

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / 9007199254740992.0

STATUS_DONE = 0
STATUS_MAX_STEPS = 1
STATUS_DEGENERATE = 2
DEGENERATE_P = 1e-14


def _env_backend() -> str:
    if os.environ.get("WEAKPOVM_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return "numpy"
    choice = os.environ.get("WEAKPOVM_BACKEND", "numba").strip().lower()
    return "numpy" if choice == "numpy" else "numba"


try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None
    HAVE_NUMBA = False

DEFAULT_BACKEND = _env_backend() if HAVE_NUMBA else "numpy"


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def trajectory_key(seed: int, index: int, stream: int = 0) -> int:
    """Per-trajectory stream key; independent of execution order."""
    k = mix64((seed & MASK64) * GOLDEN + 1)
    k = mix64(k ^ (((index + 1) * MIX1) & MASK64))
    return mix64(k ^ (((stream + 1) * MIX2) & MASK64))


def trajectory_keys(seed: int, indices, stream: int = 0) -> np.ndarray:
    return np.array([trajectory_key(seed, int(i), stream) for i in indices], dtype=np.uint64)


def uniform(key: int, counter: int) -> float:
    return (mix64(key + (counter + 1) * GOLDEN) >> 11) * INV_2_53


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def uniforms_np(keys: np.ndarray, counter: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = keys + np.uint64(((counter + 1) * GOLDEN) & MASK64)
        z = _mix64_np(z)
    return (z >> np.uint64(11)).astype(np.float64) * INV_2_53


def _walk_numpy(pops, keys, m_plus, m_minus, k_start, k_max, max_steps, log_offsets, log_buf):
    n, d = pops.shape
    steps = np.zeros(n, dtype=np.int64)
    final_k = np.full(n, k_start, dtype=np.int64)
    status = np.full(n, STATUS_MAX_STEPS, dtype=np.int8)
    g = np.where(pops > 0.0, 1.0, 0.0)
    logging = log_buf.size > 0

    active = np.arange(n)
    k = np.full(n, k_start, dtype=np.int64)
    s = 0
    while active.size and s < max_steps:
        done = (k[active] >= k_max) | (k[active] <= -k_max)
        if done.any():
            status[active[done]] = STATUS_DONE
            active = active[~done]
            if not active.size:
                break
        rows = k[active] + k_max - 1
        ga = g[active]
        pa = pops[active]
        mp = m_plus[rows]
        mm = m_minus[rows]
        den = np.zeros(active.size)
        num_p = np.zeros(active.size)
        num_m = np.zeros(active.size)
        for i in range(d):
            w = ga[:, i] * ga[:, i] * pa[:, i]
            den = den + w
            num_p = num_p + mp[:, i] * mp[:, i] * w
            num_m = num_m + mm[:, i] * mm[:, i] * w
        p_plus = num_p / den
        u = uniforms_np(keys[active], s)
        up = u < p_plus
        num_c = np.where(up, num_p, num_m)
        p_c = num_c / den
        bad = p_c < DEGENERATE_P
        if bad.any():
            status[active[bad]] = STATUS_DEGENERATE
            steps[active[bad]] = s
            keep = ~bad
            active, up, num_c = active[keep], up[keep], num_c[keep]
            ga, mp, mm = ga[keep], mp[keep], mm[keep]
        inv = 1.0 / np.sqrt(num_c)
        m = np.where(up[:, None], mp, mm)
        g[active] = ga * m * inv[:, None]
        k[active] += np.where(up, 1, -1)
        if logging:
            pos = log_offsets[active] + s
            ok = pos < log_offsets[active + 1]
            log_buf[pos[ok]] = np.where(up[ok], 1, -1)
        s += 1
        steps[active] = s
    if active.size:
        done = (k[active] >= k_max) | (k[active] <= -k_max)
        status[active[done]] = STATUS_DONE
    final_k[:] = k
    return steps, final_k, g, status


def _walk_numba_impl(pops, keys, m_plus, m_minus, k_start, k_max, max_steps, log_offsets, log_buf):
    n, d = pops.shape
    steps = np.zeros(n, dtype=np.int64)
    final_k = np.zeros(n, dtype=np.int64)
    status = np.full(n, STATUS_MAX_STEPS, dtype=np.int8)
    g = np.zeros((n, d))
    logging = log_buf.size > 0
    golden = np.uint64(GOLDEN)
    mix1 = np.uint64(MIX1)
    mix2 = np.uint64(MIX2)
    sh30 = np.uint64(30)
    sh27 = np.uint64(27)
    sh31 = np.uint64(31)
    sh11 = np.uint64(11)
    for t in range(n):
        for i in range(d):
            g[t, i] = 1.0 if pops[t, i] > 0.0 else 0.0
        k = k_start
        key = keys[t]
        s = 0
        while s < max_steps:
            if k >= k_max or k <= -k_max:
                status[t] = STATUS_DONE
                break
            row = k + k_max - 1
            den = 0.0
            num_p = 0.0
            num_m = 0.0
            for i in range(d):
                w = g[t, i] * g[t, i] * pops[t, i]
                den = den + w
                num_p = num_p + m_plus[row, i] * m_plus[row, i] * w
                num_m = num_m + m_minus[row, i] * m_minus[row, i] * w
            p_plus = num_p / den
            z = key + np.uint64(s + 1) * golden
            z = (z ^ (z >> sh30)) * mix1
            z = (z ^ (z >> sh27)) * mix2
            z = z ^ (z >> sh31)
            u = np.float64(z >> sh11) * INV_2_53
            up = u < p_plus
            num_c = num_p if up else num_m
            if num_c / den < DEGENERATE_P:
                status[t] = STATUS_DEGENERATE
                break
            inv = 1.0 / np.sqrt(num_c)
            if up:
                for i in range(d):
                    g[t, i] = g[t, i] * m_plus[row, i] * inv
                k += 1
            else:
                for i in range(d):
                    g[t, i] = g[t, i] * m_minus[row, i] * inv
                k -= 1
            if logging:
                pos = log_offsets[t] + s
                if pos < log_offsets[t + 1]:
                    log_buf[pos] = 1 if up else -1
            s += 1
        if status[t] == STATUS_MAX_STEPS and (k >= k_max or k <= -k_max):
            status[t] = STATUS_DONE
        steps[t] = s
        final_k[t] = k
    return steps, final_k, g, status


if HAVE_NUMBA:
    _walk_numba = nb.njit(cache=True, nogil=True)(_walk_numba_impl)
else:  # pragma: no cover
    _walk_numba = None


def walk_batch(
    pops,
    keys,
    m_plus,
    m_minus,
    k_start,
    k_max,
    max_steps,
    log_offsets=None,
    log_buf=None,
    backend=None,
):
    """Run independent walks on the lattice ``k = -k_max .. k_max``.

    Args:
        pops: ``(n, d)`` eigenbasis populations of each starting state, rows
            summing to one.
        keys: ``(n,)`` uint64 stream keys.
        m_plus, m_minus: ``(2 k_max - 1, d)`` step-operator eigenvalues for a
            step up/down from lattice site ``row - k_max + 1``.
        k_start: starting site, ``|k_start| < k_max`` for a non-trivial walk.
        max_steps: per-trajectory step cap.
        log_offsets, log_buf: optional ragged step log; trajectory ``t`` writes
            ``+1/-1`` into ``log_buf[log_offsets[t]:log_offsets[t + 1]]``.

    Returns:
        ``(steps, final_k, g, status)`` where ``g`` holds the diagonal of the
        accumulated step-operator product, scaled so that
        ``sum(g**2 * pops) == 1``.
    """
    backend = backend or DEFAULT_BACKEND
    pops = np.ascontiguousarray(pops, dtype=np.float64)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    m_plus = np.ascontiguousarray(m_plus, dtype=np.float64)
    m_minus = np.ascontiguousarray(m_minus, dtype=np.float64)
    if log_buf is None:
        log_offsets = np.zeros(pops.shape[0] + 1, dtype=np.int64)
        log_buf = np.zeros(0, dtype=np.int8)
    args = (pops, keys, m_plus, m_minus, int(k_start), int(k_max), int(max_steps),
            np.ascontiguousarray(log_offsets, dtype=np.int64), log_buf)
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _walk_numba(*args)
    if backend != "numpy":
        raise ValueError(f"unknown backend {backend!r}")
    return _walk_numpy(*args)
