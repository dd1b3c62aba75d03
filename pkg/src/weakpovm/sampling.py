"""Random instruments, measurements and states for tests and verification runs."""

import numpy as np
from scipy.stats import unitary_group

from .instrument import Instrument, MultiInstrument, validate, validate_multi


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def random_unitary(dim: int, rng=None) -> np.ndarray:
    """Haar-random unitary."""
    return unitary_group.rvs(dim, random_state=_rng(rng)) if dim > 1 else np.exp(
        2j * np.pi * _rng(rng).random()) * np.ones((1, 1))


def random_unitary_away_from_cut(dim: int, rng=None, margin: float = 0.3) -> np.ndarray:
    """Random unitary with eigenphases in ``[-pi + margin, pi - margin]``."""
    rng = _rng(rng)
    q = random_unitary(dim, rng)
    theta = rng.uniform(-np.pi + margin, np.pi - margin, size=dim)
    return (q * np.exp(1j * theta)) @ q.conj().T


def random_density(dim: int, rng=None, rank=None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble of the given rank."""
    rng = _rng(rng)
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.real(np.trace(rho))


def random_positive_instrument(dim: int, rng=None, low: float = 0.0, high: float = 1.0) -> Instrument:
    """Commuting positive pair ``m1 = Q diag(a) Q^dagger``, ``m2 = (I - m1^2)^(1/2)``.

    ``a`` is uniform on ``[low, high]``.
    """
    rng = _rng(rng)
    q = random_unitary(dim, rng)
    a = rng.uniform(low, high, size=dim)
    b = np.sqrt(1.0 - a * a)
    return validate((q * a) @ q.conj().T, (q * b) @ q.conj().T)


def random_general_instrument(dim: int, rng=None, margin: float = 0.3) -> Instrument:
    """Positive pair dressed with random unitaries whose logarithms are unambiguous."""
    rng = _rng(rng)
    pos = random_positive_instrument(dim, rng)
    v1 = random_unitary_away_from_cut(dim, rng, margin)
    v2 = random_unitary_away_from_cut(dim, rng, margin)
    return validate(v1 @ pos.m1, v2 @ pos.m2)


def random_projective_instrument(dim: int, rng=None) -> Instrument:
    rng = _rng(rng)
    q = random_unitary(dim, rng)
    r = int(rng.integers(1, dim)) if dim > 1 else 1
    mask = np.zeros(dim)
    mask[:r] = 1.0
    p1 = (q * mask) @ q.conj().T
    return validate(p1, np.eye(dim) - p1)


def random_instrument(dim: int, rng=None, kinds=("positive", "general", "projective")) -> Instrument:
    rng = _rng(rng)
    kind = kinds[int(rng.integers(len(kinds)))]
    return {
        "positive": random_positive_instrument,
        "general": random_general_instrument,
        "projective": random_projective_instrument,
    }[kind](dim, rng)


def random_povm(n: int, dim: int, rng=None) -> MultiInstrument:
    """n Kraus operators cut from a Haar-random isometry ``C^d -> C^(n d)``."""
    rng = _rng(rng)
    iso = random_unitary(n * dim, rng)[:, :dim]
    ops = [iso[j * dim:(j + 1) * dim, :] for j in range(n)]
    return validate_multi(ops)
