"""Output depolarising noise: per-bit flips on samples, damping on spectra.

Depolarising noise of rate ``epsilon`` on every qubit just before measurement
flips each outcome bit independently with probability ``epsilon/2``; on the
Fourier side it multiplies ``p_hat(s)`` by ``(1 - epsilon)^|s|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier import fwht, weights
from .phasecore import MAX_VECTOR_QUBITS, from_bits, to_bits
from .simulate import DENSE_LIMIT, Distribution, SizeGuardError

NEGATIVITY_TOL = 1e-12


@dataclass(frozen=True)
class NoiseParams:
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def flip_probability(self) -> float:
        return self.epsilon / 2.0


def flip_sample(x: int | str, noise: NoiseParams, rng: np.random.Generator, n: int | None = None):
    """Flip each bit of one sample independently with probability epsilon/2.

    Bitstrings come back as bitstrings, integers (which need ``n``) as integers.
    """
    if isinstance(x, str):
        return to_bits(flip_sample(from_bits(x), noise, rng, len(x)), len(x))
    if n is None:
        raise ValueError("n is required for integer samples")
    flips = rng.random(n) < noise.flip_probability
    return x ^ sum(1 << i for i in range(n) if flips[i])


def flip_samples(xs: np.ndarray, n: int, noise: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`flip_sample` for integer samples (n <= 62)."""
    if n > MAX_VECTOR_QUBITS:
        raise ValueError(f"flip_samples supports n <= {MAX_VECTOR_QUBITS}")
    xs = np.asarray(xs, dtype=np.int64)
    out = np.empty_like(xs)
    shifts = np.arange(n, dtype=np.int64)
    step = 1 << 18
    for start in range(0, len(xs), step):
        chunk = xs[start:start + step]
        flips = rng.random((len(chunk), n)) < noise.flip_probability
        out[start:start + step] = chunk ^ (flips.astype(np.int64) << shifts).sum(axis=1)
    return out


def fourier_of(dist: Distribution) -> np.ndarray:
    """Dense coefficients ``p_hat(s) = 2^-n sum_x p_x (-1)^(s.x)``."""
    if dist.n > DENSE_LIMIT:
        raise SizeGuardError(f"dense transform supports n <= {DENSE_LIMIT}")
    return fwht(dist.probs) / (1 << dist.n)


def synthesize(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fourier_of`: ``p_x = sum_s p_hat(s) (-1)^(s.x)``."""
    return fwht(np.asarray(coeffs, dtype=np.float64))


def damping(n: int, epsilon: float) -> np.ndarray:
    return (1.0 - epsilon) ** weights(n)


def apply_noise(dist: Distribution, noise: NoiseParams) -> Distribution:
    coeffs = fourier_of(dist) * damping(dist.n, noise.epsilon)
    q = synthesize(coeffs)
    low = q.min()
    if low < -NEGATIVITY_TOL:
        raise ArithmeticError(f"noisy distribution has entry {low}; the channel cannot produce this")
    return Distribution(dist.n, np.maximum(q, 0.0))


def l1_distance(a, b) -> float:
    """Un-halved l1 distance ``sum_x |a_x - b_x|``."""
    a = a.probs if isinstance(a, Distribution) else np.asarray(a, dtype=np.float64)
    b = b.probs if isinstance(b, Distribution) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def sampling_tolerance(n: int, shots: int) -> float:
    """Slack for the l1 distance between an empirical distribution and its source.

    ``E||emp - p||_1 <= sqrt(2 * 2^n / (pi * shots))``; we allow three times
    that plus 0.005.
    """
    return 3.0 * math.sqrt(2.0 * (1 << n) / (math.pi * shots)) + 0.005
