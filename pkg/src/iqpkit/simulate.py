"""Exact small-n simulation of X-programs and the anticoncentration moments."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fourier import fwht
from .phasecore import (
    MAX_VECTOR_QUBITS,
    SparseParams,
    XProgram,
    from_bits,
    phase_values,
    random_sparse_circuit,
    root_table,
    support_of,
    to_bits,
)
from .rng import split

DENSE_LIMIT = 26
STREAM_LIMIT = 40
MOMENT_LIMIT = 20
_CHUNK = 1 << 18


class SizeGuardError(ValueError):
    """Requested problem is larger than the configured simulation limit."""


def _guard(n: int, limit: int, what: str):
    if n > limit:
        raise SizeGuardError(f"{what} supports n <= {limit}, got n = {n}")


@dataclass(frozen=True)
class Distribution:
    n: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} probabilities, got shape {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("negative probability")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_weights(cls, n: int, weights) -> Distribution:
        """Explicit renormalisation of nonnegative weights."""
        w = np.asarray(weights, dtype=np.float64)
        return cls(n, w / w.sum())

    def sample(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        u = rng.random(shots) * cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        return np.minimum(idx, len(cdf) - 1).astype(np.int64)

    def to_csv(self) -> str:
        lines = ["bitstring,prob"]
        for bits in sorted(to_bits(x, self.n) for x in range(1 << self.n)):
            lines.append(f"{bits},{self.probs[from_bits(bits)]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> Distribution:
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "bitstring,prob":
            raise ValueError("distribution CSV must start with 'bitstring,prob'")
        pairs = []
        for ln in lines[1:]:
            bits, p = ln.strip().split(",")
            pairs.append((bits, float(p)))
        if not pairs:
            raise ValueError("empty distribution")
        n = len(pairs[0][0])
        probs = np.zeros(1 << n)
        seen = set()
        for bits, p in pairs:
            if len(bits) != n:
                raise ValueError("inconsistent bitstring lengths")
            x = from_bits(bits)
            if x in seen:
                raise ValueError(f"duplicate outcome {bits}")
            seen.add(x)
            probs[x] = p
        if len(seen) != 1 << n:
            raise ValueError("distribution CSV must list every outcome")
        return cls(n, probs)


def empirical(n: int, samples: np.ndarray) -> np.ndarray:
    """Frequency vector of integer samples on n bits."""
    counts = np.bincount(np.asarray(samples, dtype=np.int64), minlength=1 << n)
    return counts / counts.sum()


def amplitude_spectrum(prog: XProgram, limit: int = DENSE_LIMIT) -> np.ndarray:
    """``<s|C|0> = 2^-n sum_x f(x) (-1)^(s.x)`` for every ``s``."""
    _guard(prog.n, limit, "dense simulation")
    f = phase_values(prog, np.arange(1 << prog.n, dtype=np.int64))
    return fwht(f) / (1 << prog.n)


def output_distribution(prog: XProgram, limit: int = DENSE_LIMIT) -> Distribution:
    amp = amplitude_spectrum(prog, limit)
    probs = amp.real ** 2 + amp.imag ** 2
    return Distribution(prog.n, probs)


def amplitude_zero(prog: XProgram, limit: int = STREAM_LIMIT) -> complex:
    """``<0|C|0> = 2^-n sum_x f(x)``, streamed in chunks."""
    _guard(prog.n, min(limit, MAX_VECTOR_QUBITS), "amplitude_zero")
    total = 0j
    size = 1 << prog.n
    for start in range(0, size, _CHUNK):
        xs = np.arange(start, min(size, start + _CHUNK), dtype=np.int64)
        total += phase_values(prog, xs).sum()
    return total / size


def ising_weights(prog: XProgram) -> tuple[dict[tuple[int, int], Fraction], list[Fraction]]:
    """Edge and vertex weights in units of zeta = exp(i*pi/4).

    Duplicate rows on the same support are summed.
    """
    if prog.basis != "and" and prog.max_weight() > 1:
        raise ValueError("parity-basis rows of weight > 1 are not Ising terms")
    w: dict[tuple[int, int], Fraction] = {}
    v = [Fraction(0)] * prog.n
    for m, k in prog.rows:
        sup = support_of(m)
        units = Fraction(4 * k, prog.den)
        if len(sup) == 1:
            v[sup[0]] += units
        elif len(sup) == 2:
            w[sup] = w.get(sup, Fraction(0)) + units
        else:
            raise ValueError(f"row with support {sup} is not an Ising term")
    return w, v


def ising_partition(prog: XProgram, limit: int = STREAM_LIMIT) -> complex:
    """``Z = sum_x zeta^(sum w_ij x_i x_j + sum v_k x_k)``, evaluated by quadratic form."""
    w, v = ising_weights(prog)
    n = prog.n
    _guard(n, min(limit, MAX_VECTOR_QUBITS), "ising_partition")
    # back to integer exponents over den
    scale = prog.den
    upper = np.zeros((n, n), dtype=np.int64)
    for (i, j), wt in w.items():
        upper[i, j] = int(wt * scale / 4)
    lin = np.array([int(x * scale / 4) for x in v], dtype=np.int64)
    roots = root_table(prog.den)
    shifts = np.arange(n, dtype=np.int64)
    total = 0j
    size = 1 << n
    for start in range(0, size, _CHUNK):
        xs = np.arange(start, min(size, start + _CHUNK), dtype=np.int64)
        bits = (xs[:, None] >> shifts) & 1
        expo = bits @ lin + ((bits @ upper) * bits).sum(axis=1)
        total += roots[expo % (2 * prog.den)].sum()
    return total


@dataclass(frozen=True)
class MomentReport:
    trials: int
    mean: float
    std_error: float
    moment_order: int

    def to_json(self) -> str:
        return json.dumps({"order": self.moment_order, "trials": self.trials,
                           "mean": self.mean, "std_error": self.std_error})


_BLOCK = 500


def _block_amplitudes(params: SparseParams, count: int, rng: np.random.Generator) -> np.ndarray:
    xs = np.arange(1 << params.n, dtype=np.int64)
    out = np.empty(count)
    for t in range(count):
        f = phase_values(random_sparse_circuit(params, rng), xs)
        a = f.mean()
        out[t] = a.real ** 2 + a.imag ** 2
    return out


def sample_zero_probabilities(params: SparseParams, trials: int, rng: np.random.Generator,
                              threads: int = 1) -> np.ndarray:
    """``|<0|C|0>|^2`` for ``trials`` independent sparse circuits.

    Trials are cut into fixed blocks, each with its own child stream, so the
    result does not depend on ``threads``.
    """
    _guard(params.n, MOMENT_LIMIT, "moment estimation")
    sizes = [min(_BLOCK, trials - s) for s in range(0, trials, _BLOCK)]
    streams = split(rng, len(sizes))
    jobs = list(zip(sizes, streams))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda j: _block_amplitudes(params, *j), jobs))
    else:
        parts = [_block_amplitudes(params, *j) for j in jobs]
    return np.concatenate(parts)


def moment_mc(params: SparseParams, order: int, trials: int, rng: np.random.Generator,
              threads: int = 1) -> MomentReport:
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    if trials < 100:
        raise ValueError("moment estimation needs at least 100 trials")
    probs = sample_zero_probabilities(params, trials, rng, threads)
    vals = probs ** (order // 2)
    return MomentReport(trials, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)), order)


def fourth_moment_closed_form(n: int, p_edge: float) -> float:
    """Grouped pair-count sum ``2^-3n sum N_abcd (1-p)^(C(b,2)+bc+bd+cd)``.

    An upper bound on ``E|<0|C|0>|^4`` for the sparse family, not its value.
    """
    if n < 1 or n > 60:
        raise ValueError("closed form evaluated for 1 <= n <= 60")
    q = 1.0 - p_edge
    total = 0.0
    for b in range(n + 1):
        for c in range(n + 1 - b):
            for d in range(n + 1 - b - c):
                mult = math.comb(n, b) * math.comb(n - b, c) * math.comb(n - b - c, d)
                e = math.comb(b, 2) + b * c + b * d + c * d
                total += mult * q ** e
    return total / 2.0 ** (3 * n)


def fourth_moment_exact(n: int, p_edge: float) -> float:
    """Exact ``E|<0|C|0>|^4`` over the sparse family, by enumeration (n <= 6).

    Averaging gate by gate, single-qubit gates force ``w+y = x+z`` bitwise and
    each pair contributes ``1 - p`` unless its omega exponent vanishes.
    """
    if n > 6:
        raise SizeGuardError("exact fourth moment enumerates 2^(3n) triples; n <= 6")
    size = 1 << n
    w, x, y = (a.ravel() for a in np.meshgrid(*(np.arange(size),) * 3, indexing="ij"))
    shifts = np.arange(n)
    wb, xb, yb = ((a[:, None] >> shifts) & 1 for a in (w, x, y))
    zb = wb + yb - xb
    ok = np.all((zb >= 0) & (zb <= 1), axis=1)
    wb, xb, yb, zb = wb[ok], xb[ok], yb[ok], zb[ok]
    live = np.zeros(len(wb), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            beta = wb[:, i] * wb[:, j] - xb[:, i] * xb[:, j] + yb[:, i] * yb[:, j] - zb[:, i] * zb[:, j]
            live += beta != 0
    return float(((1.0 - p_edge) ** live).sum() / 2.0 ** (4 * n))


def paley_zygmund_fraction(params: SparseParams, threshold_alpha: float, trials: int,
                           rng: np.random.Generator, threads: int = 1) -> float:
    """Fraction of circuits with ``|<0|C|0>|^2 >= alpha 2^-n``."""
    if not 0 < threshold_alpha <= 1:
        raise ValueError("threshold_alpha must lie in (0, 1]")
    if trials < 100:
        raise ValueError("needs at least 100 trials")
    probs = sample_zero_probabilities(params, trials, rng, threads)
    # relative slack absorbs rounding on values that sit exactly on the threshold
    cut = threshold_alpha * 2.0 ** -params.n * (1 - 1e-12)
    return float(np.mean(probs >= cut))


def collision_alpha(dist: Distribution) -> float:
    """``2^n sum_x p_x^2``, the anticoncentration constant of ``dist``."""
    return float((1 << dist.n) * np.sum(dist.probs ** 2))


__all__ = [
    "DENSE_LIMIT", "Distribution", "MomentReport", "SizeGuardError", "amplitude_spectrum",
    "amplitude_zero", "collision_alpha", "empirical", "fourth_moment_closed_form",
    "fourth_moment_exact", "ising_partition", "ising_weights", "moment_mc",
    "output_distribution", "paley_zygmund_fraction", "sample_zero_probabilities",
]
