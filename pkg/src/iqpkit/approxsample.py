"""Classical sampling from noisy IQP output distributions.

The noisy distribution ``p~`` is approximated by ``q~`` whose spectrum is the
damped low-weight part of ``p_hat``:

    q~_hat(s) = (1 - eps)^|s| * p_hat'(s)   for |s| <= ell, else 0,

where ``2^n p_hat(s) = 2^-n sum_y conj(f(y)) f(y ^ s)`` is estimated by
sampling ``y``.  Prefix marginals of ``q~`` are exact sums over the stored
coefficients, and the truncated conditional sampler walks the bits in order
(qubit 0 first), pruning any child whose marginal is negative.

``fix`` is the recursive rescaling that describes the sampler's output
distribution exactly; it is kept separate from the sampler so each can check
the other.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .fourier import FourierTable, masks_up_to_weight
from .phasecore import MAX_VECTOR_QUBITS, XProgram, phase_oracle, phase_values, popcount
from .noise import l1_distance  # noqa: F401  (re-exported)
from .rng import split
from .simulate import DENSE_LIMIT, SizeGuardError

NEGATIVE_TOL = 1e-12


class BudgetError(RuntimeError):
    """Coefficient estimation would exceed the allowed number of oracle calls."""


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    alpha: float
    delta: float
    epsilon: float
    ell: int
    gamma_acc: float
    samples_per_coeff: int
    median_reps: int

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError("ell must be nonnegative")
        if not self.gamma_acc > 0:
            raise ValueError("gamma_acc must be positive")
        if self.samples_per_coeff < 1 or self.median_reps < 1:
            raise ValueError("estimation budget must be positive")

    @property
    def coeff_count(self) -> int:
        return sum(math.comb(self.n, k) for k in range(min(self.ell, self.n) + 1))

    @property
    def oracle_calls(self) -> int:
        """Phase evaluations spent on estimation (two per sampled point)."""
        return 2 * (self.coeff_count - 1) * self.samples_per_coeff * self.median_reps

    def error_bound(self) -> float:
        """``sqrt(gamma^2 (n^ell + 1) + alpha e^(-2 eps ell))`` bound on ||q~ - p~||_1."""
        est = math.exp(2 * math.log(self.gamma_acc) + math.log(self.n ** self.ell + 1))
        return math.sqrt(est + self.alpha * math.exp(-2 * self.epsilon * self.ell))

    def truncation_bound(self) -> float:
        """Error from truncation alone (exact coefficients)."""
        return math.sqrt(self.alpha * (1 - self.epsilon) ** (2 * self.ell))

    def estimation_is_rigorous(self) -> bool:
        """Whether the budget meets the Hoeffding requirement for ``gamma_acc``."""
        reps, samples = hoeffding_budget(self.gamma_acc, self.coeff_count, self.n)
        return self.samples_per_coeff >= samples and self.median_reps >= reps

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(coeff_count=self.coeff_count, error_bound=self.error_bound(),
                 rigorous_budget=self.estimation_is_rigorous())
        return d


def hoeffding_budget(gamma_acc: float, coeff_count: int, n: int) -> tuple[int, int]:
    """(median_reps, samples_per_coeff) for accuracy ``gamma_acc`` on every coefficient.

    Terms lie in [-1, 1], so a batch of ``N = 2 ln(2/z)/gamma^2`` points misses
    by more than ``gamma`` with probability at most ``z``; we take
    ``z = 1/(2 * reps * coeff_count * n)`` and ``reps = ceil(18 ln(n * coeff_count))``.
    """
    reps = max(1, math.ceil(18 * math.log(max(n * coeff_count, 2))))
    samples = math.ceil(2 * math.log(2 * reps * coeff_count * n) / gamma_acc ** 2)
    return reps, samples


def _gamma_for(delta: float, n: int, ell: int) -> float:
    """``delta / sqrt(2 (n^ell + 1))``, in logs since ``n^ell`` can exceed float range."""
    gamma = delta * math.exp(-0.5 * (math.log(2) + math.log(n ** ell + 1)))
    if gamma <= 0:
        raise ValueError("coefficient accuracy underflows; parameters are far out of range")
    return gamma


def choose_parameters(alpha: float, delta: float, epsilon: float, n: int) -> SamplerConfig:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    if n < 1:
        raise ValueError("n must be positive")
    # alpha e^(-2 eps ell) <= delta^2/2 and gamma^2 (n^ell + 1) <= delta^2/2
    ell = max(0, math.ceil(math.log(2 * alpha / delta ** 2) / (2 * epsilon)))
    gamma_acc = _gamma_for(delta, n, ell)
    count = sum(math.comb(n, k) for k in range(min(ell, n) + 1))
    reps, samples = hoeffding_budget(gamma_acc, count, n)
    return SamplerConfig(n, alpha, delta, epsilon, ell, gamma_acc, samples, reps)


def configure(alpha, delta, epsilon, n, ell=None, samples_per_coeff=None, median_reps=None):
    """choose_parameters with optional overrides of the truncation and the estimation budget."""
    cfg = choose_parameters(alpha, delta, epsilon, n)
    if ell is not None:
        cfg = replace(cfg, ell=ell, gamma_acc=_gamma_for(delta, n, ell))
        reps, samples = hoeffding_budget(cfg.gamma_acc, cfg.coeff_count, n)
        cfg = replace(cfg, median_reps=reps, samples_per_coeff=samples)
    if samples_per_coeff is not None:
        cfg = replace(cfg, samples_per_coeff=samples_per_coeff)
    if median_reps is not None:
        cfg = replace(cfg, median_reps=median_reps)
    return cfg


# --- coefficients ----------------------------------------------------------

def estimate_coefficient(oracle, s: int, config: SamplerConfig, rng: np.random.Generator,
                         n: int | None = None) -> float:
    """Median-of-means estimate of ``2^n p_hat(s)``.

    ``oracle`` maps an int64 array of inputs to the complex phases ``f``.
    """
    if s == 0:
        return 1.0  # |f|^2 = 1 identically
    n = config.n if n is None else n
    if n > MAX_VECTOR_QUBITS:
        raise ValueError(f"estimation supports n <= {MAX_VECTOR_QUBITS}")
    step = 1 << 16
    means = np.empty(config.median_reps)
    for r in range(config.median_reps):
        acc = 0.0
        left = config.samples_per_coeff
        while left:
            k = min(step, left)
            y = rng.integers(0, 1 << n, size=k, dtype=np.int64)
            acc += (np.conj(oracle(y)) * oracle(y ^ s)).real.sum()
            left -= k
        means[r] = acc / config.samples_per_coeff
    return float(np.median(means))


def exact_coefficient(prog: XProgram, s: int) -> float:
    """``2^n p_hat(s) = 2^-n sum_y Re(conj(f(y)) f(y ^ s))`` by full enumeration."""
    if prog.n > DENSE_LIMIT:
        raise SizeGuardError(f"exact coefficients support n <= {DENSE_LIMIT}")
    ys = np.arange(1 << prog.n, dtype=np.int64)
    f = phase_values(prog, ys)
    return float((np.conj(f) * f[ys ^ s]).real.mean())


def build_spectrum(source: str, prog_or_oracle, config: SamplerConfig,
                   rng: np.random.Generator | None = None,
                   max_oracle_calls: int = 2 * 10 ** 9) -> FourierTable:
    """Damped, truncated spectrum of the noisy distribution.

    ``source="exact"`` needs an :class:`XProgram`; ``source="estimate"`` takes
    a program or a vectorised oracle and a generator.  Masks are processed in
    (weight, value) order, each estimate on its own child stream.
    """
    n = config.n
    masks = masks_up_to_weight(n, config.ell)
    scale = 2.0 ** -n
    entries: dict[int, float] = {0: scale}
    if source == "exact":
        if not isinstance(prog_or_oracle, XProgram):
            raise TypeError("exact source needs an XProgram")
        if prog_or_oracle.n > DENSE_LIMIT:
            raise SizeGuardError(f"exact spectrum supports n <= {DENSE_LIMIT}")
        ys = np.arange(1 << n, dtype=np.int64)
        f = phase_values(prog_or_oracle, ys)
        fc = np.conj(f)
        for s in masks[1:]:
            c = float((fc * f[ys ^ s]).real.mean())
            entries[s] = (1 - config.epsilon) ** popcount(s) * c * scale
    elif source == "estimate":
        if rng is None:
            raise ValueError("estimation needs a generator")
        if config.oracle_calls > max_oracle_calls:
            raise BudgetError(f"estimation needs {config.oracle_calls:.3g} oracle calls "
                              f"(limit {max_oracle_calls:.3g}); lower samples_per_coeff/median_reps")
        oracle = prog_or_oracle
        if isinstance(oracle, XProgram):
            oracle = phase_oracle(oracle)
        streams = split(rng, len(masks))
        for s, stream in zip(masks[1:], streams[1:]):
            c = estimate_coefficient(oracle, s, config, stream, n)
            entries[s] = (1 - config.epsilon) ** popcount(s) * c * scale
    else:
        raise ValueError(f"unknown source {source!r}")
    return FourierTable(n, entries)


def simon_spectrum(n: int, t: int) -> FourierTable:
    """Spectrum of the uniform distribution on ``{x : x.t = 0}``."""
    if t == 0:
        raise ValueError("secret must be nonzero")
    if t >> n:
        raise ValueError("secret has more than n bits")
    c = 2.0 ** -n
    return FourierTable(n, {0: c, t: c})


def simon_distribution(n: int, t: int) -> np.ndarray:
    xs = np.arange(1 << n, dtype=np.int64)
    even = (np.bitwise_count(xs & t) & 1) == 0
    return np.where(even, 2.0 ** (1 - n), 0.0)


# --- marginals and the truncated sampler -------------------------------------

def marginal(table: FourierTable, y: int, k: int) -> float:
    """``S_y``: total of ``q~`` over strings whose first ``k`` bits are ``y``."""
    if not 0 <= k <= table.n:
        raise ValueError("prefix length out of range")
    total = 0.0
    for s, c in table.entries.items():
        if s >> k == 0:
            total += -c if popcount(s & y) & 1 else c
    return 2.0 ** (table.n - k) * total


def marginals(table: FourierTable, ys: np.ndarray, k: int) -> np.ndarray:
    """Vectorised :func:`marginal` over an array of ``k``-bit prefixes."""
    ys = np.asarray(ys, dtype=np.int64)
    keep = [(s, c) for s, c in table.entries.items() if s >> k == 0]
    if not keep:
        return np.zeros(len(ys))
    ms = np.array([s for s, _ in keep], dtype=np.int64)
    cs = np.array([c for _, c in keep])
    out = np.empty(len(ys))
    step = max(1, (1 << 22) // len(ms))
    for start in range(0, len(ys), step):
        block = ys[start:start + step]
        signs = 1 - 2 * (np.bitwise_count(block[:, None] & ms[None, :]) & 1).astype(np.float64)
        out[start:start + step] = signs @ cs
    return out * 2.0 ** (table.n - k)


def _prob_zero(s0: np.ndarray, s1: np.ndarray, live: np.ndarray | None = None) -> np.ndarray:
    """Probability of appending 0, given the two child marginals.

    ``live`` marks prefixes that can actually be reached; only those are
    checked for the both-negative contradiction.
    """
    neg0, neg1 = s0 < 0, s1 < 0
    both = neg0 & neg1
    bad = both & ((s0 < -NEGATIVE_TOL) | (s1 < -NEGATIVE_TOL))
    if live is not None:
        bad &= live
    if np.any(bad):
        raise ArithmeticError("both children have negative marginals; parent should not have been chosen")
    total = s0 + s1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(total > 0, s0 / total, 0.5)
    return np.where(both, 0.5, np.where(neg0, 0.0, np.where(neg1, 1.0, ratio)))


def alg_samples(table: FourierTable, shots: int, rng: np.random.Generator) -> np.ndarray:
    """``shots`` draws from the truncated conditional sampler, as integers.

    Marginals are computed once per distinct prefix at each level.
    """
    n = table.n
    if n > MAX_VECTOR_QUBITS:
        raise ValueError(f"sampling supports n <= {MAX_VECTOR_QUBITS}")
    if marginal(table, 0, 0) <= 0:
        raise ArithmeticError("table sums to a nonpositive total")
    prefixes = np.zeros(shots, dtype=np.int64)
    for k in range(n):
        uniq, inv = np.unique(prefixes, return_inverse=True)
        s0 = marginals(table, uniq, k + 1)
        s1 = marginals(table, uniq | (1 << k), k + 1)
        p0 = _prob_zero(s0, s1)
        u = rng.random(shots)
        prefixes |= (u >= p0[inv]).astype(np.int64) << k
    return prefixes


def alg_sample(table: FourierTable, rng: np.random.Generator) -> int:
    return int(alg_samples(table, 1, rng)[0])


def _alg_distribution(n: int, level_marginals) -> np.ndarray:
    """Exact output law of the sampler given ``level_marginals(k) -> S over all k-bit prefixes``."""
    probs = np.ones(1)
    for k in range(n):
        s = level_marginals(k + 1)
        half = 1 << k
        p0 = _prob_zero(s[:half], s[half:], probs > 0)
        # prefix y0 keeps index y, prefix y1 is y + 2^k
        probs = np.concatenate([probs * p0, probs * (1 - p0)])
    return probs


def alg_distribution(table: FourierTable) -> np.ndarray:
    """Exact distribution of :func:`alg_samples`, from every prefix marginal."""
    if table.n > 20:
        raise SizeGuardError("exhaustive marginals support n <= 20")
    return _alg_distribution(table.n, lambda k: marginals(table, np.arange(1 << k), k))


def alg_distribution_vector(vec) -> np.ndarray:
    """The sampler's output law when its marginals are prefix sums of ``vec``."""
    v = np.asarray(vec, dtype=np.float64)
    n = len(v).bit_length() - 1
    if len(v) != 1 << n:
        raise ValueError("length must be a power of two")
    if v.sum() <= 0:
        raise ArithmeticError("vector sums to a nonpositive total")
    return _alg_distribution(n, lambda k: v.reshape(-1, 1 << k).sum(axis=0))


def fix(vec) -> np.ndarray:
    """Recursive rescaling: split on the leading bit, drop a nonpositive half.

    The leading bit is qubit 0, matching the sampler's order.
    """
    v = np.asarray(vec, dtype=np.float64)
    if len(v) & (len(v) - 1) or len(v) == 0:
        raise ValueError("length must be a power of two")
    if not v.sum() > 0:
        raise ArithmeticError("fix needs a positive total")
    return _fix(v)


def _fix(p: np.ndarray) -> np.ndarray:
    if len(p) == 1:
        return p.copy()
    a, b = p[0::2], p[1::2]
    sa, sb = a.sum(), b.sum()
    out = np.zeros_like(p)
    if sa > 0 and sb > 0:
        out[0::2] = _fix(a)
        out[1::2] = _fix(b)
    elif sa > 0:
        out[0::2] = p.sum() / sa * _fix(a)
    else:
        out[1::2] = p.sum() / sb * _fix(b)
    return out
