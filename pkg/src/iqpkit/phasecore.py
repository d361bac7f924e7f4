"""X-programs: diagonal IQP circuits with exact dyadic phases.

A program on ``n`` qubits is a list of rows ``(mask, num)`` sharing one
denominator ``den``.  Row ``j`` contributes the phase ``exp(i*pi*num_j/den)``
to basis state ``x`` when its mask "fires" on ``x``:

* ``basis="and"`` (gate form): fires iff every bit of ``mask`` is set in ``x``.
  ``diag(1, zeta^k)`` on qubit ``i`` and ``diag(1, 1, 1, omega^k)`` on
  ``(i, j)`` are rows of this kind.
* ``basis="parity"`` (Pauli-Z form): fires iff ``x & mask`` has odd weight.
  This is the representation that linear codes act on (see ``codes``).

For weight-one masks the two bases coincide.  Exponents are accumulated as
integers modulo ``2*den`` and only converted to complex numbers at the end.

Bitstrings are written qubit 0 first: character ``i`` is bit ``i`` of the
integer ``x``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

ALLOWED_DENOMINATORS = (1, 2, 4, 8, 16)
BASES = ("and", "parity")
# widest mask that still fits the vectorised int64 paths
MAX_VECTOR_QUBITS = 62


def root_table(den: int) -> np.ndarray:
    """``exp(i*pi*k/den)`` for ``k`` in ``range(2*den)``, exact on the axes."""
    table = np.empty(2 * den, dtype=np.complex128)
    for k in range(2 * den):
        if (4 * k) % (2 * den) == 0:
            quarter = (4 * k) // (2 * den)
            table[k] = (1, 1j, -1, -1j)[quarter % 4]
        else:
            table[k] = cmath.exp(1j * math.pi * k / den)
    return table


def popcount(x: int) -> int:
    return bin(x).count("1")


def to_bits(x: int, n: int) -> str:
    return "".join("1" if (x >> i) & 1 else "0" for i in range(n))


def from_bits(bits: str) -> int:
    if any(ch not in "01" for ch in bits):
        raise ValueError(f"not a bitstring: {bits!r}")
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


def support_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_of(support) -> int:
    m = 0
    for i in support:
        m |= 1 << int(i)
    return m


@dataclass(frozen=True)
class PhaseExponent:
    """Phase ``exp(i*pi*num/den)`` with ``num`` reduced mod ``2*den``."""

    num: int
    den: int = 8

    def __post_init__(self):
        if self.den not in ALLOWED_DENOMINATORS:
            raise ValueError(f"denominator {self.den} not in {ALLOWED_DENOMINATORS}")
        object.__setattr__(self, "num", int(self.num) % (2 * self.den))

    def rescaled(self, den: int) -> PhaseExponent:
        if den not in ALLOWED_DENOMINATORS or den % self.den:
            raise ValueError(f"cannot express {self.num}/{self.den} over {den}")
        return PhaseExponent(self.num * (den // self.den), den)

    def __add__(self, other: PhaseExponent) -> PhaseExponent:
        den = max(self.den, other.den)
        return PhaseExponent(self.rescaled(den).num + other.rescaled(den).num, den)

    @property
    def value(self) -> complex:
        return complex(root_table(self.den)[self.num])


@dataclass(frozen=True)
class Gate:
    support: tuple[int, ...]
    exponent: PhaseExponent

    @property
    def mask(self) -> int:
        return mask_of(self.support)


@dataclass(frozen=True)
class SparseParams:
    """Random sparse family: edge probability ``min(1, gamma*ln(n)/n)``."""

    n: int
    gamma: float

    @property
    def p_edge(self) -> float:
        if self.n <= 1:
            return 0.0
        return min(1.0, self.gamma * math.log(self.n) / self.n)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    row: int | None = None


@dataclass(frozen=True)
class XProgram:
    n: int
    rows: tuple[tuple[int, int], ...] = ()
    den: int = 8
    basis: str = "and"

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple((int(m), int(k)) for m, k in self.rows))

    @classmethod
    def from_gates(cls, n: int, gates, den: int = 8) -> XProgram:
        rows = []
        for g in gates:
            e = g.exponent.rescaled(den)
            rows.append((g.mask, e.num))
        return cls(n, tuple(rows), den)

    def gates(self) -> list[Gate]:
        return [Gate(support_of(m), PhaseExponent(k, self.den)) for m, k in self.rows]

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def max_weight(self) -> int:
        return max((popcount(m) for m, _ in self.rows), default=0)

    def with_den(self, den: int) -> XProgram:
        if den == self.den:
            return self
        if den not in ALLOWED_DENOMINATORS or den % self.den:
            raise ValueError(f"cannot rescale denominator {self.den} to {den}")
        f = den // self.den
        return XProgram(self.n, tuple((m, k * f) for m, k in self.rows), den, self.basis)

    def concat(self, other: XProgram) -> XProgram:
        if self.n != other.n or self.basis != other.basis:
            raise ValueError("programs differ in qubit count or basis")
        den = max(self.den, other.den)
        a, b = self.with_den(den), other.with_den(den)
        return XProgram(self.n, a.rows + b.rows, den, self.basis)

    def normalized(self, drop_identity: bool = False) -> XProgram:
        """Merge rows sharing a mask (exponents add mod ``2*den``).

        Rows come out ordered by (weight, mask).
        """
        merged: dict[int, int] = {}
        for m, k in self.rows:
            merged[m] = (merged.get(m, 0) + k) % (2 * self.den)
        keys = sorted(merged, key=lambda m: (popcount(m), m))
        rows = tuple((m, merged[m]) for m in keys if not (drop_identity and merged[m] == 0))
        return XProgram(self.n, rows, self.den, self.basis)

    # --- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = {"n": self.n, "den": self.den,
             "rows": [{"mask": format(m, "x"), "num": k} for m, k in self.rows]}
        if self.basis != "and":
            d["basis"] = self.basis
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> XProgram:
        if not isinstance(d, dict):
            raise ValueError("circuit must be a JSON object")
        extra = set(d) - {"n", "den", "rows", "basis"}
        if extra:
            raise ValueError(f"unknown circuit fields: {sorted(extra)}")
        for key in ("n", "den", "rows"):
            if key not in d:
                raise ValueError(f"missing circuit field {key!r}")
        rows = []
        for i, r in enumerate(d["rows"]):
            if not isinstance(r, dict) or set(r) != {"mask", "num"}:
                raise ValueError(f"row {i}: expected exactly the fields mask, num")
            mask = r["mask"]
            if not isinstance(mask, str) or not mask or any(c not in "0123456789abcdef" for c in mask):
                raise ValueError(f"row {i}: mask must be lowercase hex")
            if not isinstance(r["num"], int) or isinstance(r["num"], bool):
                raise ValueError(f"row {i}: num must be an integer")
            rows.append((int(mask, 16), r["num"]))
        if not isinstance(d["n"], int) or not isinstance(d["den"], int):
            raise ValueError("n and den must be integers")
        prog = cls(d["n"], tuple(rows), d["den"], d.get("basis", "and"))
        problems = validate(prog)
        if problems:
            raise ValueError("; ".join(f"{v.code}: {v.message}" for v in problems))
        return prog

    @classmethod
    def from_json(cls, text: str) -> XProgram:
        return cls.from_dict(json.loads(text))


def validate(prog: XProgram) -> list[Violation]:
    """All broken invariants of ``prog``; an empty list means well-formed."""
    out: list[Violation] = []
    if not isinstance(prog.n, int) or prog.n < 1:
        out.append(Violation("bad n", f"qubit count must be a positive integer, got {prog.n!r}"))
    if prog.den not in ALLOWED_DENOMINATORS:
        out.append(Violation("bad denominator", "denominator not a power of 2 in range"))
    if prog.basis not in BASES:
        out.append(Violation("bad basis", f"basis must be one of {BASES}"))
    for j, (mask, num) in enumerate(prog.rows):
        if mask == 0:
            out.append(Violation("empty support", "empty support", j))
        elif mask < 0 or (isinstance(prog.n, int) and mask >> max(prog.n, 0)):
            out.append(Violation("bad index", f"support index outside [0, {prog.n})", j))
        if prog.den in ALLOWED_DENOMINATORS and not 0 <= num < 2 * prog.den:
            out.append(Violation("bad numerator", f"numerator {num} outside [0, {2 * prog.den})", j))
    return out


def random_sparse_circuit(params: SparseParams, rng: np.random.Generator) -> XProgram:
    """Draw from the sparse family.

    Each pair ``i<j`` gets ``diag(1,1,1,omega^k)`` with probability
    ``p_edge`` (``k`` uniform in 0..3); every qubit gets ``diag(1, zeta^k)``
    with ``k`` uniform in 0..7.  Denominator 8, so ``omega^k`` is numerator
    ``4k`` and ``zeta^k`` numerator ``2k``.
    """
    n, gamma = params.n, params.gamma
    if n < 1:
        raise ValueError("n must be at least 1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    pairs = list(combinations(range(n), 2))
    present = rng.random(len(pairs)) < params.p_edge
    ks = rng.integers(0, 4, size=len(pairs))
    vs = rng.integers(0, 8, size=n)
    rows = [((1 << i) | (1 << j), 4 * int(k)) for (i, j), on, k in zip(pairs, present, ks) if on]
    rows += [(1 << i, 2 * int(v)) for i, v in enumerate(vs)]
    return XProgram(n, tuple(rows), 8)


def _fires(prog: XProgram, mask: int, x: int) -> bool:
    if prog.basis == "and":
        return x & mask == mask
    return popcount(x & mask) & 1 == 1


def phase_exponent(prog: XProgram, x: int | str) -> int:
    """Exact exponent ``e`` (mod ``2*den``) with ``f(x) = exp(i*pi*e/den)``."""
    if isinstance(x, str):
        if len(x) != prog.n:
            raise ValueError(f"expected {prog.n} bits, got {len(x)}")
        x = from_bits(x)
    if x < 0 or x >> prog.n:
        raise ValueError(f"input {x} has more than {prog.n} bits")
    e = sum(k for m, k in prog.rows if _fires(prog, m, x))
    return e % (2 * prog.den)


def eval_phase(prog: XProgram, x: int | str) -> complex:
    return complex(root_table(prog.den)[phase_exponent(prog, x)])


def phase_exponents(prog: XProgram, xs: np.ndarray) -> np.ndarray:
    """Vectorised :func:`phase_exponent` over an integer array."""
    if prog.n > MAX_VECTOR_QUBITS:
        raise ValueError(f"vectorised evaluation supports n <= {MAX_VECTOR_QUBITS}")
    xs = np.asarray(xs, dtype=np.int64)
    acc = np.zeros(xs.shape, dtype=np.int64)
    for m, k in prog.rows:
        if k == 0:
            continue
        hit = xs & np.int64(m)
        if prog.basis == "and":
            fired = hit == m
        else:
            fired = (np.bitwise_count(hit) & 1).astype(bool)
        acc += k * fired
    return acc % (2 * prog.den)


def phase_values(prog: XProgram, xs: np.ndarray) -> np.ndarray:
    return root_table(prog.den)[phase_exponents(prog, xs)]


def phase_oracle(prog: XProgram):
    """``f`` as a vectorised callable ``int array -> complex array``."""
    def f(xs):
        return phase_values(prog, xs)
    f.n = prog.n
    return f


def to_parity_basis(prog: XProgram) -> XProgram:
    """Rewrite an AND-basis program exactly in the parity basis.

    Uses ``prod_{i in S} x_i = 2^(1-|S|) * sum_{T subset S, T != 0} (-1)^(|T|+1) [x.T odd]``.
    The denominator grows by ``2^(|S|-1)`` where numerators are not divisible
    enough; anything needing a denominator above 16 is rejected.
    """
    if prog.basis == "parity":
        return prog
    # common denominator first, then reduce
    need = prog.den
    for m, k in prog.rows:
        w = popcount(m)
        if w > 1 and k:
            scale = 1 << (w - 1)
            g = math.gcd(k, scale)
            need = max(need, prog.den * (scale // g))
    if need not in ALLOWED_DENOMINATORS:
        raise ValueError("parity form needs a denominator above 16")
    base = prog.with_den(need)
    acc: dict[int, int] = {}
    for m, k in base.rows:
        sup = support_of(m)
        w = len(sup)
        scale = 1 << (w - 1)
        if k % scale:
            raise AssertionError("denominator choice failed")  # pragma: no cover
        coeff = k // scale
        for r in range(1, w + 1):
            sign = 1 if r % 2 == 1 else -1
            for sub in combinations(sup, r):
                t = mask_of(sub)
                acc[t] = acc.get(t, 0) + sign * coeff
    mod = 2 * need
    rows = tuple((t, acc[t] % mod) for t in sorted(acc, key=lambda t: (popcount(t), t)) if acc[t] % mod)
    return XProgram(prog.n, rows, need, "parity")
