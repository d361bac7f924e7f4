"""Walsh-Hadamard transform and sparse Fourier tables over Z_2^n."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform, ``out[s] = sum_x a[x] (-1)^(s.x)``.

    Radix-2 butterflies, O(n 2^n).  Returns a new array.
    """
    a = np.array(a, copy=True)
    size = a.shape[0]
    if size & (size - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < size:
        v = a.reshape(-1, 2, h)
        top = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] = top - v[:, 1, :]
        h *= 2
    return a


def weights(n: int) -> np.ndarray:
    """Hamming weight of every index in ``range(2**n)``."""
    return np.bitwise_count(np.arange(1 << n, dtype=np.int64)).astype(np.int64)


def masks_up_to_weight(n: int, ell: int) -> list[int]:
    """All masks of weight <= ell, ordered by weight then value."""
    from itertools import combinations

    out = []
    for w in range(min(ell, n) + 1):
        block = [sum(1 << i for i in c) for c in combinations(range(n), w)]
        out.extend(sorted(block))
    return out


@dataclass(frozen=True)
class FourierTable:
    """Sparse Fourier coefficients ``s -> c(s)`` of a real function on n bits.

    The represented function is ``q(x) = sum_s c(s) (-1)^(s.x)``, so a
    probability distribution has ``c(0) = 2^-n``.
    """

    n: int
    entries: dict[int, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def get(self, s: int) -> float:
        return self.entries.get(s, 0.0)

    def sorted_items(self) -> list[tuple[int, float]]:
        return sorted(self.entries.items(), key=lambda kv: (int(kv[0]).bit_count(), kv[0]))

    def damped(self, epsilon: float) -> FourierTable:
        return FourierTable(self.n, {s: c * (1.0 - epsilon) ** int(s).bit_count()
                                     for s, c in self.entries.items()})

    def truncated(self, ell: int) -> FourierTable:
        return FourierTable(self.n, {s: c for s, c in self.entries.items()
                                     if int(s).bit_count() <= ell})

    def to_dense(self) -> np.ndarray:
        out = np.zeros(1 << self.n)
        for s, c in self.entries.items():
            out[s] = c
        return out

    def synthesize(self) -> np.ndarray:
        """Dense ``q(x)`` for every ``x``."""
        return fwht(self.to_dense())

    @classmethod
    def from_dense(cls, coeffs: np.ndarray, tol: float = 0.0) -> FourierTable:
        n = int(coeffs.shape[0]).bit_length() - 1
        return cls(n, {int(s): float(c) for s, c in enumerate(coeffs) if abs(c) > tol})

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "entries": [
            {"mask": format(s, "x"), "coeff": c} for s, c in self.sorted_items()]})

    @classmethod
    def from_json(cls, text: str) -> FourierTable:
        d = json.loads(text)
        if set(d) != {"n", "entries"}:
            raise ValueError("FourierTable JSON needs exactly the fields n, entries")
        entries = {}
        for e in d["entries"]:
            if set(e) != {"mask", "coeff"}:
                raise ValueError("table entries need exactly mask, coeff")
            entries[int(e["mask"], 16)] = float(e["coeff"])
        return cls(int(d["n"]), entries)
