"""Linear-code protection of IQP sampling against output bit flips.

Replacing the program matrix ``C`` by ``CM`` for a generator ``M`` makes the
circuit output codewords ``M^T t`` with probability ``p_t``.  Noise then
flips codeword bits and a decoder recovers ``t``.

Words are Python ints (bit ``i`` is position ``i``) for single values and
``uint8`` bit arrays of shape ``(shots, width)`` for batches, since encoded
widths easily exceed 64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .noise import NoiseParams
from .phasecore import XProgram, support_of, to_parity_basis
from .simulate import DENSE_LIMIT, SizeGuardError, output_distribution

ENCODED_DENSE_LIMIT = 22


def gf2_rank(rows: list[int]) -> int:
    """Rank over GF(2) of row vectors given as int bitmasks."""
    basis: list[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


def _ints_to_bits(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return ((values[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.uint8)


def _bits_to_ints(bits: np.ndarray) -> np.ndarray:
    width = bits.shape[1]
    if width > 62:
        raise ValueError("integer form supports at most 62 bits")
    return (bits.astype(np.int64) << np.arange(width, dtype=np.int64)).sum(axis=1)


@dataclass(frozen=True)
class CodeSpec:
    """Generator ``M`` (n x m over GF(2)) plus a batch decoder.

    ``decoder`` maps a ``(shots, m)`` bit array to ``(shots, n)``.  When
    omitted, a brute-force nearest-codeword decoder is used (n <= 16).
    """

    n: int
    m: int
    generator: np.ndarray
    kind: str = "general"
    r: int | None = None
    decoder: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=np.uint8) & 1
        if g.shape != (self.n, self.m):
            raise ValueError(f"generator must be {self.n} x {self.m}, got {g.shape}")
        if self.m < self.n:
            raise ValueError("code length below dimension")
        object.__setattr__(self, "generator", g)
        if gf2_rank(self.row_masks) != self.n:
            raise ValueError("generator rows are not linearly independent over GF(2)")
        if self.decoder is None:
            if self.n > 16:
                raise ValueError("nearest-codeword decoding supports n <= 16; pass a decoder")
            object.__setattr__(self, "decoder", self._nearest_codeword)

    @property
    def row_masks(self) -> list[int]:
        return [int(sum(1 << j for j in np.flatnonzero(row))) for row in self.generator]

    def encode_bits(self, t_bits: np.ndarray) -> np.ndarray:
        """Batch ``M^T t``: ``(shots, n)`` -> ``(shots, m)``."""
        return ((t_bits.astype(np.int64) @ self.generator.astype(np.int64)) & 1).astype(np.uint8)

    def decode_bits(self, words: np.ndarray) -> np.ndarray:
        return np.asarray(self.decoder(np.asarray(words, dtype=np.uint8)), dtype=np.uint8)

    def decode(self, word: int) -> int:
        bits = np.array([[(word >> j) & 1 for j in range(self.m)]], dtype=np.uint8)
        return int(sum(int(b) << i for i, b in enumerate(self.decode_bits(bits)[0])))

    def _nearest_codeword(self, words: np.ndarray) -> np.ndarray:
        infos = _ints_to_bits(np.arange(1 << self.n), self.n)
        book = self.encode_bits(infos).astype(np.int16)
        out = np.empty((len(words), self.n), dtype=np.uint8)
        step = max(1, (1 << 22) // (len(book) * self.m))
        for start in range(0, len(words), step):
            w = words[start:start + step].astype(np.int16)
            dist = np.abs(w[:, None, :] - book[None, :, :]).sum(axis=2)
            out[start:start + step] = infos[dist.argmin(axis=1)]
        return out


def repetition_code(n: int, r: int) -> CodeSpec:
    """``r`` stacked identity blocks; copy ``j`` of bit ``i`` sits at ``i + j*n``."""
    if r < 1 or r % 2 == 0:
        raise ValueError("repetition count must be odd and positive")
    if n < 1:
        raise ValueError("n must be positive")
    gen = np.tile(np.eye(n, dtype=np.uint8), (1, r))

    def majority(words: np.ndarray) -> np.ndarray:
        votes = words.reshape(len(words), r, n).sum(axis=1, dtype=np.int64)
        return (votes > r // 2).astype(np.uint8)

    return CodeSpec(n, n * r, gen, kind="repetition", r=r, decoder=majority)


def parse_code(text: str, n: int) -> CodeSpec:
    """``repetition:<r>`` -> the repetition code on ``n`` bits."""
    kind, _, arg = text.partition(":")
    if kind != "repetition" or not arg.isdigit():
        raise ValueError(f"unsupported code {text!r}; expected repetition:<r>")
    return repetition_code(n, int(arg))


def encode_word(code: CodeSpec, t: int) -> int:
    """``M^T t`` over GF(2): XOR of the generator rows selected by ``t``."""
    if t >> code.n:
        raise ValueError("info word wider than n")
    rows = code.row_masks
    out = 0
    for i in support_of(t):
        out ^= rows[i]
    return out


def _is_identity(code: CodeSpec) -> bool:
    return code.m == code.n and np.array_equal(code.generator, np.eye(code.n, dtype=np.uint8))


def encode_xprogram(prog: XProgram, code: CodeSpec) -> XProgram:
    """Program on ``m`` qubits with ``f_M(x) = f(Mx)``.

    Rows are first written as parity terms, then each mask ``c`` becomes
    ``c.M``, the XOR of the generator rows it selects.  Encoded supports can
    be as wide as ``m``.
    """
    if code.n != prog.n:
        raise ValueError(f"code dimension {code.n} does not match program width {prog.n}")
    if _is_identity(code):
        return prog
    par = to_parity_basis(prog)
    rows = code.row_masks
    out = []
    for mask, num in par.rows:
        new = 0
        for i in support_of(mask):
            new ^= rows[i]
        out.append((new, num))
    return XProgram(code.m, tuple(out), par.den, "parity")


def exact_tail(epsilon: float, r: int) -> float:
    """Probability that more than ``r/2`` of ``r`` bits flip at rate ``epsilon/2``."""
    q = epsilon / 2
    return sum(math.comb(r, i) * q ** i * (1 - q) ** (r - i) for i in range(r // 2 + 1, r + 1))


def per_bit_failure_bound(epsilon: float, r: int) -> float:
    """Closed-form bound ``(epsilon (2 - epsilon))^(r/2)`` on :func:`exact_tail`."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if r < 1 or r % 2 == 0:
        raise ValueError("r must be odd and positive")
    return (epsilon * (2 - epsilon)) ** (r / 2)


@dataclass(frozen=True)
class ProtectedRun:
    n: int
    shots: int
    sent: np.ndarray
    decoded: np.ndarray
    bit_failure_rate: float
    word_failure_rate: float
    path: str

    def empirical(self) -> np.ndarray:
        counts = np.bincount(self.decoded, minlength=1 << self.n)
        return counts / self.shots

    def report(self) -> dict:
        return {"shots": self.shots, "bit_failure_rate": self.bit_failure_rate,
                "word_failure_rate": self.word_failure_rate, "path": self.path}


def protected_pipeline(prog: XProgram, code: CodeSpec, noise: NoiseParams, shots: int,
                       rng: np.random.Generator) -> ProtectedRun:
    """Sample the encoded circuit, flip bits at rate ``epsilon/2``, decode.

    Small codes (``m <= 22``) sample the encoded program's own output
    distribution; larger ones draw ``s`` from ``p`` and encode it, which is
    the same law by the codeword-support property.
    """
    if code.n != prog.n:
        raise ValueError("code and program widths differ")
    if prog.n > DENSE_LIMIT:
        raise SizeGuardError(f"protected runs support n <= {DENSE_LIMIT}")
    if code.m <= ENCODED_DENSE_LIMIT:
        enc = output_distribution(encode_xprogram(prog, code))
        words = _ints_to_bits(enc.sample(shots, rng), code.m)
        sent = code.decode_bits(words)
        path = "encoded-dense"
    else:
        s = output_distribution(prog).sample(shots, rng)
        sent = _ints_to_bits(s, code.n)
        words = code.encode_bits(sent)
        path = "sampled-codeword"
    decoded = np.empty_like(sent)
    step = 1 << 16
    for start in range(0, shots, step):
        w = words[start:start + step]
        flips = (rng.random(w.shape) < noise.flip_probability).astype(np.uint8)
        decoded[start:start + step] = code.decode_bits(w ^ flips)
    wrong = decoded != sent
    return ProtectedRun(
        n=prog.n, shots=shots, sent=_bits_to_ints(sent), decoded=_bits_to_ints(decoded),
        bit_failure_rate=float(wrong.mean()), word_failure_rate=float(wrong.any(axis=1).mean()),
        path=path)
