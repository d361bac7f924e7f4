import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqpkit.phasecore import (
    Gate,
    PhaseExponent,
    SparseParams,
    XProgram,
    eval_phase,
    from_bits,
    phase_exponent,
    phase_values,
    random_sparse_circuit,
    to_bits,
    to_parity_basis,
    validate,
)
from iqpkit.rng import make_rng, split

from conftest import identity_program, sparse


def test_bit_order():
    assert to_bits(0b0110, 4) == "0110"
    assert to_bits(0b0011, 4) == "1100"
    assert to_bits(1, 3) == "100"
    assert from_bits("100") == 1
    assert from_bits(to_bits(45, 7)) == 45


def test_exponent_reduction_and_sum():
    e = PhaseExponent(19, 8)
    assert e.num == 3
    assert (e + PhaseExponent(1, 2)).num == 7
    assert PhaseExponent(1, 2).rescaled(8).num == 4
    with pytest.raises(ValueError):
        PhaseExponent(1, 3)


def test_identity_diagonal_is_one():
    prog = identity_program(4)
    assert all(eval_phase(prog, x) == 1 for x in range(16))


def test_single_gate_quarter_turn():
    # numerator 2 over 4 is a quarter turn: diag(1, i)
    prog = XProgram(1, ((1, 2),), den=4)
    assert eval_phase(prog, "0") == 1
    assert abs(eval_phase(prog, "1") - 1j) < 1e-15
    # the same gate in the default denominator is zeta^2
    assert eval_phase(XProgram(1, ((1, 4),)), 1) == eval_phase(prog, 1)


def test_cz_diagonal():
    prog = XProgram(2, ((0b11, 8),))
    assert [eval_phase(prog, b) for b in ("00", "01", "10", "11")] == [1, 1, 1, -1]


def test_validate():
    assert validate(sparse(6)) == []
    bad = validate(XProgram(2, ((0, 1),)))
    assert [v.message for v in bad] == ["empty support"]
    bad = validate(XProgram(2, ((1, 1),), den=3))
    assert any(v.message == "denominator not a power of 2 in range" for v in bad)
    assert any(v.code == "bad index" for v in validate(XProgram(2, ((0b100, 1),))))


def test_json_round_trip_and_strictness():
    prog = sparse(7, seed=3)
    again = XProgram.from_json(prog.to_json())
    assert again == prog
    assert prog.to_json().startswith('{"n": 7, "den": 8, "rows": [')
    with pytest.raises(ValueError):
        XProgram.from_json('{"n": 1, "den": 8, "rows": [], "extra": 1}')
    with pytest.raises(ValueError):
        XProgram.from_json('{"n": 1, "den": 8, "rows": [{"mask": "1", "num": 99}]}')


def test_small_instances():
    one = random_sparse_circuit(SparseParams(1, 2.0), make_rng(5))
    assert one.rows == ((1, one.rows[0][1]),)
    two = random_sparse_circuit(SparseParams(2, 100.0), make_rng(5))
    weights = sorted(bin(m).count("1") for m, _ in two.rows)
    assert weights == [1, 1, 2]
    for m, k in two.rows:
        assert k % (4 if bin(m).count("1") == 2 else 2) == 0
    with pytest.raises(ValueError):
        random_sparse_circuit(SparseParams(0, 2.0), make_rng(0))
    with pytest.raises(ValueError):
        random_sparse_circuit(SparseParams(4, 0.0), make_rng(0))


def test_reproducible():
    a = random_sparse_circuit(SparseParams(12, 2.0), make_rng(99))
    b = random_sparse_circuit(SparseParams(12, 2.0), make_rng(99))
    assert a.to_json() == b.to_json()


def test_pair_count_is_binomial():
    n, gamma, seeds = 64, 2.0, 1000
    p = SparseParams(n, gamma).p_edge
    pairs = math.comb(n, 2)
    counts = [sum(bin(m).count("1") == 2 for m, _ in random_sparse_circuit(SparseParams(n, gamma), r).rows)
              for r in split(make_rng(1234), seeds)]
    mean = np.mean(counts)
    se = math.sqrt(pairs * p * (1 - p) / seeds)
    assert abs(pairs * p - 262.0097) < 1e-3
    assert abs(mean - pairs * p) <= 4 * se


def test_vector_and_scalar_agree():
    prog = sparse(9, seed=4)
    xs = np.arange(512)
    vec = phase_values(prog, xs)
    assert np.allclose(vec, [eval_phase(prog, int(x)) for x in xs], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1))
def test_concat_multiplies_phases(n, s1, s2):
    a, b = sparse(n, 3.0, s1), sparse(n, 3.0, s2)
    both = a.concat(b)
    for x in range(1 << n):
        assert abs(eval_phase(a, x) * eval_phase(b, x) - eval_phase(both, x)) < 1e-12
        assert abs(abs(eval_phase(both, x)) - 1) < 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2 ** 32 - 1))
def test_parity_form_is_exact(n, seed):
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(rng.integers(1, 6)):
        support = tuple(sorted(rng.choice(n, size=rng.integers(1, min(n, 3) + 1), replace=False).tolist()))
        # weight-3 terms with odd numerators would need denominator 32
        step = 2 if len(support) == 3 else 1
        gates.append(Gate(support, PhaseExponent(step * int(rng.integers(0, 16)), 8)))
    prog = XProgram.from_gates(n, gates)
    par = to_parity_basis(prog)
    assert par.basis == "parity"
    for x in range(1 << n):
        assert abs(eval_phase(prog, x) - eval_phase(par, x)) < 1e-12


def test_parity_basis_json_field():
    par = to_parity_basis(XProgram(2, ((0b11, 4),)))
    d = par.to_dict()
    assert d["basis"] == "parity"
    assert XProgram.from_json(par.to_json()) == par
    assert "basis" not in sparse(3).to_dict()


def test_normalized_merges_duplicates():
    prog = XProgram(3, ((0b11, 4), (0b11, 12), (0b110, 4), (1, 3)))
    norm = prog.normalized()
    assert norm.rows == ((1, 3), (0b11, 0), (0b110, 4))
    assert norm.normalized(drop_identity=True).rows == ((1, 3), (0b110, 4))
    for x in range(8):
        assert phase_exponent(prog, x) == phase_exponent(norm, x)


def test_root_values():
    prog = XProgram(1, ((1, 1),))
    assert abs(eval_phase(prog, 1) - cmath.exp(1j * math.pi / 8)) < 1e-15


def test_parity_form_rejects_too_fine_angles():
    with pytest.raises(ValueError):
        to_parity_basis(XProgram(3, ((0b111, 1),)))
