import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqpkit import approxsample as ap
from iqpkit.fourier import FourierTable, masks_up_to_weight
from iqpkit.noise import NoiseParams, apply_noise, fourier_of, l1_distance, sampling_tolerance
from iqpkit.phasecore import XProgram, phase_oracle
from iqpkit.rng import make_rng, split
from iqpkit.simulate import Distribution, collision_alpha, empirical, output_distribution

from conftest import identity_program, random_signed, sparse


def test_choose_parameters_frozen():
    cfg = ap.choose_parameters(2, 0.1, 0.25, 10)
    assert cfg.ell == 12
    assert cfg.gamma_acc == pytest.approx(0.1 / math.sqrt(2 * (10 ** 12 + 1)))
    assert cfg.coeff_count == 1024
    assert cfg.median_reps == math.ceil(18 * math.log(10 * 1024))
    assert cfg.estimation_is_rigorous()


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 50), st.floats(0.01, 0.99), st.floats(0.05, 0.99), st.integers(1, 40))
def test_parameter_bound(alpha, delta, eps, n):
    cfg = ap.choose_parameters(alpha, delta, eps, n)
    est = math.exp(2 * math.log(cfg.gamma_acc) + math.log(n ** cfg.ell + 1))
    total = est + alpha * math.exp(-2 * eps * cfg.ell)
    assert total <= delta ** 2 * (1 + 1e-12)
    assert cfg.error_bound() <= delta * (1 + 1e-12)


def test_parameter_monotonicity():
    ells = [ap.choose_parameters(2, d, 0.3, 8).ell for d in (0.05, 0.1, 0.2, 0.4, 0.8)]
    assert ells == sorted(ells, reverse=True)
    ells = [ap.choose_parameters(a, 0.1, 0.3, 8).ell for a in (1, 2, 4, 8, 16)]
    assert ells == sorted(ells)


@pytest.mark.parametrize("args", [(2, 0, 0.3, 4), (2, 1, 0.3, 4), (2, 0.1, 0, 4), (2, 0.1, 1, 4), (0.5, 0.1, 0.3, 4)])
def test_parameter_ranges(args):
    with pytest.raises(ValueError):
        ap.choose_parameters(*args)


def test_budget_override_reports_rigor():
    cfg = ap.configure(2, 0.15, 0.3, 10, samples_per_coeff=4000, median_reps=5)
    assert not cfg.estimation_is_rigorous()
    assert cfg.to_dict()["rigorous_budget"] is False
    small = ap.configure(2, 0.15, 0.3, 10, ell=2)
    assert small.ell == 2 and small.coeff_count == 56


def test_exact_coefficient_examples():
    assert ap.exact_coefficient(sparse(6), 0) == pytest.approx(1.0)
    cz = XProgram(2, ((0b11, 8),))
    assert ap.exact_coefficient(cz, 0b11) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [3, 7, 10])
def test_exact_coefficients_match_dense_path(n):
    prog = sparse(n, seed=n)
    dense = fourier_of(output_distribution(prog)) * 2 ** n
    for s in range(1 << n):
        assert abs(ap.exact_coefficient(prog, s) - dense[s]) < 1e-10


def test_estimate_identity_and_zero(rng):
    cfg = ap.configure(2, 0.2, 0.3, 4, samples_per_coeff=50, median_reps=3)
    f = phase_oracle(identity_program(4))
    assert ap.estimate_coefficient(f, 0, cfg, rng) == 1.0
    assert ap.estimate_coefficient(f, 0b1010, cfg, rng) == pytest.approx(1.0)


def test_estimate_hits_accuracy():
    n, s = 8, 0b00010010
    prog = sparse(n, seed=21)
    exact = ap.exact_coefficient(prog, s)
    cfg = ap.configure(2, 0.5, 0.5, n, ell=2, samples_per_coeff=2000, median_reps=9)
    gamma = 0.05
    # Hoeffding per batch with 2000 points: miss probability 2 exp(-2000 gamma^2 / 2) ~ 0.16
    f = phase_oracle(prog)
    runs = [ap.estimate_coefficient(f, s, cfg, r) for r in split(make_rng(3), 1000)]
    hits = np.mean(np.abs(np.array(runs) - exact) <= gamma)
    assert hits >= 0.99


def test_spectrum_exact_full_recovers_noisy(rng):
    n, eps = 7, 0.25
    prog = sparse(n, seed=2)
    cfg = ap.configure(2, 0.1, eps, n, ell=n)
    table = ap.build_spectrum("exact", prog, cfg)
    assert len(table) == 1 << n
    target = apply_noise(output_distribution(prog), NoiseParams(eps)).probs
    assert np.abs(table.synthesize() - target).max() < 1e-10


def test_spectrum_full_damping_is_uniform():
    cfg = ap.configure(2, 0.1, 0.5, 5, ell=3)
    cfg = ap.SamplerConfig(**{**cfg.__dict__, "epsilon": 1.0})
    table = ap.build_spectrum("exact", sparse(5), cfg)
    assert table.entries[0] == 2 ** -5
    assert max(abs(c) for s, c in table.entries.items() if s) == 0
    assert np.allclose(table.synthesize(), 2 ** -5)


def test_spectrum_estimate_reproducible():
    prog = sparse(6, seed=9)
    cfg = ap.configure(2, 0.2, 0.3, 6, samples_per_coeff=300, median_reps=3)
    a = ap.build_spectrum("estimate", prog, cfg, make_rng(4))
    b = ap.build_spectrum("estimate", phase_oracle(prog), cfg, make_rng(4))
    assert a == b
    assert list(a.entries) == masks_up_to_weight(6, cfg.ell)
    assert a.entries[0] == 2 ** -6


def test_spectrum_budget_guard():
    cfg = ap.choose_parameters(2, 0.1, 0.25, 10)
    with pytest.raises(ap.BudgetError):
        ap.build_spectrum("estimate", sparse(10), cfg, make_rng(0))


def test_marginal_examples():
    n = 5
    uniform = FourierTable(n, {0: 2 ** -n})
    for k in range(n + 1):
        for y in range(1 << k):
            assert ap.marginal(uniform, y, k) == pytest.approx(2 ** -k)


def test_marginals_match_prefix_sums():
    n = 8
    prog = sparse(n, seed=13)
    cfg = ap.configure(2, 0.1, 0.3, n, ell=n)
    table = ap.build_spectrum("exact", prog, cfg)
    q = table.synthesize()
    for k in range(n + 1):
        prefix = q.reshape(-1, 1 << k).sum(axis=0)
        ys = np.arange(1 << k)
        assert np.abs(ap.marginals(table, ys, k) - prefix).max() < 1e-10
    for y, k in [(0, 0), (5, 3), (200, 8)]:
        assert ap.marginal(table, y, k) == pytest.approx(q.reshape(-1, 1 << k).sum(axis=0)[y], abs=1e-10)


def test_marginal_additivity(rng):
    n = 6
    table = FourierTable(n, {s: float(rng.normal()) * 2 ** -n for s in masks_up_to_weight(n, 3)})
    for k in range(n):
        for y in range(1 << k):
            both = ap.marginal(table, y, k + 1) + ap.marginal(table, y | (1 << k), k + 1)
            assert both == pytest.approx(ap.marginal(table, y, k), abs=1e-12)
    assert ap.marginal(table, 0, 0) == pytest.approx(2 ** n * table.entries[0])


def test_alg_exact_on_true_spectrum():
    n = 3
    p = Distribution.from_weights(n, [1, 2, 3, 4, 5, 6, 7, 8])
    table = FourierTable.from_dense(fourier_of(p))
    assert np.abs(ap.alg_distribution(table) - p.probs).max() < 1e-12


def test_alg_prunes_negative_child(rng):
    table = FourierTable.from_dense(fourier_of_vector([0.6, -0.1]))
    assert set(ap.alg_samples(table, 1000, rng).tolist()) == {0}
    assert np.allclose(ap.alg_distribution(table), [1, 0])


def fourier_of_vector(v):
    from iqpkit.fourier import fwht
    v = np.asarray(v, dtype=float)
    return fwht(v) / len(v)


def test_alg_rejects_nonpositive_total(rng):
    with pytest.raises(ArithmeticError):
        ap.alg_samples(FourierTable(2, {0: 0.0}), 5, rng)
    with pytest.raises(ArithmeticError):
        ap.fix([0.2, -0.3])


def test_alg_samples_follow_distribution():
    n = 4
    v = np.array([0.3, -0.05, 0.1, 0.2, 0.05, 0.1, -0.02, 0.15, 0.02, 0.0, 0.05, 0.03, 0.01, 0.02, 0.04, 0.0])
    table = FourierTable.from_dense(fourier_of_vector(v))
    want = ap.alg_distribution(table)
    assert np.allclose(want, ap.alg_distribution_vector(v), atol=1e-12)
    shots = 200_000
    xs = ap.alg_samples(table, shots, make_rng(6))
    assert l1_distance(empirical(n, xs), want) <= sampling_tolerance(n, shots)
    assert 0 <= ap.alg_sample(table, make_rng(6)) < 1 << n


def test_fix_examples():
    v = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(ap.fix(v), v)
    out = ap.fix([0.6, -0.1])
    assert np.allclose(out, [0.5, 0.0])
    assert np.abs(out - [0.6, -0.1]).sum() == pytest.approx(0.2)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_fix_properties(n, seed):
    v = random_signed(np.random.default_rng(seed), n)
    f = ap.fix(v)
    assert f.min() >= 0
    assert f.sum() == pytest.approx(v.sum(), abs=1e-12)
    assert np.all(f[v < 0] == 0)
    assert abs(np.abs(f - v).sum() - 2 * np.abs(v[v < 0]).sum()) <= 1e-12
    assert np.abs(f - v.sum() * ap.alg_distribution_vector(v)).max() <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.floats(0.01, 0.3), st.integers(0, 2 ** 32 - 1))
def test_alg_error_after_adversarial_shift(n, delta, seed):
    # move mass delta/2 from entry j onto entry i, driving j negative when it is small
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(1 << n))
    i, j = rng.choice(1 << n, size=2, replace=False)
    q = p.copy()
    q[i] += delta / 2
    q[j] -= delta / 2
    dist = np.abs(q - p).sum()
    assert dist == pytest.approx(delta)
    algd = ap.alg_distribution_vector(q)
    assert np.abs(algd - p).sum() <= 4 * dist / (1 - dist) + 1e-12


def test_simon_spectrum():
    n, t = 3, 0b101
    table = ap.simon_spectrum(n, t)
    assert table.entries == {0: 1 / 8, t: 1 / 8}
    q = table.synthesize()
    from iqpkit.phasecore import from_bits
    support = {from_bits(b) for b in ("000", "010", "101", "111")}
    assert np.allclose(q, [0.25 if x in support else 0 for x in range(8)])
    assert np.allclose(q, ap.simon_distribution(n, t))
    with pytest.raises(ValueError):
        ap.simon_spectrum(3, 0)


def test_truncation_error_within_bound():
    n, eps = 8, 0.3
    prog = sparse(n, seed=31)
    p = output_distribution(prog)
    alpha = collision_alpha(p)
    target = apply_noise(p, NoiseParams(eps)).probs
    for ell in range(n + 1):
        cfg = ap.configure(max(alpha, 1.0), 0.1, eps, n, ell=ell)
        table = ap.build_spectrum("exact", prog, cfg)
        assert l1_distance(table.synthesize(), target) <= cfg.truncation_bound() + 1e-12
