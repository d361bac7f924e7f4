import numpy as np
import pytest

from iqpkit.phasecore import SparseParams, XProgram, random_sparse_circuit
from iqpkit.rng import make_rng


@pytest.fixture
def rng():
    return make_rng(20240611)


def sparse(n, gamma=2.0, seed=0) -> XProgram:
    return random_sparse_circuit(SparseParams(n, gamma), make_rng(seed))


def random_signed(rng, n):
    """Uniform [-1, 1] entries conditioned on a positive total."""
    while True:
        v = rng.uniform(-1, 1, 1 << n)
        if v.sum() > 0:
            return v


def identity_program(n) -> XProgram:
    return XProgram(n, tuple((1 << i, 0) for i in range(n)))


def brute_amplitudes(prog: XProgram) -> np.ndarray:
    """<s|H D H|0> by explicit matrix products (independent of the transform)."""
    from iqpkit.phasecore import eval_phase

    n = prog.n
    h1 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    h = np.array([[1.0]])
    for _ in range(n):
        h = np.kron(h, h1)
    d = np.diag([eval_phase(prog, x) for x in range(1 << n)])
    return (h @ d @ h)[:, 0]


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
