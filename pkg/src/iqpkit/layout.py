"""Parallelising and placing IQP circuits on a 2D nearest-neighbour grid.

Two-qubit gates are grouped into layers by an edge colouring of the
interaction graph.  Each layer is routed onto a grid by SWAP networks:
sorting the destination ranks with shearsort and keeping only the
comparators that actually exchange.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .phasecore import SparseParams, Violation, XProgram, mask_of, support_of

# --- interaction graph and colouring -----------------------------------------


@dataclass(frozen=True)
class InteractionGraph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        clean = sorted({(min(i, j), max(i, j)) for i, j in self.edges})
        for i, j in clean:
            if i == j:
                raise ValueError("self-loop")
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i}, {j}) out of range")
        object.__setattr__(self, "edges", tuple(clean))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.n else 0


def interaction_graph(prog: XProgram) -> InteractionGraph:
    edges = []
    for m, _ in prog.rows:
        sup = support_of(m)
        if len(sup) > 2:
            raise ValueError(f"row with support {sup} acts on more than two qubits")
        if len(sup) == 2:
            edges.append(sup)
    return InteractionGraph(prog.n, tuple(edges))


def is_proper(classes: list[list[tuple[int, int]]]) -> bool:
    for cls in classes:
        seen = set()
        for i, j in cls:
            if i in seen or j in seen:
                return False
            seen.update((i, j))
    return True


def _greedy(graph: InteractionGraph) -> dict[tuple[int, int], int]:
    used = [set() for _ in range(graph.n)]
    colour = {}
    for i, j in graph.edges:
        c = 0
        while c in used[i] or c in used[j]:
            c += 1
        colour[(i, j)] = c
        used[i].add(c)
        used[j].add(c)
    return colour


def _misra_gries(graph: InteractionGraph) -> dict[tuple[int, int], int]:
    # at[v][c] = neighbour joined to v by the edge coloured c
    at: list[dict[int, int]] = [{} for _ in range(graph.n)]

    def key(a, b):
        return (a, b) if a < b else (b, a)

    colour: dict[tuple[int, int], int] = {}

    def put(a, b, c):
        at[a][c] = b
        at[b][c] = a
        colour[key(a, b)] = c

    def drop(a, b):
        c = colour.pop(key(a, b))
        del at[a][c]
        del at[b][c]
        return c

    def lowest_free(v):
        c = 0
        while c in at[v]:
            c += 1
        return c

    for u, v in graph.edges:
        # maximal fan at u starting with the uncoloured edge (u, v)
        fan = [v]
        inside = {v}
        grown = True
        while grown:
            grown = False
            for c in sorted(at[u]):
                w = at[u][c]
                if w not in inside and c not in at[fan[-1]]:
                    fan.append(w)
                    inside.add(w)
                    grown = True
                    break
        c = lowest_free(u)
        d = lowest_free(fan[-1])
        if c != d:
            # flip the alternating d/c path that starts at u
            path, cur, col = [], u, d
            while col in at[cur]:
                nxt = at[cur][col]
                path.append((cur, nxt, col))
                cur, col = nxt, (c if col == d else d)
            for a, b, _ in path:
                drop(a, b)
            for a, b, col in path:
                put(a, b, c if col == d else d)
        # first fan vertex with d free whose prefix is still a fan
        stop = None
        for k, w in enumerate(fan):
            if k > 0:
                prev_ok = colour.get(key(u, w)) is not None and colour[key(u, w)] not in at[fan[k - 1]]
                if not prev_ok:
                    break
            if d not in at[w]:
                stop = k
                break
        if stop is None:
            raise AssertionError("fan rotation found no free vertex")  # pragma: no cover
        shifted = [drop(u, fan[k + 1]) for k in range(stop)]
        for k, col in enumerate(shifted):
            put(u, fan[k], col)
        put(u, fan[stop], d)
    return colour


def edge_coloring(graph: InteractionGraph, strategy: str = "greedy") -> list[list[tuple[int, int]]]:
    """Colour classes (matchings), in colour order.

    ``greedy`` gives each edge, in sorted order, its lowest free colour
    (at most ``2*Delta - 1`` colours); ``misra-gries`` uses fan rotations and
    needs at most ``Delta + 1``.
    """
    if strategy == "greedy":
        colour = _greedy(graph)
    elif strategy == "misra-gries":
        colour = _misra_gries(graph)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not colour:
        return []
    classes: list[list[tuple[int, int]]] = [[] for _ in range(max(colour.values()) + 1)]
    for e, c in colour.items():
        classes[c].append(e)
    return [sorted(cls) for cls in classes if cls]


@dataclass(frozen=True)
class TailReport:
    fraction: float
    threshold: float
    bound: float
    std_error: float
    trials: int


def max_degree_tail(n: int, gamma: float, trials: int, rng: np.random.Generator) -> TailReport:
    """Empirical ``Pr[Delta >= 2 gamma ln n]`` over random graphs with the sparse edge rate."""
    if trials < 100:
        raise ValueError("needs at least 100 trials")
    p = SparseParams(n, gamma).p_edge
    iu, ju = np.triu_indices(n, k=1)
    threshold = 2 * gamma * math.log(n)
    hits = 0
    for _ in range(trials):
        present = rng.random(len(iu)) < p
        deg = np.bincount(iu[present], minlength=n) + np.bincount(ju[present], minlength=n)
        hits += deg.max() >= threshold
    frac = hits / trials
    se = math.sqrt(max(frac * (1 - frac), 1.0 / trials) / trials)
    return TailReport(frac, threshold, n ** (1 - gamma / 4), se, trials)


# --- layered circuits ------------------------------------------------------------


@dataclass(frozen=True)
class LayeredCircuit:
    """Two-qubit layers of disjoint gates ``(i, j, num)`` plus single-qubit ``(q, num)``."""

    n: int
    layers: tuple[tuple[tuple[int, int, int], ...], ...]
    singles: tuple[tuple[int, int], ...]
    den: int = 8

    def __post_init__(self):
        for layer in self.layers:
            qs = [q for i, j, _ in layer for q in (i, j)]
            if len(qs) != len(set(qs)):
                raise ValueError("gates within a layer overlap")

    @property
    def depth(self) -> int:
        return len(self.layers) + (1 if self.singles else 0)


def layer_circuit(prog: XProgram, strategy: str = "greedy") -> LayeredCircuit:
    """Merge duplicate supports, colour the interaction graph, one layer per colour."""
    merged = prog.normalized()
    nums = {}
    singles = []
    for m, k in merged.rows:
        sup = support_of(m)
        if len(sup) == 1:
            singles.append((sup[0], k))
        elif len(sup) == 2:
            nums[sup] = k
        else:
            raise ValueError(f"row with support {sup} acts on more than two qubits")
    classes = edge_coloring(InteractionGraph(prog.n, tuple(nums)), strategy)
    layers = tuple(tuple((i, j, nums[(i, j)]) for i, j in cls) for cls in classes)
    return LayeredCircuit(prog.n, layers, tuple(singles), prog.den)


# --- grid and sorting network ---------------------------------------------------


@dataclass(frozen=True)
class Grid:
    rows: int
    cols: int
    n: int

    def __post_init__(self):
        if self.cols % 2:
            raise ValueError("grid width must be even")
        if self.rows * self.cols < self.n:
            raise ValueError("grid too small")

    @property
    def cells(self) -> int:
        return self.rows * self.cols

    def coords(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.cols)

    def adjacent(self, a: int, b: int) -> bool:
        (ra, ca), (rb, cb) = self.coords(a), self.coords(b)
        return abs(ra - rb) + abs(ca - cb) == 1

    def snake_rank(self, cell: int) -> int:
        r, c = self.coords(cell)
        return r * self.cols + (c if r % 2 == 0 else self.cols - 1 - c)

    def shearsort_bound(self) -> int:
        phases = math.ceil(math.log2(self.rows)) + 1
        return phases * (self.cols + self.rows) + self.cols


def plan_grid(n: int) -> Grid:
    if n < 1:
        raise ValueError("n must be positive")
    rows = math.isqrt(n - 1) + 1
    cols = -(-n // rows)
    cols += cols % 2
    return Grid(rows, cols, n)


def permutation_network(grid: Grid, sigma) -> list[list[tuple[int, int]]]:
    """SWAP timesteps moving the item at cell ``c`` to cell ``sigma[c]``.

    Each item carries the snake rank of its destination; shearsort
    (``ceil(log2 R) + 1`` snake row phases, ``ceil(log2 R)`` column phases,
    each a full odd-even transposition sort) puts every rank in its snake
    position.  Comparators that exchange become SWAPs; empty timesteps are
    dropped.
    """
    sigma = [int(s) for s in sigma]
    R, C = grid.rows, grid.cols
    if sorted(sigma) != list(range(grid.cells)):
        raise ValueError("sigma is not a permutation of the grid cells")
    val = np.array([grid.snake_rank(s) for s in sigma]).reshape(R, C)
    steps: list[list[tuple[int, int]]] = []
    rounds = math.ceil(math.log2(R)) if R > 1 else 0

    def row_phase():
        for t in range(C):
            step = []
            for r in range(R):
                for c in range(t % 2, C - 1, 2):
                    a, b = val[r, c], val[r, c + 1]
                    if (a > b) if r % 2 == 0 else (a < b):
                        val[r, c], val[r, c + 1] = b, a
                        step.append((r * C + c, r * C + c + 1))
            if step:
                steps.append(step)

    def column_phase():
        for t in range(R):
            step = []
            for c in range(C):
                for r in range(t % 2, R - 1, 2):
                    if val[r, c] > val[r + 1, c]:
                        val[r, c], val[r + 1, c] = val[r + 1, c], val[r, c]
                        step.append((r * C + c, (r + 1) * C + c))
            if step:
                steps.append(step)

    for _ in range(rounds):
        row_phase()
        column_phase()
    row_phase()
    return steps


def apply_swaps(placement: list, steps) -> list:
    """Contents of each cell after the SWAP timesteps."""
    out = list(placement)
    for step in steps:
        for a, b in step:
            out[a], out[b] = out[b], out[a]
    return out


# --- lattice circuits ---------------------------------------------------------------


@dataclass(frozen=True)
class LatticeOp:
    cells: tuple[int, ...]
    op: str
    num: int | None = None

    def to_dict(self) -> dict:
        d = {"cells": list(self.cells), "op": self.op}
        if self.op == "gate":
            d["num"] = self.num
        return d


@dataclass
class LatticeCircuit:
    rows: int
    cols: int
    steps: list[list[LatticeOp]] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.steps)

    def swap_count(self) -> int:
        return sum(op.op == "swap" for step in self.steps for op in step)

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "cols": self.cols,
                           "steps": [[op.to_dict() for op in step] for step in self.steps]})

    @classmethod
    def from_json(cls, text: str) -> LatticeCircuit:
        d = json.loads(text)
        if set(d) != {"rows", "cols", "steps"}:
            raise ValueError("lattice JSON needs exactly rows, cols, steps")
        steps = []
        for step in d["steps"]:
            ops = []
            for o in step:
                if o.get("op") == "swap" and set(o) == {"cells", "op"}:
                    ops.append(LatticeOp(tuple(int(c) for c in o["cells"]), "swap"))
                elif o.get("op") == "gate" and set(o) == {"cells", "op", "num"}:
                    ops.append(LatticeOp(tuple(int(c) for c in o["cells"]), "gate", int(o["num"])))
                else:
                    raise ValueError(f"malformed lattice op {o!r}")
            steps.append(ops)
        return cls(int(d["rows"]), int(d["cols"]), steps)


def _target(layer, grid: Grid) -> list[int]:
    """Cell -> qubit: gate pairs packed into horizontal slots row-major, then the rest."""
    place = [-1] * grid.cells
    paired = set()
    for slot, (i, j, _) in enumerate(sorted(layer)):
        place[2 * slot], place[2 * slot + 1] = i, j
        paired.update((i, j))
    rest = iter(q for q in range(grid.cells) if q not in paired)
    return [q if q >= 0 else next(rest) for q in place]


def route(layered: LayeredCircuit, grid: Grid) -> LatticeCircuit:
    """Lattice schedule: route each layer adjacent, apply it, finally restore placement."""
    if grid.n != layered.n:
        raise ValueError(f"grid is for {grid.n} qubits, circuit has {layered.n}")
    lat = LatticeCircuit(grid.rows, grid.cols)
    place = list(range(grid.cells))  # cell -> qubit; qubits >= n are idle

    def move(target):
        nonlocal place
        home = {q: c for c, q in enumerate(target)}
        sigma = [home[q] for q in place]
        steps = permutation_network(grid, sigma)
        lat.steps.extend([LatticeOp((a, b), "swap") for a, b in step] for step in steps)
        place = apply_swaps(place, steps)

    for layer in layered.layers:
        pos = {q: c for c, q in enumerate(place)}
        if not all(grid.adjacent(pos[i], pos[j]) for i, j, _ in layer):
            move(_target(layer, grid))
            pos = {q: c for c, q in enumerate(place)}
        lat.steps.append([LatticeOp((pos[i], pos[j]), "gate", k) for i, j, k in layer])
    if place != list(range(grid.cells)):
        move(list(range(grid.cells)))
    if layered.singles:
        lat.steps.append([LatticeOp((q,), "gate", k) for q, k in layered.singles])
    return lat


def verify_lattice(lat: LatticeCircuit, original: XProgram, grid: Grid | None = None) -> Violation | None:
    """First structural violation of ``lat`` as an implementation of ``original``, else None.

    Tracks which logical qubit sits in each cell through the SWAPs; every
    gate must act on adjacent cells holding real qubits, the accumulated
    exponent per logical support must match the program's, and the final
    placement must be the identity.
    """
    if grid is None:
        grid = Grid(lat.rows, lat.cols, original.n)
    if (lat.rows, lat.cols) != (grid.rows, grid.cols):
        return Violation("grid mismatch", "lattice dimensions differ from the grid")
    n = original.n
    place = list(range(grid.cells))
    applied: dict[int, int] = {}
    mod = 2 * original.den
    for t, step in enumerate(lat.steps):
        touched = set()
        for op in step:
            if any(not 0 <= c < grid.cells for c in op.cells):
                return Violation("bad cell", f"cell out of range at step {t}", t)
            if touched.intersection(op.cells) or len(set(op.cells)) != len(op.cells):
                return Violation("overlap", f"operations overlap at step {t}", t)
            touched.update(op.cells)
            if len(op.cells) == 2 and not grid.adjacent(*op.cells):
                return Violation("non-adjacent", f"non-adjacent cells {op.cells} at step {t}", t)
            if op.op == "swap":
                if len(op.cells) != 2:
                    return Violation("bad swap", f"swap needs two cells at step {t}", t)
            elif op.op == "gate":
                if len(op.cells) not in (1, 2):
                    return Violation("bad gate", f"gate on {len(op.cells)} cells at step {t}", t)
                qubits = [place[c] for c in op.cells]
                if any(q >= n for q in qubits):
                    return Violation("idle qubit", f"gate touches a padding cell at step {t}", t)
                m = mask_of(qubits)
                applied[m] = (applied.get(m, 0) + op.num) % mod
            else:
                return Violation("bad op", f"unknown op {op.op!r}", t)
        for op in step:
            if op.op == "swap":
                a, b = op.cells
                place[a], place[b] = place[b], place[a]
    want = Counter({m: k for m, k in original.normalized(drop_identity=True).rows})
    got = Counter({m: k for m, k in applied.items() if k})
    if want != got:
        return Violation("gate multiset mismatch", "applied gates differ from the program's gates")
    if place != list(range(grid.cells)):
        return Violation("placement", "final placement is not the identity")
    return None
