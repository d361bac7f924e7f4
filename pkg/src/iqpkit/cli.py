"""Command-line front end.

Primary outputs go to ``--out`` (stdout when omitted); JSON run reports go
to ``--report`` (stderr when omitted).  Every stochastic command derives all
randomness from ``--seed``.

Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 malformed input,
4 size guard, 5 verification violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import approxsample as ap
from .codes import encode_xprogram, exact_tail, parse_code, protected_pipeline
from .layout import LatticeCircuit, layer_circuit, plan_grid, route, verify_lattice
from .noise import NoiseParams, apply_noise, l1_distance, sampling_tolerance
from .phasecore import SparseParams, XProgram, random_sparse_circuit, to_bits
from .rng import make_rng, split
from .simulate import (
    Distribution,
    SizeGuardError,
    collision_alpha,
    empirical,
    fourth_moment_closed_form,
    moment_mc,
    output_distribution,
)

EXIT_OK, EXIT_OTHER, EXIT_USAGE, EXIT_INPUT, EXIT_SIZE, EXIT_VIOLATION = 0, 1, 2, 3, 4, 5


class InputError(ValueError):
    pass


class VerificationFailed(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_USAGE, "usage", message)


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    sys.exit(code)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _emit(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _load_circuit(path: str) -> XProgram:
    try:
        return XProgram.from_json(_read(path))
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_dist(path: str) -> Distribution:
    try:
        return Distribution.from_csv(_read(path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


@dataclasses.dataclass
class RunReport:
    command: list[str]
    config: dict
    seed: int | None
    wall_time: float
    digests: dict
    stats: dict

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def _samples_text(xs, n: int) -> str:
    return "".join(to_bits(int(x), n) + "\n" for x in xs)


# --- subcommands ---------------------------------------------------------------


def cmd_generate(args):
    rng = make_rng(args.seed)
    prog = random_sparse_circuit(SparseParams(args.n, args.gamma), rng)
    text = prog.to_json() + "\n"
    _emit(args.out, text)
    return {"n": args.n, "gamma": args.gamma}, {"circuit": _digest(text)}, {"rows": prog.num_rows}


def cmd_simulate(args):
    prog = _load_circuit(args.circuit)
    dist = output_distribution(prog)
    text = dist.to_csv()
    _emit(args.out, text)
    return {"circuit": args.circuit}, {"distribution": _digest(text)}, {"alpha": collision_alpha(dist)}


def cmd_noise(args):
    if (args.dist is None) == (args.circuit is None):
        raise InputError("give exactly one of --dist or --circuit")
    dist = _load_dist(args.dist) if args.dist else output_distribution(_load_circuit(args.circuit))
    noisy = apply_noise(dist, NoiseParams(args.epsilon))
    text = noisy.to_csv()
    _emit(args.out, text)
    stats = {"l1_to_noiseless": l1_distance(dist, noisy)}
    return {"epsilon": args.epsilon}, {"distribution": _digest(text)}, stats


def _parse_ell(text: str):
    if text == "auto":
        return None
    try:
        ell = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--ell takes an integer or 'auto'") from None
    if ell < 0:
        raise argparse.ArgumentTypeError("--ell must be nonnegative")
    return ell


def cmd_sample(args):
    prog = _load_circuit(args.circuit)
    n = prog.n
    dense = n <= 20
    p = output_distribution(prog) if dense else None
    alpha = args.alpha if args.alpha is not None else (collision_alpha(p) if dense else None)
    if alpha is None:
        raise InputError("--alpha is required when n > 20")
    alpha = max(1.0, alpha)
    cfg = ap.configure(alpha, args.delta, args.epsilon, n, args.ell, args.samples_per_coeff, args.median_reps)
    rng = make_rng(args.seed)
    est_rng, draw_rng = split(rng, 2)
    t0 = time.perf_counter()
    table = ap.build_spectrum(args.source, prog, cfg, est_rng)
    t_build = time.perf_counter() - t0
    xs = ap.alg_samples(table, args.shots, draw_rng)
    text = _samples_text(xs, n)
    _emit(args.out, text)
    stats = {"spectrum_seconds": t_build, "table_entries": len(table),
             "oracle_calls": cfg.oracle_calls if args.source == "estimate" else 0,
             "alpha_measured": collision_alpha(p) if dense else None}
    if dense:
        target = apply_noise(p, NoiseParams(args.epsilon))
        bound = 4 * cfg.delta / (1 - cfg.delta) + sampling_tolerance(n, args.shots)
        if args.source == "estimate":
            bound += cfg.delta
        stats.update(l1_empirical_to_noisy=l1_distance(empirical(n, xs), target), l1_bound=bound)
    config = cfg.to_dict() | {"source": args.source, "shots": args.shots}
    return config, {"samples": _digest(text)}, stats


def cmd_encode(args):
    prog = _load_circuit(args.circuit)
    try:
        code = parse_code(args.code, prog.n)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    enc = encode_xprogram(prog, code)
    text = enc.to_json() + "\n"
    _emit(args.out, text)
    return {"code": args.code}, {"circuit": _digest(text)}, {"m": code.m, "max_support": enc.max_weight()}


def cmd_protect_run(args):
    prog = _load_circuit(args.circuit)
    try:
        code = parse_code(args.code, prog.n)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    run = protected_pipeline(prog, code, NoiseParams(args.epsilon), args.shots, make_rng(args.seed))
    text = _samples_text(run.decoded, prog.n)
    _emit(args.out, text)
    p = output_distribution(prog)
    stats = run.report() | {"exact_bit_tail": exact_tail(args.epsilon, code.r),
                            "l1_decoded_to_noiseless": l1_distance(run.empirical(), p)}
    return {"code": args.code, "epsilon": args.epsilon, "shots": args.shots}, {"samples": _digest(text)}, stats


def cmd_route(args):
    prog = _load_circuit(args.circuit)
    layered = layer_circuit(prog, args.strategy)
    grid = plan_grid(prog.n)
    lat = route(layered, grid)
    text = lat.to_json() + "\n"
    _emit(args.out, text)
    stats = {"layers": len(layered.layers), "depth": lat.depth, "swaps": lat.swap_count(),
             "grid": [grid.rows, grid.cols],
             "depth_bound": (len(layered.layers) + 1) * (grid.shearsort_bound() + 1)}
    return {"strategy": args.strategy}, {"lattice": _digest(text)}, stats


def cmd_bench_moments(args):
    params = SparseParams(args.n, args.gamma)
    rep = moment_mc(params, args.order, args.trials, make_rng(args.seed), args.threads)
    text = rep.to_json() + "\n"
    _emit(args.out, text)
    stats = json.loads(rep.to_json()) | {"uniform_reference": 2.0 ** (-args.n * args.order // 2)}
    if args.order == 4:
        stats["closed_form"] = fourth_moment_closed_form(args.n, params.p_edge)
    return {"n": args.n, "gamma": args.gamma, "order": args.order, "trials": args.trials}, \
        {"moments": _digest(text)}, stats


def cmd_verify(args):
    prog = _load_circuit(args.circuit)
    try:
        lat = LatticeCircuit.from_json(_read(args.lattice))
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.lattice}: {exc}") from exc
    bad = verify_lattice(lat, prog, plan_grid(prog.n))
    _emit(args.out, json.dumps({"ok": bad is None} | ({"violation": bad.code, "message": bad.message}
                                                       if bad else {})) + "\n")
    if bad:
        raise VerificationFailed(f"{bad.code}: {bad.message}")
    return {}, {}, {"ok": True}


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iqpkit", description="Noisy IQP simulation, sampling, protection and layout.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, *, seed=False):
        p = sub.add_parser(name)
        p.set_defaults(fn=fn)
        p.add_argument("--out")
        p.add_argument("--report")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        return p

    p = add("generate", cmd_generate, seed=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)

    p = add("simulate", cmd_simulate)
    p.add_argument("--circuit", required=True)

    p = add("noise", cmd_noise)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--dist")
    p.add_argument("--circuit")

    p = add("sample", cmd_sample, seed=True)
    p.add_argument("--circuit", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--ell", type=_parse_ell, default=None)
    p.add_argument("--source", choices=("exact", "estimate"), default="exact")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--samples-per-coeff", type=int)
    p.add_argument("--median-reps", type=int)

    p = add("encode", cmd_encode)
    p.add_argument("--circuit", required=True)
    p.add_argument("--code", required=True)

    p = add("protect-run", cmd_protect_run, seed=True)
    p.add_argument("--circuit", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--shots", type=int, required=True)

    p = add("route", cmd_route)
    p.add_argument("--circuit", required=True)
    p.add_argument("--strategy", choices=("greedy", "misra-gries"), default="greedy")

    p = add("bench-moments", cmd_bench_moments, seed=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--order", type=int, choices=(2, 4), default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = add("verify", cmd_verify)
    p.add_argument("--circuit", required=True)
    p.add_argument("--lattice", required=True)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        config, digests, stats = args.fn(args)
    except SizeGuardError as exc:
        _fail(EXIT_SIZE, "size guard", str(exc))
    except VerificationFailed as exc:
        _fail(EXIT_VIOLATION, "verification", str(exc))
    except InputError as exc:
        _fail(EXIT_INPUT, "malformed input", str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, "invalid value", str(exc))
    except Exception as exc:  # noqa: BLE001
        _fail(EXIT_OTHER, type(exc).__name__, str(exc))
    report = RunReport(argv, config, getattr(args, "seed", None), time.perf_counter() - t0, digests, stats)
    if args.report and args.report != "-":
        with open(args.report, "w") as fh:
            fh.write(report.to_json() + "\n")
    else:
        sys.stderr.write(report.to_json() + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
