"""Command-line interface.

Exit codes: 0 success or PASS, 2 checked and FAIL, 1 error.  Every JSON
artifact carries ``schema_version``, the tool version and an echo of its
inputs; tables are mirrored to CSV next to the JSON file.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import DEFAULT_GRID, DEFAULT_SEED, TOL_BOUNDARY, thread_cap
from .core import derive_embedding_integers, validate_pair
from .errors import DefectExceeded, DimDropError, HorizonExhausted
from .serialize import SCHEMA_VERSION, dumps, read_json, write_csv, write_json

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _pair(text: str):
    try:
        p, q = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected p,q but got {text!r}") from exc
    return validate_pair(p, q)


def _number(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _schedule(text: str) -> list:
    return [_number(v) for v in text.split(",") if v.strip()]


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _grid(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("grid must be at least 2")
    return value


def _envelope(command: str, args: argparse.Namespace, inputs: dict, body: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "dimdrop",
        "version": __version__,
        "command": command,
        "inputs": {**inputs, "seed": args.seed, "grid": args.grid, "tol_boundary": args.tol_boundary},
        **body,
    }


def _csv_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".csv"


def _emit(args, doc: dict, table: Optional[tuple] = None) -> None:
    if args.output:
        write_json(args.output, doc)
        if table is not None:
            write_csv(_csv_path(args.output), *table)
    else:
        sys.stdout.write(dumps(doc))


def _unwrap(data: dict, key: str) -> dict:
    return data[key] if key in data and isinstance(data[key], dict) else data


def _load_system(path: str):
    from .regularity import InductiveSystem

    return InductiveSystem.from_json(_unwrap(read_json(path), "system"))


def _load_hom(path: str):
    from .serialize import hom_from_json

    return hom_from_json(_unwrap(read_json(path), "hom"))


def _load_generators(path: str, seed: int):
    """(algebra, measure, elements) from a generator file.

    The file holds ``algebra`` and either explicit ``elements`` or a
    ``library`` request ``{"count": n}`` drawn with the run seed.
    """
    from .core import DimensionDropAlgebra
    from .elements import PLElement, generator_library
    from .measure import Measure

    data = _unwrap(read_json(path), "generators")
    alg = DimensionDropAlgebra.from_list(data["algebra"])
    mu = Measure.from_json(data["measure"]) if "measure" in data else Measure.lebesgue()
    if "elements" in data:
        elems = [PLElement.from_json(e) for e in data["elements"]]
    elif "library" in data:
        sub = int(data["library"].get("seed", seed))
        elems = generator_library(alg, int(data["library"]["count"]), np.random.default_rng(sub))
    else:
        raise UsageError(f"{path}: need 'elements' or 'library'")
    return alg, mu, elems


# ---------------------------------------------------------------------------
# commands


def cmd_derive(args) -> int:
    ints = derive_embedding_integers(args.src, args.tgt, args.eps)
    d = ints.as_dict()
    keys = ("a", "b", "k", "n00", "n01", "n10", "n11", "l0", "m0", "l1", "m1", "M")
    print(" ".join(f"{k}={d[k]}" for k in keys) + f" bullets={'ok' if ints.bullets_hold else 'fail'}")
    if args.output:
        inputs = {"src": args.src.as_list(), "tgt": args.tgt.as_list(), "eps": str(args.eps)}
        table = (["key", "value"], [[k, d[k]] for k in keys])
        _emit(args, _envelope("derive", args, inputs, {"integers": d}), table)
    return EXIT_OK


def cmd_embed(args) -> int:
    from .elements import generator_library
    from .hom import synthesize_embedding, trace_preservation_error, verify_morphism
    from .measure import Measure
    from .paths import unitary_path_in_algebra
    from .pattern import variation

    lam = Measure.lebesgue()
    h = synthesize_embedding(
        args.src, args.tgt, args.eps, lam, lam if args.trace_preserving else None, waive_bullets=args.waive_bullets
    )
    if args.twist:
        rng = np.random.default_rng(args.seed)
        z = unitary_path_in_algebra(args.tgt.p, args.tgt.q, rng, interior=1, scale=args.twist)
        h = h.postcompose_inner(z)
    summary = {"k": h.k, "a": h.a, "b": h.b, "variation": str(variation(h.pattern))}
    if args.trace_preserving:
        summary["trace_error"] = float(trace_preservation_error(h, lam, lam))
    verdict = None
    if args.verify:
        gens = generator_library(args.src, 3, np.random.default_rng(args.seed))
        rep = verify_morphism(h, gens, args.grid, args.tol_boundary)
        summary["verification"] = rep.as_dict()
        verdict = "PASS" if rep.passed else "FAIL"
    inputs = {
        "src": args.src.as_list(),
        "tgt": args.tgt.as_list(),
        "eps": str(args.eps),
        "trace_preserving": args.trace_preserving,
        "waive_bullets": args.waive_bullets,
        "twist": args.twist,
    }
    _emit(args, _envelope("embed", args, inputs, {"summary": summary, "verdict": verdict, "hom": h.to_json()}))
    return EXIT_FAIL if verdict == "FAIL" else EXIT_OK


def cmd_gen_system(args) -> int:
    from .regularity import identity_system, standard_system

    if args.stages < 2:
        raise UsageError("need at least 2 stages")
    if args.growth == "identity":
        system = identity_system(args.start, args.stages)
    else:
        if args.schedule is None:
            raise UsageError("--schedule is required for growth other than identity")
        system = standard_system(
            args.start, args.stages, args.schedule, growth=args.growth, require_bound=args.require_bound
        )
    inputs = {
        "start": args.start.as_list(),
        "stages": args.stages,
        "schedule": [str(e) for e in args.schedule] if args.schedule else None,
        "growth": args.growth,
        "require_bound": args.require_bound,
    }
    _emit(args, _envelope("gen-system", args, inputs, {"system": system.to_json()}))
    return EXIT_OK


def cmd_check(args) -> int:
    from .regularity import check_monotracial, check_simplicity, check_variation

    system = _load_system(args.system)
    horizon = system.length - 1 if args.horizon is None else args.horizon
    which = ["variation", "simplicity", "monotrace"] if args.which == "all" else [args.which]
    reports = {}
    rows = []
    for name in which:
        if name == "variation":
            rep = check_variation(system, args.m, horizon, args.variation_tol)
            rows += [[name, r["n"], "", "variation", r["variation"]] for r in rep["table"]]
        elif name == "simplicity":
            rep = check_simplicity(system, args.m, args.simplicity_eps, args.y_grid, horizon)
            rows += [[name, "", r["y"], "first_n", "" if r["n"] is None else r["n"]] for r in rep["table"]]
        else:
            rep = check_monotracial(system, args.m, args.monotrace_eps, args.y_grid, horizon, args.ratio_tol)
            for r in rep["table"]:
                rows += [[name, r["n"], y, "ratio", v] for y, v in zip(rep["y"], r["ratios"])]
        reports[name] = rep
    verdict = "PASS" if all(r["verdict"] == "PASS" for r in reports.values()) else "FAIL"
    inputs = {
        "system": os.path.basename(args.system),
        "which": args.which,
        "m": args.m,
        "horizon": horizon,
        "variation_tol": args.variation_tol,
        "simplicity_eps": args.simplicity_eps,
        "monotrace_eps": args.monotrace_eps,
        "ratio_tol": args.ratio_tol,
        "y_grid": args.y_grid,
    }
    doc = _envelope("check", args, inputs, {"reports": reports, "verdict": verdict})
    _emit(args, doc, (["check", "n", "y", "quantity", "value"], rows))
    print(f"check {args.which}: {verdict}", file=sys.stderr)
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


def cmd_intertwine(args) -> int:
    from .intertwine import build_intertwining

    sys_a = _load_system(args.a)
    sys_b = _load_system(args.b)
    inputs = {
        "a": os.path.basename(args.a),
        "b": os.path.basename(args.b),
        "schedule": [str(e) for e in args.schedule],
        "offset": args.offset,
        "gens": args.gens,
        "twist": args.twist,
    }
    try:
        chain = build_intertwining(
            sys_a, sys_b, args.gens, [float(e) for e in args.schedule],
            offset=args.offset, seed=args.seed, grid=args.grid, twist=args.twist,
        )
        verdict, message = "PASS", None
    except DefectExceeded as exc:
        chain, verdict, message = exc.chain, "FAIL", str(exc)
    body = {"verdict": verdict, "message": message, "chain": chain.to_json() if chain is not None else None}
    rows = [[t.kind, t.index, t.defect, t.bound, t.passed] for t in (chain.triangles if chain else [])]
    _emit(args, _envelope("intertwine", args, inputs, body), (["kind", "index", "defect", "bound", "passed"], rows))
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


def cmd_approx_inner(args) -> int:
    from .elements import generator_library
    from .intertwine import approx_inner_demo
    from .serialize import path_to_json

    system = _load_system(args.system)
    rho = _load_hom(args.rho)
    gens = generator_library(rho.src, args.gens, np.random.default_rng(args.seed))
    inputs = {
        "system": os.path.basename(args.system),
        "rho": os.path.basename(args.rho),
        "eps": args.eps,
        "n": args.n,
        "horizon": args.horizon,
        "gens": args.gens,
    }
    try:
        res = approx_inner_demo(system, rho, gens, args.eps, n=args.n, horizon=args.horizon, grid=args.grid)
        body = {"verdict": "PASS", "result": res.as_dict(), "v": path_to_json(res.v)}
        rows = [[res.stage, i, d] for i, d in enumerate(res.per_generator)]
        code = EXIT_OK
    except HorizonExhausted as exc:
        body = {"verdict": "FAIL", "message": str(exc), "best_defect": exc.best_defect}
        rows = []
        code = EXIT_FAIL
    _emit(args, _envelope("approx-inner", args, inputs, body), (["stage", "generator", "defect"], rows))
    return code


def cmd_dk(args) -> int:
    from .fraisse import SearchBudget, dk_upper

    gen_a = _load_generators(args.a, args.seed)
    gen_b = _load_generators(args.b, args.seed)
    budget = SearchBudget(max_size=args.budget, max_candidates=args.max_candidates, grid=args.grid)
    res = dk_upper(gen_a, gen_b, budget)
    d = res.as_dict()
    verdict = "PASS" if np.isfinite(res.bound) else "FAIL"
    inputs = {"a": os.path.basename(args.a), "b": os.path.basename(args.b), "budget": args.budget,
              "max_candidates": args.max_candidates}
    rows = [
        [c.get("candidate", ""), "x".join(str(v) for v in c.get("target", [])), c.get("bound", ""), c.get("skipped", "")]
        for c in d["candidates"]
    ]
    table = (["candidate", "target", "bound", "skipped"], rows)
    _emit(args, _envelope("dk", args, inputs, {"verdict": verdict, "result": d}), table)
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default %(default)s)")
    common.add_argument("--grid", type=_grid, default=DEFAULT_GRID, help="sample grid size (default %(default)s)")
    common.add_argument("--tol-boundary", type=_positive_float, default=TOL_BOUNDARY, help="boundary tolerance")
    common.add_argument("-o", "--output", help="write the JSON artifact here (stdout when omitted)")

    parser = argparse.ArgumentParser(prog="dimdrop", description="Embeddings and inductive systems of prime dimension drop algebras.")
    parser.add_argument("--version", action="version", version=f"dimdrop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", parents=[common], help="print the embedding integers")
    p.add_argument("--src", type=_pair, required=True)
    p.add_argument("--tgt", type=_pair, required=True)
    p.add_argument("--eps", type=_number, required=True)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("embed", parents=[common], help="synthesize an embedding")
    p.add_argument("--src", type=_pair, required=True)
    p.add_argument("--tgt", type=_pair, required=True)
    p.add_argument("--eps", type=_number, required=True)
    p.add_argument("--trace-preserving", action="store_true", help="pull the Lebesgue trace back to Lebesgue")
    p.add_argument("--waive-bullets", action="store_true", help="attempt the build below the size bound")
    p.add_argument("--twist", type=float, default=0.0, help="post-compose with Ad(z) for a random unitary path of this size")
    p.add_argument("--verify", action="store_true", help="verify the morphism on random generators")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("gen-system", parents=[common], help="generate an inductive system")
    p.add_argument("--start", type=_pair, required=True)
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--schedule", type=_schedule)
    p.add_argument("--growth", choices=["power", "square", "minimal", "identity"], default="power")
    p.add_argument("--require-bound", action="store_true")
    p.set_defaults(func=cmd_gen_system)

    p = sub.add_parser("check", parents=[common], help="finite-horizon regularity checks")
    p.add_argument("--system", required=True)
    p.add_argument("--which", choices=["variation", "simplicity", "monotrace", "all"], default="all")
    p.add_argument("--horizon", type=int)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--variation-tol", type=_positive_float, default=0.15)
    p.add_argument("--simplicity-eps", type=_positive_float, default=0.2)
    p.add_argument("--monotrace-eps", type=_positive_float, default=0.1)
    p.add_argument("--ratio-tol", type=_positive_float, default=0.05)
    p.add_argument("--y-grid", type=_grid, default=21)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("intertwine", parents=[common], help="approximate intertwining of two systems")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--schedule", type=_schedule, required=True)
    p.add_argument("--offset", type=int, choices=[0, 1], default=1)
    p.add_argument("--gens", type=int, default=3)
    p.add_argument("--twist", type=float, default=0.5)
    p.set_defaults(func=cmd_intertwine)

    p = sub.add_parser("approx-inner", parents=[common], help="inner approximation of an endomorphism")
    p.add_argument("--system", required=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--eps", type=_positive_float, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--gens", type=int, default=3)
    p.set_defaults(func=cmd_approx_inner)

    p = sub.add_parser("dk", parents=[common], help="upper bound for the distance of generator tuples")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--budget", type=int, default=10**4, help="largest target matrix size")
    p.add_argument("--max-candidates", type=int, default=32)
    p.set_defaults(func=cmd_dk)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; map them onto the error code
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    os.environ.setdefault("DDROP_THREADS", str(thread_cap()))
    try:
        return args.func(args)
    except (DimDropError, UsageError, OSError, KeyError, ValueError) as exc:
        print(f"dimdrop {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if getattr(args, "output", None):
            doc = _envelope(args.command, args, {}, {"verdict": "ERROR", "error": {"type": type(exc).__name__, "message": str(exc)}})
            write_json(args.output, doc)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
