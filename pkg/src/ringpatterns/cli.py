"""Command-line surface tying the modules into reproducible experiments.

Exit codes: 0 on success, 1 when a stated hypothesis fails (named on stderr),
2 on usage errors.  Files are written atomically; sweeps emit a CSV table and
render the matching figure next to it.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone

import numpy as np

from . import diagrams, plots, selftest
from .counting import (
    ENUMERATION_CAP,
    LambdaQuery,
    avoid_3y,
    avoid_y_y2p1,
    char_sum,
    count_configurations,
    count_roots,
    find_nontrivial_config,
    hadamard_char_sum,
    lambda_average,
    loper,
    main_discrepancy,
)
from .errors import HypothesisViolation, ParseError, RingPatternsError
from .fourier import Character, FunctionOnRing, characters, gowers_norm, z6_counterexample
from .intutil import first_primes_above, primes_in_range
from .pet import WeightPair, max_path_length, pet_step, t_bound, us_control_trace
from .poly import IntPoly, independence_check, jointly_intersective_up_to, parse_family, parse_poly
from .rings import Ring, make_ring, parse_ring_spec


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except RingPatternsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringpatterns",
        description="polynomial patterns, character sums, and PET induction over finite commutative rings",
    )
    parser.add_argument("--budget", type=int, default=ENUMERATION_CAP,
                        help="enumeration cap override (use at your own risk)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ring", help="ring metadata as JSON")
    p.add_argument("spec")
    p.set_defaults(handler=_cmd_ring)

    p = sub.add_parser("charsum", help="character-sum values against their bounds")
    p.add_argument("spec")
    p.add_argument("--hadamard", type=int, metavar="M", help="average chi(h_1...h_M)")
    p.add_argument("--family", help="comma-separated twist polynomials")
    p.add_argument("--chars", help="character indices (flat), comma-separated", default=None)
    p.add_argument("--out", help="write JSON records here")
    p.set_defaults(handler=_cmd_charsum)

    p = sub.add_parser("gowers", help="Gowers uniformity norms")
    p.add_argument("spec")
    p.add_argument("--function", default="random:1")
    p.add_argument("--s", type=int, default=2)
    p.set_defaults(handler=_cmd_gowers)

    p = sub.add_parser("lambda", help="the multilinear polynomial average")
    p.add_argument("spec")
    p.add_argument("--family", required=True)
    p.add_argument("--functions", help="comma-separated function specs")
    p.add_argument("--twists", help="twist polynomials")
    p.add_argument("--chars", help="character indices for the twists")
    p.set_defaults(handler=_cmd_lambda)

    p = sub.add_parser("config-count", help="configuration counting")
    p.add_argument("spec", nargs="?")
    p.add_argument("--family")
    p.add_argument("--sets", help="set specs, semicolon-separated")
    p.add_argument("--builtin", help="avoid-3y:M | avoid-y-y2p1:P:K | loper:P:K")
    p.add_argument("--witness", action="store_true")
    p.set_defaults(handler=_cmd_config_count)

    p = sub.add_parser("roots", help="root counting with the explicit bound")
    p.add_argument("spec")
    p.add_argument("--poly", required=True)
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(handler=_cmd_roots)

    p = sub.add_parser("intersective", help="joint intersectivity up to a modulus")
    p.add_argument("--family", required=True)
    p.add_argument("--k-max", type=int, default=50)
    p.set_defaults(handler=_cmd_intersective)

    p = sub.add_parser("pet-step", help="one PET inductive step")
    p.add_argument("spec")
    p.add_argument("--family", required=True)
    p.add_argument("--functions")
    p.add_argument("--window", type=int, required=True)
    p.set_defaults(handler=_cmd_pet_step)

    p = sub.add_parser("pet-diagram", help="symbolic differencing diagram")
    p.add_argument("family")
    p.add_argument("--subs", help="constraints, semicolon-separated")
    p.add_argument("--fork", action="store_true")
    p.add_argument("--json", action="store_true", dest="as_json")
    p.set_defaults(handler=_cmd_pet_diagram)

    p = sub.add_parser("pet-bounds", help="termination bounds and longest paths")
    p.add_argument("--m", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--pair", help="weight pair, e.g. 2:0,2")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--cap", type=int, default=500_000)
    p.set_defaults(handler=_cmd_pet_bounds)

    p = sub.add_parser("us-trace", help="desk-scale uniformity-control trace")
    p.add_argument("spec")
    p.add_argument("--family", required=True)
    p.add_argument("--functions")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--windows", help="comma-separated window sizes per step")
    p.set_defaults(handler=_cmd_us_trace)

    p = sub.add_parser("sweep", help="discrepancy sweep to CSV plus figure")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the CSV path")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.set_defaults(handler=_cmd_selftest)
    return parser


# -- helpers ------------------------------------------------------------------


def _load_ring(spec: str) -> Ring:
    return make_ring(parse_ring_spec(spec))


def _load_function(ring: Ring, spec: str) -> FunctionOnRing:
    if spec.startswith("random:"):
        return FunctionOnRing.random_bounded(ring, int(spec.split(":", 1)[1]))
    if spec.startswith("indicator-density:"):
        _, density, seed = spec.split(":")
        return FunctionOnRing.random_indicator(ring, int(seed), float(density))
    if spec.startswith("indicator:"):
        path = spec.split(":", 1)[1]
        with open(path) as fh:
            members = [int(tok) for tok in fh.read().replace(",", " ").split()]
        return FunctionOnRing.indicator(ring, members)
    if spec.startswith("const:"):
        return FunctionOnRing.constant(ring, complex(spec.split(":", 1)[1]))
    if spec.startswith("z6-counterexample:"):
        which = int(spec.split(":", 1)[1])
        return z6_counterexample(ring)[which]
    if spec.endswith(".csv"):
        return FunctionOnRing.from_csv(ring, spec)
    raise ParseError(f"unknown function spec {spec!r}")


def _load_functions(ring: Ring, text: str | None, count: int, seed0: int = 1) -> list[FunctionOnRing]:
    if not text:
        return [FunctionOnRing.random_bounded(ring, seed0 + i) for i in range(count)]
    specs = [s for s in text.split(",") if s.strip()]
    if len(specs) != count:
        raise ParseError(f"need {count} functions, got {len(specs)}")
    return [_load_function(ring, s.strip()) for s in specs]


def _load_chars(ring: Ring, text: str | None, count: int) -> list[Character]:
    chars = characters(ring)
    if text is None:
        if count:
            raise ParseError("character indices required for twists")
        return []
    idx = [int(t) for t in text.split(",") if t.strip()]
    if len(idx) != count:
        raise ParseError(f"need {count} characters, got {len(idx)}")
    return [chars[i] for i in idx]


def _emit(record, out: str | None = None):
    text = json.dumps(record, indent=2, default=_json_default)
    if out:
        _atomic_write(out, text + "\n")
    print(text)


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, IntPoly):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- command handlers -----------------------------------------------------------


def _cmd_ring(args) -> int:
    ring = _load_ring(args.spec)
    _emit(ring.metadata())
    return 0


def _cmd_charsum(args) -> int:
    ring = _load_ring(args.spec)
    chars = characters(ring)
    records = []
    if args.hadamard is not None:
        targets = (
            [chars[i] for i in map(int, args.chars.split(","))]
            if args.chars
            else [c for c in chars if not c.is_trivial]
        )
        for chi in targets:
            start = time.perf_counter()
            out = hadamard_char_sum(ring, chi, args.hadamard, budget=args.budget)
            records.append(
                {
                    "ring": args.spec,
                    "kind": f"hadamard:{args.hadamard}",
                    "char": list(chi.index),
                    "value": out.value,
                    "abs": abs(out.value),
                    "bound": out.bound,
                    "bound_applies": out.bound_applies,
                    "runtime_ms": (time.perf_counter() - start) * 1e3,
                }
            )
    elif args.family:
        family = parse_family(args.family)
        psi_lists = (
            [[chars[i] for i in map(int, args.chars.split(","))]]
            if args.chars
            else [[c] * len(family) for c in chars if not c.is_trivial]
        )
        for psi in psi_lists:
            start = time.perf_counter()
            out = char_sum(ring, family, psi, budget=args.budget)
            records.append(
                {
                    "ring": args.spec,
                    "kind": "poly",
                    "family": args.family,
                    "chars": [list(p.index) for p in psi],
                    "value": out.value,
                    "abs": abs(out.value),
                    "bound": out.bound,
                    "bound_applies": out.bound_applies,
                    "runtime_ms": (time.perf_counter() - start) * 1e3,
                }
            )
    else:
        raise ParseError("need --hadamard M or --family")
    _emit(records, args.out)
    return 0


def _cmd_gowers(args) -> int:
    ring = _load_ring(args.spec)
    f = _load_function(ring, args.function)
    norms = {f"U{s}": gowers_norm(f, s, budget=args.budget) for s in range(1, args.s + 1)}
    _emit({"ring": args.spec, "function": args.function, "norms": norms})
    return 0


def _cmd_lambda(args) -> int:
    ring = _load_ring(args.spec)
    family = parse_family(args.family)
    funcs = _load_functions(ring, args.functions, len(family) + 1)
    twists = parse_family(args.twists) if args.twists else []
    psi = _load_chars(ring, args.chars, len(twists))
    query = LambdaQuery(ring, family, funcs, twists, psi, budget=args.budget)
    start = time.perf_counter()
    value = lambda_average(query)
    disc = main_discrepancy(query)
    _emit(
        {
            "ring": args.spec,
            "family": args.family,
            "value": value,
            "discrepancy": disc,
            "runtime_ms": (time.perf_counter() - start) * 1e3,
        }
    )
    return 0


def _parse_builtin(text: str):
    name, _, rest = text.partition(":")
    params = [int(t) for t in rest.split(":")] if rest else []
    if name == "avoid-3y":
        return avoid_3y(*params)
    if name == "avoid-y-y2p1":
        return avoid_y_y2p1(*params)
    if name == "loper":
        return loper(*params)
    raise ParseError(f"unknown builtin {text!r}")


def _cmd_config_count(args) -> int:
    if args.builtin:
        ring, family, sets = _parse_builtin(args.builtin)
        family_text = ", ".join(str(p) for p in family)
    else:
        if not (args.spec and args.family and args.sets):
            raise ParseError("need a ring spec, --family, and --sets (or --builtin)")
        ring = _load_ring(args.spec)
        family = parse_family(args.family)
        family_text = args.family
        sets = []
        for spec in args.sets.split(";"):
            spec = spec.strip()
            f = _load_function(ring, spec)
            sets.append(f.values.real > 0.5)
        if len(sets) != len(family) + 1:
            raise ParseError("need m+1 sets")
    counts = count_configurations(ring, family, sets, budget=args.budget)
    record = {
        "ring": ring.spec.text(),
        "family": family_text,
        "M": counts.M,
        "M1": counts.M1,
        "M2": counts.M2,
        "S": counts.S,
    }
    if args.witness:
        record["witness"] = find_nontrivial_config(ring, family, sets, budget=args.budget)
    _emit(record)
    return 0


def _cmd_roots(args) -> int:
    ring = _load_ring(args.spec)
    poly = parse_poly(args.poly)
    start = time.perf_counter()
    out = count_roots(ring, poly, args.n, budget=args.budget)
    _emit(
        {
            "ring": args.spec,
            "poly": args.poly,
            "count": out.count,
            "bound": out.bound,
            "bound_applies": out.bound_applies,
            "runtime_ms": (time.perf_counter() - start) * 1e3,
        }
    )
    return 0


def _cmd_intersective(args) -> int:
    family = parse_family(args.family)
    ok, first_failure = jointly_intersective_up_to(family, args.k_max)
    _emit({"family": args.family, "k_max": args.k_max, "ok": ok, "first_failure": first_failure})
    return 0


def _cmd_pet_step(args) -> int:
    ring = _load_ring(args.spec)
    family = parse_family(args.family)
    funcs = _load_functions(ring, args.functions, len(family) + 1)
    result = pet_step(ring, family, funcs, args.window, budget=args.budget)
    _emit(
        {
            "ring": args.spec,
            "family": args.family,
            "m_prime": result.m_prime,
            "new_family": [str(p) for p in result.family],
            "labels": result.labels,
            "selected_h": list(result.selected_h),
            "branch": result.branch,
            "lhs": result.lhs,
            "rhs": result.rhs,
            "pair_before": [result.pair_before.m, list(result.pair_before.seq)],
            "pair_after": [result.pair_after.m, list(result.pair_after.seq)],
        }
    )
    return 0


def _cmd_pet_diagram(args) -> int:
    family = parse_family(args.family)
    subs = [s for s in (args.subs or "").split(";") if s.strip()]
    diagram = diagrams.symbolic_diagram(family, substitutions=subs, fork=args.fork)
    if args.as_json:
        print(diagram.to_json())
    else:
        print(diagram.render())
    return 0


def _cmd_pet_bounds(args) -> int:
    record = {}
    if args.m is not None and args.d is not None:
        bound = t_bound(args.m, args.d)
        record["t_bound"] = {"m": args.m, "d": args.d, "value": str(bound), "saturated": bound.saturated}
    if args.pair:
        m_text, _, seq_text = args.pair.partition(":")
        pair = WeightPair(int(m_text), tuple(int(t) for t in seq_text.split(",")))
        record["max_path_length"] = max_path_length(pair, args.n, cap=args.cap)
    if not record:
        raise ParseError("need --m/--d or --pair")
    _emit(record)
    return 0


def _cmd_us_trace(args) -> int:
    ring = _load_ring(args.spec)
    family = parse_family(args.family)
    funcs = _load_functions(ring, args.functions, len(family) + 1)
    windows = [int(t) for t in args.windows.split(",")] if args.windows else None
    trace = us_control_trace(ring, family, funcs, args.target, h_overrides=windows, budget=args.budget)
    _emit(
        {
            "ring": args.spec,
            "family": args.family,
            "target": trace.target,
            "rearrangement": trace.rearrangement,
            "steps": [
                {
                    "index": s.index,
                    "family": [str(p) for p in s.family],
                    "h": list(s.selected_h) if s.selected_h else None,
                    "branch": s.branch,
                    "lhs": s.lhs,
                    "rhs": s.rhs,
                }
                for s in trace.stages
            ],
            "u_degree": trace.u_degree,
            "u_value": trace.u_value,
            "lhs": trace.lhs,
            "bound": trace.bound,
            "certified": trace.certified,
        }
    )
    return 0


# -- sweep ---------------------------------------------------------------------


def _load_sweep_config(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw.decode())


def _sweep_rings(config: dict) -> list[str]:
    rings = config.get("rings")
    if isinstance(rings, list):
        return rings
    if isinstance(rings, dict) and "zmod_primes" in rings:
        spec = rings["zmod_primes"]
        if "count" in spec:
            primes = first_primes_above(spec.get("above", 1), spec["count"])
        else:
            primes = primes_in_range(spec.get("min", 2), spec["max"])
        return [f"zmod:{p}" for p in primes]
    raise ParseError("sweep config needs a 'rings' list or zmod_primes range")


def sweep(config: dict, out_csv: str) -> tuple[list[dict], list[dict]]:
    """One row per (ring, trial) plus a max-discrepancy summary row per ring."""
    ring_specs = _sweep_rings(config)
    family = parse_family(config["family"])
    trials = int(config.get("trials", 1))
    if trials < 1:
        raise ParseError("trials must be at least 1")
    seed = int(config.get("seed", 1))
    mode = config.get("functions", "random")
    density = float(config.get("density", 0.5))
    budget = int(config.get("budget", ENUMERATION_CAP))
    m = len(family)

    def run_ring(item):
        ring_index, spec = item
        ring = _load_ring(spec)
        d = max(p.degree() for p in family)
        independent, c1 = independence_check(family)
        bound = 2.0 * ((d - 1) / ring.lpf) ** (2.0**-d) if d > 1 else 0.0
        applies = m == 1 and independent and ring.lpf > max(2, d, c1 or 0)
        rows = []
        for trial in range(trials):
            if mode == "random":
                funcs = [
                    FunctionOnRing.random_bounded(ring, [seed, ring_index, trial, i])
                    for i in range(m + 1)
                ]
            elif mode == "indicator":
                ind = FunctionOnRing.random_indicator(ring, [seed, ring_index, trial], density)
                funcs = [ind] * (m + 1)
            else:
                raise ParseError(f"unknown functions mode {mode!r}")
            disc = main_discrepancy(LambdaQuery(ring, family, funcs, budget=budget))
            rows.append(
                {
                    "row": "trial",
                    "ring": spec,
                    "N": ring.characteristic,
                    "lpf": ring.lpf,
                    "size": ring.size,
                    "trial": trial,
                    "discrepancy": disc,
                    "bound": bound,
                    "bound_applies": applies,
                }
            )
        summary = {
            "row": "summary",
            "ring": spec,
            "N": ring.characteristic,
            "lpf": ring.lpf,
            "size": ring.size,
            "trial": "",
            "max_discrepancy": max(r["discrepancy"] for r in rows),
            "bound": bound,
            "bound_applies": applies,
        }
        return rows, summary

    workers = int(os.environ.get("RINGPATTERNS_THREADS", "1"))
    items = list(enumerate(ring_specs))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_ring, items))
    else:
        results = [run_ring(item) for item in items]

    all_rows = [row for rows, _ in results for row in rows]
    summaries = [summary for _, summary in results]
    _write_sweep_csv(out_csv, all_rows, summaries)
    png_path = config.get("out_png") or os.path.splitext(out_csv)[0] + ".png"
    plots.render_sweep_figure(all_rows, summaries, png_path)
    return all_rows, summaries


def _write_sweep_csv(path: str, rows: list[dict], summaries: list[dict]):
    lines = [f"# generated {datetime.now(timezone.utc).isoformat()}"]
    header = ["row", "ring", "N", "lpf", "size", "trial", "discrepancy", "bound", "bound_applies"]
    lines.append(",".join(header))
    for r in rows:
        lines.append(
            ",".join(
                str(r[k]) if k != "discrepancy" else f"{r[k]:.12g}" for k in header
            )
        )
    for s in summaries:
        values = [
            s["row"], s["ring"], s["N"], s["lpf"], s["size"], s["trial"],
            f"{s['max_discrepancy']:.12g}", s["bound"], s["bound_applies"],
        ]
        lines.append(",".join(str(v) for v in values))
    _atomic_write(path, "\n".join(lines) + "\n")


def _cmd_sweep(args) -> int:
    config = _load_sweep_config(args.config)
    out_csv = args.out or config.get("out_csv")
    if not out_csv:
        raise ParseError("sweep needs an output CSV path (--out or out_csv)")
    rows, summaries = sweep(config, out_csv)
    _emit(
        {
            "rings": len(summaries),
            "rows": len(rows),
            "out_csv": out_csv,
            "max_discrepancy": max(s["max_discrepancy"] for s in summaries),
        }
    )
    return 0


def _cmd_selftest(args) -> int:
    return 0 if selftest.run_selftest() else 1


if __name__ == "__main__":
    sys.exit(main())
