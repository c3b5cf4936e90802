"""Command-line surface.

Subcommands: bderiv, ball, triangulate, simulate, verify, bench.  Float
output uses the shortest decimal form that round-trips the binary value
exactly; JSON key order and CSV row order are deterministic for a fixed seed.  Exit codes: 0 success,
1 runtime error, 2 validation/configuration failure, 3 verification failure.
The environment variable NSFLOW_SEED overrides the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import apps, oracle
from .bderiv import b_evaluate, build_triangulation
from .core import CornerModel, corner_model_from_json
from .errors import (
    CapExceeded,
    InvalidDelta,
    NotEventSelected,
    NsflowError,
    RankDeficient,
)
from .flow import integrate
from .oracle import lazy_corner_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_VERIFICATION = 3


def _fmt(x: float) -> str:
    # shortest representation that round-trips the binary value exactly
    return repr(float(x))


def _default_seed() -> int:
    return int(os.environ.get("NSFLOW_SEED", "0"))


def _load_model(args: argparse.Namespace, dim: int | None = None):
    """Resolve --model/--preset into (field_or_None, CornerModel)."""
    if getattr(args, "model", None):
        with open(args.model, "r", encoding="utf-8") as fh:
            return None, corner_model_from_json(fh.read())
    name = getattr(args, "preset", None)
    if not name:
        raise ValueError("provide --model FILE or --preset NAME")
    d = dim if dim is not None else getattr(args, "dim", 2)
    return apps.preset(
        name,
        d=d,
        delta=getattr(args, "delta", 0.5),
        seed=getattr(args, "seed", 0),
        psi=getattr(args, "psi", 0.1),
        beta=getattr(args, "beta", 0.5),
    )


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _write(path: str | None, text: str) -> None:
    fh, close = _open_out(path)
    try:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")
    finally:
        if close:
            fh.close()


def cmd_bderiv(args: argparse.Namespace) -> int:
    direction = [float(v) for v in args.dir.split(",")]
    _, corner = _load_model(args, dim=len(direction))
    corner.require_valid()
    res = b_evaluate(corner, direction)
    if args.json:
        payload = res.to_json_dict()
        if args.all_pieces:
            pieces = oracle.enumerate_saltations(corner)
            payload["pieces"] = {
                "-".join(map(str, s.order)): mat.tolist() for s, mat in pieces.items()
            }
        _write(args.out, json.dumps(payload, indent=2))
    else:
        lines = [
            ",".join(_fmt(v) for v in res.delta_rho_plus),
            "sigma " + ",".join(map(str, res.sigma.order)),
            "delta_t " + _fmt(res.delta_t),
        ]
        if args.all_pieces:
            for sigma, mat in oracle.enumerate_saltations(corner).items():
                lines.append("piece " + "-".join(map(str, sigma.order)))
                lines.extend("  " + ",".join(_fmt(v) for v in row) for row in mat)
        _write(args.out, "\n".join(lines))
    return EXIT_OK


def cmd_ball(args: argparse.Namespace) -> int:
    _, corner = _load_model(args)
    corner.require_valid()
    d = corner.d
    if d == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, args.points, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        print(f"warning: ball is intended for d = 2, got d = {d}; sampling a sphere", file=sys.stderr)
        rng = np.random.default_rng(args.seed)
        dirs = rng.normal(size=(args.points, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    header = (
        [f"in_{i + 1}" for i in range(d)] + [f"out_{i + 1}" for i in range(d)] + ["sigma"]
    )
    rows = [",".join(header)]
    for v in dirs:
        res = b_evaluate(corner, v)
        rows.append(
            ",".join([_fmt(x) for x in v] + [_fmt(x) for x in res.delta_rho_plus])
            + ","
            + "-".join(map(str, res.sigma.order))
        )
    _write(args.out, "\n".join(rows))
    return EXIT_OK


def cmd_triangulate(args: argparse.Namespace) -> int:
    _, corner = _load_model(args)
    if corner.n > args.cap:
        raise CapExceeded(f"triangulate requires n <= {args.cap}, got n = {corner.n}")
    tri = build_triangulation(corner, cap=args.cap)
    _write(args.out, json.dumps(tri.to_json_dict(), indent=2))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    field, corner = _load_model(args)
    if field is None:
        raise ValueError("simulate needs a field preset, not a bare corner model")
    x0 = np.array([float(v) for v in args.x0.split(",")])
    result = integrate(field, x0, args.t, steps=args.steps)
    rows = [",".join(["t"] + [f"x_{i + 1}" for i in range(field.d)] + ["orthant"])]
    for seg in result.segments:
        for k in range(len(seg.times)):
            rows.append(
                ",".join([_fmt(seg.times[k])] + [_fmt(v) for v in seg.states[k]])
                + ","
                + seg.active_orthant.key()
            )
    _write(args.out, "\n".join(rows))
    events = [ev.to_json_dict() for ev in result.events]
    _write(args.events_out, json.dumps(events, indent=2))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    reports = []
    if args.suite == "sampled-oracle":
        for _ in range(args.models):
            n = int(rng.integers(1, 7))
            d = n + int(rng.integers(0, 5))
            m = oracle.random_corner_model(rng, n, d)
            reports.append(oracle.verify_b_against_sampled(m, args.samples, rng))
    elif args.suite == "cone-partition":
        for _ in range(args.models):
            n = int(rng.integers(1, 7))
            d = n + int(rng.integers(0, 5))
            m = oracle.random_corner_model(rng, n, d)
            reports.append(oracle.verify_cone_partition(m, args.samples, rng))
    elif args.suite == "fd-convergence":
        reports.append(
            oracle.verify_fd_convergence(
                rng, num_fields=args.models, num_directions=args.samples
            )
        )
    else:
        raise ValueError(f"unknown suite {args.suite!r}")
    merged = {
        "suite": args.suite,
        "seed": args.seed,
        "reports": [r.to_json_dict() for r in reports],
        "ok": all(r.ok for r in reports),
    }
    _write(args.out, json.dumps(merged, indent=2))
    return EXIT_OK if merged["ok"] else EXIT_VERIFICATION


def cmd_bench(args: argparse.Namespace) -> int:
    ns = [int(v) for v in args.n.split(",")]
    ds = [int(v) for v in args.d.split(",")] if args.d else [n + 2 for n in ns]
    if len(ds) != len(ns):
        raise ValueError("--d list must match --n list")
    rng = np.random.default_rng(args.seed)
    rows = ["n,d,calls,median_seconds"]
    for n, d in zip(ns, ds):
        m = lazy_corner_model(args.seed + n, n, d)
        m.require_valid()
        dirs = rng.normal(size=(min(args.calls, 256), d))
        b_evaluate(m, dirs[0])  # warm caches before timing
        times = np.empty(args.calls)
        for i in range(args.calls):
            v = dirs[i % len(dirs)]
            t0 = time.perf_counter()
            b_evaluate(m, v)
            times[i] = time.perf_counter() - t0
        rows.append(f"{n},{d},{args.calls},{_fmt(float(np.median(times)))}")
    _write(args.out, "\n".join(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsflow",
        description="Corner derivatives of event-selected nonsmooth flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    def add_model_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--model", help="corner model JSON file")
        p.add_argument("--preset", help="pwc | pwc-linear | biped-uniform | biped-xor")
        p.add_argument("--dim", type=int, default=2, help="dimension for pwc presets")
        p.add_argument("--delta", type=float, default=0.5, help="pwc-linear offset scale")
        p.add_argument("--psi", type=float, default=0.1, help="biped splay angle")
        p.add_argument("--beta", type=float, default=0.5, help="biped damping")
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("bderiv", help="evaluate the corner derivative on a direction")
    add_model_flags(p)
    p.add_argument("--dir", required=True, help="comma-separated tangent vector")
    p.add_argument("--json", action="store_true")
    p.add_argument("--all-pieces", action="store_true", help="also print every piece matrix")
    p.set_defaults(fn=cmd_bderiv)

    p = sub.add_parser("ball", help="map a ball of directions through the derivative")
    add_model_flags(p)
    p.add_argument("--points", type=int, default=360)
    p.set_defaults(fn=cmd_ball)

    p = sub.add_parser("triangulate", help="export the exponential representation")
    add_model_flags(p)
    p.add_argument("--cap", type=int, default=10)
    p.set_defaults(fn=cmd_triangulate)

    p = sub.add_parser("simulate", help="integrate a preset field, logging events")
    add_model_flags(p)
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--events-out", default=None, help="event JSON path (default stdout)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="run a randomized oracle suite")
    p.add_argument("suite", choices=["sampled-oracle", "cone-partition", "fd-convergence"])
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--models", type=int, default=25)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="time the evaluation loop across sizes")
    p.add_argument("--n", default="2,4,8,16,32")
    p.add_argument("--d", default=None, help="defaults to n + 2 per entry")
    p.add_argument("--calls", type=int, default=10000)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (NotEventSelected, RankDeficient, CapExceeded, InvalidDelta, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NsflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
