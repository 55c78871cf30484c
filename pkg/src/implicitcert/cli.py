"""Command-line interface.

Subcommands: check, reach, certify, curve, radius, synth. Exit codes are
0 (ok), 1 (IO or parse problem, including bad flags), 2 (model not well
posed), 3 (fixed-point iteration did not converge where the requested
command needs it to). CSV goes to stdout unless --out is given; file
writes are atomic. Set IMPLICITCERT_WORKERS to parallelize certify/curve/
radius over dataset inputs; results are aggregated in dataset order, so
the output is identical for any worker count.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import certify as cert
from .certify import CertMethod, LabeledInput
from .embedding import IntervalVector, embedded_solve
from .errors import MaxIterExceededError, NotWellPosedError, ParseError, ShapeError
from .modelio import atomic_write_text, load_dataset, load_model, save_model, synth_model
from .network import DEFAULT_MAX_ITER, DEFAULT_TOL, check_well_posedness, forward_solve

METHOD_ORDER = [CertMethod.LIP, CertMethod.IBP, CertMethod.MM, CertMethod.MM_C]


@dataclass
class RunConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    alpha_override: float | None = None
    seed: int = 0
    eps_grid: list[float] = field(default_factory=lambda: [0.0])
    eps_max: float = 1.0
    tol_eps: float = 1e-4
    methods: list[CertMethod] = field(default_factory=lambda: list(METHOD_ORDER))

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max-iter must be >= 1")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # No option here starts with a digit, so anything like "-0.4,-1.2"
        # is a value (vector flags must accept negative components); the
        # stock matcher only recognizes bare negative numbers.
        self._negative_number_matcher = re.compile(r"^-[\d.]")

    # usage problems are parse errors: exit 1, keeping 2 for "not well posed"
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._report(message))

    @staticmethod
    def _report(message) -> int:
        print(f"error: {message}", file=sys.stderr)
        return 1


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.split(",") if p.strip() != ""])
    except ValueError as exc:
        raise ParseError(f"not a comma-separated vector: {text!r}") from exc


def _parse_methods(text: str) -> list[CertMethod]:
    wanted = {p.strip() for p in text.split(",") if p.strip()}
    known = {m.value for m in METHOD_ORDER}
    unknown = wanted - known
    if unknown:
        raise ParseError(f"unknown methods: {sorted(unknown)} (choose from {sorted(known)})")
    return [m for m in METHOD_ORDER if m.value in wanted]


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="fixed-point step tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="iteration budget")
    p.add_argument("--alpha", type=float, default=None, help="damping override in (0, alpha*]")


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("IMPLICITCERT_WORKERS", "1")))
    except ValueError:
        return 1


def cmd_check(args) -> int:
    net = load_model(args.model)
    rep = check_well_posedness(net)
    if args.json:
        print(json.dumps({
            "measure": rep.measure,
            "alpha_star": rep.alpha_star,
            "contraction_factor": rep.contraction_factor,
            "well_posed": rep.well_posed,
        }))
    else:
        print(f"measure            {_fmt(rep.measure)}")
        print(f"alpha_star         {_fmt(rep.alpha_star)}")
        print(f"contraction_factor {_fmt(rep.contraction_factor)}")
        print(f"well_posed         {'yes' if rep.well_posed else 'no'}")
    return 0 if rep.well_posed else 2


def cmd_reach(args) -> int:
    net = load_model(args.model)
    if args.lower is not None or args.upper is not None:
        if args.lower is None or args.upper is None:
            raise ParseError("--lower and --upper must be given together")
        box = IntervalVector(_parse_vector(args.lower), _parse_vector(args.upper))
    elif args.input is not None:
        box = IntervalVector.ball(_parse_vector(args.input), args.eps)
    else:
        raise ParseError("give either --input (with optional --eps) or --lower/--upper")
    solver = cert.ibp_solve if args.method == "ibp" else embedded_solve
    efp = solver(net, box, tol=args.tol, max_iter=args.max_iter, alpha=args.alpha)
    if args.json:
        print(json.dumps({
            "method": args.method,
            "y_lower": efp.y_box.lower.tolist(),
            "y_upper": efp.y_box.upper.tolist(),
            "x_lower": efp.x_lower.tolist(),
            "x_upper": efp.x_upper.tolist(),
            "iterations": efp.diag.iterations,
            "final_residual": efp.diag.final_residual,
        }))
    else:
        print("y_lower " + " ".join(_fmt(v) for v in efp.y_box.lower))
        print("y_upper " + " ".join(_fmt(v) for v in efp.y_box.upper))
    return 0


def _evaluate_dataset(net, dataset, cfg: RunConfig):
    """Per-input, per-epsilon results for every requested method.

    Returns results[i][eps][method] -> CertificationResult, with the lip
    constant and clean margins computed once. Parallel over inputs when
    IMPLICITCERT_WORKERS > 1; aggregation order is fixed by the dataset.
    """
    lip_constant = cert.lipschitz_bound(net) if CertMethod.LIP in cfg.methods else None

    def work(inp: LabeledInput):
        clean_margin = None
        lip_failed = False
        if CertMethod.LIP in cfg.methods:
            try:
                _, y, _ = forward_solve(net, inp.u, tol=cfg.tol, max_iter=cfg.max_iter,
                                        alpha=cfg.alpha_override)
                clean_margin = cert.output_margin(y, inp.label)
            except MaxIterExceededError:
                clean_margin = float("nan")
                lip_failed = True
        per_eps = {}
        for eps in cfg.eps_grid:
            res = cert.evaluate_methods(
                net, inp, eps, cfg.methods,
                tol=cfg.tol, max_iter=cfg.max_iter, alpha=cfg.alpha_override,
                lip_constant=lip_constant, clean_margin=clean_margin,
            )
            if lip_failed and CertMethod.LIP in res:
                res[CertMethod.LIP].flags = cert.NONCONVERGENT
            per_eps[eps] = res
        return per_eps

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(work, dataset))
    return [work(inp) for inp in dataset]


def cmd_certify(args) -> int:
    net = load_model(args.model)
    _, _, dataset = load_dataset(args.dataset)
    cfg = _config_from(args)
    results = _evaluate_dataset(net, dataset, cfg)
    lines = ["method,epsilon,index,delta,certified,iterations,flags"]
    for m in cfg.methods:
        for eps in cfg.eps_grid:
            for i in range(len(dataset)):
                res = results[i][eps][m]
                iters = "" if res.diagnostics is None else str(res.diagnostics.iterations)
                lines.append(
                    f"{m.value},{_fmt(eps)},{i},{_fmt(res.delta_value)},"
                    f"{1 if res.certified else 0},{iters},{res.flags}"
                )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_curve(args) -> int:
    net = load_model(args.model)
    _, _, dataset = load_dataset(args.dataset)
    cfg = _config_from(args)
    results = _evaluate_dataset(net, dataset, cfg)
    lines = ["method,epsilon,fraction"]
    total = len(dataset)
    if total:
        for m in cfg.methods:
            for eps in cfg.eps_grid:
                certified = sum(1 for per_eps in results if per_eps[eps][m].certified)
                lines.append(f"{m.value},{_fmt(eps)},{_fmt(certified / total)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_radius(args) -> int:
    net = load_model(args.model)
    _, _, dataset = load_dataset(args.dataset)
    cfg = _config_from(args)

    def work(inp: LabeledInput):
        return {
            m: cert.certified_radius(
                net, inp, m, eps_max=cfg.eps_max, tol_eps=cfg.tol_eps,
                tol=cfg.tol, max_iter=cfg.max_iter, alpha=cfg.alpha_override,
            )
            for m in cfg.methods
        }

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            radii = list(ex.map(work, dataset))
    else:
        radii = [work(inp) for inp in dataset]
    lines = ["method,index,radius"]
    for m in cfg.methods:
        for i in range(len(dataset)):
            lines.append(f"{m.value},{i},{_fmt(radii[i][m])}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_synth(args) -> int:
    net = synth_model(args.n, args.r, args.q, args.seed)
    save_model(net, args.out)
    return 0


def _config_from(args) -> RunConfig:
    cfg = RunConfig(tol=args.tol, max_iter=args.max_iter, alpha_override=args.alpha)
    if getattr(args, "eps_grid", None):
        grid = sorted(float(v) for v in _parse_vector(args.eps_grid))
    elif getattr(args, "eps", None) is not None:
        grid = [args.eps]
    else:
        grid = [0.0]
    if any(e < 0 for e in grid):
        raise ParseError("epsilon values must be >= 0")
    cfg.eps_grid = grid
    if getattr(args, "eps_max", None) is not None:
        cfg.eps_max = args.eps_max
    if getattr(args, "tol_eps", None) is not None:
        cfg.tol_eps = args.tol_eps
    if getattr(args, "methods", None):
        cfg.methods = _parse_methods(args.methods)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="implicitcert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="well-posedness report for a model")
    p.add_argument("model")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reach", help="output box for an input box or epsilon-ball")
    p.add_argument("model")
    p.add_argument("--input", help="comma-separated nominal input vector")
    p.add_argument("--eps", type=float, default=0.0, help="l-inf radius around --input")
    p.add_argument("--lower", help="comma-separated box lower corner")
    p.add_argument("--upper", help="comma-separated box upper corner")
    p.add_argument("--method", choices=["mm", "ibp"], default="mm")
    p.add_argument("--json", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_reach)

    for name, handler, helptext in [
        ("certify", cmd_certify, "per-input certificates over an epsilon grid (CSV)"),
        ("curve", cmd_curve, "certified fraction per method and epsilon (CSV)"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("model")
        p.add_argument("dataset")
        p.add_argument("--eps", type=float, default=None, help="single epsilon")
        p.add_argument("--eps-grid", help="comma-separated epsilons")
        p.add_argument("--methods", default=None, help="subset of lip,ibp,mm,mm_c")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write CSV here instead of stdout")
        _add_solver_flags(p)
        p.set_defaults(func=handler)

    p = sub.add_parser("radius", help="largest certified radius per input (CSV)")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--eps-max", type=float, default=1.0)
    p.add_argument("--tol-eps", type=float, default=1e-4)
    p.add_argument("--methods", default=None, help="subset of lip,ibp,mm,mm_c")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write CSV here instead of stdout")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_radius)

    p = sub.add_parser("synth", help="write a random well-posed model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NotWellPosedError as exc:
        print(f"error: model is not well posed: {exc}", file=sys.stderr)
        return 2
    except MaxIterExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ParseError, ShapeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
