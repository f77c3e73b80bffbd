"""Command-line driver: verification suites, reports and level-set portraits.

::

    verify run --suite ks --seed 42 --out reports/
    verify run --suite quad --alpha-sweep 0.04,0.02,0.01
    verify portrait --l1 1.0 --g2 1.0 --c 1.2 --out portrait.svg

Exit status is 0 when every check passes, 1 when any fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import suites
from .quadrupolar import portrait_grid
from .threebody import ThreeBodyMasses

REPORT_NAME = "report.json"
CSV_NAME = "residuals.csv"
PORTRAIT_NAME = "portrait.svg"


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _masses(text: str) -> ThreeBodyMasses:
    vals = _float_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("--masses needs m0,m1,m2")
    return ThreeBodyMasses(*vals)


def _add_portrait_args(p: argparse.ArgumentParser, required: bool):
    p.add_argument("--l1", type=float, required=required, help="inner action L1")
    p.add_argument("--g2", type=float, required=required, help="outer angular momentum G2")
    p.add_argument("--c", type=float, required=required, help="total angular momentum C")
    p.add_argument("--l2", type=float, default=None, help="outer action L2 (default G2)")
    p.add_argument("--masses", type=_masses, default=ThreeBodyMasses(1.0, 1.0, 1.0),
                   help="m0,m1,m2 (default 1,1,1)")
    p.add_argument("--levels", type=int, default=30, help="number of contour levels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run verification suites")
    run.add_argument("--suite", choices=("all",) + suites.SUITES, default=None)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--nodes", type=int, default=64, help="averaging nodes per angle")
    run.add_argument("--secular-nodes", type=int, default=256,
                     help="nodes per angle for the regularized secular identity")
    run.add_argument("--dt", type=float, default=1e-3, help="step of the flow-invariant checks")
    run.add_argument("--steps-per-period", type=int, default=400,
                     help="steps per quadrupolar period in the conjugacy check")
    run.add_argument("--alpha-sweep", type=_float_list, default=(0.04, 0.02, 0.01))
    run.add_argument("--out", default="verify-out",
                     help="output directory (or an .svg path together with --portrait)")
    run.add_argument("--tol-scale", type=float, default=1.0,
                     help="multiply every tolerance; values above 1 need --relax")
    run.add_argument("--relax", action="store_true",
                     help="acknowledge loosened tolerances (recorded in the report)")
    run.add_argument("--workers", type=int, default=1, help="suites run concurrently")
    run.add_argument("--portrait", action="store_true", help="also render a level-set portrait")
    _add_portrait_args(run, required=False)

    portrait = sub.add_parser("portrait", help="render F_quad level sets")
    _add_portrait_args(portrait, required=True)
    portrait.add_argument("--out", required=True, help="SVG file")
    return parser


def _run_suite(args: tuple[str, suites.SuiteConfig]) -> list[suites.CheckResult]:
    name, cfg = args
    return suites.run_checks(name, cfg)


def run_suites(names: list[str], cfg: suites.SuiteConfig, workers: int = 1
               ) -> list[suites.CheckResult]:
    """Run suites (concurrently when ``workers > 1``); checks come back sorted by id."""
    jobs = [(n, cfg) for n in names]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_suite, jobs))
    else:
        results = [_run_suite(j) for j in jobs]
    checks = [c for r in results for c in r]
    return sorted(checks, key=lambda c: c.id)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_report(suite: str, cfg: suites.SuiteConfig, checks: list[suites.CheckResult],
                 adjudications: dict) -> dict:
    report = {
        "suite": suite,
        "seed": cfg.seed,
        "pass": all(c.passed for c in checks),
        "checks": [c.as_dict() for c in checks],
        "adjudications": adjudications,
        "timing": suites.counts(cfg),
    }
    sweep = [c for c in checks if c.id == "quad.expansion_remainder"]
    if sweep:
        report["alpha_sweep"] = [{"alpha": r["alpha"], "R": r["residual"]} for r in sweep[0].rows]
    return _jsonable(report)


def write_report(report: dict, checks: list[suites.CheckResult], out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_NAME).write_text(json.dumps(report, indent=2) + "\n")
    with open(out_dir / CSV_NAME, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check_id", "point", "parameters", "residual"])
        for c in checks:
            for row in suites.csv_rows(c):
                w.writerow([row[0], row[1], row[2], repr(row[3])])


def render_portrait(L1: float, G2: float, C: float, masses: ThreeBodyMasses, path: Path,
                    L2: float | None = None, levels: int = 30) -> Path:
    """SVG of ``F_quad`` level sets on the ``(g1, G1/L1)`` rectangle."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    g, xs, vals = portrait_grid(L1, G2, C, masses, L2)
    if not np.isfinite(vals).any():
        raise ValueError(f"no admissible G1 in [0, L1] for G2={G2}, C={C}")
    plt.rcParams["svg.hashsalt"] = "ksquad"
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    finite = vals[np.isfinite(vals)]
    lv = np.linspace(finite.min(), finite.max(), levels)
    ax.contour(g, xs, np.ma.masked_invalid(vals), levels=lv, linewidths=0.8, cmap="viridis")
    ax.set_xlabel("g1")
    ax.set_ylabel("G1 / L1")
    ax.set_xlim(g[0], g[-1])
    ax.set_ylim(0.0, 1.0)
    ax.set_title(f"F_quad level sets, L1={L1:g}, G2={G2:g}, C={C:g}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _cmd_run(args, parser) -> int:
    if args.tol_scale <= 0:
        parser.error("--tol-scale must be positive")
    if args.tol_scale > 1 and not args.relax:
        parser.error("--tol-scale above 1 loosens tolerances; pass --relax to acknowledge")
    if args.suite is None and not args.portrait:
        parser.error("nothing to do: give --suite and/or --portrait")
    out = Path(args.out)
    portrait_path = None
    if args.portrait:
        if None in (args.l1, args.g2, args.c):
            parser.error("--portrait needs --l1, --g2 and --c")
        if out.suffix.lower() == ".svg":
            portrait_path, out = out, out.parent
        else:
            portrait_path = out / PORTRAIT_NAME
    status = 0
    if args.suite is not None:
        cfg = suites.SuiteConfig(
            seed=args.seed, nodes=args.nodes, secular_nodes=args.secular_nodes, dt=args.dt,
            alpha_sweep=args.alpha_sweep, steps_per_period=args.steps_per_period,
            tol_scale=args.tol_scale, relax=args.relax,
        )
        names = list(suites.SUITES) if args.suite == "all" else [args.suite]
        t0 = time.perf_counter()
        checks = run_suites(names, cfg, args.workers)
        adj = suites.adjudications(cfg)
        report = build_report(args.suite, cfg, checks, adj)
        write_report(report, checks, out)
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.id:32s} residual={c.residual:.3e}"
                  f"  tol={c.tolerance:.1e}")
        chart = adj["chart_discrepancy"]
        ps = adj["ps_normalization"]
        print(f"chart adjudication (alpha={chart['alpha']:g}): supported={chart['supported']}"
              f"  delaunay_form={chart['residual_delaunay_form']:.3e}"
              f"  laplace_expanded={chart['residual_laplace_expanded']:.3e}")
        print(f"Pauli-Souriau normalization: {ps['constant']:.6f} * L1^{ps['L1_power']:.3f}")
        print(f"wall clock {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        status = 0 if report["pass"] else 1
    if portrait_path is not None:
        render_portrait(args.l1, args.g2, args.c, args.masses, portrait_path, args.l2,
                        args.levels)
        print(f"portrait written to {portrait_path}")
    return status


def _cmd_portrait(args, parser) -> int:
    try:
        path = render_portrait(args.l1, args.g2, args.c, args.masses, Path(args.out), args.l2,
                               args.levels)
    except ValueError as exc:
        parser.error(str(exc))
    print(f"portrait written to {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args, parser)
    return _cmd_portrait(args, parser)


if __name__ == "__main__":
    sys.exit(main())
