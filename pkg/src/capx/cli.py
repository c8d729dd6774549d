"""capx command-line interface.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 a bound or
audit check failed, 4 a capacity point did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import replace

from .config import (ConfigError, ExperimentConfig, PowerGrid, ensure_out_dir, grid_contains,
                     load_config, parse_distribution)
from .inputs import ContinuousFamily
from .interference import AdaptiveScaling, InterferenceChannel, theorem2_bound
from .monotonicity import lemma1_suite, monotonicity_audit, timeshare_bound_check
from .quadrature import QuadratureError, mutual_information
from .solver import CapacityPoint, sweep_capacity_curve
from .svgplot import Series, line_plot, stem_plot

log = logging.getLogger("capx")

EXIT_OK, EXIT_INVALID, EXIT_CHECK_FAILED, EXIT_NOT_CONVERGED = 0, 2, 3, 4
SUBCOMMANDS = {"mi-curve": "mi-curve", "capacity": "capacity-sweep", "audit": "timeshare-audit",
               "lemma1": "lemma1-suite", "interference": "interference"}


def fmt(x) -> str:
    """Fixed 9-significant-digit decimal formatting for CSV cells."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.9g}"


def _num(x):
    if isinstance(x, float):
        return float(f"{x:.9g}") if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return _num(x.item())
    return x


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_num(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_table(out_dir: str, stem: str, header, rows, fmt_kind: str) -> str:
    if fmt_kind == "json":
        path = os.path.join(out_dir, stem + ".json")
        write_json(path, [dict(zip(header, row)) for row in rows])
        return path
    path = os.path.join(out_dir, stem + ".csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


@contextmanager
def worker_pool(jobs: int):
    if jobs <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool


# ---------------------------------------------------------------------------
# mi-curve


def _mi_task(task):
    spec, p, ch, q = task
    d = parse_distribution(spec, p)
    try:
        res = mutual_information(d, ch, q)
        return res.mi_bits, res.quadrature_error_estimate
    except QuadratureError as exc:
        # flagged by its large error estimate rather than a NaN
        part = exc.partial
        return part.mi_bits, max(part.quadrature_error_estimate, 1.0)


def cmd_mi_curve(cfg: ExperimentConfig, args) -> int:
    if not cfg.distributions:
        raise ConfigError("distribution list is empty")
    for name in cfg.distributions:
        parse_distribution(name, 1.0)
    ch, q = cfg.scalar_channel(), cfg.quad_config()
    powers = cfg.powers.powers()
    out = ensure_out_dir(cfg.out)
    tasks = [(name, p, ch, q) for name in cfg.distributions for p in powers]
    with worker_pool(args.jobs) as pool:
        results = list(pool.map(_mi_task, tasks)) if pool else [_mi_task(t) for t in tasks]
    series = []
    for i, name in enumerate(cfg.distributions):
        rows = [(p, mi, err) for p, (mi, err) in zip(powers, results[i * len(powers):(i + 1) * len(powers)])]
        path = write_table(out, f"mi_{name}", ["p", "mi_bits", "quad_err"], rows, args.format)
        log.info("wrote %s", path)
        discrete = not isinstance(parse_distribution(name, 1.0), ContinuousFamily)
        series.append(Series(name, powers, [r[1] for r in rows], dashed=discrete))
    series.append(awgn_series(powers, ch.sigma_z))
    write_text(os.path.join(out, "mi_curves.svg"),
               line_plot(series, "Mutual information by input distribution", "power p", "I(X;Y) [bits]"))
    return EXIT_OK


def awgn_series(powers, sigma):
    return Series("AWGN 0.5 log2(1+p/s^2)", powers,
                  [0.5 * math.log2(1.0 + p / sigma ** 2) for p in powers], color="#000000")


# ---------------------------------------------------------------------------
# capacity sweep


def cmd_capacity(cfg: ExperimentConfig, args) -> int:
    ch, q, scfg = cfg.scalar_channel(), cfg.quad_config(), cfg.solver_config()
    powers = cfg.powers.powers()
    out = ensure_out_dir(cfg.out)

    def progress(pt: CapacityPoint):
        log.info("p=%g capacity %.6f bits (converged=%s, %d iterations)",
                 pt.cost, pt.capacity_bits, pt.converged, pt.iterations)

    with worker_pool(args.jobs) as pool:
        curve = sweep_capacity_curve(ch, powers, q=q, cfg=scfg, progress=progress, executor=pool)
    rows = [(pt.cost, pt.capacity_bits, pt.converged, pt.iterations) for pt in curve.points]
    write_table(out, "capacity", ["p", "capacity_bits", "converged", "iterations"], rows, args.format)
    for target in cfg.achiever_powers:
        p = grid_contains(powers, float(target))
        if p is None:
            continue
        pt = curve.points[powers.index(p)]
        write_json(os.path.join(out, f"achiever_p{p:g}.json"),
                   {"p": p, "capacity_bits": pt.capacity_bits, **pt.achiever.to_dict()})
        write_text(os.path.join(out, f"achiever_p{p:g}.svg"),
                   stem_plot(pt.achiever.positions, pt.achiever.weights,
                             f"Capacity-achieving particles at p = {p:g}"))
    audit = monotonicity_audit(curve, cfg.timeshare.slack)
    write_json(os.path.join(out, "audit.json"), audit.to_dict())
    write_json(os.path.join(out, "run.json"), {"config": cfg.to_json(), **curve.snapshot()})
    write_text(os.path.join(out, "capacity.svg"),
               line_plot([Series("capacity", powers, list(curve.capacities), markers=True),
                          awgn_series(powers, ch.sigma_z)],
                         "Capacity-cost function", "power p", "C(p) [bits]"))
    if not audit.passed:
        log.error("monotonicity audit failed: %s", audit.violations)
        return EXIT_CHECK_FAILED
    if not all(pt.converged for pt in curve.points):
        log.error("unconverged powers: %s", [pt.cost for pt in curve.points if not pt.converged])
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# audits


def read_curve(path: str):
    with open(path) as fh:
        if path.endswith(".json"):
            rows = json.load(fh)
        else:
            rows = list(csv.DictReader(fh))
    return [(float(r["p"]), float(r["capacity_bits"]),
             str(r.get("converged", "true")).lower() in ("true", "1")) for r in rows]


def cmd_audit(cfg: ExperimentConfig, args) -> int:
    ts = cfg.timeshare
    ch, q = cfg.scalar_channel(), cfg.quad_config()
    out = ensure_out_dir(cfg.out)
    reports, ok = [], True
    for base_spec in ts.bases:
        base = parse_distribution(base_spec)
        for target in ts.targets:
            rep = timeshare_bound_check(ch, base, float(target), ts.epsilons, q)
            ok &= rep.passed
            reports.append({"base": base_spec, **rep.to_dict()})
    result = {"timeshare": reports, "pass": ok}
    if ts.curve is not None:
        audit = monotonicity_audit(read_curve(ts.curve), ts.slack)
        result["monotonicity"] = audit.to_dict()
        ok &= audit.passed
        result["pass"] = ok
    write_json(os.path.join(out, "timeshare_audit.json"), result)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_lemma1(cfg: ExperimentConfig, args) -> int:
    out = ensure_out_dir(cfg.out)
    res = lemma1_suite(cfg.lemma1.n, tuple(cfg.lemma1.shape), cfg.seed)
    write_json(os.path.join(out, "lemma1.json"), res)
    return EXIT_OK if res["passed"] else EXIT_CHECK_FAILED


def cmd_interference(cfg: ExperimentConfig, args) -> int:
    it = cfg.interference
    single = cfg.scalar_channel()
    out = ensure_out_dir(cfg.out)
    ich = InterferenceChannel(single.distortion, single.sigma_z, it.gains)
    base = parse_distribution(it.base)
    rep = theorem2_bound(ich, base, it.target, it.epsilons, AdaptiveScaling(it.alphas),
                         it.n_samples, cfg.seed)
    write_json(os.path.join(out, "interference.json"),
               {"channel": ich.to_dict(), "alphas": list(it.alphas), "base": it.base, **rep.to_dict()})
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    cfg.validate()
    print(json.dumps(_num(cfg.to_json()), indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"mi-curve": cmd_mi_curve, "capacity": cmd_capacity, "audit": cmd_audit,
            "lemma1": cmd_lemma1, "interference": cmd_interference, "validate": cmd_validate}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capx", description=(
        "Capacity-cost experiments for nonlinear scalar channels with additive Gaussian noise."))
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes (default: available CPUs)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    common.add_argument("--powers", help="comma-separated powers, overriding the config grid")
    helps = {"mi-curve": "mutual information of named inputs over a power grid",
             "capacity": "capacity sweep with achievers and a monotonicity audit",
             "audit": "time-sharing bound checks (and optional curve audit)",
             "lemma1": "exact conditioning-gap check on random finite joints",
             "interference": "time-sharing bound with k users treating interference as noise",
             "validate": "check a config file and print it normalized"}
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "mi-curve":
            p.add_argument("--dist", action="append", help="distribution name (repeatable)")
    return parser


def _apply_args(cfg: ExperimentConfig, args) -> ExperimentConfig:
    kw = {}
    if args.command in SUBCOMMANDS:
        kw["kind"] = SUBCOMMANDS[args.command]
    if args.out is not None:
        kw["out"] = args.out
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.powers is not None:
        try:
            vals = tuple(float(v) for v in args.powers.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"invalid --powers: {exc}") from exc
        kw["powers"] = PowerGrid(values=vals)
    if getattr(args, "dist", None) is not None:
        kw["distributions"] = tuple(args.dist)
    return replace(cfg, **kw)


def _setup_logging():
    level = os.environ.get("CAPX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = _apply_args(load_config(args.config), args)
        if args.command != "validate":
            cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"capx: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
