"""Command line entry point: ``uvlc-diffusion <verb> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .channel import DEFAULT_TABLE, write_table_csv
from .experiments import BUILTIN, AXES, ExperimentSpec, SpecError, format_tables, load_spec, run_experiment


def _global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config (or a bundle's meta.json)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--ensemble", type=int, help="number of independent runs")
    p.add_argument("--paper-literal", action="store_true", help="use mu_x = -sigma_x^2/2 instead of unit-mean links")
    p.add_argument("--workers", type=int, default=1, help="threads for ensemble batches (results do not change)")
    p.add_argument("--batch-size", type=int, default=50, help="runs advanced together (results do not change)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uvlc-diffusion", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_ in [
        ("simulate", "run the Monte-Carlo simulation for a config"),
        ("theory", "CTA steady-state prediction for a config"),
        ("sweep", "steady-state sweep along one axis"),
    ]:
        p = sub.add_parser(verb, help=help_)
        _global_flags(p)
        if verb == "sweep":
            p.add_argument("--axis", choices=AXES, help="sweep axis (overrides the config)")
            p.add_argument("--values", help="comma separated values; water points as T:S")
    p = sub.add_parser("tables", help="print the embedded variance tables")
    p.add_argument("--export", type=Path, help="write distance.csv and water.csv into this directory")
    p = sub.add_parser("reproduce", help="run a built-in figure experiment")
    p.add_argument("figure", choices=sorted(BUILTIN, key=lambda s: int(s[3:])))
    _global_flags(p)
    return parser


def _resolve(args, base: ExperimentSpec | None = None) -> ExperimentSpec:
    if args.config is not None:
        spec = load_spec(args.config)
    elif base is not None:
        spec = base
    else:
        raise SpecError("--config is required (seed must be explicit)")
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.ensemble is not None:
        kw["ensemble"] = args.ensemble
    if args.paper_literal:
        kw["normalization"] = "paper_literal"
    if getattr(args, "axis", None):
        kw["sweep_axis"] = args.axis
    if getattr(args, "values", None):
        axis = kw.get("sweep_axis", spec.sweep_axis)
        if axis == "water":
            kw["sweep_values"] = tuple(tuple(float(x) for x in v.split(":")) for v in args.values.split(","))
        else:
            kw["sweep_values"] = tuple(float(v) for v in args.values.split(","))
    return spec.replace(**kw) if kw else spec


def _print_summary(res: dict) -> None:
    for entry in res["points"]:
        label = entry["label"] or "-"
        for strat, r in entry["strategies"].items():
            print(f"{label:>16} {strat.upper()}  steady-state network MSD {r['steady'].network_db:8.2f} dB")
        th = entry.get("theory")
        if th is not None:
            val = f"{th.network_db:8.2f} dB" if th.stable else f"unstable (rho = {th.spectral_radius:.4f})"
            print(f"{label:>16} CTA  theory                    {val}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "tables":
            print(format_tables(), end="")
            if args.export:
                args.export.mkdir(parents=True, exist_ok=True)
                write_table_csv(DEFAULT_TABLE, args.export / "distance.csv", args.export / "water.csv")
            return 0
        base = BUILTIN[args.figure] if args.verb == "reproduce" else None
        spec = _resolve(args, base)
        out = args.out
        if args.verb == "theory":
            spec = spec.replace(theory=True, strategies=("cta",))
            res = run_experiment(spec, None, simulate=False)
            preds = [{"label": e["label"], "sigma_x2": e["sigma_x2"], **e["theory"].to_dict()} for e in res["points"]]
            text = json.dumps(preds, indent=2, sort_keys=True) + "\n"
            if out is not None:
                out.mkdir(parents=True, exist_ok=True)
                (out / "theory.json").write_text(text)
                (out / "meta.json").write_text(json.dumps(res["meta"], indent=2, sort_keys=True) + "\n")
            _print_summary(res)
            return 0
        if args.verb == "sweep" and spec.sweep_axis is None:
            raise SpecError("sweep needs --axis/--values or a config with sweep_axis")
        res = run_experiment(spec, out, workers=args.workers, batch_size=args.batch_size)
        _print_summary(res)
        if out is not None:
            print(f"wrote {out}")
        return 0
    except (SpecError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
