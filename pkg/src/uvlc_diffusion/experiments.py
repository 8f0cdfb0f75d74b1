"""
Experiment orchestration: built-in figure configurations, sweeps and result bundles.

A bundle directory holds

* ``meta.json``        resolved spec, data model, topology and seeds (rerunnable)
* ``steady_state.csv`` steady-state MSD per strategy, sweep point and node
* ``summary.csv``      one network-level row per sweep point and strategy
* ``theory.json``      CTA steady-state predictions (when requested)
* ``<point>/<strategy>/trace.csv`` and ``network_trace.csv``
* ``plot.gp``          gnuplot script for the learning curves
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .channel import (
    CLEAR_OCEAN,
    DEFAULT_TABLE,
    FadingModel,
    LinkGeometry,
    Normalization,
    VarianceTable,
    lookup_variance_by_distance,
    lookup_variance_by_water,
    path_loss,
)
from .diffusion import (
    PROFILE_STREAM,
    DataModel,
    RunConfig,
    Strategy,
    default_truth,
    run_monte_carlo,
    steady_state_msd,
    substream,
    write_trace_csv,
)
from .network import (
    CombinationMatrix,
    Topology,
    fading_from_distances,
    generate_topology,
    load_topology,
    uniform_fading,
    uniform_weights,
)
from .steady_state import error_recursion_moments, predict_msd

PLOT_FLOOR_DB = -80.0
AXES = ("distance", "water", "step_size", "link_noise")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to run one experiment; see README for the JSON schema.

    The link variance comes from exactly one of ``water`` (a water-table key),
    ``sigma_x2`` (explicit) or ``distance`` (a distance-table key). With
    ``per_link_distance`` each link instead takes the distance-table value at its own
    length in the generated or loaded topology.
    """

    name: str
    seed: int
    strategies: tuple[str, ...] = ("atc", "cta")
    water: tuple[float, float] | None = None
    sigma_x2: float | None = None
    distance: float | None = 1.0
    per_link_distance: bool = False
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    theory: bool = False
    iterations: int = 600
    window: int = 200
    ensemble: int = 200
    step_size: float = 0.2
    link_noise: float = 3e-3
    noise_range: tuple[float, float] = (1e-5, 1e-4)
    trace_range: tuple[float, float] = (1.0, 2.0)
    dim: int = 4
    nodes: int = 20
    radius: float = 8.0
    area: float = 100.0
    topology_seed: int = 0
    topology_file: str | None = None
    normalization: str = "unit_mean"
    fold_path_loss: bool = False

    def __post_init__(self):
        strategies = tuple(Strategy(s).value for s in self.strategies)
        if not strategies:
            raise SpecError("at least one strategy is required")
        object.__setattr__(self, "strategies", strategies)
        Normalization(self.normalization)
        if self.water is not None:
            object.__setattr__(self, "water", tuple(float(x) for x in self.water))
            lookup_variance_by_water(DEFAULT_TABLE, *self.water)
        if self.distance is not None and self.water is None and self.sigma_x2 is None and not self.per_link_distance:
            lookup_variance_by_distance(DEFAULT_TABLE, self.distance)
        if self.sweep_axis is not None:
            if self.sweep_axis not in AXES:
                raise SpecError(f"unknown sweep axis {self.sweep_axis!r}; choose from {AXES}")
            if not self.sweep_values:
                raise SpecError("sweep needs at least one value")
            vals = tuple(tuple(float(x) for x in v) if self.sweep_axis == "water" else float(v) for v in self.sweep_values)
            object.__setattr__(self, "sweep_values", vals)
            for v in vals:
                if self.sweep_axis == "distance":
                    lookup_variance_by_distance(DEFAULT_TABLE, v)
                elif self.sweep_axis == "water":
                    lookup_variance_by_water(DEFAULT_TABLE, *v)
        if self.theory and "cta" not in strategies:
            raise SpecError("theory is only available for the CTA strategy")
        if not 1 <= self.window <= self.iterations:
            raise SpecError("window must lie in [1, iterations]")
        if self.ensemble < 1 or self.iterations < 1:
            raise SpecError("ensemble and iterations must be positive")

    # -- (de)serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise SpecError(f"unknown config keys: {', '.join(unknown)}")
        if "seed" not in d:
            raise SpecError("config must set 'seed'")
        d = dict(d)
        for k in ("strategies", "sweep_values", "noise_range", "trace_range", "water"):
            if d.get(k) is not None:
                d[k] = tuple(tuple(x) if isinstance(x, list) else x for x in d[k])
        return cls(**d)

    def replace(self, **kw) -> "ExperimentSpec":
        return dataclasses.replace(self, **kw)


def load_spec(path: str | Path) -> ExperimentSpec:
    """Read a JSON config; a bundle's ``meta.json`` is accepted too."""
    doc = json.loads(Path(path).read_text())
    if "spec" in doc and "data_model" in doc:
        doc = doc["spec"]
    return ExperimentSpec.from_dict(doc)


_WATER = [tuple(r[:2]) for r in DEFAULT_TABLE.by_water]

BUILTIN: dict[str, ExperimentSpec] = {
    "fig5": ExperimentSpec("fig5", seed=1, water=(1, 35)),
    "fig6": ExperimentSpec("fig6", seed=1, strategies=("atc",), sweep_axis="water", sweep_values=tuple(_WATER)),
    "fig7": ExperimentSpec("fig7", seed=1, strategies=("cta",), sweep_axis="water", sweep_values=tuple(_WATER)),
    "fig8": ExperimentSpec("fig8", seed=1, sweep_axis="distance", sweep_values=(1, 5, 10, 15, 20)),
    "fig9": ExperimentSpec(
        "fig9", seed=1, strategies=("cta",), theory=True, ensemble=500,
        sweep_axis="distance", sweep_values=(5, 10, 15, 20),
    ),
    "fig10": ExperimentSpec("fig10", seed=1, strategies=("cta",), theory=True, ensemble=500, water=(1, 35)),
}


# ---------------------------------------------------------------------------
# resolution


@dataclass
class Setup:
    topo: Topology
    C: CombinationMatrix
    model: DataModel
    truth: np.ndarray


def build_setup(spec: ExperimentSpec) -> Setup:
    if spec.topology_file:
        topo = load_topology(spec.topology_file)
    else:
        topo = generate_topology(spec.nodes, spec.radius, spec.area, spec.topology_seed)
    model = DataModel.random_profile(
        topo.n_nodes,
        spec.dim,
        substream(spec.seed, PROFILE_STREAM),
        noise_range=spec.noise_range,
        trace_range=spec.trace_range,
        link_noise=spec.link_noise,
    )
    return Setup(topo, uniform_weights(topo), model, default_truth(spec.dim))


def points(spec: ExperimentSpec) -> list[tuple[str, ExperimentSpec]]:
    """``(label, single-point spec)`` for every sweep point, sorted by axis value."""
    if spec.sweep_axis is None:
        return [("", spec)]
    out = []
    for v in sorted(spec.sweep_values):
        if spec.sweep_axis == "distance":
            s = spec.replace(distance=v, water=None, sigma_x2=None)
        elif spec.sweep_axis == "water":
            s = spec.replace(water=v, sigma_x2=None)
        else:
            s = spec.replace(**{spec.sweep_axis: v})
        s = s.replace(sweep_axis=None, sweep_values=())
        out.append((f"{spec.sweep_axis}={_label(v)}", s))
    return out


def _label(v) -> str:
    if isinstance(v, tuple):
        return "_".join(f"{x:g}" for x in v)
    return f"{v:g}"


def link_variance(spec: ExperimentSpec) -> float | None:
    if spec.per_link_distance:
        return None
    if spec.sigma_x2 is not None:
        return float(spec.sigma_x2)
    if spec.water is not None:
        return lookup_variance_by_water(DEFAULT_TABLE, *spec.water)
    return lookup_variance_by_distance(DEFAULT_TABLE, spec.distance)


def fading_map(spec: ExperimentSpec, topo: Topology, table: VarianceTable = DEFAULT_TABLE):
    norm = Normalization(spec.normalization)
    s2 = link_variance(spec)
    if s2 is None:
        fad = fading_from_distances(topo, table, norm)
    else:
        fad = uniform_fading(topo, FadingModel(s2, norm))
    if spec.fold_path_loss:
        out = {}
        for kl, m in fad.items():
            d = topo.distances[kl] if spec.per_link_distance else (spec.distance or topo.distances[kl])
            g = path_loss(LinkGeometry(d), CLEAR_OCEAN)
            out[kl] = FadingModel(m.sigma_x2, m.normalization, mean_gain=g)
        fad = out
    return fad


def run_config(spec: ExperimentSpec, strategy: str) -> RunConfig:
    return RunConfig(strategy, spec.step_size, spec.iterations, spec.ensemble, spec.seed)


# ---------------------------------------------------------------------------
# running


def _fmt(x: float) -> str:
    return repr(float(x))


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    workers: int = 1,
    batch_size: int = 50,
    simulate: bool = True,
) -> dict[str, Any]:
    """Run every point and strategy; write a bundle when ``out_dir`` is given.

    Every point and strategy reuses the same run streams (common random
    numbers), so differences between points are not masked by sampling noise.
    """
    setup = build_setup(spec)
    results: dict[str, Any] = {"points": []}
    for label, ps in points(spec):
        fad = fading_map(ps, setup.topo)
        entry: dict[str, Any] = {"label": label, "sigma_x2": link_variance(ps), "strategies": {}}
        if ps.sweep_axis is None and spec.sweep_axis is not None:
            entry["axis_value"] = getattr(ps, spec.sweep_axis)
        if simulate:
            for strat in spec.strategies:
                trace = run_monte_carlo(
                    run_config(ps, strat), setup.topo, setup.C, fad, setup.model, setup.truth,
                    batch_size=batch_size, workers=workers,
                )
                entry["strategies"][strat] = {"trace": trace, "steady": steady_state_msd(trace, ps.window)}
        if spec.theory:
            ms = error_recursion_moments(setup.topo, setup.C, fad, setup.model, run_config(ps, "cta"), setup.truth)
            entry["theory"] = predict_msd(ms)
        results["points"].append(entry)
    results["meta"] = {
        "spec": spec.to_dict(),
        "data_model": setup.model.to_dict(),
        "truth": setup.truth.tolist(),
        "topology": {
            "links": [[k + 1, l + 1, setup.topo.distances[(k, l)]] for k, l in setup.topo.links()],
            "positions": None if setup.topo.positions is None else setup.topo.positions.tolist(),
        },
        "streams": {"run": "SeedSequence(seed, spawn_key=(0, run))", "profile": "SeedSequence(seed, spawn_key=(1,))"},
    }
    if out_dir is not None:
        write_bundle(spec, results, Path(out_dir))
    return results


def write_bundle(spec: ExperimentSpec, results: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.json").write_text(json.dumps(results["meta"], indent=2, sort_keys=True) + "\n")
    axis = spec.sweep_axis or "point"
    ss_rows, summary_rows, theory = [], [], []
    curves = []
    for entry in results["points"]:
        value = _label(entry["axis_value"]) if "axis_value" in entry else ""
        for strat, r in entry["strategies"].items():
            sub = out / entry["label"] / strat if entry["label"] else out / strat
            sub.mkdir(parents=True, exist_ok=True)
            write_trace_csv(r["trace"], sub / "trace.csv", sub / "network_trace.csv")
            curves.append((f"{strat.upper()} {entry['label']}".strip(), (sub / "network_trace.csv").relative_to(out)))
            st = r["steady"]
            ss_rows.append([strat, value, "network", _fmt(st.network), _fmt(st.network_db)])
            for k in range(len(st.node)):
                ss_rows.append([strat, value, str(k + 1), _fmt(st.node[k]), _fmt(st.node_db[k])])
            th = entry.get("theory")
            summary_rows.append([axis, value, strat, _fmt(st.network_db),
                                 _fmt(th.network_db) if th is not None and strat == "cta" and th.stable else ""])
        if "theory" in entry:
            th = entry["theory"]
            theory.append({"label": entry["label"], "sigma_x2": entry["sigma_x2"], **th.to_dict()})
    if ss_rows:
        with open(out / "steady_state.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["strategy", axis, "node", "msd", "msd_db"])
            w.writerows(ss_rows)
        with open(out / "summary.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["axis", "value", "strategy", "network_msd_db", "theory_db"])
            w.writerows(summary_rows)
    if spec.theory:
        (out / "theory.json").write_text(json.dumps(theory, indent=2, sort_keys=True) + "\n")
    (out / "plot.gp").write_text(plot_script(spec.name, curves, theory))


def plot_script(title: str, curves, theory) -> str:
    lines = [
        "# gnuplot script; run from the bundle directory: gnuplot -p plot.gp",
        "set datafile separator ','",
        f"set title '{title}'",
        "set xlabel 'iteration'",
        "set ylabel 'network MSD (dB)'",
        "set key outside right",
        f"floor(x) = (x > 0 ? (10*log10(x) > {PLOT_FLOOR_DB:g} ? 10*log10(x) : {PLOT_FLOOR_DB:g}) : {PLOT_FLOOR_DB:g})",
    ]
    parts = [f"'{path.as_posix()}' every ::1 using 1:(floor($2)) with lines title '{name}'" for name, path in curves]
    for th in theory:
        if th.get("stable"):
            parts.append(f"{max(th['network_msd_db'], PLOT_FLOOR_DB)!r} with lines dashtype 2 title 'theory {th['label']}'")
    if parts:
        lines.append("plot " + ", \\\n     ".join(parts))
    return "\n".join(lines) + "\n"


def sweep(spec: ExperimentSpec, out_dir: str | Path | None = None, **kw) -> list[dict]:
    """Steady-state rows ``{axis, value, strategy, network_db[, theory_db]}`` sorted by axis value."""
    if spec.sweep_axis is None:
        raise SpecError("spec has no sweep axis")
    res = run_experiment(spec, out_dir, **kw)
    rows = []
    for entry in res["points"]:
        for strat, r in entry["strategies"].items():
            row = {"axis": spec.sweep_axis, "value": entry["axis_value"], "strategy": strat,
                   "network_db": r["steady"].network_db}
            if "theory" in entry and strat == "cta" and entry["theory"].stable:
                row["theory_db"] = entry["theory"].network_db
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# tables


def _sci(x: float) -> str:
    mant, exp = f"{x:.6e}".split("e")
    mant = mant.rstrip("0").rstrip(".")
    return f"{mant}e{int(exp)}"


def format_tables(table: VarianceTable = DEFAULT_TABLE) -> str:
    lines = ["log-amplitude variance by node distance", "distance_m, sigma_x2"]
    lines += [f"{d:g}, {_sci(s)}" for d, s in table.by_distance]
    lines += ["", "log-amplitude variance by water temperature and salinity", "temp_c, salinity_ppt, sigma_x2"]
    lines += [f"{t:g}, {s:g}, {_sci(v)}" for t, s, v in table.by_water]
    return "\n".join(lines) + "\n"


def list_tables(table: VarianceTable = DEFAULT_TABLE) -> None:
    print(format_tables(table), end="")
