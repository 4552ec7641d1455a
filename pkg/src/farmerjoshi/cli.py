"""Command-line workbench tying ingestion, simulation, weighting,
calibration, and report generation together.

Commands:

* ``simulate``  - run one simulation, write the path CSV and a moment summary
* ``calibrate`` - fit parameters to an empirical daily-close CSV
* ``report``    - plot-ready CSVs from repeated simulations at a fitted theta
* ``surface``   - objective values over a 2-parameter grid

Every command is deterministic given its configuration and seeds; every
output file carries a metadata block echoing the config hash and seeds.
A JSON config file can supply any flag's value; explicit flags win.
Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from farmerjoshi import report as report_mod
from farmerjoshi.calibration import (
    CalibrationError,
    ObjectiveConfig,
    ParameterSpace,
    make_objective,
    run_optimizer,
    run_replications,
    summarize_replications,
    surface_scan,
)
from farmerjoshi.data_io import (
    PriceDataError,
    ReturnSeries,
    load_price_series,
    log_returns,
)
from farmerjoshi.market import (
    DEFAULT_PARAMETERS,
    BlowUpError,
    ModelParameters,
    ParameterError,
    simulate,
)
from farmerjoshi.optimize import GAParams, NMTAParams
from farmerjoshi.stats import StatisticError, moment_vector
from farmerjoshi.weighting import (
    WeightMatrix,
    WeightingError,
    cache_key,
    estimate_weight_matrix,
)

logger = logging.getLogger("farmerjoshi")

OUTPUT_DIR_ENV = "FARMERJOSHI_OUT"

_INT_PARAM_FIELDS = {"n_traders", "d_min", "d_max", "horizon"}


class UsageError(Exception):
    """Input/validation problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path: Path, rows, meta: dict) -> None:
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}: {meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    _write_atomic(path, buf.getvalue())


def write_json(path: Path, doc: dict, meta: dict) -> None:
    _write_atomic(path, json.dumps({"meta": meta, **doc}, sort_keys=True, indent=1))


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _meta(resolved: dict) -> dict:
    return {"config_hash": config_hash(resolved), "seed": resolved.get("seed")}


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, overlaid by config-file values, overlaid by explicit flags."""
    given = {k: v for k, v in vars(args).items()
             if k not in ("handler", "command", "defaults")}
    resolved = dict(defaults)
    config_path = given.pop("config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            file_cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    resolved.update(given)
    resolved.pop("config", None)
    return resolved


def _out_dir(resolved: dict) -> Path:
    out = resolved.get("out") or os.environ.get(OUTPUT_DIR_ENV) or "farmerjoshi-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    resolved["out"] = str(path)
    return path


def _load_empirical(path_str: str) -> tuple[np.ndarray, ReturnSeries]:
    if not path_str:
        raise UsageError("an empirical price CSV is required (--empirical)")
    path = Path(path_str)
    if not path.exists():
        raise UsageError(f"empirical price file not found: {path}")
    prices = load_price_series(path)
    return np.log(prices.closes), log_returns(prices)


def _parse_params(resolved: dict) -> ModelParameters:
    values = dataclasses.asdict(DEFAULT_PARAMETERS)
    if resolved.get("params"):
        path = Path(resolved["params"])
        if not path.exists():
            raise UsageError(f"parameter file not found: {path}")
        doc = json.loads(path.read_text())
        unknown = set(doc) - set(values)
        if unknown:
            raise UsageError(f"unknown parameter fields: {sorted(unknown)}")
        values.update(doc)
    for item in resolved.get("set") or []:
        if "=" not in item:
            raise UsageError(f"--set expects name=value, got {item!r}")
        name, _, raw = item.partition("=")
        name = name.strip()
        if name not in values:
            raise UsageError(f"unknown parameter {name!r}; valid: {sorted(values)}")
        values[name] = float(raw)
    for name in _INT_PARAM_FIELDS:
        values[name] = int(round(values[name]))
    try:
        return ModelParameters(**values)
    except ParameterError as exc:
        raise UsageError(f"invalid parameters: {exc}") from None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args, defaults) -> int:
    resolved = _resolve(args, defaults)
    if resolved["days"] < 1:
        raise UsageError("--days must be >= 1")
    out = _out_dir(resolved)
    params = _parse_params(resolved)
    meta = _meta(resolved)

    output = simulate(params, resolved["variant"], resolved["days"],
                      p0=resolved["p0"], seed=resolved["seed"])
    write_csv(out / "simulation.csv", output.to_csv_rows(), meta)

    sim_returns = ReturnSeries(output.log_returns)
    if resolved.get("empirical"):
        _, emp_returns = _load_empirical(resolved["empirical"])
    else:
        emp_returns = sim_returns
    try:
        moments = moment_vector(sim_returns, emp_returns).to_dict()
        moment_error = None
    except StatisticError as exc:
        moments, moment_error = None, str(exc)
    write_json(out / "summary.json", {
        "variant": resolved["variant"],
        "days": resolved["days"],
        "parameters": dataclasses.asdict(params),
        "moments": moments,
        "moment_error": moment_error,
    }, meta)
    logger.info("wrote %s and %s", out / "simulation.csv", out / "summary.json")
    return 0


# ---------------------------------------------------------------------------
# calibrate / surface shared setup
# ---------------------------------------------------------------------------

def _weight_matrix(resolved: dict, emp_returns: ReturnSeries, out: Path) -> WeightMatrix:
    if resolved.get("weights"):
        path = Path(resolved["weights"])
        if not path.exists():
            raise UsageError(f"weight matrix file not found: {path}")
        return WeightMatrix.load(path)
    block = resolved["block_len"]
    reps = resolved["bootstrap_replicates"]
    seed = resolved["bootstrap_seed"]
    cache_dir = Path(resolved.get("cache_dir") or (out / "weights-cache"))
    cache_dir.mkdir(parents=True, exist_ok=True)
    cached = cache_dir / f"weights-{cache_key(emp_returns, block, reps, seed)}.json"
    if cached.exists():
        logger.info("using cached weight matrix %s", cached)
        return WeightMatrix.load(cached)
    if not resolved.get("bootstrap"):
        raise UsageError(
            f"no cached weight matrix at {cached}; pass --bootstrap to build one "
            "or --weights FILE to load one")
    logger.info("bootstrapping weight matrix (block=%d, replicates=%d)", block, reps)
    wm = estimate_weight_matrix(emp_returns, block, reps, seed)
    _write_atomic(cached, wm.to_json())
    return wm


def _objective_setup(resolved: dict, out: Path, include_inert: bool = False):
    emp_log_prices, emp_returns = _load_empirical(resolved.get("empirical"))
    if resolved.get("bounds"):
        space = ParameterSpace.with_bounds_file(resolved["variant"], resolved["bounds"])
        if include_inert:
            space = ParameterSpace(resolved["variant"], bounds=space.bounds,
                                   include_inert=True)
    else:
        space = ParameterSpace(resolved["variant"], include_inert=include_inert)
    weight = _weight_matrix(resolved, emp_returns, out)
    try:
        emp_moments = moment_vector(emp_returns, emp_returns).as_array()
    except StatisticError as exc:
        raise UsageError(f"empirical series too degenerate to calibrate: {exc}") from None
    cfg = ObjectiveConfig(
        space=space,
        empirical_returns=emp_returns,
        empirical_moments=emp_moments,
        weight=weight,
        replications=resolved["objective_sims"],
        sim_days=resolved["sim_days"] or len(emp_returns),
        p0=float(emp_log_prices[0]),
        master_seed=resolved["objective_seed"],
        penalty=resolved["penalty"],
    )
    return cfg, space, weight


def _optimizer_params(resolved: dict):
    ga = GAParams(
        population=resolved["population"],
        generations=resolved["generations"],
        crossover_rate=resolved["crossover_rate"],
        mutation_scale=resolved["mutation_scale"],
        elites=resolved["elites"],
    )
    thresholds = resolved.get("thresholds")
    if thresholds is not None:
        parts = [float(x) for x in str(thresholds).split(",")]
        thresholds = tuple(parts)
    nmta = NMTAParams(
        restarts=resolved["restarts"],
        max_iters=resolved["max_iters"],
        shift_every=resolved["shift_every"],
        shift_scale=resolved["shift_scale"],
        threshold_samples=resolved["threshold_samples"],
        thresholds=thresholds,
        penalty_cutoff=resolved["penalty"],
    )
    return ga, nmta


def _result_doc(result, space) -> dict:
    doc = {
        "optimizer": result.details.get("optimizer"),
        "variant": space.variant,
        "theta": {n: float(v) for n, v in zip(space.names, result.theta)},
        "fitness": result.fitness,
        "evaluations": result.evaluations,
        "optimizer_seed": result.seed,
    }
    if "thresholds" in result.details:
        doc["thresholds"] = result.details["thresholds"]
        doc["shift_events"] = result.details["events"]
    return doc


def _cmd_calibrate(args, defaults) -> int:
    resolved = _resolve(args, defaults)
    out = _out_dir(resolved)
    meta = _meta(resolved)
    cfg, space, weight = _objective_setup(resolved, out)
    objective = make_objective(cfg)
    ga_params, nmta_params = _optimizer_params(resolved)
    optimizer = resolved["optimizer"]

    def run_one(seed: int):
        return run_optimizer(optimizer, objective, space, seed,
                             ga_params=ga_params, nmta_params=nmta_params)

    replications = resolved["replications"]
    if replications and replications >= 2:
        logger.info("running %d replicate calibrations (%s)", replications, optimizer)
        results, run_seeds = run_replications(run_one, replications,
                                              seed=resolved["seed"])
        summary = summarize_replications(results, space, replications, run_seeds)
        write_csv(out / "replication_summary.csv", summary.rows(), meta)
        result = min(results, key=lambda r: r.fitness)
        logger.info("best of %d replications: fitness %.6g",
                    summary.runs_succeeded, result.fitness)
    else:
        logger.info("running %s calibration (seed %d)", optimizer, resolved["seed"])
        result = run_one(resolved["seed"])

    doc = _result_doc(result, space)
    doc["objective"] = {
        "replications": cfg.replications,
        "sim_days": cfg.sim_days,
        "master_seed": cfg.master_seed,
        "penalty": cfg.penalty,
        "p0": cfg.p0,
        "weight_metadata": weight.metadata,
        "empirical_moments": cfg.empirical_moments.tolist(),
    }
    write_json(out / "calibration.json", doc, meta)
    write_csv(out / "fitness_trace.csv",
              [("step", "best_fitness")] +
              [(i, repr(float(f))) for i, f in enumerate(result.trace)], meta)
    logger.info("final fitness %.6g after %d evaluations",
                result.fitness, result.evaluations)
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _load_calibration(path_str: str) -> tuple[str, dict]:
    if not path_str:
        raise UsageError("--calibration FILE is required")
    path = Path(path_str)
    if not path.exists():
        raise UsageError(f"calibration result not found: {path}")
    doc = json.loads(path.read_text())
    if "theta" not in doc or "variant" not in doc:
        raise UsageError(f"{path} does not look like a calibration result")
    return doc["variant"], doc["theta"]


def _cmd_report(args, defaults) -> int:
    resolved = _resolve(args, defaults)
    out = _out_dir(resolved)
    meta = _meta(resolved)
    variant, theta_by_name = _load_calibration(resolved.get("calibration"))
    emp_log_prices, emp_returns = _load_empirical(resolved.get("empirical"))

    values = {**dataclasses.asdict(DEFAULT_PARAMETERS), **theta_by_name}
    for name in _INT_PARAM_FIELDS:
        values[name] = int(round(values[name]))
    try:
        params = ModelParameters(**values)
    except ParameterError as exc:
        raise UsageError(f"calibration theta invalid: {exc}") from None

    sims = resolved["simulations"]
    days = resolved["days"] or len(emp_returns)
    if sims < 1 or days < 1:
        raise UsageError("--simulations and --days must be >= 1")
    seeds = np.random.SeedSequence(resolved["seed"]).generate_state(sims)
    p0 = float(emp_log_prices[0])
    outputs = [simulate(params, variant, days, p0=p0, seed=int(s)) for s in seeds]

    max_lag = resolved["max_lag"]
    write_csv(out / "price_paths.csv",
              report_mod.price_band_rows(outputs, emp_log_prices), meta)
    write_csv(out / "return_paths.csv",
              report_mod.return_path_rows(outputs, emp_returns), meta)
    write_csv(out / "acf.csv",
              report_mod.acf_rows(outputs, emp_returns, max_lag), meta)
    write_csv(out / "qq.csv",
              report_mod.qq_rows(outputs, emp_returns, resolved["qq_points"]), meta)
    write_csv(out / "strategy_series.csv",
              report_mod.strategy_series_rows(outputs[0]), meta)
    sim_moments = [moment_vector(ReturnSeries(o.log_returns), emp_returns)
                   for o in outputs]
    emp_moments = moment_vector(emp_returns, emp_returns)
    write_csv(out / "moments_table.csv",
              report_mod.moments_table_rows(sim_moments, emp_moments), meta)
    logger.info("wrote report tables to %s", out)
    return 0


# ---------------------------------------------------------------------------
# surface
# ---------------------------------------------------------------------------

def _cmd_surface(args, defaults) -> int:
    resolved = _resolve(args, defaults)
    out = _out_dir(resolved)
    meta = _meta(resolved)
    name_x, name_y = resolved["x"], resolved["y"]
    if not name_x or not name_y:
        raise UsageError("--x and --y parameter names are required")
    from farmerjoshi.calibration import PARAMETER_NAMES
    for name in (name_x, name_y):
        if name not in PARAMETER_NAMES:
            raise UsageError(f"unknown parameter {name!r}; valid names: "
                             f"{', '.join(PARAMETER_NAMES)}")
    # switching parameters may be swept for the standard variant too;
    # they leave its output unchanged (the surface comes out flat)
    inert = {"gamma", "horizon"}
    include_inert = (resolved["variant"] == "standard"
                     and bool({name_x, name_y} & inert))
    cfg, space, _ = _objective_setup(resolved, out, include_inert=include_inert)
    objective = make_objective(cfg)
    grid = str(resolved["grid"]).lower().split("x")
    try:
        grid_x, grid_y = (int(grid[0]), int(grid[1])) if len(grid) == 2 \
            else (int(grid[0]), int(grid[0]))
    except ValueError:
        raise UsageError(f"bad --grid spec {resolved['grid']!r}; use e.g. 10x10") from None

    if resolved.get("calibration"):
        _, theta_by_name = _load_calibration(resolved["calibration"])
        base = np.array([float(theta_by_name.get(n, dataclasses.asdict(
            DEFAULT_PARAMETERS)[n])) for n in space.names])
    else:
        base = (space.lower + space.upper) / 2.0
    base = space.repair(base)

    try:
        rows = surface_scan(objective, space, name_x, name_y, grid_x, grid_y, base)
    except CalibrationError as exc:
        raise UsageError(str(exc)) from None
    header = [(name_x, name_y, "fitness")]
    body = [(repr(x), repr(y), repr(f)) for x, y, f in rows]
    write_csv(out / "surface.csv", header + body, meta)
    logger.info("wrote %d surface points to %s", len(body), out / "surface.csv")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_COMMON_DEFAULTS = {"config": None, "out": None, "seed": 0}

_OBJECTIVE_DEFAULTS = {
    "empirical": None, "variant": "adaptive", "bounds": None, "weights": None,
    "bootstrap": False, "block_len": 100, "bootstrap_replicates": 1000,
    "bootstrap_seed": 0, "cache_dir": None, "objective_sims": 10,
    "objective_seed": 0, "sim_days": None, "penalty": 1e12,
}

SIMULATE_DEFAULTS = {**_COMMON_DEFAULTS, "variant": "adaptive", "days": 1000,
                     "p0": 0.0, "params": None, "set": None, "empirical": None}

CALIBRATE_DEFAULTS = {
    **_COMMON_DEFAULTS, **_OBJECTIVE_DEFAULTS,
    "optimizer": "ga", "replications": None,
    "population": 40, "generations": 100, "crossover_rate": 0.8,
    "mutation_scale": 0.1, "elites": 1,
    "max_iters": 250, "restarts": 1, "shift_every": 10, "shift_scale": 0.15,
    "threshold_samples": 100, "thresholds": None,
}

REPORT_DEFAULTS = {**_COMMON_DEFAULTS, "calibration": None, "empirical": None,
                   "simulations": 20, "days": None, "max_lag": 50,
                   "qq_points": 99}

SURFACE_DEFAULTS = {**_COMMON_DEFAULTS, **_OBJECTIVE_DEFAULTS,
                    "x": None, "y": None, "grid": "10x10", "calibration": None}


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; explicit flags win")
    sub.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} "
                     "or ./farmerjoshi-out)")
    sub.add_argument("--seed", type=int)


def _add_objective_flags(sub):
    sub.add_argument("--empirical", help="daily close CSV (date,close)")
    sub.add_argument("--variant", choices=["standard", "adaptive"])
    sub.add_argument("--bounds", help="JSON file overriding default parameter bounds")
    sub.add_argument("--weights", help="load weight matrix JSON instead of bootstrapping")
    sub.add_argument("--bootstrap", action="store_true",
                     help="build the weight matrix when not cached")
    sub.add_argument("--block-len", dest="block_len", type=int)
    sub.add_argument("--bootstrap-replicates", dest="bootstrap_replicates", type=int)
    sub.add_argument("--bootstrap-seed", dest="bootstrap_seed", type=int)
    sub.add_argument("--cache-dir", dest="cache_dir",
                     help="weight-matrix cache directory (default OUT/weights-cache)")
    sub.add_argument("--objective-sims", dest="objective_sims", type=int,
                     help="simulations averaged per fitness evaluation")
    sub.add_argument("--objective-seed", dest="objective_seed", type=int,
                     help="master seed of the common-random-number set")
    sub.add_argument("--sim-days", dest="sim_days", type=int,
                     help="simulated days per run (default: empirical length)")
    sub.add_argument("--penalty", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="farmerjoshi",
        description="Simulation and calibration workbench for threshold-trader "
                    "market models (standard and adaptive variants).")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="run one simulation",
                              argument_default=argparse.SUPPRESS)
    _add_common(sim)
    sim.add_argument("--variant", choices=["standard", "adaptive"])
    sim.add_argument("--days", type=int)
    sim.add_argument("--p0", type=float, help="initial log price")
    sim.add_argument("--params", help="JSON file with model parameter fields")
    sim.add_argument("--set", action="append", metavar="NAME=VALUE",
                     help="override one parameter (repeatable)")
    sim.add_argument("--empirical", help="optional daily close CSV for the "
                     "moment comparison")
    sim.set_defaults(handler=_cmd_simulate, defaults=SIMULATE_DEFAULTS)

    cal = commands.add_parser("calibrate", help="fit parameters to data",
                              argument_default=argparse.SUPPRESS)
    _add_common(cal)
    _add_objective_flags(cal)
    cal.add_argument("--optimizer", choices=["ga", "nmta", "nm"])
    cal.add_argument("--replications", type=int,
                     help="independent calibration runs for the 95%% intervals")
    cal.add_argument("--population", type=int)
    cal.add_argument("--generations", type=int)
    cal.add_argument("--crossover-rate", dest="crossover_rate", type=float)
    cal.add_argument("--mutation-scale", dest="mutation_scale", type=float)
    cal.add_argument("--elites", type=int)
    cal.add_argument("--max-iters", dest="max_iters", type=int)
    cal.add_argument("--restarts", type=int)
    cal.add_argument("--shift-every", dest="shift_every", type=int)
    cal.add_argument("--shift-scale", dest="shift_scale", type=float)
    cal.add_argument("--threshold-samples", dest="threshold_samples", type=int)
    cal.add_argument("--thresholds",
                     help="explicit threshold sequence, e.g. '0' or '0.5,0.2,0'")
    cal.set_defaults(handler=_cmd_calibrate, defaults=CALIBRATE_DEFAULTS)

    rep = commands.add_parser("report", help="plot-ready tables at a fitted theta",
                              argument_default=argparse.SUPPRESS)
    _add_common(rep)
    rep.add_argument("--calibration", help="calibration.json from `calibrate`")
    rep.add_argument("--empirical", help="daily close CSV (date,close)")
    rep.add_argument("--simulations", type=int)
    rep.add_argument("--days", type=int, help="default: empirical length")
    rep.add_argument("--max-lag", dest="max_lag", type=int)
    rep.add_argument("--qq-points", dest="qq_points", type=int)
    rep.set_defaults(handler=_cmd_report, defaults=REPORT_DEFAULTS)

    surf = commands.add_parser("surface", help="2-parameter objective surface",
                               argument_default=argparse.SUPPRESS)
    _add_common(surf)
    _add_objective_flags(surf)
    surf.add_argument("--x", help="first parameter name")
    surf.add_argument("--y", help="second parameter name")
    surf.add_argument("--grid", help="grid spec, e.g. 10x10")
    surf.add_argument("--calibration", help="calibration.json supplying the "
                      "fixed base theta (default: bound midpoints)")
    surf.set_defaults(handler=_cmd_surface, defaults=SURFACE_DEFAULTS)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args, args.defaults)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PriceDataError, ParameterError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, StatisticError, WeightingError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
