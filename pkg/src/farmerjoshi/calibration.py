"""Moment-matching objective and calibration drivers.

The objective is the weighted quadratic form G' W G, where G is the mean
deviation of the simulated moment vectors from the empirical one over I
simulations. The same fixed seed set is used for every candidate theta
(common random numbers), which makes the objective a deterministic
function of theta; runs that blow up or whose statistics degenerate map
to a large penalty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from farmerjoshi.data_io import ReturnSeries
from farmerjoshi.market import BlowUpError, ModelParameters, ParameterError, simulate
from farmerjoshi.optimize import (
    CalibrationResult,
    GAParams,
    NMTAParams,
    ga_optimize,
    nm_optimize,
    nmta_optimize,
)
from farmerjoshi.stats import StatisticError, moment_vector
from farmerjoshi.weighting import WeightMatrix

PENALTY_FITNESS = 1e12

#: Free parameters in calibration order; the last two are adaptive-only.
PARAMETER_NAMES = (
    "n_traders", "lam", "a", "d_min", "d_max", "mu_eta", "sigma_eta",
    "sigma_zeta", "T_min", "T_max", "tau_min", "tau_max", "v_min", "v_max",
    "gamma", "horizon",
)

INTEGRAL_PARAMETERS = frozenset({"n_traders", "d_min", "d_max", "horizon"})

#: Default box constraints. The exit-threshold box sits strictly below
#: the entry-threshold box and the lag boxes are nested so the
#: cross-constraints hold everywhere on the grid.
DEFAULT_BOUNDS = {
    "n_traders": (10, 100),
    "lam": (5.0, 50.0),
    "a": (0.1, 5.0),
    "d_min": (1, 25),
    "d_max": (10, 60),
    "mu_eta": (-0.001, 0.001),
    "sigma_eta": (0.0, 0.05),
    "sigma_zeta": (0.001, 0.03),
    "T_min": (0.05, 0.15),
    "T_max": (0.15, 0.60),
    "tau_min": (0.0, 0.02),
    "tau_max": (0.02, 0.049),
    "v_min": (-0.5, 0.0),
    "v_max": (0.0, 0.5),
    "gamma": (0.001, 0.5),
    "horizon": (5, 100),
}

#: Ordered (low, high) pairs that must satisfy low <= high per candidate.
_ORDERED_PAIRS = (("d_min", "d_max"), ("T_min", "T_max"),
                  ("tau_min", "tau_max"), ("v_min", "v_max"))


class CalibrationError(RuntimeError):
    """Raised when a calibration step cannot proceed."""


@dataclass(frozen=True)
class ParameterSpace:
    """Free-parameter vector layout, box bounds, and feasibility repair.

    The standard variant omits the switching parameters from the vector;
    ``include_inert=True`` keeps them in the layout anyway (they do not
    affect standard-variant output), which lets surface scans sweep them.
    """

    variant: str
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    include_inert: bool = False

    def __post_init__(self):
        if self.variant not in ("standard", "adaptive"):
            raise CalibrationError(f"unknown variant {self.variant!r}")
        missing = [n for n in self.names if n not in self.bounds]
        if missing:
            raise CalibrationError(f"bounds missing for {missing}")
        for lo_name, hi_name in _ORDERED_PAIRS:
            if self.bounds[lo_name][0] > self.bounds[hi_name][1]:
                raise CalibrationError(f"bounds forbid {lo_name} <= {hi_name}")
        if self.bounds["tau_max"][1] >= self.bounds["T_min"][0]:
            raise CalibrationError("tau_max upper bound must sit below "
                                   "T_min lower bound")

    @property
    def names(self) -> tuple:
        if self.variant == "adaptive" or self.include_inert:
            return PARAMETER_NAMES
        return PARAMETER_NAMES[:-2]

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def lower(self) -> np.ndarray:
        return np.array([float(self.bounds[n][0]) for n in self.names])

    @property
    def upper(self) -> np.ndarray:
        return np.array([float(self.bounds[n][1]) for n in self.names])

    @property
    def integral_mask(self) -> np.ndarray:
        return np.array([n in INTEGRAL_PARAMETERS for n in self.names])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise CalibrationError(
                f"unknown parameter {name!r}; valid names: {', '.join(self.names)}"
            ) from None

    def repair(self, theta: np.ndarray) -> np.ndarray:
        """Clip to bounds, round integrals, and order constrained pairs."""
        theta = np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)
        mask = self.integral_mask
        theta[mask] = np.rint(theta[mask])
        for lo_name, hi_name in _ORDERED_PAIRS:
            i, j = self.index(lo_name), self.index(hi_name)
            if theta[i] > theta[j]:
                theta[i], theta[j] = theta[j], theta[i]
        return theta

    def validate(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise CalibrationError(f"theta must have shape ({self.dim},)")
        if np.any(theta < self.lower - 1e-12) or np.any(theta > self.upper + 1e-12):
            raise CalibrationError("theta violates its bounds")
        if not np.array_equal(self.repair(theta.copy()), theta):
            raise CalibrationError("theta violates integrality or ordering constraints")

    def to_model_parameters(self, theta: np.ndarray) -> ModelParameters:
        values = dict(zip(self.names, theta))
        for name in INTEGRAL_PARAMETERS & set(values):
            values[name] = int(round(values[name]))
        if self.variant == "standard":
            values.setdefault("gamma", 0.05)
            values.setdefault("horizon", 50)
        return ModelParameters(**values)

    def from_model_parameters(self, params: ModelParameters) -> np.ndarray:
        return np.array([float(getattr(params, n)) for n in self.names])

    def bounds_json(self) -> str:
        return json.dumps({n: list(self.bounds[n]) for n in self.names},
                          sort_keys=True)

    @classmethod
    def with_bounds_file(cls, variant: str, path) -> "ParameterSpace":
        overrides = json.loads(Path(path).read_text())
        bounds = dict(DEFAULT_BOUNDS)
        bounds.update({k: tuple(v) for k, v in overrides.items()})
        return cls(variant=variant, bounds=bounds)


@dataclass(frozen=True)
class ObjectiveConfig:
    """Everything a fitness evaluation needs besides theta."""

    space: ParameterSpace
    empirical_returns: ReturnSeries
    empirical_moments: np.ndarray  # (k,)
    weight: WeightMatrix
    replications: int = 10  # I simulations per evaluation
    sim_days: int = 1000
    p0: float = 0.0
    master_seed: int = 0
    penalty: float = PENALTY_FITNESS

    def __post_init__(self):
        if self.replications < 1:
            raise CalibrationError("replications must be >= 1")
        if self.sim_days < 1:
            raise CalibrationError("sim_days must be >= 1")
        object.__setattr__(self, "empirical_moments",
                           np.asarray(self.empirical_moments, dtype=float))

    @property
    def sim_seeds(self) -> np.ndarray:
        """The common-random-number seed set shared by every theta."""
        return np.random.SeedSequence(self.master_seed).generate_state(
            self.replications)


def _simulated_moments(cfg: ObjectiveConfig, theta: np.ndarray, seed: int) -> np.ndarray:
    params = cfg.space.to_model_parameters(theta)
    out = simulate(params, cfg.space.variant, cfg.sim_days, p0=cfg.p0, seed=seed)
    return moment_vector(ReturnSeries(out.log_returns), cfg.empirical_returns).as_array()


def estimation_error(theta, cfg: ObjectiveConfig, moments_fn=None) -> np.ndarray:
    """Mean deviation of simulated from empirical moments over I runs.

    Simulations that blow up or whose statistics degenerate are dropped;
    more than half failing raises CalibrationError (the fitness layer
    maps that to the penalty value).
    """
    theta = np.asarray(theta, dtype=float)
    cfg.space.validate(theta)
    moments_fn = moments_fn or _simulated_moments
    deviations = []
    failures = 0
    for seed in cfg.sim_seeds:
        try:
            m_s = moments_fn(cfg, theta, int(seed))
            deviations.append(cfg.empirical_moments - m_s)
        except (BlowUpError, StatisticError, ParameterError):
            failures += 1
    if failures > cfg.replications / 2 or not deviations:
        raise CalibrationError(
            f"{failures}/{cfg.replications} simulations failed at theta={theta}")
    return np.mean(deviations, axis=0)


def fitness(theta, cfg: ObjectiveConfig, moments_fn=None) -> float:
    """G' W G, or the penalty when the error vector is unavailable."""
    try:
        g = estimation_error(theta, cfg, moments_fn)
    except CalibrationError:
        return cfg.penalty
    w = cfg.weight.entries
    return max(float(g @ w @ g), 0.0)


def make_objective(cfg: ObjectiveConfig, moments_fn=None):
    """Bind the config into a theta -> fitness callable for the optimizers."""
    def objective(theta):
        return fitness(theta, cfg, moments_fn)
    return objective


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

OPTIMIZERS = ("ga", "nmta", "nm")


def run_optimizer(optimizer: str, objective, space: ParameterSpace, seed: int,
                  ga_params: GAParams | None = None,
                  nmta_params: NMTAParams | None = None) -> CalibrationResult:
    """Dispatch one optimizer run over a parameter space."""
    bounds = (space.lower, space.upper)
    common = dict(seed=seed, integral=space.integral_mask, repair=space.repair)
    if optimizer == "ga":
        return ga_optimize(objective, bounds, ga_params, **common)
    if optimizer == "nmta":
        return nmta_optimize(objective, bounds, nmta_params, **common)
    if optimizer == "nm":
        return nm_optimize(objective, bounds, nmta_params, **common)
    raise CalibrationError(
        f"unknown optimizer {optimizer!r}; choose from {', '.join(OPTIMIZERS)}")


@dataclass(frozen=True)
class ReplicationSummary:
    """Point estimates (best-fitness run) and 95% intervals across runs."""

    names: tuple
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    fitness_point: float
    fitness_lower: float
    fitness_upper: float
    runs_requested: int
    runs_succeeded: int
    seeds: tuple

    def rows(self):
        yield ("parameter", "point", "lower_95", "upper_95")
        for i, name in enumerate(self.names):
            yield (name, repr(float(self.point[i])), repr(float(self.lower[i])),
                   repr(float(self.upper[i])))
        yield ("fitness", repr(self.fitness_point), repr(self.fitness_lower),
               repr(self.fitness_upper))


def percentile_interval(samples, lo: float = 2.5, hi: float = 97.5) -> tuple:
    """Linear-interpolation percentile interval (numpy default definition)."""
    arr = np.asarray(samples, dtype=float)
    return (float(np.percentile(arr, lo)), float(np.percentile(arr, hi)))


def run_replications(run_one, runs: int, seed: int = 0
                     ) -> tuple[list[CalibrationResult], list[int]]:
    """Run ``run_one(seed_i)`` over distinct derived seeds, skipping failures."""
    if runs < 2:
        raise CalibrationError("need at least 2 replication runs")
    run_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(runs)]
    results = []
    for s in run_seeds:
        try:
            results.append(run_one(s))
        except Exception:
            continue
    return results, run_seeds


def summarize_replications(results: list[CalibrationResult], space: ParameterSpace,
                           runs_requested: int, seeds) -> ReplicationSummary:
    """Point estimate from the best-fitness run, 95% intervals across runs."""
    if len(results) < 2:
        raise CalibrationError(
            f"only {len(results)}/{runs_requested} calibration runs succeeded")
    thetas = np.array([r.theta for r in results])
    fits = np.array([r.fitness for r in results])
    best = int(np.argmin(fits))
    lo, hi = np.percentile(thetas, [2.5, 97.5], axis=0)
    f_lo, f_hi = percentile_interval(fits)
    return ReplicationSummary(
        names=space.names,
        point=thetas[best],
        lower=lo,
        upper=hi,
        fitness_point=float(fits[best]),
        fitness_lower=f_lo,
        fitness_upper=f_hi,
        runs_requested=runs_requested,
        runs_succeeded=len(results),
        seeds=tuple(seeds),
    )


def replicate_calibrations(run_one, space: ParameterSpace, runs: int,
                           seed: int = 0) -> ReplicationSummary:
    """Repeat ``run_one(seed_i)`` with distinct derived seeds and summarize.

    ``run_one`` maps an integer seed to a CalibrationResult. Failing runs
    are recorded and excluded; at least two must succeed.
    """
    results, run_seeds = run_replications(run_one, runs, seed)
    return summarize_replications(results, space, runs, run_seeds)


def surface_scan(objective, space: ParameterSpace, name_x: str, name_y: str,
                 grid_x: int, grid_y: int, theta_base: np.ndarray) -> list[tuple]:
    """Objective values over a Cartesian grid of two free parameters.

    All other coordinates stay at ``theta_base``. Returns (x, y, f)
    triples in row-major order; penalty values appear where the
    simulation blows up.
    """
    if grid_x < 2 or grid_y < 2:
        raise CalibrationError("grid must be at least 2x2")
    ix, iy = space.index(name_x), space.index(name_y)
    if ix == iy:
        raise CalibrationError("surface parameters must differ")
    xs = np.linspace(*space.bounds[name_x], grid_x)
    ys = np.linspace(*space.bounds[name_y], grid_y)
    rows = []
    for x in xs:
        for y in ys:
            theta = np.asarray(theta_base, dtype=float).copy()
            theta[ix] = x
            theta[iy] = y
            rows.append((float(x), float(y), float(objective(space.repair(theta)))))
    return rows
