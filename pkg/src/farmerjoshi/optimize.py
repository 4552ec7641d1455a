"""Heuristic minimizers for the noisy, multimodal calibration objective.

Two searchers over a box-constrained parameter space:

* a real-coded genetic algorithm (tournament selection of size 2, BLX
  blend crossover, per-gene Gaussian mutation scaled to bound width,
  elitism, reflection-at-bounds repair);
* Nelder-Mead with threshold accepting: standard simplex moves, plus a
  periodic proposal to shift the whole simplex by a random vector,
  accepted as long as the best vertex worsens by no more than the
  current value of a decreasing threshold sequence. Thresholds are
  quantiles of |f(x) - f(x + shift)| sampled over random points, in the
  spirit of heuristic-optimization practice for rugged surfaces. With
  all thresholds zero no shifts are proposed and the search is exactly
  plain Nelder-Mead.

Integral coordinates stay continuous inside both searchers and are
rounded at evaluation time only; reported optima are repaired to the
feasible grid.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CalibrationResult:
    """Best point found by one optimizer run, with its search trace."""

    theta: np.ndarray
    fitness: float
    trace: np.ndarray  # best-so-far objective per generation/iteration
    evaluations: int
    wall_time: float
    seed: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "trace", np.asarray(self.trace, dtype=float))


@dataclass(frozen=True)
class GAParams:
    population: int = 40
    generations: int = 100
    crossover_rate: float = 0.8
    mutation_scale: float = 0.1  # times bound width
    mutation_prob: float = 0.10  # per gene
    elites: int = 1
    blend_alpha: float = 0.30


@dataclass(frozen=True)
class NMTAParams:
    restarts: int = 1
    max_iters: int = 250
    simplex_scale: float = 0.1  # initial vertex offset, times bound width
    shift_every: int = 10  # iterations between shift proposals
    shift_scale: float = 0.15  # shift magnitude, times bound width
    threshold_len: int = 10
    threshold_samples: int = 100  # random pairs used to build thresholds
    thresholds: tuple | None = None  # explicit override; all-zero = plain NM
    penalty_cutoff: float | None = None  # drop threshold pairs at/above this


def _as_bounds(bounds) -> tuple[np.ndarray, np.ndarray]:
    lower, upper = bounds
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ValueError("invalid bounds")
    return lower, upper


def reflect_into_bounds(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold coordinates back into the box by reflection at the walls."""
    width = upper - lower
    y = np.where(width > 0, x, lower).astype(float)
    live = width > 0
    z = np.mod(y[live] - lower[live], 2.0 * width[live])
    y[live] = lower[live] + np.where(z > width[live], 2.0 * width[live] - z, z)
    return y


def round_integrals(x: np.ndarray, integral: np.ndarray | None) -> np.ndarray:
    if integral is None:
        return x
    y = x.copy()
    y[integral] = np.rint(y[integral])
    return y


class _Evaluator:
    """Counts evaluations and applies rounding/repair before each call."""

    def __init__(self, objective, lower, upper, integral, repair):
        self.objective = objective
        self.lower = lower
        self.upper = upper
        self.integral = integral
        self.repair = repair
        self.count = 0

    def feasible(self, x: np.ndarray) -> np.ndarray:
        y = round_integrals(np.clip(x, self.lower, self.upper), self.integral)
        if self.repair is not None:
            y = self.repair(y)
        return y

    def __call__(self, x: np.ndarray) -> float:
        self.count += 1
        return float(self.objective(self.feasible(x)))


# ---------------------------------------------------------------------------
# Genetic algorithm
# ---------------------------------------------------------------------------

def ga_optimize(objective, bounds, ga_params: GAParams | None = None,
                seed: int = 0, integral: np.ndarray | None = None,
                repair=None) -> CalibrationResult:
    """Minimize ``objective`` over a box with a real-coded GA.

    ``integral`` is a boolean mask of coordinates rounded at evaluation
    time; ``repair`` is an optional feasibility hook applied after
    rounding (e.g. cross-constraint repair). Deterministic in ``seed``.
    """
    p = ga_params or GAParams()
    if p.population < 4:
        raise ValueError("population must be >= 4")
    lower, upper = _as_bounds(bounds)
    n = len(lower)
    width = upper - lower
    rng = np.random.Generator(np.random.PCG64(seed))
    ev = _Evaluator(objective, lower, upper, integral, repair)
    t0 = time.perf_counter()

    pop = lower + rng.random((p.population, n)) * width
    fit = np.array([ev(x) for x in pop])
    best_i = int(np.argmin(fit))
    best_x, best_f = ev.feasible(pop[best_i]), float(fit[best_i])
    trace = [best_f]

    n_children = p.population - p.elites
    for _ in range(p.generations):
        order = np.argsort(fit, kind="stable")
        elite_pool = pop[order[: p.elites]].copy()
        children = np.empty((n_children, n))
        made = 0
        while made < n_children:
            parents = []
            for _ in range(2):
                i, j = rng.integers(0, p.population, size=2)
                parents.append(pop[i] if fit[i] <= fit[j] else pop[j])
            pa, pb = parents
            if rng.random() < p.crossover_rate:
                lo = np.minimum(pa, pb)
                hi = np.maximum(pa, pb)
                span = (hi - lo) * p.blend_alpha
                c1 = (lo - span) + rng.random(n) * (hi - lo + 2 * span)
                c2 = (lo - span) + rng.random(n) * (hi - lo + 2 * span)
            else:
                c1, c2 = pa.copy(), pb.copy()
            for c in (c1, c2):
                mask = rng.random(n) < p.mutation_prob
                c[mask] += rng.normal(0.0, 1.0, size=int(mask.sum())) \
                    * p.mutation_scale * width[mask]
                children[made] = reflect_into_bounds(c, lower, upper)
                made += 1
                if made == n_children:
                    break
        child_fit = np.array([ev(x) for x in children])
        pop = np.vstack([elite_pool, children])
        fit = np.concatenate([fit[order[: p.elites]], child_fit])
        gen_best = int(np.argmin(fit))
        if fit[gen_best] < best_f:
            best_f = float(fit[gen_best])
            best_x = ev.feasible(pop[gen_best])
        trace.append(best_f)

    return CalibrationResult(
        theta=best_x, fitness=best_f, trace=np.array(trace),
        evaluations=ev.count, wall_time=time.perf_counter() - t0, seed=seed,
        details={"optimizer": "ga", "params": dataclasses.asdict(p)},
    )


# ---------------------------------------------------------------------------
# Nelder-Mead with threshold accepting
# ---------------------------------------------------------------------------

_NM_REFLECT = 1.0
_NM_EXPAND = 2.0
_NM_CONTRACT = 0.5
_NM_SHRINK = 0.5


def build_thresholds(objective_eval, lower, upper, params: NMTAParams, rng) -> np.ndarray:
    """Decreasing |delta f| quantiles over random shift pairs.

    Non-finite and equal-penalty pairs are discarded; with no usable
    pairs the thresholds are all zero (plain Nelder-Mead behavior).
    """
    width = upper - lower
    n = len(lower)
    diffs = []
    for _ in range(params.threshold_samples):
        x = lower + rng.random(n) * width
        delta = rng.uniform(-1.0, 1.0, size=n) * params.shift_scale * width
        fa = objective_eval(x)
        fb = objective_eval(np.clip(x + delta, lower, upper))
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if params.penalty_cutoff is not None and max(fa, fb) >= params.penalty_cutoff:
            continue
        diffs.append(abs(fa - fb))
    if not diffs:
        return np.zeros(params.threshold_len)
    levels = np.linspace(0.9, 0.0, params.threshold_len)
    taus = np.quantile(np.asarray(diffs), levels)
    taus[-1] = 0.0  # final stage is plain descent
    return np.minimum.accumulate(taus)


def _nm_run(ev: _Evaluator, x0: np.ndarray, lower, upper, params: NMTAParams,
            thresholds: np.ndarray, rng, trace: list, events: list,
            best: dict, simplex_trace: list) -> None:
    """One Nelder-Mead run with periodic threshold-accepted simplex shifts."""
    n = len(lower)
    width = upper - lower
    simplex = np.tile(x0, (n + 1, 1))
    for j in range(n):
        step = params.simplex_scale * width[j]
        if step == 0.0:
            step = max(abs(x0[j]) * 0.05, 1e-4)
        simplex[j + 1, j] = np.clip(x0[j] + step, lower[j], upper[j])
        if simplex[j + 1, j] == x0[j]:  # step hit the wall; go the other way
            simplex[j + 1, j] = np.clip(x0[j] - step, lower[j], upper[j])
    fvals = np.array([ev(v) for v in simplex])

    def note_best():
        i = int(np.argmin(fvals))
        if fvals[i] < best["f"]:
            best["f"] = float(fvals[i])
            best["x"] = ev.feasible(simplex[i])
        trace.append(best["f"])
        simplex_trace.append(float(fvals[i]))

    note_best()
    n_stages = len(thresholds)
    for it in range(1, params.max_iters + 1):
        if params.shift_every > 0 and it % params.shift_every == 0:
            # Threshold stage advances with run progress, so several
            # shifts are proposed per stage before the tolerance drops.
            stage = min(n_stages - 1, (n_stages * it) // (params.max_iters + 1))
            tau = float(thresholds[stage])
            if tau > 0.0:
                delta = rng.uniform(-1.0, 1.0, size=n) * params.shift_scale * width
                proposal = np.clip(simplex + delta, lower, upper)
                prop_f = np.array([ev(v) for v in proposal])
                old_best = float(fvals.min())
                new_best = float(prop_f.min())
                accepted = new_best <= old_best + tau
                events.append({
                    "iteration": it, "old_best": old_best, "new_best": new_best,
                    "threshold": tau, "accepted": bool(accepted),
                })
                if accepted:
                    simplex, fvals = proposal, prop_f
                note_best()
                continue

        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        centroid = simplex[:-1].mean(axis=0)
        xr = np.clip(centroid + _NM_REFLECT * (centroid - simplex[-1]), lower, upper)
        fr = ev(xr)
        if fr < fvals[0]:
            xe = np.clip(centroid + _NM_EXPAND * (xr - centroid), lower, upper)
            fe = ev(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = np.clip(centroid + _NM_CONTRACT * (xr - centroid), lower, upper)
            else:
                xc = np.clip(centroid + _NM_CONTRACT * (simplex[-1] - centroid), lower, upper)
            fc = ev(xc)
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + _NM_SHRINK * (simplex[i] - simplex[0])
                    fvals[i] = ev(simplex[i])
        note_best()


def nmta_optimize(objective, bounds, nmta_params: NMTAParams | None = None,
                  seed: int = 0, integral: np.ndarray | None = None,
                  repair=None) -> CalibrationResult:
    """Minimize ``objective`` with Nelder-Mead plus threshold accepting.

    Deterministic in ``seed``. Shift-acceptance events are returned in
    ``details['events']``; the thresholds used in ``details['thresholds']``.
    """
    p = nmta_params or NMTAParams()
    lower, upper = _as_bounds(bounds)
    rng = np.random.Generator(np.random.PCG64(seed))
    ev = _Evaluator(objective, lower, upper, integral, repair)
    t0 = time.perf_counter()

    if p.thresholds is not None:
        taus = np.asarray(p.thresholds, dtype=float)
        if taus.ndim == 0:
            taus = np.full(p.threshold_len, float(taus))
        taus = np.minimum.accumulate(taus)
    else:
        taus = build_thresholds(ev, lower, upper, p, rng)

    trace: list[float] = []
    events: list[dict] = []
    simplex_traces: list[list[float]] = []
    best = {"x": None, "f": np.inf}
    for _ in range(max(1, p.restarts)):
        x0 = lower + rng.random(len(lower)) * (upper - lower)
        simplex_trace: list[float] = []
        _nm_run(ev, x0, lower, upper, p, taus, rng, trace, events, best,
                simplex_trace)
        simplex_traces.append(simplex_trace)

    return CalibrationResult(
        theta=best["x"], fitness=float(best["f"]), trace=np.array(trace),
        evaluations=ev.count, wall_time=time.perf_counter() - t0, seed=seed,
        details={"optimizer": "nmta", "thresholds": taus.tolist(),
                 "events": events, "simplex_best_traces": simplex_traces},
    )


def nm_optimize(objective, bounds, nmta_params: NMTAParams | None = None,
                seed: int = 0, integral: np.ndarray | None = None,
                repair=None) -> CalibrationResult:
    """Plain Nelder-Mead: the zero-threshold special case of NMTA."""
    p = nmta_params or NMTAParams()
    zeroed = NMTAParams(**{**p.__dict__, "thresholds": (0.0,) * p.threshold_len})
    result = nmta_optimize(objective, bounds, zeroed, seed, integral, repair)
    result.details["optimizer"] = "nm"
    return result
