"""Day-by-day simulation of the standard and adaptive Farmer-Joshi models.

Two trading strategies operate on a single asset cleared once per day by a
risk-neutral market maker. Trend followers threshold the lagged log-price
change m = p[t-d] - p[t]; value investors threshold the deviation
m = p[t] - v of the log price from a privately perceived log value. A
trader holding no position enters long c when m falls below -T, enters
short -c when m rises above T, and exits back to flat when m crosses
-tau (long) or tau (short). Capital is tied to the threshold gap,
c = a * (T - tau). The market maker moves the log price by the net order
divided by liquidity, plus Gaussian noise.

In the standard variant each trader runs one fixed strategy. In the
adaptive variant every trader maintains shadow positions for both
strategies, tracks each strategy's profit over the last ``horizon`` days,
and re-draws its active strategy daily with logistic probability in the
profit difference (temperature ``gamma``); its actual position snaps to
the active strategy's shadow position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Literal

import numpy as np

Variant = Literal["standard", "adaptive"]

#: Log-price magnitude beyond which a run is declared divergent.
BLOWUP_LOG_PRICE = 50.0


class ParameterError(ValueError):
    """Raised when a parameter set violates its constraints."""


class BlowUpError(RuntimeError):
    """Raised when the simulated log price leaves the plausible range."""


@dataclass(frozen=True)
class ModelParameters:
    """Full parameter vector for either model variant.

    ``gamma`` (switching temperature) and ``horizon`` (profit window,
    days) only affect the adaptive variant. ``v_min``/``v_max`` bound the
    initial log-value perception as an OFFSET from the starting log
    price, which keeps the vector scale-free across assets.

    The exit-threshold upper bound must sit strictly below the
    entry-threshold lower bound so that every trader's capital
    a * (T - tau) is positive.
    """

    n_traders: int
    lam: float  # market-maker liquidity
    a: float  # capital per unit threshold gap
    d_min: int
    d_max: int
    mu_eta: float  # drift of the value-perception walk
    sigma_eta: float
    sigma_zeta: float  # price-equation noise s.d.
    T_min: float
    T_max: float
    tau_min: float
    tau_max: float
    v_min: float
    v_max: float
    gamma: float = 0.05
    horizon: int = 50

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        p = self
        checks = [
            (isinstance(p.n_traders, (int, np.integer)) and p.n_traders >= 1,
             "n_traders must be a positive integer"),
            (p.lam > 0, "lam must be positive"),
            (p.a > 0, "a must be positive"),
            (isinstance(p.d_min, (int, np.integer)) and isinstance(p.d_max, (int, np.integer)),
             "d_min and d_max must be integers"),
            (1 <= p.d_min <= p.d_max, "need 1 <= d_min <= d_max"),
            (p.sigma_eta >= 0, "sigma_eta must be >= 0"),
            (p.sigma_zeta >= 0, "sigma_zeta must be >= 0"),
            (0 < p.T_min <= p.T_max, "need 0 < T_min <= T_max"),
            (p.tau_min <= p.tau_max, "need tau_min <= tau_max"),
            (p.tau_max < p.T_min, "need tau_max < T_min (positive capital)"),
            (p.v_min <= p.v_max, "need v_min <= v_max"),
            (p.gamma > 0, "gamma must be positive"),
            (isinstance(p.horizon, (int, np.integer)) and p.horizon >= 1,
             "horizon must be a positive integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)

    def n_fundamentalists(self) -> int:
        """Standard-variant split: half the traders, remainder to chartists."""
        return self.n_traders // 2

    def with_values(self, **kwargs) -> "ModelParameters":
        return replace(self, **kwargs)


#: Baseline parameter set used by the CLI when none is supplied.
DEFAULT_PARAMETERS = ModelParameters(
    n_traders=50,
    lam=15.0,
    a=1.0,
    d_min=2,
    d_max=30,
    mu_eta=0.0,
    sigma_eta=0.01,
    sigma_zeta=0.01,
    T_min=0.10,
    T_max=0.30,
    tau_min=0.01,
    tau_max=0.045,
    v_min=-0.25,
    v_max=0.25,
    gamma=0.03,
    horizon=50,
)


@dataclass
class TraderState:
    """Read-only snapshot of a single trader (see MarketState.trader)."""

    entry_threshold: float
    exit_threshold: float
    capital: float
    lag: int
    value_perception: float
    active_strategy: str
    position_fund: float
    position_chart: float
    shadow_positions: dict


class MarketState:
    """All trader state plus price history for one simulation run.

    Trader attributes are stored as parallel arrays. The log-price
    history is pre-seeded with ``d_max + 1`` copies of the initial log
    price so chartist lags are defined from the first day; day-indexed
    access goes through :meth:`log_price`.
    """

    def __init__(self, params: ModelParameters, p0: float, seed: int):
        params.validate()
        n = params.n_traders
        ss = np.random.SeedSequence(seed)
        init_ss, zeta_ss, eta_ss, switch_ss = ss.spawn(4)
        init_rng = np.random.Generator(np.random.PCG64(init_ss))

        self.params_echo = params
        self.seed = seed
        self.day = 0
        self.pad = params.d_max  # index of p_0 in the padded buffer

        self.entry = init_rng.uniform(params.T_min, params.T_max, size=n)
        self.exit = init_rng.uniform(params.tau_min, params.tau_max, size=n)
        self.lag = init_rng.integers(params.d_min, params.d_max + 1, size=n)
        self.value = p0 + init_rng.uniform(params.v_min, params.v_max, size=n)
        self.capital = params.a * (self.entry - self.exit)

        self.rng_zeta = np.random.Generator(np.random.PCG64(zeta_ss))
        self.rng_eta = np.random.Generator(np.random.PCG64(eta_ss))
        self.rng_switch = np.random.Generator(np.random.PCG64(switch_ss))

        # Padded price buffer; _n_prices counts valid entries.
        self._prices = np.empty(self.pad + 1 + 256)
        self._prices[: self.pad + 1] = p0
        self._n_prices = self.pad + 1

        # Shadow strategy positions, day-indexed rows 0..day (flat at day 0).
        self._pos_fund = np.zeros((256, n))
        self._pos_chart = np.zeros((256, n))
        self._n_pos = 1

        # Active strategy per trader; by convention in the standard
        # variant the first n_fundamentalists() traders are
        # fundamentalists and the rest chartists.
        n_f = params.n_fundamentalists()
        self.is_chartist = np.arange(n) >= n_f
        self.pos_actual = np.zeros(n)

        # Filled by adaptive steps for diagnostics.
        self.last_profit_chart = 0.0
        self.last_profit_fund = 0.0

    # -- history access ------------------------------------------------

    def log_price(self, t: int) -> float:
        """p_t for day t; padding makes t - d valid for any d <= d_max."""
        return float(self._prices[self.pad + t])

    @property
    def log_prices(self) -> np.ndarray:
        """Day-indexed log prices p_0..p_day (padding excluded)."""
        return self._prices[self.pad : self._n_prices].copy()

    def reserve(self, days: int) -> None:
        """Pre-size internal buffers for ``days`` further steps."""
        need_p = self._n_prices + days
        if need_p > len(self._prices):
            grown = np.empty(need_p)
            grown[: self._n_prices] = self._prices[: self._n_prices]
            self._prices = grown
        need_r = self._n_pos + days
        if need_r > self._pos_fund.shape[0]:
            for name in ("_pos_fund", "_pos_chart"):
                old = getattr(self, name)
                grown = np.zeros((need_r, old.shape[1]))
                grown[: self._n_pos] = old[: self._n_pos]
                setattr(self, name, grown)

    def _append_price(self, p: float) -> None:
        if self._n_prices == len(self._prices):
            self.reserve(256)
        self._prices[self._n_prices] = p
        self._n_prices += 1

    def _append_positions(self, fund: np.ndarray, chart: np.ndarray) -> None:
        if self._n_pos == self._pos_fund.shape[0]:
            self.reserve(256)
        self._pos_fund[self._n_pos] = fund
        self._pos_chart[self._n_pos] = chart
        self._n_pos += 1

    def shadow_fund(self, t: int) -> np.ndarray:
        return self._pos_fund[t]

    def shadow_chart(self, t: int) -> np.ndarray:
        return self._pos_chart[t]

    # -- inspection ----------------------------------------------------

    def trader(self, i: int) -> TraderState:
        h0 = max(0, self._n_pos - (self.params_echo.horizon + 1))
        return TraderState(
            entry_threshold=float(self.entry[i]),
            exit_threshold=float(self.exit[i]),
            capital=float(self.capital[i]),
            lag=int(self.lag[i]),
            value_perception=float(self.value[i]),
            active_strategy="chartist" if self.is_chartist[i] else "fundamentalist",
            position_fund=float(self._pos_fund[self._n_pos - 1, i]),
            position_chart=float(self._pos_chart[self._n_pos - 1, i]),
            shadow_positions={
                "fundamentalist": self._pos_fund[h0 : self._n_pos, i].copy(),
                "chartist": self._pos_chart[h0 : self._n_pos, i].copy(),
            },
        )

    @property
    def traders(self) -> list[TraderState]:
        return [self.trader(i) for i in range(self.params_echo.n_traders)]


@dataclass(frozen=True)
class SimulationOutput:
    """Price path plus per-day agent diagnostics for one run.

    ``n_chartists``/``n_fundamentalists`` count the strategies in force
    during each step (constant split in the standard variant). The profit
    columns hold, per step, the across-trader sum of the rolling
    ``horizon``-day strategy profits that drive switching (adaptive) or
    the realized one-day profit of each fixed-strategy group (standard).
    """

    variant: str
    seed: int
    log_prices: np.ndarray  # shape (days + 1,)
    log_returns: np.ndarray  # shape (days,)
    n_chartists: np.ndarray  # int, shape (days,)
    n_fundamentalists: np.ndarray  # int, shape (days,)
    profit_chartists: np.ndarray  # shape (days,)
    profit_fundamentalists: np.ndarray  # shape (days,)

    def to_csv_rows(self) -> Iterator[tuple]:
        yield ("day", "log_price", "log_return", "n_chartists",
               "n_fundamentalists", "profit_chartists", "profit_fundamentalists")
        yield (0, repr(float(self.log_prices[0])), "", "", "", "", "")
        for t in range(len(self.log_returns)):
            yield (t + 1,
                   repr(float(self.log_prices[t + 1])),
                   repr(float(self.log_returns[t])),
                   int(self.n_chartists[t]),
                   int(self.n_fundamentalists[t]),
                   repr(float(self.profit_chartists[t])),
                   repr(float(self.profit_fundamentalists[t])))


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------

def market_impact_update(p_t: float, net_order: float, lam: float, zeta: float) -> float:
    """Next log price: p_t + net_order / lam + zeta."""
    if lam <= 0:
        raise ParameterError("lam must be positive")
    return p_t + net_order / lam + zeta


def chartist_mispricing(p_lagged: float, p_now: float) -> float:
    """Trend signal m = p[t-d] - p[t]; negative after a rise (long pressure)."""
    return p_lagged - p_now


def fundamentalist_mispricing(p_now: float, v: float) -> float:
    """Value signal m = p[t] - v; positive when overpriced (short pressure)."""
    return p_now - v


def threshold_transition(current: float, m: float, T: float, tau: float, c: float) -> float:
    """One day of the entry/exit state machine for a single position.

    ``current`` is the signed position in {-c, 0, +c}. Flat enters long
    at m < -T and short at m > T; long exits once m rises above -tau;
    short exits once m falls below tau.
    """
    if current == 0.0:
        if m < -T:
            return c
        if m > T:
            return -c
        return 0.0
    if current > 0.0:
        return 0.0 if m > -tau else current
    return 0.0 if m < tau else current


def _threshold_transition_vec(pos: np.ndarray, m: np.ndarray, T: np.ndarray,
                              tau: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized threshold_transition over traders."""
    new = pos.copy()
    flat = pos == 0.0
    enter_long = flat & (m < -T)
    enter_short = flat & (m > T)
    new[enter_long] = c[enter_long]
    new[enter_short] = -c[enter_short]
    new[(pos > 0.0) & (m > -tau)] = 0.0
    new[(pos < 0.0) & (m < tau)] = 0.0
    return new


def value_perception_step(v: float, eta_draw: float) -> float:
    """Advance a log value perception by one random-walk increment."""
    return v + eta_draw


def strategy_profit(shadow_positions, log_prices, H: int, t: int) -> float:
    """Rolling profit of one strategy over the ``H`` days ending at day t.

    ``shadow_positions[k]`` is the position held after day k's decision,
    ``log_prices[k]`` the log price p_k; the profit sums
    position[k-1] * (p_k - p_{k-1}) for k in [max(1, t-H+1), t]. Before a
    full window exists the sum runs over all available days.
    """
    if t < 1:
        return 0.0
    x = np.asarray(shadow_positions, dtype=float)
    p = np.asarray(log_prices, dtype=float)
    k0 = max(1, t - H + 1)
    dp = p[k0 : t + 1] - p[k0 - 1 : t]
    return float(x[k0 - 1 : t] @ dp)


def switch_probability(pi_c: float, pi_f: float, gamma: float) -> tuple[float, float]:
    """Logistic strategy-selection probabilities (phi_chartist, phi_fund).

    Computed in the overflow-safe form of 1 / (1 + exp((pi_f - pi_c)/gamma)).
    """
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    z = (pi_f - pi_c) / gamma
    if z >= 0:
        e = math.exp(-z)
        phi_c = e / (1.0 + e)
    else:
        phi_c = 1.0 / (1.0 + math.exp(z))
    return phi_c, 1.0 - phi_c


def _switch_probability_vec(pi_c: np.ndarray, pi_f: np.ndarray, gamma: float) -> np.ndarray:
    z = (pi_f - pi_c) / gamma
    out = np.empty_like(z)
    nonneg = z >= 0
    e = np.exp(-z[nonneg])
    out[nonneg] = e / (1.0 + e)
    out[~nonneg] = 1.0 / (1.0 + np.exp(z[~nonneg]))
    return out


# ---------------------------------------------------------------------------
# Daily steps
# ---------------------------------------------------------------------------

def init_simulation(params: ModelParameters, p0: float, seed: int) -> MarketState:
    """Draw trader attributes and seed the price history with p0."""
    return MarketState(params, p0, seed)


def _check_finite(p_next: float, day: int) -> None:
    if not math.isfinite(p_next) or abs(p_next) > BLOWUP_LOG_PRICE:
        raise BlowUpError(
            f"log price {p_next!r} diverged at day {day} "
            f"(|p| > {BLOWUP_LOG_PRICE} signals parameter blow-up)"
        )


def _windowed_profits(state: MarketState, H: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-trader rolling strategy profits (chartist, fundamentalist) at day t."""
    n = state.params_echo.n_traders
    if t < 1:
        return np.zeros(n), np.zeros(n)
    k0 = max(1, t - H + 1)
    lo = state.pad + k0
    dp = state._prices[lo : state.pad + t + 1] - state._prices[lo - 1 : state.pad + t]
    pi_c = dp @ state._pos_chart[k0 - 1 : t]
    pi_f = dp @ state._pos_fund[k0 - 1 : t]
    return pi_c, pi_f


def step_standard(state: MarketState, params: ModelParameters) -> MarketState:
    """Advance one day with fixed strategies per trader."""
    t = state.day
    p_t = state.log_price(t)
    chart = state.is_chartist
    fund = ~chart

    m = np.empty(params.n_traders)
    m[fund] = p_t - state.value[fund]
    m[chart] = state._prices[state.pad + t - state.lag[chart]] - p_t

    new_pos = _threshold_transition_vec(state.pos_actual, m, state.entry,
                                        state.exit, state.capital)
    net_order = float(np.sum(new_pos - state.pos_actual))
    zeta = float(state.rng_zeta.normal(0.0, params.sigma_zeta))
    p_next = market_impact_update(p_t, net_order, params.lam, zeta)
    _check_finite(p_next, t + 1)

    # Realized one-day P&L per group over this step, for diagnostics.
    dp = p_next - p_t
    state.last_profit_chart = float(np.sum(new_pos[chart]) * dp)
    state.last_profit_fund = float(np.sum(new_pos[fund]) * dp)

    state.pos_actual = new_pos
    state._append_price(p_next)
    n_f = params.n_fundamentalists()
    eta = state.rng_eta.normal(params.mu_eta, params.sigma_eta, size=n_f)
    state.value[fund] = state.value[fund] + eta
    state.day = t + 1
    return state


def step_adaptive(state: MarketState, params: ModelParameters) -> MarketState:
    """Advance one day with daily profit-driven strategy re-selection.

    Both strategies' shadow positions evolve every day so the rolling
    profits stay defined for the strategy not in use; the trader's actual
    position is the active strategy's shadow position.
    """
    t = state.day
    p_t = state.log_price(t)
    n = params.n_traders

    pi_c, pi_f = _windowed_profits(state, params.horizon, t)
    phi_c = _switch_probability_vec(pi_c, pi_f, params.gamma)
    u = state.rng_switch.random(n)
    state.is_chartist = u < phi_c

    m_f = p_t - state.value
    m_c = state._prices[state.pad + t - state.lag] - p_t
    fund_now = state._pos_fund[t]
    chart_now = state._pos_chart[t]
    new_fund = _threshold_transition_vec(fund_now, m_f, state.entry, state.exit,
                                         state.capital)
    new_chart = _threshold_transition_vec(chart_now, m_c, state.entry, state.exit,
                                          state.capital)
    state._append_positions(new_fund, new_chart)

    new_pos = np.where(state.is_chartist, new_chart, new_fund)
    net_order = float(np.sum(new_pos - state.pos_actual))
    zeta = float(state.rng_zeta.normal(0.0, params.sigma_zeta))
    p_next = market_impact_update(p_t, net_order, params.lam, zeta)
    _check_finite(p_next, t + 1)

    state.last_profit_chart = float(np.sum(pi_c))
    state.last_profit_fund = float(np.sum(pi_f))

    state.pos_actual = new_pos
    state._append_price(p_next)
    eta = state.rng_eta.normal(params.mu_eta, params.sigma_eta, size=n)
    state.value = state.value + eta
    state.day = t + 1
    return state


def simulate(params: ModelParameters, variant: Variant, days: int,
             p0: float = 0.0, seed: int = 0) -> SimulationOutput:
    """Run ``days`` steps of the chosen variant from a fresh state."""
    if days < 1:
        raise ParameterError("days must be >= 1")
    if variant not in ("standard", "adaptive"):
        raise ParameterError(f"unknown variant {variant!r}")
    state = init_simulation(params, p0, seed)
    state.reserve(days)
    step = step_standard if variant == "standard" else step_adaptive

    n_chart = np.empty(days, dtype=int)
    n_fund = np.empty(days, dtype=int)
    prof_chart = np.empty(days)
    prof_fund = np.empty(days)
    for s in range(days):
        step(state, params)
        nc = int(np.sum(state.is_chartist))
        n_chart[s] = nc
        n_fund[s] = params.n_traders - nc
        prof_chart[s] = state.last_profit_chart
        prof_fund[s] = state.last_profit_fund

    log_prices = state.log_prices
    return SimulationOutput(
        variant=variant,
        seed=seed,
        log_prices=log_prices,
        log_returns=np.diff(log_prices),
        n_chartists=n_chart,
        n_fundamentalists=n_fund,
        profit_chartists=prof_chart,
        profit_fundamentalists=prof_fund,
    )
