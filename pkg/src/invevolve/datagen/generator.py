"""Daily covariates, latent regimes, events and demand for one seed dataset."""
from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .archetypes import FEATURES, SeedConfig

log = logging.getLogger(__name__)

LOG_MU_RANGE = (-10.0, 15.0)
DAYS_PER_YEAR = 365.25


def _holidays(year: int) -> set:
    thanksgiving = dt.date(year, 11, 1)
    thanksgiving += dt.timedelta(days=(3 - thanksgiving.weekday()) % 7 + 21)
    return {dt.date(year, 1, 1), dt.date(year, 7, 4), dt.date(year, 12, 24), dt.date(year, 12, 25),
            dt.date(year, 12, 31), thanksgiving, thanksgiving + dt.timedelta(days=1)}


def _stream(rng_seed: int, cfg: SeedConfig, tag: int) -> np.random.Generator:
    return np.random.default_rng([rng_seed, cfg.seed_id, tag])


@dataclass
class CovariateTable:
    dates: list
    columns: dict
    retained: tuple

    def __len__(self):
        return len(self.dates)


def temperature_path(spec, n: int, rng) -> np.ndarray:
    """Sinusoidal season plus AR(1) noise plus rare shocks."""
    d = np.arange(n)
    season = spec.alpha0 + spec.alpha1 * np.sin(2 * math.pi * (d - spec.phi) / DAYS_PER_YEAR)
    eps = rng.normal(0.0, 1.0, size=n) * spec.ar_sd
    ar = np.zeros(n)
    for i in range(1, n):
        ar[i] = spec.ar * ar[i - 1] + eps[i]
    shocks = (rng.random(n) < spec.shock_prob) * rng.normal(0.0, spec.shock_sd, size=n)
    return season + ar + shocks


def gen_covariates(cfg: SeedConfig, rng_seed: int = 0) -> CovariateTable:
    rng = _stream(rng_seed, cfg, 1)
    n = cfg.n_days
    dates = [cfg.start + dt.timedelta(days=i) for i in range(n)]
    temp = temperature_path(cfg.temperature, n, rng)
    wet = rng.random(n) < 0.3
    precip = np.where(wet, rng.gamma(1.5, 4.0, size=n), 0.0)
    promo = np.zeros(n)
    i = 0
    while i < n:
        if rng.random() < cfg.promo_rate:
            length = int(rng.integers(3, 11))
            span = min(length, n - i)
            # intensity decays over the promotion window
            promo[i:i + span] = np.exp(-np.arange(span) / length)
            i += span
        else:
            i += 1
    price = 1.0 + rng.normal(0.0, 0.02, size=n) - 0.15 * promo
    macro = 100.0 * np.exp(np.cumsum(rng.normal(cfg.macro_drift, 0.003, size=n)))
    weekend = np.array([1.0 if d.weekday() >= 5 else 0.0 for d in dates])
    hol = set().union(*(_holidays(y) for y in {d.year for d in dates}))
    holiday = np.array([1.0 if d in hol else 0.0 for d in dates])
    traffic = 1.0 + 0.2 * weekend + 0.1 * np.sin(2 * math.pi * np.arange(n) / DAYS_PER_YEAR) \
        + rng.normal(0.0, 0.05, size=n)
    columns = {
        "temperature": temp, "precipitation": precip, "promotion": promo, "price_index": price,
        "macro_index": macro, "weekend": weekend, "holiday": holiday, "foot_traffic": traffic,
    }
    keep = rng.random(len(FEATURES)) < cfg.retention_prob
    retained = tuple(f for f, k in zip(FEATURES, keep) if k)
    return CovariateTable(dates, columns, retained)


@dataclass(frozen=True)
class Event:
    type: str
    onset: int
    duration: int
    intensity: float
    observed: bool


@dataclass
class DemandSeries:
    demand: np.ndarray
    notes: list
    diagnostics: dict = field(default_factory=dict)


def standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)


def baseline_path(cfg: SeedConfig) -> np.ndarray:
    """Piecewise-linear log level through the knots plus any structural break."""
    n = cfg.n_days
    knots = np.asarray(cfg.beta0_knots, dtype=float)
    if knots.size == 0:
        base = np.zeros(n)
    elif knots.size == 1:
        base = np.full(n, knots[0])
    else:
        base = np.interp(np.arange(n), np.linspace(0, n - 1, knots.size), knots)
    if cfg.break_day is not None:
        base = base + cfg.break_jump * (np.arange(n) >= cfg.break_day)
    return base


def sample_events(cfg: SeedConfig, rng) -> tuple[list, np.ndarray]:
    """Event onsets and the per-day latent intensity matrix (days x event types)."""
    n = cfg.n_days
    E = np.zeros((n, len(cfg.events)))
    events = []
    busy_until = [0] * len(cfg.events)
    for r in range(n):
        onset_today = False
        for k, et in enumerate(cfg.events):
            u = rng.random()
            if onset_today or r < busy_until[k] or u >= et.onset_prob:
                continue
            dur = int(rng.integers(et.duration[0], et.duration[1] + 1))
            kappa = float(rng.uniform(*et.intensity))
            observed = bool(rng.random() < et.observe_prob)
            events.append(Event(et.name, r, dur, kappa, observed))
            span = np.arange(r, min(r + dur, n))
            E[span, k] += kappa * 0.5 ** ((span - r) / et.half_life)
            busy_until[k] = r + dur
            onset_today = True
    return events, E


def regime_path(cfg: SeedConfig, rng) -> np.ndarray:
    z = np.zeros(cfg.n_days)
    state = 0
    u = rng.random(cfg.n_days)
    for r in range(1, cfg.n_days):
        if u[r] >= cfg.regime_stay[state]:
            state = 1 - state
        z[r] = state
    return z


def _ramp(pair, n):
    a, b = pair
    return a + (b - a) * np.arange(n) / max(n - 1, 1)


def gen_demand(cfg: SeedConfig, covariates: CovariateTable, rng_seed: int = 0) -> DemandSeries:
    n = cfg.n_days
    if len(covariates) != n:
        raise ValueError("covariates must span the full calendar")
    base = baseline_path(cfg)
    xb = np.zeros(n)
    t = np.arange(n) / max(n - 1, 1)
    for feat, b0 in cfg.beta_start.items():
        b1 = cfg.beta_end.get(feat, b0)
        xb += (b0 + (b1 - b0) * t) * standardize(np.asarray(covariates.columns[feat], dtype=float))
    z = regime_path(cfg, _stream(rng_seed, cfg, 2))
    events, E = sample_events(cfg, _stream(rng_seed, cfg, 3))
    deltas = np.array([et.delta for et in cfg.events])
    de = E @ deltas if len(cfg.events) else np.zeros(n)
    log_mu = base + xb + cfg.gamma * z + de
    lo, hi = LOG_MU_RANGE
    clamped = bool(np.any((log_mu < lo) | (log_mu > hi)))
    if clamped:
        log.warning("seed %d: log-mean clamped to [%g, %g]", cfg.seed_id, lo, hi)
        log_mu = np.clip(log_mu, lo, hi)
    mu = np.exp(log_mu)
    rng = _stream(rng_seed, cfg, 4)
    y = _sample(cfg, mu, rng)
    notes = [None] * n
    for ev in events:
        if ev.observed:
            notes[ev.onset] = next(et.note for et in cfg.events if et.name == ev.type)
    diagnostics = {
        "log_mu": log_mu, "mu": mu, "base": base, "xb": xb, "z": z, "e": E, "event_effect": de,
        "events": events, "clamped": clamped,
    }
    return DemandSeries(y, notes, diagnostics)


def _nb(mu, size, rng):
    return rng.negative_binomial(size, size / (size + mu)).astype(float)


def _sample(cfg: SeedConfig, mu: np.ndarray, rng) -> np.ndarray:
    n = mu.size
    if cfg.family == "neg_binomial":
        return _nb(mu, cfg.dispersion, rng)
    if cfg.family == "zero_inflated":
        y = _nb(mu, cfg.dispersion, rng)
        gate = rng.random(n) < _ramp(cfg.zero_prob, n)
        return np.where(gate, 0.0, y)
    if cfg.family == "mixture":
        w = _ramp(cfg.mixture_weight, n)
        lo, hi = cfg.mixture_scale
        main = rng.random(n) < w
        return _nb(mu * np.where(main, lo, hi), cfg.dispersion, rng)
    if cfg.family == "continuous_positive":
        k = cfg.continuous_shape
        return np.round(rng.gamma(k, mu / k), 3)
    raise ValueError(f"unknown demand family {cfg.family!r}")


@dataclass
class SeedDataset:
    config: SeedConfig
    covariates: CovariateTable
    series: DemandSeries

    @property
    def demand(self) -> np.ndarray:
        return self.series.demand


def generate_seed(cfg: SeedConfig, rng_seed: int = 0) -> SeedDataset:
    cov = gen_covariates(cfg, rng_seed)
    return SeedDataset(cfg, cov, gen_demand(cfg, cov, rng_seed))
