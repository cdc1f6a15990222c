"""Curated archetype catalog and per-seed configuration.

Each archetype fixes a retail domain, a demand family, a typical daily volume
and the sign of every covariate effect. Magnitudes, drift settings and event
mixes are drawn per seed from ranges that respect those signs.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

START_DATE = dt.date(2024, 1, 1)
N_DAYS = 731  # 2024-01-01 .. 2025-12-31
KNOTS_PER_YEAR = 4

FEATURES = ("temperature", "precipitation", "promotion", "price_index", "macro_index", "weekend", "holiday",
            "foot_traffic")

# domain -> sign of each covariate effect on log demand (0 = no effect)
DOMAIN_SIGNS = {
    "grocery":        {"temperature": 0, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "beverages":      {"temperature": 1, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "apparel":        {"temperature": -1, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "electronics":    {"temperature": 0, "precipitation": 1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "pharmacy":       {"temperature": -1, "precipitation": 1, "promotion": 1, "price_index": -1, "macro_index": 0, "weekend": -1, "holiday": -1, "foot_traffic": 1},
    "home_garden":    {"temperature": 1, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 0, "foot_traffic": 1},
    "toys":           {"temperature": 0, "precipitation": 1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "sporting_goods": {"temperature": 1, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 0, "foot_traffic": 1},
    "automotive":     {"temperature": -1, "precipitation": 1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": -1, "foot_traffic": 1},
    "beauty":         {"temperature": 0, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "pet_supplies":   {"temperature": 0, "precipitation": 0, "promotion": 1, "price_index": -1, "macro_index": 0, "weekend": 1, "holiday": 0, "foot_traffic": 1},
    "office":         {"temperature": 0, "precipitation": 0, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": -1, "holiday": -1, "foot_traffic": 1},
    "books_media":    {"temperature": -1, "precipitation": 1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 1, "foot_traffic": 1},
    "hardware":       {"temperature": 1, "precipitation": -1, "promotion": 1, "price_index": -1, "macro_index": 1, "weekend": 1, "holiday": 0, "foot_traffic": 1},
    "frozen_foods":   {"temperature": 1, "precipitation": 0, "promotion": 1, "price_index": -1, "macro_index": 0, "weekend": 1, "holiday": 1, "foot_traffic": 1},
}

# (name, domain, demand family, typical daily mean)
ARCHETYPES = (
    ("staple_bread", "grocery", "neg_binomial", 40.0),
    ("fresh_produce", "grocery", "neg_binomial", 25.0),
    ("specialty_cheese", "grocery", "zero_inflated", 3.0),
    ("bulk_rice", "grocery", "continuous_positive", 60.0),
    ("organic_snacks", "grocery", "mixture", 8.0),
    ("bottled_water", "beverages", "neg_binomial", 50.0),
    ("craft_beer", "beverages", "mixture", 12.0),
    ("energy_drinks", "beverages", "neg_binomial", 18.0),
    ("premium_wine", "beverages", "zero_inflated", 2.5),
    ("winter_coats", "apparel", "zero_inflated", 4.0),
    ("basic_tees", "apparel", "neg_binomial", 20.0),
    ("rain_boots", "apparel", "mixture", 5.0),
    ("swimwear", "apparel", "zero_inflated", 3.5),
    ("phone_chargers", "electronics", "neg_binomial", 15.0),
    ("gaming_consoles", "electronics", "zero_inflated", 1.5),
    ("headphones", "electronics", "mixture", 7.0),
    ("smart_bulbs", "electronics", "neg_binomial", 9.0),
    ("cold_remedies", "pharmacy", "neg_binomial", 22.0),
    ("allergy_relief", "pharmacy", "mixture", 10.0),
    ("first_aid", "pharmacy", "continuous_positive", 6.0),
    ("potting_soil", "home_garden", "continuous_positive", 30.0),
    ("garden_hoses", "home_garden", "zero_inflated", 2.0),
    ("patio_furniture", "home_garden", "zero_inflated", 1.2),
    ("building_blocks", "toys", "neg_binomial", 6.0),
    ("board_games", "toys", "mixture", 4.0),
    ("outdoor_toys", "toys", "zero_inflated", 3.0),
    ("running_shoes", "sporting_goods", "neg_binomial", 8.0),
    ("camping_gear", "sporting_goods", "zero_inflated", 2.2),
    ("fitness_bands", "sporting_goods", "mixture", 5.5),
    ("motor_oil", "automotive", "continuous_positive", 14.0),
    ("wiper_blades", "automotive", "mixture", 4.5),
    ("car_batteries", "automotive", "zero_inflated", 1.8),
    ("sunscreen", "beauty", "mixture", 9.0),
    ("shampoo", "beauty", "neg_binomial", 16.0),
    ("fragrance_sets", "beauty", "zero_inflated", 1.6),
    ("dog_food", "pet_supplies", "continuous_positive", 35.0),
    ("cat_litter", "pet_supplies", "neg_binomial", 12.0),
    ("printer_paper", "office", "neg_binomial", 10.0),
    ("desk_chairs", "office", "zero_inflated", 0.8),
    ("paperback_fiction", "books_media", "neg_binomial", 7.0),
    ("vinyl_records", "books_media", "zero_inflated", 1.4),
    ("power_drills", "hardware", "zero_inflated", 2.4),
    ("fasteners", "hardware", "continuous_positive", 45.0),
    ("paint_supplies", "hardware", "mixture", 6.5),
    ("ice_cream", "frozen_foods", "mixture", 20.0),
    ("frozen_pizza", "frozen_foods", "neg_binomial", 24.0),
    ("frozen_vegetables", "frozen_foods", "continuous_positive", 18.0),
)

DEMAND_FAMILIES = ("neg_binomial", "zero_inflated", "mixture", "continuous_positive")


@dataclass(frozen=True)
class EventType:
    name: str
    delta: float  # effect on log demand per unit latent intensity
    onset_prob: float  # daily onset probability
    duration: tuple  # inclusive (min, max) days
    intensity: tuple  # (min, max) kappa
    half_life: float  # days
    observe_prob: float
    note: str


# note templates are short operational bulletins
EVENT_CATALOG = {
    "heat_wave": ("Heat advisory issued for the region.", 1),
    "storm": ("Severe storm warning; store hours may be reduced.", -1),
    "local_festival": ("Local festival announced nearby this week.", 1),
    "supply_disruption": ("Supplier reports a delivery disruption.", -1),
    "social_buzz": ("Product trending on social media.", 1),
    "competitor_closure": ("Nearby competitor store temporarily closed.", 1),
    "road_works": ("Road works started on the main access street.", -1),
}


@dataclass(frozen=True)
class TemperatureSpec:
    alpha0: float = 15.0
    alpha1: float = 10.0
    phi: float = 0.0
    ar: float = 0.7
    ar_sd: float = 2.0
    shock_prob: float = 0.01
    shock_sd: float = 8.0


@dataclass(frozen=True)
class SeedConfig:
    seed_id: int
    archetype: str
    domain: str
    family: str
    n_days: int = N_DAYS
    start: dt.date = START_DATE
    temperature: TemperatureSpec = field(default_factory=TemperatureSpec)
    promo_rate: float = 0.03  # daily promotion start probability
    macro_drift: float = 0.0005
    retention_prob: float = 0.7
    beta0_knots: tuple = ()  # log-mean level at equally spaced knots
    break_day: int | None = None
    break_jump: float = 0.0
    beta_start: dict = field(default_factory=dict)  # feature -> coefficient at day 0
    beta_end: dict = field(default_factory=dict)  # feature -> coefficient at the last day
    gamma: float = 0.0  # effect of the high regime
    regime_stay: tuple = (0.98, 0.95)  # P(stay) in regimes 0 and 1
    events: tuple = ()
    dispersion: float = 5.0  # negative binomial size
    zero_prob: tuple = (0.0, 0.0)  # zero-inflation probability at start and end
    mixture_weight: tuple = (0.8, 0.8)  # weight of the main component at start and end
    mixture_scale: tuple = (0.7, 2.5)  # component mean multipliers
    continuous_shape: float = 4.0

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=self.n_days - 1)

    @property
    def integer_demand(self) -> bool:
        return self.family != "continuous_positive"


def n_knots(n_days: int) -> int:
    return max(2, int(round(KNOTS_PER_YEAR * n_days / 365.25)) + 1)


def seed_config(seed_id: int, rng_seed: int = 0) -> SeedConfig:
    """Deterministic configuration for catalog entry ``seed_id`` (0-based)."""
    if not 0 <= seed_id < len(ARCHETYPES):
        raise ValueError(f"seed_id must lie in [0, {len(ARCHETYPES)})")
    name, domain, family, level = ARCHETYPES[seed_id]
    rng = np.random.default_rng([rng_seed, seed_id, 7])
    signs = DOMAIN_SIGNS[domain]
    k = n_knots(N_DAYS)
    # baseline level: gentle random-walk knots around the typical volume
    base = np.cumsum(rng.normal(0.0, 0.08, size=k))
    base = base - base.mean() + np.log(level)
    beta_start, beta_end = {}, {}
    for feat in FEATURES:
        s = signs[feat]
        if s == 0:
            continue
        mag = rng.uniform(0.05, 0.35)
        drift = rng.uniform(0.6, 1.4) if rng.random() < 0.5 else 1.0
        beta_start[feat] = s * mag
        beta_end[feat] = s * mag * drift
    has_break = rng.random() < 0.4
    break_day = int(rng.integers(200, 600)) if has_break else None
    break_jump = float(rng.choice([-1, 1]) * rng.uniform(0.2, 0.5)) if has_break else 0.0
    names = sorted(EVENT_CATALOG)
    picked = rng.choice(len(names), size=int(rng.integers(2, 4)), replace=False)
    events = []
    for i in sorted(picked):
        ev = names[i]
        note, sign = EVENT_CATALOG[ev]
        events.append(EventType(
            name=ev,
            delta=sign * float(rng.uniform(0.3, 0.8)),
            onset_prob=float(rng.uniform(0.005, 0.02)),
            duration=(int(rng.integers(3, 6)), int(rng.integers(8, 15))),
            intensity=(0.5, 1.0),
            half_life=float(rng.uniform(2.0, 10.0)),
            observe_prob=float(rng.uniform(0.5, 0.9)),
            note=note,
        ))
    zero = (0.0, 0.0)
    if family == "zero_inflated":
        z0 = float(rng.uniform(0.1, 0.4))
        zero = (z0, float(np.clip(z0 + rng.normal(0, 0.1), 0.0, 0.7)))
    w0 = float(rng.uniform(0.7, 0.9))
    mixture = (w0, float(np.clip(w0 - rng.uniform(0.0, 0.2), 0.5, 0.95))) if family == "mixture" else (w0, w0)
    return SeedConfig(
        seed_id=seed_id,
        archetype=name,
        domain=domain,
        family=family,
        temperature=TemperatureSpec(
            alpha0=float(rng.uniform(8, 20)), alpha1=float(rng.uniform(5, 14)), phi=float(rng.uniform(0, 30)),
            ar=float(rng.uniform(0.5, 0.85)), ar_sd=float(rng.uniform(1.0, 3.0)),
        ),
        promo_rate=float(rng.uniform(0.01, 0.05)),
        macro_drift=float(rng.normal(0.0, 0.001)),
        retention_prob=float(rng.uniform(0.5, 0.9)),
        beta0_knots=tuple(float(x) for x in base),
        break_day=break_day,
        break_jump=break_jump,
        beta_start=beta_start,
        beta_end=beta_end,
        gamma=float(rng.uniform(0.1, 0.4)),
        events=tuple(events),
        dispersion=float(rng.uniform(2.0, 10.0)),
        zero_prob=zero,
        mixture_weight=mixture,
        continuous_shape=float(rng.uniform(2.0, 8.0)),
    )
