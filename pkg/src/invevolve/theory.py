"""Numerical checks of the search guarantees on constructed universes with known ground truth.

Four harnesses:

* an exponential-weights proxy over a finite policy set, checked against the
  bad-to-good mass ratio bound rho_K;
* the one-round coverage bound under a proposal law within total variation
  tau of the proxy law;
* single-epoch certified promotion, run through the real engine on a
  synthetic replay context whose true gains are known;
* rolling deployment over T periods with an injected replay/deployment shift
  bounded by xi, checking safety and the oracle-safe gap accounting.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .engine import EpochConfig, ProposalsExhausted, run_epoch
from .policies import PolicySpec
from .replay import hoeffding_radius

LOG_TOL = 1e-12  # round-off allowance when comparing log ratios


class HarnessError(ValueError):
    """The experiment is misconfigured (an assumption of the statement is violated)."""


# ---- exponential-weights proxy -------------------------------------------------

def proxy_step(p, estimates, eta: float) -> np.ndarray:
    """One multiplicative-weights step p'(i) ~ p(i) exp(eta * estimates(i)), computed in log space."""
    p = np.asarray(p, dtype=float)
    est = np.asarray(estimates, dtype=float)
    if p.shape != est.shape:
        raise ValueError("law and estimates must have the same shape")
    if np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("p must be a probability vector")
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    return _normalize(logp + eta * est)


def _normalize(logw: np.ndarray) -> np.ndarray:
    out = np.exp(logw - logsumexp(logw))
    return out / out.sum()


@dataclass(frozen=True)
class ProxyUniverse:
    success: np.ndarray  # true success probability per policy
    valid: np.ndarray  # structural validity flag per policy
    tau_good: float
    p0: np.ndarray
    eta: float
    eps_K: float = 0.0

    def __post_init__(self):
        for name in ("success", "valid", "p0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        n = self.success.size
        if self.valid.shape != (n,) or self.p0.shape != (n,):
            raise HarnessError("universe arrays must share one length")
        if np.any((self.success < 0) | (self.success > 1)):
            raise HarnessError("success probabilities must lie in [0,1]")
        if np.any(self.p0 < 0) or not math.isclose(self.p0.sum(), 1.0, abs_tol=1e-12):
            raise HarnessError("p0 must be a probability vector")
        if self.eps_K < 0:
            raise HarnessError("eps_K must be non-negative")
        if not self.good.any() or self.p0[self.good].sum() <= 0:
            raise HarnessError("the good region needs positive initial mass")
        if not self.gamma > 0:
            raise HarnessError("margin gamma must be positive")

    @property
    def good(self) -> np.ndarray:
        return self.valid.astype(bool) & (self.success >= self.tau_good)

    @property
    def bad_envelope(self) -> float:
        bad = ~self.good
        return float(self.success[bad].max()) if bad.any() else 0.0

    @property
    def gamma(self) -> float:
        return self.tau_good - self.bad_envelope

    def rho(self, K: int) -> float:
        return math.exp(self.log_rho(K))

    def log_rho(self, K: int) -> float:
        g = self.good
        if g.all():
            return -math.inf
        log0 = math.log(self.p0[~g].sum()) - math.log(self.p0[g].sum())
        return log0 - self.eta * (K * self.gamma - 2 * self.eps_K)


def make_universe(n: int = 10, good_fraction: float = 0.2, p0_good: float = 0.1, tau_good: float = 0.6,
                  gamma: float = 0.3, eta: float = 1.0, eps_K: float = 0.0, invalid_fraction: float = 0.2,
                  seed: int = 0) -> ProxyUniverse:
    """Random universe whose bad envelope sits exactly ``gamma`` below ``tau_good``."""
    if not 0 < gamma <= tau_good <= 1:
        raise HarnessError("need 0 < gamma <= tau_good <= 1")
    rng = np.random.default_rng([seed, n])
    n_good = max(1, int(round(good_fraction * n)))
    n_bad = n - n_good
    if n_bad < 1:
        raise HarnessError("universe needs at least one bad policy")
    n_invalid = min(int(round(invalid_fraction * n)), n_bad - 1)
    succ = np.empty(n)
    succ[:n_good] = rng.uniform(tau_good, 1.0, size=n_good)
    succ[n_good:] = rng.uniform(0.0, tau_good - gamma, size=n_bad)
    succ[n_good] = tau_good - gamma
    valid = np.ones(n, dtype=bool)
    if n_invalid:
        valid[n - n_invalid:] = False
        succ[n - n_invalid:] = 0.0
    p0 = np.empty(n)
    p0[:n_good] = p0_good * rng.dirichlet(np.ones(n_good))
    p0[n_good:] = (1 - p0_good) * rng.dirichlet(np.ones(n_bad))
    return ProxyUniverse(succ, valid, tau_good, p0, eta, eps_K)


def projected_noise(universe: ProxyUniverse, K: int, rng, scale: float = 0.2, mode: str = "random") -> np.ndarray:
    """K x |Pi| estimates with |sum_k (est_k - success)| <= eps_K for every policy and est in [0,1].

    ``mode="adversarial"`` spends the whole budget lowering good policies and
    raising bad ones; ``"random"`` draws Gaussian errors and projects each
    step onto the feasible set (which always contains a zero error).
    """
    succ = universe.success
    eps = universe.eps_K
    est = np.empty((K, succ.size))
    cum = np.zeros(succ.size)
    sign = np.where(universe.good, -1.0, 1.0)
    for k in range(K):
        if mode == "adversarial":
            raw = sign * (eps / K if K else 0.0)
        elif mode == "random":
            raw = rng.normal(0.0, scale, size=succ.size)
        else:
            raise HarnessError(f"unknown noise mode {mode!r}")
        lo = np.maximum(-eps - cum, -succ)
        hi = np.minimum(eps - cum, 1.0 - succ)
        est[k] = np.clip(succ + np.clip(raw, lo, hi), 0.0, 1.0)
        cum += est[k] - succ
    return est


def check_noise(universe: ProxyUniverse, estimates: np.ndarray) -> None:
    est = np.asarray(estimates, dtype=float)
    if est.size and (np.any(est < 0) or np.any(est > 1)):
        raise HarnessError("estimates must lie in [0,1]")
    drift = np.abs((est - universe.success).sum(axis=0)) if est.size else np.zeros(1)
    if np.any(drift > universe.eps_K + 1e-9):
        raise HarnessError(f"noise exceeds the cumulative bound eps_K={universe.eps_K}")


def run_proxy(universe: ProxyUniverse, estimates: np.ndarray) -> np.ndarray:
    """Law after applying every step in ``estimates`` (log space throughout)."""
    with np.errstate(divide="ignore"):
        logp = np.log(universe.p0)
    if len(estimates):
        logp = logp + universe.eta * np.asarray(estimates).sum(axis=0)
    return logp


@dataclass
class GuaranteeReport:
    name: str
    params: dict
    trials: int
    bound: float
    observed: float
    holds: bool
    failures: int = 0
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def reports_markdown(reports: Sequence[GuaranteeReport]) -> str:
    lines = ["| check | parameters | trials | bound | observed | failures | holds |",
             "|---|---|---|---|---|---|---|"]
    for r in reports:
        params = ", ".join(f"{k}={v}" for k, v in r.params.items())
        lines.append(f"| {r.name} | {params} | {r.trials} | {r.bound:.6g} | {r.observed:.6g} | {r.failures} | "
                     f"{'yes' if r.holds else 'NO'} |")
    return "\n".join(lines) + "\n"


def reports_json(reports: Sequence[GuaranteeReport]) -> str:
    return json.dumps([r.to_json() for r in reports], sort_keys=True, indent=2) + "\n"


def verify_ratio_bound(universe: ProxyUniverse, K: int, trials: int = 100, seed: int = 0,
                    noise_scale: float = 0.2, estimates: Callable | None = None) -> GuaranteeReport:
    """Check the bad/good ratio and good-mass bounds after K proxy steps.

    ``estimates(rng, trial)`` may supply a custom K x |Pi| estimate array; it
    is validated against the cumulative noise bound rather than projected.
    """
    if K < 0 or trials < 1:
        raise HarnessError("need K >= 0 and trials >= 1")
    good = universe.good
    log_rho = universe.log_rho(K)
    worst_log_ratio = -math.inf
    min_good_mass = math.inf
    failures = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        if estimates is not None:
            est = np.asarray(estimates(rng, t), dtype=float).reshape(K, -1)
            check_noise(universe, est)
        else:
            mode = "adversarial" if t % 2 else "random"
            est = projected_noise(universe, K, rng, noise_scale, mode)
        logp = run_proxy(universe, est)
        log_ratio = logsumexp(logp[~good]) - logsumexp(logp[good]) if (~good).any() else -math.inf
        good_mass = math.exp(logsumexp(logp[good]) - logsumexp(logp))
        worst_log_ratio = max(worst_log_ratio, log_ratio)
        min_good_mass = min(min_good_mass, good_mass)
        mass_lb = 1.0 / (1.0 + math.exp(log_rho))
        if log_ratio > log_rho + LOG_TOL * max(1.0, abs(log_rho)) or good_mass < mass_lb * (1 - 1e-12):
            failures += 1
    rho = math.exp(log_rho)
    return GuaranteeReport(
        "ratio_bound",
        {"n": int(universe.success.size), "K": K, "gamma": round(universe.gamma, 6), "eta": universe.eta,
         "eps_K": universe.eps_K},
        trials, rho, math.exp(worst_log_ratio), failures == 0, failures,
        {"mass_lower_bound": 1.0 / (1.0 + rho), "min_good_mass": min_good_mass,
         "log_rho": log_rho, "max_log_ratio": worst_log_ratio},
    )


def ratio_bound_grid(trials: int = 20, seed: int = 0) -> list[GuaranteeReport]:
    out = []
    for n in (10, 100):
        for gamma in (0.1, 0.3):
            for eta in (0.5, 1.0, 2.0):
                for K in (0, 1, 5, 20, 50):
                    for eps in sorted({0.0, 0.5, K * gamma / 2}):
                        u = make_universe(n, gamma=gamma, eta=eta, eps_K=eps, seed=seed)
                        out.append(verify_ratio_bound(u, K, trials, seed))
    return out


# ---- one-round coverage --------------------------------------------------------

@dataclass(frozen=True)
class CoverageResult:
    q: float
    q_bar: float
    coverage: float
    coverage_bar: float
    holds: bool


def coverage_bound(kappa: float, rho_K: float, tau: float) -> float:
    return min(max(kappa / (1.0 + rho_K) - tau, 0.0), 1.0)


def adversarial_coverage(p, target, tau: float) -> float:
    """Smallest mass on ``target`` over laws within total variation ``tau`` of ``p``.

    The adversary removes up to ``tau`` from the target and places it off the
    target; the constructed law is returned implicitly through its coverage.
    """
    p = np.asarray(p, dtype=float)
    mask = np.zeros(p.size, dtype=bool)
    mask[list(target)] = True
    if mask.all():
        return float(p.sum())
    inside = float(p[mask].sum())
    moved = min(tau, inside)
    nu = p.copy()
    if inside > 0:
        nu[mask] *= (inside - moved) / inside
    outside = np.flatnonzero(~mask)
    nu[outside[0]] += moved
    return float(nu[mask].sum())


def verify_coverage(p_K, promotable, safe, tau: float, kappa: float, kappa_bar: float, rho_K: float,
                  good=None) -> CoverageResult:
    """Clamped coverage bounds and the adversary's achieved coverage for both sets.

    When ``good`` is given, kappa and kappa_bar are checked as lower bounds on
    the conditional masses of each set within it, and the good mass against
    1/(1+rho_K).
    """
    p = np.asarray(p_K, dtype=float)
    if tau < 0 or rho_K < 0:
        raise HarnessError("tau and rho_K must be non-negative")
    for name, k in (("kappa", kappa), ("kappa_bar", kappa_bar)):
        if not 0 <= k <= 1:
            raise HarnessError(f"{name} must lie in [0,1]")
    if good is not None:
        g = np.zeros(p.size, dtype=bool)
        g[list(good)] = True
        pg = p[g].sum()
        if pg < 1.0 / (1.0 + rho_K) - 1e-12:
            raise HarnessError("good mass is below 1/(1+rho_K)")
        for name, k, s in (("kappa", kappa, promotable), ("kappa_bar", kappa_bar, safe)):
            m = np.zeros(p.size, dtype=bool)
            m[list(s)] = True
            if p[m & g].sum() < k * pg - 1e-12:
                raise HarnessError(f"{name} exceeds the conditional mass of its set")
    q = coverage_bound(kappa, rho_K, tau)
    q_bar = coverage_bound(kappa_bar, rho_K, tau)
    cov = adversarial_coverage(p, promotable, tau)
    cov_bar = adversarial_coverage(p, safe, tau)
    return CoverageResult(q, q_bar, cov, cov_bar, cov >= q - 1e-12 and cov_bar >= q_bar - 1e-12)


# ---- synthetic epoch harness ----------------------------------------------------

def _key_seed(key: str) -> int:
    return zlib.crc32(key.encode())


class SyntheticReplay:
    """Replay context with known per-policy mean costs and bounded i.i.d. noise.

    Sample i of policy pi costs ``mean(pi) + noise * U_i`` with U uniform on
    [-1, 1]; draws are seeded from (seed, policy key) so they are reproducible.
    ``flip`` negates every cost, which reverses the direction of every gate
    (used as a negative control).
    """

    def __init__(self, means: dict, m: int, noise: float, seed: int, lead_time: int = 0, flip: bool = False):
        self.means = means
        self.m = m
        self.noise = noise
        self.seed = seed
        self.lead_time = lead_time
        self.flip = flip

    def path_costs(self, policy: PolicySpec) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _key_seed(policy.key())])
        c = self.means[policy.key()] + self.noise * rng.uniform(-1.0, 1.0, size=self.m)
        return -c if self.flip else c

    def gain(self, cand: PolicySpec, comp: PolicySpec) -> float:
        return self.means[comp.key()] - self.means[cand.key()]


def _bs(i: int) -> PolicySpec:
    return PolicySpec("BaseStock", {"S": float(i)})


class _LawProposer:
    """Proposes ``winner`` with probability q per round, else a fresh losing policy."""

    def __init__(self, winner: PolicySpec, losers: Sequence[PolicySpec], q: float, seed: int):
        self.winner, self.losers, self.q, self.seed = winner, list(losers), q, seed
        self.proposed_winner = False

    def propose(self, ctx):
        rng = np.random.default_rng([self.seed, ctx.round])
        if rng.random() < self.q:
            self.proposed_winner = True
            return self.winner
        if ctx.round > len(self.losers):
            raise ProposalsExhausted
        return self.losers[ctx.round - 1]


def _binomial_sigma(p: float, n: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1 - p) / n)


@dataclass(frozen=True)
class PromotionHarness:
    """Single-epoch setting with reference cost 1, a winner ``gap`` below it and losers above."""
    q: float
    J: int
    delta: float
    epsilon: float = 0.05
    noise: float = 0.25
    loser_excess: float = 0.2
    gap: float = 0.6
    m: int | None = None

    @property
    def bound(self) -> float:
        # a loser against the winner is the widest evaluated gap, plus two noise half-widths
        return self.gap + self.loser_excess + 2 * self.noise

    @property
    def n_pairs(self) -> int:
        return 1 + 2 * self.J  # initial pool {reference, other baseline}

    def samples(self) -> int:
        if self.m is not None:
            return self.m
        slack = (self.gap - self.epsilon) / 2
        if slack <= 0:
            raise HarnessError("winner gap must exceed epsilon")
        return math.ceil(2 * math.log(2 * self.n_pairs / self.delta) * (self.bound / slack) ** 2)

    def radius(self) -> float:
        return hoeffding_radius(self.bound, self.samples(), self.n_pairs, self.delta)

    def promotable(self) -> bool:
        return self.gap - 2 * self.radius() >= self.epsilon


def _true_promotion(log, means: dict, epsilon: float) -> bool:
    """Some promotion was a true epsilon-improvement and the deployed policy is truly safe."""
    champ = PolicySpec.from_json(log.champion_path[0]["policy"])
    ref = PolicySpec.from_json(log.reference)
    hit = False
    for d in log.decisions:
        if not d["promoted"]:
            continue
        cand = PolicySpec.from_json(d["candidate"])
        if means[champ.key()] - means[cand.key()] >= epsilon:
            hit = True
        champ = cand
    deployed = PolicySpec.from_json(log.deployed)
    return hit and means[ref.key()] - means[deployed.key()] >= 0


def verify_promotion(h: PromotionHarness, trials: int = 5000, seed: int = 0, flip_gate: bool = False
                    ) -> GuaranteeReport:
    if not h.promotable():
        raise HarnessError("winner is not promotable at this sample size")
    ref, other, winner = _bs(1), PolicySpec("ConstantOrder", {"q": 1.0}), _bs(2)
    losers = [_bs(10 + j) for j in range(h.J)]
    means = {ref.key(): 1.0, other.key(): 1.0 + h.loser_excess, winner.key(): 1.0 - h.gap}
    means.update({p.key(): 1.0 + h.loser_excess for p in losers})
    cfg = EpochConfig(J=h.J, epsilon=h.epsilon, delta=h.delta, xi=0.0, cert_method="hoeffding",
                      gain_bound=h.bound)
    m = h.samples()
    hits = promotions = 0
    for t in range(trials):
        replay = SyntheticReplay(means, m, h.noise, seed=seed * 1_000_003 + t, flip=flip_gate)
        prop = _LawProposer(winner, losers, h.q, seed=seed * 1_000_003 + t)
        _, log = run_epoch(replay, [ref, other], None, ref, prop, cfg)
        promotions += any(d["promoted"] for d in log.decisions)
        hits += _true_promotion(log, means, h.epsilon)
    bound = 1.0 - h.delta - (1.0 - h.q) ** h.J
    freq = hits / trials
    tol = 3 * _binomial_sigma(bound, trials)
    return GuaranteeReport(
        "certified_promotion", {"q": h.q, "J": h.J, "delta": h.delta, "m": m}, trials, bound, freq,
        freq >= bound - tol, int(trials - hits),
        {"tolerance": tol, "promotion_frequency": promotions / trials, "radius": h.radius(),
         "flip_gate": flip_gate},
    )


@dataclass(frozen=True)
class RollingHarness:
    """T-period deployment with injected shift, a near-oracle-safe proposal law and known truth.

    Each period has a reference (deployment cost 1), a certifiably safe
    optimum, a near-oracle policy ``nu`` worse than it, decoys and losers.
    Replay costs differ from deployment costs by at most xi/2 per policy, so
    replay gains are within xi of deployment gains.
    """
    T: int = 5
    J: int = 8
    delta: float = 0.05
    q_bar: float = 0.4
    xi: float = 0.05
    nu: float = 0.02
    noise: float = 0.25
    m: int = 400
    epsilon: float = 0.01
    cert_method: str = "hoeffding"

    @property
    def bound(self) -> float:
        return 1.5 + 2 * self.noise + self.xi

    @property
    def n_pairs(self) -> int:
        return 2 + 2 * self.J  # initial pool {reference, other, incumbent}


def _period_universe(h: RollingHarness, t: int, rng):
    """Deployment means, replay means and the policy roles for period t."""
    ref, other = _bs(1), PolicySpec("ConstantOrder", {"q": 1.0})
    base = 100 * (t + 1)
    best, near = _bs(base + 1), _bs(base + 2)
    decoys = [_bs(base + 10 + j) for j in range(3)]
    losers = [_bs(base + 50 + j) for j in range(h.J)]
    rad = hoeffding_radius(h.bound, h.m, h.n_pairs, h.delta) if h.cert_method == "hoeffding" else 0.0
    # the optimum must be certifiable after shift: gain >= 2 xi + 2 rad
    v_best = 2 * h.xi + 2 * rad + 0.05 + 0.1 * rng.random()
    dep = {ref.key(): 1.0, other.key(): 1.3, best.key(): 1.0 - v_best, near.key(): 1.0 - (v_best - h.nu)}
    for d in decoys:
        dep[d.key()] = 1.0 - rng.uniform(-0.05, 0.9) * v_best
    for p in losers:
        dep[p.key()] = 1.0 + rng.uniform(0.05, 0.2)
    shift = {k: rng.uniform(-h.xi / 2, h.xi / 2) for k in dep}
    rep = {k: dep[k] + shift[k] for k in dep}
    roles = {"reference": ref, "other": other, "best": best, "near": near, "decoys": decoys, "losers": losers}
    return dep, rep, roles


class _RollingProposer:
    def __init__(self, near, decoys, losers, q_bar, seed):
        self.near, self.decoys, self.losers, self.q_bar, self.seed = near, decoys, losers, q_bar, seed
        self.proposed_near = False

    def propose(self, ctx):
        rng = np.random.default_rng([self.seed, ctx.round])
        u = rng.random()
        if u < self.q_bar:
            self.proposed_near = True
            return self.near
        if u < self.q_bar + (1 - self.q_bar) / 2:
            return self.decoys[int(rng.integers(len(self.decoys)))]
        return self.losers[ctx.round - 1]


def _covered(log, rep_means: dict) -> bool:
    """Every evaluated pair's interval contains its true replay gain."""
    for s in log.stats:
        cand = PolicySpec.from_json(s["candidate"]).key()
        comp = PolicySpec.from_json(s["comparator"]).key()
        g = rep_means[comp] - rep_means[cand]
        if not s["lcb"] - 1e-12 <= g <= s["ucb"] + 1e-12:
            return False
    return True


def _radius(log, cand: PolicySpec, comp: PolicySpec) -> float:
    if cand == comp:
        return 0.0
    for s in log.stats:
        if PolicySpec.from_json(s["candidate"]) == cand and PolicySpec.from_json(s["comparator"]) == comp:
            return float(s["radius"])
    return 0.0


def verify_rolling(h: RollingHarness, trials: int = 2000, seed: int = 0, flip_gate: bool = False
                    ) -> GuaranteeReport:
    cfg = EpochConfig(J=h.J, epsilon=h.epsilon, delta=h.delta, xi=h.xi, cert_method=h.cert_method,
                      gain_bound=h.bound)
    good_runs = safety_fail = gap_fail = 0
    worst_slack = math.inf
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial, 3])
        incumbent = None
        good = True
        gaps = gammas = 0.0
        safe_all = True
        for t in range(h.T):
            dep, rep, roles = _period_universe(h, t, rng)
            means = dict(rep)
            if incumbent is not None and incumbent.key() not in means:
                # last period's deployment is re-costed with this period's reference level
                dep[incumbent.key()] = 1.0
                means[incumbent.key()] = rep[incumbent.key()] = 1.0
            stream = int(rng.integers(2**31))
            replay = SyntheticReplay(means, h.m, h.noise, stream, flip=flip_gate)
            prop = _RollingProposer(roles["near"], roles["decoys"], roles["losers"], h.q_bar, stream)
            ref = roles["reference"]
            d, log = run_epoch(replay, [ref, roles["other"]], incumbent, ref, prop, cfg)
            # coverage is judged on the costs the engine actually saw
            seen = {k: -v for k, v in rep.items()} if flip_gate else rep
            good &= prop.proposed_near and _covered(log, seen)
            v_d = dep[ref.key()] - dep[d.key()]
            safe_all &= v_d >= -1e-12
            v_star = dep[ref.key()] - dep[roles["best"].key()]
            gaps += v_star - v_d
            gammas += h.nu + 2 * _radius(log, roles["near"], ref) + 2 * _radius(log, d, ref) + 2 * h.xi
            incumbent = d
        if good:
            good_runs += 1
            safety_fail += not safe_all
            gap_fail += gaps > gammas + 1e-9
            worst_slack = min(worst_slack, gammas - gaps)
    lower = 1.0 - h.T * (h.delta + (1.0 - h.q_bar) ** h.J)
    freq = good_runs / trials
    tol = 3 * _binomial_sigma(lower, trials)
    holds = safety_fail == 0 and gap_fail == 0 and freq >= lower - tol
    return GuaranteeReport(
        "rolling_deployment", {"T": h.T, "J": h.J, "delta": h.delta, "q_bar": h.q_bar, "xi": h.xi, "nu": h.nu},
        trials, lower, freq, holds, safety_fail + gap_fail,
        {"good_runs": good_runs, "safety_failures": safety_fail, "gap_failures": gap_fail,
         "min_gap_slack": worst_slack if good_runs else None, "tolerance": tol, "flip_gate": flip_gate},
    )


def default_suite(trials: int | None = None, seed: int = 0, flip_gate: bool = False) -> list[GuaranteeReport]:
    """The full set of checks; ``trials`` overrides every Monte Carlo size."""
    reports = ratio_bound_grid(trials or 20, seed)
    for q, J, delta in ((0.3, 10, 0.05), (0.1, 30, 0.02)):
        reports.append(verify_promotion(PromotionHarness(q, J, delta), trials or 5000, seed, flip_gate))
    reports.append(verify_rolling(RollingHarness(), trials or 2000, seed, flip_gate))
    return reports
