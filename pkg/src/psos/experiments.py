"""Desk-scale experiments: tail rates, typical height, concentration, hitting times.

Tails of the infinite-volume one-point law are estimated in an ``M x M``
zero-boundary proxy box.  The default estimator writes
``P(eta_0 >= h)`` as a product of ratios ``P(eta_0 >= k | eta_0 >= k-1)``;
each ratio is the average, along a chain whose centre is held at
``>= k-1``, of the exact heat-bath probability of ``>= k`` given the
neighbours.  This reaches tails far below what direct counting can see.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import _kernels as K
from . import contour as ct
from .dynamics import CHUNK, ChainState, compiled, hit_level_fraction, make_rng, run_restricted
from .gibbs import FLOOR, FLOOR_CEILING, FREE, ModelParams
from .lattice import HeightField

# stream tags keep the experiments' random streams disjoint
_TAG_TAIL, _TAG_HIT, _TAG_CONC, _TAG_CORR, _TAG_NU = 11, 12, 13, 14, 15

CI_POLICIES = ("point", "lower", "upper")


class UnmixedError(RuntimeError):
    """Chains started from the two extremal fields disagree beyond tolerance."""


# ---------------------------------------------------------------- level schedule


def d_of_p(p: float) -> float:
    """Hitting-time exponent: ``p`` for ``1 < p < 2``, ``2`` for ``p >= 2``.

    ``p = 1`` lies outside both branches; we return 1, the SOS area scale
    ``L^{2a}``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if p >= 2:
        return 2.0
    return float(p)


def default_n_plus(L: int) -> int:
    return max(1, math.ceil(math.log(L)))


@dataclass(frozen=True)
class LevelSchedule:
    """Levels derived from ``a`` and the typical height ``H``.

    ``omega_level = ceil(a H)`` is the level of the nine-tenths target;
    ``h = omega_level - 1`` is the contour level of the atypical set and
    ``h + 1`` the level of the half-box target.  ``min_level`` lifts levels
    that would otherwise make the targets trivial.
    """

    p: float
    a: float
    H: int
    min_level: int = 1

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")

    @property
    def d_of_p(self) -> float:
        return d_of_p(self.p)

    @property
    def raw_level(self) -> int:
        return math.ceil(self.a * self.H - 1e-12)

    @property
    def level(self) -> int:
        return max(self.raw_level, self.min_level)

    @property
    def h(self) -> int:
        return self.level - 1

    def area_threshold(self, L: int, delta: float) -> float:
        return delta * L ** (2 * self.a ** self.d_of_p)

    def to_json(self) -> dict:
        return {"p": self.p, "a": self.a, "H": self.H, "d_of_p": self.d_of_p, "raw_level": self.raw_level,
                "min_level": self.min_level, "level": self.level, "h": self.h}


# ---------------------------------------------------------------- tails


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes out of ``n``."""
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def batch_means(x: np.ndarray, n_batches: int = 20) -> tuple[float, float]:
    """Mean and its standard error from ``n_batches`` contiguous batch means."""
    x = np.asarray(x, dtype=float)
    b = len(x) // n_batches
    if b < 1:
        return float(x.mean()), math.inf
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass(frozen=True)
class TailEstimate:
    h: int
    p_hat: float
    ci: float  # 95% radius
    n_samples: int
    box: int
    method: str
    mode: str
    factors: tuple = ()

    @property
    def lower(self) -> float:
        return max(0.0, self.p_hat - self.ci)

    @property
    def upper(self) -> float:
        return min(1.0, self.p_hat + self.ci)

    def value(self, policy: str = "point") -> float:
        if policy not in CI_POLICIES:
            raise ValueError(f"ci policy must be one of {CI_POLICIES}")
        return {"point": self.p_hat, "lower": self.lower, "upper": self.upper}[policy]

    def to_json(self) -> dict:
        d = asdict(self)
        d["factors"] = [list(f) for f in self.factors]
        return d


def default_proxy_side(L: int) -> int:
    return max(64, 8 * math.ceil(math.log(L)))


def _check_proxy(M: int) -> None:
    if M < 4 * math.ceil(math.log(M)):
        raise ValueError(f"proxy box side {M} too small: need M >= 4*ceil(log M)")


class TailEstimator:
    """One-point tails of the centre site of an ``M x M`` zero-boundary box.

    ``method="ratio"`` (default) multiplies Rao-Blackwellized pinned ratios;
    ``method="direct"`` counts ``eta_0 >= h`` along one chain with a Wilson
    interval.  Factors are cached so successive levels reuse earlier work.
    """

    def __init__(self, p: float, beta: float, M: int = 64, mode: str = FREE, n_sweeps: int = 10_000,
                 burn_in: int = 500, seed: int = 0, method: str = "ratio", n_plus: int | None = None):
        _check_proxy(M)
        if mode == FLOOR_CEILING and n_plus is None:
            raise ValueError("floor_ceiling tails need n_plus")
        if method not in ("ratio", "direct"):
            raise ValueError("method must be 'ratio' or 'direct'")
        self.params = ModelParams(p, beta, mode, n_plus if mode == FLOOR_CEILING else None)
        self.M, self.n_sweeps, self.burn_in, self.seed, self.method = M, n_sweeps, burn_in, seed, method
        self.centre = (M + 1) // 2
        self._factors: dict[int, tuple[float, float]] = {}
        self._direct: np.ndarray | None = None

    @property
    def _centre_index(self) -> int:
        return (self.centre - 1) * self.M + (self.centre - 1)

    def factor(self, k: int) -> tuple[float, float]:
        """``(r_k, se_k)`` for ``r_k = P(eta_0 >= k | eta_0 >= k-1)``; ``k = 0`` gives ``P(eta_0 >= 0)``."""
        if k in self._factors:
            return self._factors[k]
        M = self.M
        if k == 0 and self.params.mode != FREE:
            res = (1.0, 0.0)
        elif self.params.mode == FLOOR_CEILING and k > self.params.n_plus:
            res = (0.0, 0.0)
        else:
            c = compiled(self.params, M)
            pin_lo = -(1 << 60) if k == 0 else k - 1
            h0 = np.zeros((M, M), dtype=np.int64)
            h0[self.centre - 1, self.centre - 1] = max(k - 1, 0)
            grid = c.grid(HeightField.from_array(h0))
            rng = make_rng(self.seed, _TAG_TAIL, k)
            n = M * M
            out = np.empty(self.n_sweeps)
            burn = np.empty(0)
            self._run(grid, c, rng, self.burn_in * n, pin_lo, k, n, burn)
            self._run(grid, c, rng, self.n_sweeps * n, pin_lo, k, n, out)
            res = batch_means(out)
        self._factors[k] = res
        return res

    def _run(self, grid, c, rng, steps, pin_lo, thr, every, out):
        j = 0
        while steps > 0:
            m = min(steps, max(every, (CHUNK * 4 // every) * every))
            j += K.run_pinned_ratio(grid, *c.args(), rng.random((m, 2)), self._centre_index, pin_lo, thr,
                                    every, out[j:])
            steps -= m

    def _direct_samples(self) -> np.ndarray:
        if self._direct is None:
            M, n = self.M, self.M * self.M
            c = compiled(self.params, M)
            grid = c.grid(HeightField.from_array(np.zeros((M, M), dtype=np.int64)))
            rng = make_rng(self.seed, _TAG_TAIL, 1000)
            pos = c.sites[self._centre_index]
            for _ in range(self.burn_in):
                K.run_steps(grid, *c.args(), rng.random((n, 2)))
            vals = np.empty(self.n_sweeps, dtype=np.int64)
            for s in range(self.n_sweeps):
                K.run_steps(grid, *c.args(), rng.random((n, 2)))
                vals[s] = grid[pos]
            self._direct = vals
        return self._direct

    def tail(self, h: int) -> TailEstimate:
        mode = self.params.mode
        if h <= 0 and mode != FREE:
            return TailEstimate(h, 1.0, 0.0, 0, self.M, "exact", mode)
        if self.method == "direct":
            vals = self._direct_samples()
            k = int((vals >= h).sum())
            lo, hi = wilson_interval(k, len(vals))
            ph = k / len(vals)
            return TailEstimate(h, ph, max(ph - lo, hi - ph), len(vals), self.M, "direct", mode)
        first = 0 if mode == FREE else 1
        if h < first:
            # free mode, negative level: 1 - P(eta_0 <= h-1) = 1 - P(eta_0 >= 1-h) by symmetry
            t = self.tail(1 - h)
            return TailEstimate(h, 1.0 - t.p_hat, t.ci, t.n_samples, self.M, "ratio", mode, t.factors)
        ks = range(first, h + 1)
        fs = [self.factor(k) for k in ks]
        p_hat = math.prod(r for r, _ in fs)
        rel2 = sum((se / r) ** 2 for r, se in fs if r > 0)
        ci = 1.959963984540054 * p_hat * math.sqrt(rel2)
        return TailEstimate(h, p_hat, ci, self.n_sweeps * len(fs), self.M, "ratio", mode,
                            tuple((k, r, se) for k, (r, se) in zip(ks, fs)))


def estimate_infinite_tail(p: float, beta: float, h: int, M: int = 64, n_samples: int = 10_000,
                           mode: str = FREE, seed: int = 0, burn_in: int = 500, method: str = "ratio",
                           n_plus: int | None = None) -> TailEstimate:
    """Centre-site tail ``P(eta_0 >= h)`` in an ``M x M`` zero-boundary box.

    ``n_samples`` is the number of recorded sweeps per chain.
    """
    est = TailEstimator(p, beta, M, mode, n_samples, burn_in, seed, method, n_plus)
    return est.tail(h)


class FrozenTails:
    """Tail estimator backed by a fixed table ``{h: TailEstimate or probability}``."""

    def __init__(self, table: dict):
        self.table = {int(h): (v if isinstance(v, TailEstimate) else TailEstimate(int(h), float(v), 0.0, 0, 0,
                                                                                      "frozen", "n/a"))
                      for h, v in table.items()}

    def tail(self, h: int) -> TailEstimate:
        if h in self.table:
            return self.table[h]
        raise KeyError(f"no frozen tail for h={h}")


@dataclass
class TypicalHeight:
    H: int
    threshold: float
    ci_policy: str
    tails: list
    method: str

    def to_json(self) -> dict:
        return {"H": self.H, "threshold": self.threshold, "ci_policy": self.ci_policy, "method": self.method,
                "tails": [t.to_json() for t in self.tails]}


def typical_height(beta: float, L: int, tail_estimator, ci_policy: str = "point",
                   max_h: int = 64) -> TypicalHeight:
    """Largest ``h >= 0`` whose tail meets ``5 beta / L``; scans up to two consecutive failures."""
    thr = 5.0 * beta / L
    H, fails, tails = 0, 0, []
    if thr > 1.0:
        return TypicalHeight(0, thr, ci_policy, tails, "empty-criterion")
    for h in range(0, max_h + 1):
        t = tail_estimator.tail(h)
        tails.append(t)
        if t.value(ci_policy) >= thr:
            H, fails = h, 0
        else:
            fails += 1
            if fails >= 2:
                break
    return TypicalHeight(H, thr, ci_policy, tails, getattr(tail_estimator, "method", "frozen"))


def estimate_H(p: float, beta: float, L: int, tail_estimator=None, ci_policy: str = "point",
               **estimator_kw) -> int:
    """Typical height ``max{h : P(eta_0 >= h) >= 5 beta / L}`` from estimated tails (0 if none)."""
    if tail_estimator is None:
        estimator_kw.setdefault("M", default_proxy_side(L))
        tail_estimator = TailEstimator(p, beta, **estimator_kw)
    return typical_height(beta, L, tail_estimator, ci_policy).H


@dataclass
class RateFit:
    slope: float
    intercept: float
    hs: list
    neg_log_tails: list
    tails: list

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "h": self.hs,
                "neg_log_tail": self.neg_log_tails, "tails": [t.to_json() for t in self.tails]}


def tail_rates(p: float, beta: float, hs: Sequence[int] = (1, 2, 3), M: int = 64, n_samples: int = 10_000,
               mode: str = FREE, seed: int = 0, burn_in: int = 500, method: str = "ratio") -> RateFit:
    """Least-squares slope of ``-log p_hat`` against ``h``."""
    est = TailEstimator(p, beta, M, mode, n_samples, burn_in, seed, method)
    tails = [est.tail(h) for h in hs]
    y = [-math.log(t.p_hat) if t.p_hat > 0 else math.inf for t in tails]
    if all(math.isfinite(v) for v in y) and len(hs) >= 2:
        fit = stats.linregress(list(hs), y)
        slope, icpt = float(fit.slope), float(fit.intercept)
    else:
        slope = icpt = math.nan
    return RateFit(slope, icpt, list(hs), y, tails)


# ---------------------------------------------------------------- concentration


@dataclass
class ConcentrationReport:
    K: int
    H: int
    level: int
    fraction: float
    fraction_min: float
    threshold: float
    meets_threshold: bool
    by_start: dict
    fractions_by_K: dict
    n_samples: int

    def to_json(self) -> dict:
        return asdict(self)


def _sample_fields(params: ModelParams, L: int, start: np.ndarray, burn_in: int, n_samples: int,
                   thin: int, rng) -> np.ndarray:
    c = compiled(params, L)
    grid = c.grid(HeightField.from_array(start))
    n = L * L
    for _ in range(burn_in):
        K.run_steps(grid, *c.args(), rng.random((n, 2)))
    out = np.empty((n_samples, L, L), dtype=np.int64)
    for s in range(n_samples):
        for _ in range(thin):
            K.run_steps(grid, *c.args(), rng.random((n, 2)))
        out[s] = grid.reshape(L + 2, L + 2)[1:-1, 1:-1]
    return out


def concentration_experiment(p: float, beta: float, L: int, K: int, n_samples: int = 200,
                             H: int | None = None, mode: str = FLOOR, n_plus: int | None = None,
                             burn_in: int = 2000, thin: int = 10, epsilon: float = 0.2, seed: int = 0,
                             agreement_tol: float = 0.02, top: int | None = None,
                             tail_kw: dict | None = None) -> ConcentrationReport:
    """Fraction of sites with ``eta >= H - K`` under the floor measure.

    Two chains, from all-zero and from the all-``top`` field (the ceiling
    when there is one), must agree on the mean fraction at every offset up to
    ``K`` within ``agreement_tol`` plus four standard errors; otherwise
    :class:`UnmixedError` is raised.
    """
    if mode == FREE:
        raise ValueError("concentration is measured under a floor")
    if H is None:
        H = estimate_H(p, beta, L, **(tail_kw or {}))
    if mode == FLOOR_CEILING:
        n_plus = n_plus or default_n_plus(L)
        top = n_plus
    else:
        n_plus = None
        top = top if top is not None else 2 * default_n_plus(L)
    params = ModelParams(p, beta, mode, n_plus)
    starts = {"zero": np.zeros((L, L), dtype=np.int64), "top": np.full((L, L), top, dtype=np.int64)}
    samples = {name: _sample_fields(params, L, s, burn_in, n_samples, thin, make_rng(seed, _TAG_CONC, i))
               for i, (name, s) in enumerate(starts.items())}
    by_start, fractions = {}, {}
    for k in range(0, max(K, 0) + 1):
        lvl = H - k
        per = {}
        for name, S in samples.items():
            f = (S >= lvl).mean(axis=(1, 2))
            per[name] = (float(f.mean()), float(f.std(ddof=1) / math.sqrt(len(f))) if len(f) > 1 else 0.0,
                         float(f.min()))
        (m0, s0, _), (m1, s1, _) = per["zero"], per["top"]
        if abs(m0 - m1) > agreement_tol + 4 * math.hypot(s0, s1):
            raise UnmixedError(f"starts disagree at level {lvl}: {m0:.4f} vs {m1:.4f}")
        fractions[k] = 0.5 * (m0 + m1)
        by_start[k] = {name: {"mean": v[0], "se": v[1], "min": v[2]} for name, v in per.items()}
    level = H - K
    frac = fractions[K]
    fmin = min(by_start[K][n]["min"] for n in by_start[K])
    return ConcentrationReport(K, H, level, frac, fmin, 1.0 - epsilon, frac >= 1.0 - epsilon,
                               {str(k): v for k, v in by_start.items()},
                               {str(k): v for k, v in fractions.items()}, 2 * n_samples)


# ---------------------------------------------------------------- hitting times


@dataclass
class HittingConfig:
    p: float
    beta: float
    a: float
    L_list: tuple
    n_seeds: int = 32
    T_max: int = 10 ** 7  # sweeps
    target: str = "omega"  # "omega" (9/10 at ceil(aH)) or "B" (1/2 at h+1)
    start: str = "zero"  # "zero" or "nu"
    fraction: float | None = None
    min_level: int = 1
    H: dict | None = None  # fixed H per L; otherwise estimated
    n_plus: dict | None = None
    delta: float = 0.1
    nu_burn_in: int = 1000  # sweeps of the restricted chain
    seed: int = 0
    tail_kw: dict = field(default_factory=dict)

    @property
    def target_fraction(self) -> float:
        if self.fraction is not None:
            return self.fraction
        return 0.9 if self.target == "omega" else 0.5


def _hit_one(job):
    cfg, L, s, level, n_plus, h, area_thr = job
    params = ModelParams(cfg.p, cfg.beta, FLOOR_CEILING, n_plus)
    n = L * L
    state = ChainState.start(HeightField.constant(L, 0), cfg.seed, _TAG_HIT, L, s)
    summary = {}
    if cfg.start == "nu":
        nu_state = ChainState.start(HeightField.constant(L, 0), cfg.seed, _TAG_NU, L, s)

        def member(eta):
            return ct.atypical_membership(eta, h, area_thr, params.bc) if h >= 1 else True

        nu_state = run_restricted(nu_state, params, member, cfg.nu_burn_in * n, decreasing=True)
        state.field = nu_state.field
        summary["nu_burn_in_sweeps"] = cfg.nu_burn_in
    rec = hit_level_fraction(state, params, level, cfg.target_fraction, cfg.T_max * n, cfg.target)
    out = rec.to_json()
    out.update({"L": L, "seed": s, "final_mean_height": float(state.field.heights.mean()), **summary})
    return out


def _quantiles(taus: list, t_max: float) -> dict:
    """Median and quartiles with censored runs counted as +inf; a censored quantile is reported as None."""
    arr = np.array([math.inf if t is None else t for t in taus], dtype=float)
    out = {}
    for name, q in (("q1", 0.25), ("median", 0.5), ("q3", 0.75)):
        v = float(np.quantile(arr, q, method="lower")) if len(arr) else math.nan
        out[name] = None if not math.isfinite(v) else v
    out["n_censored"] = int(np.isinf(arr).sum())
    out["censor_sweeps"] = t_max
    return out


def hitting_time_experiment(cfg: HittingConfig, workers: int = 1) -> dict:
    """Hitting times of the chosen target from the all-zero field (or from ``nu``) for each ``L``.

    Returns a summary with per-``L`` median and quartiles in sweeps, the
    per-seed records, the fit of ``log median`` against ``L^(a^d(p))`` over the
    uncensored prefix, and the Spearman correlation of medians with ``L``.
    """
    if cfg.target not in ("omega", "B"):
        raise ValueError("target must be 'omega' or 'B'")
    if cfg.start not in ("zero", "nu"):
        raise ValueError("start must be 'zero' or 'nu'")
    jobs, schedules = [], {}
    for L in cfg.L_list:
        if cfg.H is not None and (L in cfg.H or str(L) in cfg.H):
            H = int(cfg.H.get(L, cfg.H.get(str(L))))
        else:
            H = estimate_H(cfg.p, cfg.beta, L, seed=cfg.seed, **cfg.tail_kw)
        sched = LevelSchedule(cfg.p, cfg.a, H, cfg.min_level)
        n_plus = int((cfg.n_plus or {}).get(L, (cfg.n_plus or {}).get(str(L), default_n_plus(L))))
        level = sched.level if cfg.target == "omega" else sched.h + 1
        if level > n_plus:
            raise ValueError(f"target level {level} above the ceiling {n_plus} at L={L}")
        schedules[L] = {**sched.to_json(), "target_level": level, "n_plus": n_plus,
                        "area_threshold": sched.area_threshold(L, cfg.delta)}
        for s in range(cfg.n_seeds):
            jobs.append((cfg, L, s, level, n_plus, sched.h, sched.area_threshold(L, cfg.delta)))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            records = list(ex.map(_hit_one, jobs))
    else:
        records = [_hit_one(j) for j in jobs]
    records.sort(key=lambda r: (r["L"], r["seed"]))
    per_L = {}
    for L in cfg.L_list:
        taus = [r["tau_sweeps"] for r in records if r["L"] == L]
        per_L[str(L)] = {**_quantiles(taus, cfg.T_max), "schedule": schedules[L]}
    Ls = list(cfg.L_list)
    medians = [per_L[str(L)]["median"] for L in Ls]
    prefix = []
    for L, m in zip(Ls, medians):
        if m is None:
            break
        prefix.append((L, m))
    fit = None
    x_exp = cfg.a ** d_of_p(cfg.p)
    pts = [(L ** x_exp, math.log(m)) for L, m in prefix if m > 0]
    if len(pts) >= 2:
        r = stats.linregress([x for x, _ in pts], [y for _, y in pts])
        fit = {"slope": float(r.slope), "intercept": float(r.intercept), "n_points": len(pts),
               "x": f"L^{x_exp:.6g}"}
    med_for_rank = [math.inf if m is None else m for m in medians]
    strictly = all(b > a for a, b in zip(med_for_rank, med_for_rank[1:])) and all(m is not None for m in medians)
    if len(Ls) >= 2 and len(set(med_for_rank)) > 1:
        rho = float(stats.spearmanr(Ls, med_for_rank).statistic)
    else:
        rho = math.nan
    return {"config": _cfg_json(cfg), "per_L": per_L, "records": records, "fit": fit,
            "medians_sweeps": medians, "strictly_increasing": strictly, "spearman": rho,
            "all_censored_L": [L for L in Ls if per_L[str(L)]["n_censored"] == cfg.n_seeds]}


def _cfg_json(cfg: HittingConfig) -> dict:
    d = asdict(cfg)
    d["L_list"] = list(cfg.L_list)
    return d


# ---------------------------------------------------------------- correlation decay


def correlation_decay_probe(p: float, beta: float, M: int, separations: Sequence[int], n_samples: int = 2000,
                            burn_in: int = 500, thin: int = 2, mode: str = FREE, seed: int = 0,
                            level: int = 1) -> dict:
    """Truncated correlations of ``1{eta_x >= level}`` between bulk sites at the given separations.

    Pairs lie on the centre row; every site used must keep distance at least
    ``ceil(log M)`` from the boundary.  Standard errors come from batch means
    of the product observable.  The decay rate is minus the slope of
    ``log cov`` over the positive covariances at nonzero separation.
    """
    _check_proxy(M)
    margin = math.ceil(math.log(M))
    c0 = (M + 1) // 2
    pairs = {}
    for r in separations:
        x1 = c0 - r // 2
        x2 = x1 + r
        if min(x1, M + 1 - x2) <= margin:
            raise ValueError(f"separation {r} leaves the bulk region of an {M}x{M} box")
        pairs[r] = (x1, x2)
    params = ModelParams(p, beta, mode, None)
    S = _sample_fields(params, M, np.zeros((M, M), dtype=np.int64), burn_in, n_samples, thin,
                       make_rng(seed, _TAG_CORR))
    ind = S[:, :, c0 - 1] >= level  # indicator along the centre column, indexed by row x
    rows = []
    for r, (x1, x2) in pairs.items():
        a = ind[:, x1 - 1].astype(float)
        b = ind[:, x2 - 1].astype(float)
        cov = float((a * b).mean() - a.mean() * b.mean())
        _, se = batch_means((a - a.mean()) * (b - b.mean()))
        rows.append({"separation": int(r), "covariance": cov, "ci": 1.96 * se})
    pos = [(row["separation"], math.log(row["covariance"])) for row in rows
           if row["separation"] > 0 and row["covariance"] > 0]
    rate = None
    if len(pos) >= 2:
        rate = float(-stats.linregress([s for s, _ in pos], [y for _, y in pos]).slope)
    return {"p": p, "beta": beta, "M": M, "mode": mode, "level": level, "n_samples": n_samples,
            "curve": rows, "decay_rate": rate}


# ---------------------------------------------------------------- appendix tail


def appendix_tail_check(p: float, beta: float, L: int, n_plus: int, proxy_side: int = 4,
                        tol: float = 1e-10) -> dict:
    """Floor-measure tail ``P(eta_0 >= n_plus / 2)`` on a small proxy box against ``L^-3``.

    The proxy is evaluated exactly by the transfer route on a certified
    window.  The report states the comparison only; the underlying claim is
    asymptotic.
    """
    from .oracle import transfer_measure

    if n_plus < math.ceil(math.log(L)):
        raise ValueError("need n_plus >= ceil(log L)")
    h = math.ceil(n_plus / 2)
    bound = float(L) ** -3
    params = ModelParams(p, beta, FLOOR)
    tm = transfer_measure(params, proxy_side, tol)
    c = (proxy_side + 1) // 2
    prob = tm.one_point_tail((c, c), h)
    return {"p": p, "beta": beta, "L": L, "n_plus": n_plus, "h": h, "proxy_side": proxy_side,
            "window": [tm.window[0], tm.window[1]], "truncation_tv": tm.certificate.tail,
            "probability": prob, "bound": bound, "ratio": prob / bound, "below_bound": prob <= bound,
            "note": "proxy-box exact value; the inequality is asymptotic and is reported, not asserted"}
