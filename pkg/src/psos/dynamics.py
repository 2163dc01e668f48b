"""Discrete-time Glauber (heat-bath) dynamics, couplings and hitting times.

One step picks a uniform site and resamples its height from the heat-bath
conditional by inverse CDF.  Each step consumes exactly two doubles from the
chain's random stream, ``(r_site, u)``, so single steps and bulk runs produce
the same trajectory.  Streams are Philox generators keyed by
``(seed, *stream_key)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .gibbs import FLOOR_CEILING, MODE_CODES, ModelParams, check_field
from .lattice import BoxGeometry, HeightField

CHUNK = 1 << 16


def make_rng(seed: int, *stream_key: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *stream_key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in stream_key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Compiled:
    """Model data laid out for the compiled kernels on an ``L x L`` box."""

    L: int
    S: int
    sites: np.ndarray
    nbw: np.ndarray
    p: float
    ip: int
    beta: float
    mode: int
    n_plus: int
    W: int
    params: ModelParams

    @classmethod
    def build(cls, params: ModelParams, L: int) -> "Compiled":
        S = L + 2
        xs, ys = np.meshgrid(np.arange(1, L + 1), np.arange(1, L + 1), indexing="ij")
        sites = (xs * S + ys).ravel().astype(np.int64)
        nbw = np.ones((L * L, 4))
        if params.bond_double_count:
            # neighbour order used by the kernels: x+1, x-1, y+1, y-1
            x, y = xs.ravel(), ys.ravel()
            nbw[:, 0] = np.where(x < L, 2.0, 1.0)
            nbw[:, 1] = np.where(x > 1, 2.0, 1.0)
            nbw[:, 2] = np.where(y < L, 2.0, 1.0)
            nbw[:, 3] = np.where(y > 1, 2.0, 1.0)
        ip = int(params.p) if float(params.p).is_integer() and params.p <= 3 else 0
        n_plus = int(params.n_plus) if params.mode == FLOOR_CEILING else 0
        return cls(L, S, sites, nbw, float(params.p), ip, float(params.beta),
                   MODE_CODES[params.mode], n_plus, int(params.window), params)

    def args(self):
        return (self.sites, self.S, self.nbw, self.p, self.ip, self.beta, self.mode, self.n_plus, self.W)

    def grid(self, eta: HeightField) -> np.ndarray:
        return eta.padded(self.params.bc).ravel().copy()

    def field(self, grid: np.ndarray) -> HeightField:
        g = grid.reshape(self.S, self.S)
        return HeightField(g[1:-1, 1:-1].copy(), BoxGeometry(self.L))


_compiled_cache: dict = {}


def compiled(params: ModelParams, L: int) -> Compiled:
    key = (params, L)
    c = _compiled_cache.get(key)
    if c is None:
        c = _compiled_cache[key] = Compiled.build(params, L)
    return c


@dataclass(frozen=True)
class UpdateDraw:
    """A uniformly chosen site index (0-based) and the uniform ``u`` driving its update."""

    site: int
    u: float

    @classmethod
    def from_uniforms(cls, r_site: float, u: float, n_sites: int) -> "UpdateDraw":
        return cls(int(r_site * n_sites), float(u))

    @classmethod
    def sample(cls, rng: np.random.Generator, n_sites: int) -> "UpdateDraw":
        r_site, u = rng.random(2)
        return cls.from_uniforms(r_site, u, n_sites)


@dataclass
class ChainState:
    field: HeightField
    step: int = 0
    rng: np.random.Generator | None = None
    stream: tuple = ()

    @classmethod
    def start(cls, eta: HeightField, seed: int, *stream_key: int) -> "ChainState":
        return cls(eta.copy(), 0, make_rng(seed, *stream_key), (seed, *stream_key))

    @property
    def sweeps(self) -> float:
        return self.step / self.field.geometry.n_sites


def _apply(grid: np.ndarray, c: Compiled, draw: UpdateDraw) -> None:
    pos = c.sites[draw.site]
    grid[pos] = K.new_height(grid, pos, c.S, c.nbw[draw.site], c.p, c.ip, c.beta,
                             c.mode, c.n_plus, c.W, draw.u)


def glauber_step(state: ChainState, params: ModelParams, draw: UpdateDraw | None = None) -> ChainState:
    """One heat-bath update; returns a new state (the random stream is shared and advanced)."""
    L = state.field.geometry.L
    c = compiled(params, L)
    if draw is None:
        draw = UpdateDraw.sample(state.rng, L * L)
    grid = c.grid(state.field)
    _apply(grid, c, draw)
    return ChainState(c.field(grid), state.step + 1, state.rng, state.stream)


def grand_coupled_step(states: Sequence[ChainState], params: ModelParams,
                       draw: UpdateDraw | None = None) -> list[ChainState]:
    """Apply one shared draw to every replica; the draw comes from the first replica's stream."""
    geoms = {s.field.geometry for s in states}
    if len(geoms) != 1:
        raise ValueError("coupled replicas must share the box geometry")
    L = states[0].field.geometry.L
    if draw is None:
        draw = UpdateDraw.sample(states[0].rng, L * L)
    return [glauber_step(s, params, draw) for s in states]


class GlauberChain:
    """Bulk runner over a compiled grid; equivalent to repeated :func:`glauber_step`."""

    def __init__(self, params: ModelParams, eta: HeightField, rng: np.random.Generator):
        check_field(eta.heights, params)
        self.params = params
        self.c = compiled(params, eta.geometry.L)
        self.grid = self.c.grid(eta)
        self.rng = rng
        self.step = 0

    @property
    def field(self) -> HeightField:
        return self.c.field(self.grid)

    @property
    def heights(self) -> np.ndarray:
        L = self.c.L
        return self.grid.reshape(L + 2, L + 2)[1:-1, 1:-1]

    def run(self, n_steps: int) -> "GlauberChain":
        left = int(n_steps)
        while left > 0:
            m = min(left, CHUNK)
            K.run_steps(self.grid, *self.c.args(), self.rng.random((m, 2)))
            left -= m
        self.step += int(n_steps)
        return self

    def sweeps(self, n: float) -> "GlauberChain":
        return self.run(int(round(n * self.c.L ** 2)))


def run_coupled(fields: Sequence[HeightField], params: ModelParams, n_steps: int,
                rng: np.random.Generator, check: bool = True):
    """Run replicas under the grand coupling.

    Returns ``(fields, violations, first_violation_step)`` where violations
    count steps at which the input order ``fields[0] <= fields[1] <= ...``
    broke at the updated site.
    """
    L = fields[0].geometry.L
    c = compiled(params, L)
    G = np.stack([c.grid(f) for f in fields])
    violations, first, done = 0, -1, 0
    left = int(n_steps)
    while left > 0:
        m = min(left, CHUNK)
        v, f = K.run_coupled(G, *c.args(), rng.random((m, 2)), check)
        if v and first < 0:
            first = done + f
        violations += v
        done += m
        left -= m
    return [c.field(g) for g in G], violations, first


@dataclass
class HittingRecord:
    event_name: str
    tau: int | None  # steps; None when censored
    t_max: int
    n_sites: int
    summary: dict = field(default_factory=dict)

    @property
    def censored(self) -> bool:
        return self.tau is None

    @property
    def tau_sweeps(self) -> float | None:
        return None if self.tau is None else self.tau / self.n_sites

    def to_json(self) -> dict:
        return {"event": self.event_name, "tau_steps": self.tau, "tau_sweeps": self.tau_sweeps,
                "censored": self.censored, "t_max_steps": self.t_max, **self.summary}


def run_until(state: ChainState, params: ModelParams, predicate: Callable[[HeightField], bool],
              T_max: int, event_name: str = "event") -> HittingRecord:
    """First step ``t <= T_max`` (steps) at which ``predicate`` holds, checked at t=0 and after each step.

    The state is advanced in place.  Generic and slow; see :func:`hit_level_fraction`
    for counting predicates.
    """
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    n = state.field.geometry.n_sites
    if predicate(state.field):
        return HittingRecord(event_name, 0, T_max, n)
    c = compiled(params, state.field.geometry.L)
    grid = c.grid(state.field)
    for t in range(1, T_max + 1):
        _apply(grid, c, UpdateDraw.sample(state.rng, n))
        eta = c.field(grid)
        if predicate(eta):
            state.field, state.step = eta, state.step + t
            return HittingRecord(event_name, t, T_max, n)
    state.field, state.step = c.field(grid), state.step + T_max
    return HittingRecord(event_name, None, T_max, n)


def hit_level_fraction(state: ChainState, params: ModelParams, level: int, fraction: float,
                       T_max: int, event_name: str | None = None) -> HittingRecord:
    """Hitting time of ``#{x : eta_x >= level} >= fraction * |box|``, censored at ``T_max`` steps."""
    L = state.field.geometry.L
    n = L * L
    needed = int(np.ceil(fraction * n - 1e-12))
    name = event_name or f"frac>={fraction}@h>={level}"
    count = int((state.field.heights >= level).sum())
    if count >= needed:
        return HittingRecord(name, 0, T_max, n, {"level": level, "needed": needed})
    c = compiled(params, L)
    grid = c.grid(state.field)
    done, tau = 0, None
    while done < T_max:
        m = min(T_max - done, CHUNK)
        t, count = K.run_until_count(grid, *c.args(), state.rng.random((m, 2)), level, needed, count)
        if t >= 0:
            tau = done + t
            break
        done += m
    state.field = c.field(grid)
    state.step += tau if tau is not None else T_max
    return HittingRecord(name, tau, T_max, n, {"level": level, "needed": needed})


def restricted_step(state: ChainState, params: ModelParams, membership: Callable[[HeightField], bool],
                    draw: UpdateDraw | None = None, check_start: bool = True) -> ChainState:
    """Heat-bath proposal kept only if the new field stays in the set; otherwise the move is rejected."""
    if check_start and not membership(state.field):
        raise ValueError("restricted dynamics must start inside the set")
    L = state.field.geometry.L
    c = compiled(params, L)
    if draw is None:
        draw = UpdateDraw.sample(state.rng, L * L)
    grid = c.grid(state.field)
    _apply(grid, c, draw)
    proposal = c.field(grid)
    if proposal == state.field or membership(proposal):
        return ChainState(proposal, state.step + 1, state.rng, state.stream)
    return ChainState(state.field, state.step + 1, state.rng, state.stream)


def run_restricted(state: ChainState, params: ModelParams, membership: Callable[[HeightField], bool],
                   n_steps: int, decreasing: bool = False) -> ChainState:
    """Run the restricted chain for ``n_steps``.

    With ``decreasing=True`` the set is declared closed under lowering heights,
    so only upward moves are checked.
    """
    if not membership(state.field):
        raise ValueError("restricted dynamics must start inside the set")
    L = state.field.geometry.L
    n = L * L
    c = compiled(params, L)
    grid = c.grid(state.field)
    inner = grid.reshape(L + 2, L + 2)[1:-1, 1:-1]
    for _ in range(int(n_steps)):
        d = UpdateDraw.sample(state.rng, n)
        pos = c.sites[d.site]
        old = grid[pos]
        _apply(grid, c, d)
        new = grid[pos]
        if new == old or (decreasing and new < old):
            continue
        if not membership(HeightField(inner.copy(), state.field.geometry)):
            grid[pos] = old
    return ChainState(c.field(grid), state.step + int(n_steps), state.rng, state.stream)


def occupation_counts(params: ModelParams, eta: HeightField, n_steps: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Visit counts over the mixed-radix states ``{0..n_plus}^box`` (ceiling mode only).

    State index: row-major sites, most significant first, digit = height.
    """
    if params.mode != FLOOR_CEILING:
        raise ValueError("occupation counts need a bounded (floor_ceiling) state space")
    L = eta.geometry.L
    c = compiled(params, L)
    base = params.n_plus + 1
    radix = base ** np.arange(L * L - 1, -1, -1, dtype=np.int64)
    counts = np.zeros(base ** (L * L), dtype=np.int64)
    grid = c.grid(eta)
    idx = int(eta.heights.ravel() @ radix)
    left = int(n_steps)
    while left > 0:
        m = min(left, CHUNK)
        idx = K.run_occupation(grid, *c.args(), rng.random((m, 2)), radix, idx, counts)
        left -= m
    return counts


def final_state_counts(params: ModelParams, eta: HeightField, t: int, n_runs: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Histogram over mixed-radix states of the time-``t`` field across ``n_runs`` runs."""
    L = eta.geometry.L
    c = compiled(params, L)
    base = params.n_plus + 1
    radix = base ** np.arange(L * L - 1, -1, -1, dtype=np.int64)
    counts = np.zeros(base ** (L * L), dtype=np.int64)
    start = c.grid(eta)
    runs_per_chunk = max(1, CHUNK // max(t, 1))
    done = 0
    while done < n_runs:
        r = min(runs_per_chunk, n_runs - done)
        draws = rng.random((r * t, 2))
        for j in range(r):
            g = start.copy()
            if t:
                K.run_steps(g, *c.args(), draws[j * t:(j + 1) * t])
            h = g.reshape(L + 2, L + 2)[1:-1, 1:-1].ravel()
            counts[int(h @ radix)] += 1
        done += r
    return counts


def tv_distance_to_equilibrium(params: ModelParams, start: HeightField, t: int, n_runs: int,
                               seed: int = 0, measure=None, projection: Callable | None = None,
                               reference: dict | None = None, n_boot: int = 200):
    """Empirical TV between the time-``t`` law from ``start`` and equilibrium.

    With ``measure`` (an exact oracle on the same bounded box) the comparison
    is on the full state space, or on ``projection(heights)`` when given.
    Without an oracle a projection and a ``reference`` law of the projected
    values are required.  Returns ``(tv, radius)`` with a 95% bootstrap radius.
    """
    if measure is None and (projection is None or reference is None):
        raise ValueError("need an exact measure, or a projection with a reference law")
    rng = make_rng(seed, 7)
    if params.mode != FLOOR_CEILING:
        raise ValueError("TV estimation runs on bounded (floor_ceiling) boxes")
    counts = final_state_counts(params, start, t, n_runs, rng)
    L = start.geometry.L
    base = params.n_plus + 1
    if projection is None:
        target = measure.probs
        emp = counts
    else:
        states = _mixed_radix_states(L, base)
        keys = [projection(s) for s in states]
        labels = sorted(set(keys) | set(reference or {}))
        pos = {k: i for i, k in enumerate(labels)}
        lab = np.array([pos[k] for k in keys])
        emp = np.bincount(lab, weights=counts, minlength=len(labels))
        if measure is not None:
            target = np.bincount(lab, weights=measure.probs, minlength=len(labels))
        else:
            target = np.array([reference.get(k, 0.0) for k in labels])
    emp = np.asarray(emp, dtype=float)
    tv = 0.5 * np.abs(emp / n_runs - target).sum()
    boot_rng = make_rng(seed, 8)
    boots = boot_rng.multinomial(n_runs, emp / n_runs, size=n_boot) / n_runs
    tvs = 0.5 * np.abs(boots - target).sum(axis=1)
    radius = float(np.quantile(np.abs(tvs - tv), 0.95))
    return float(tv), radius


def _mixed_radix_states(L: int, base: int) -> np.ndarray:
    n = L * L
    idx = np.arange(base ** n)
    digits = (idx[:, None] // base ** np.arange(n - 1, -1, -1)) % base
    return digits.reshape(-1, L, L)
