"""p-SOS energies, Gibbs weights and single-site heat-bath conditionals.

Each unordered nearest-neighbour bond with at least one endpoint in the box
contributes ``|grad|^p`` once.  ``bond_double_count=True`` counts interior
bonds twice, the ordered-pair reading of the Hamiltonian; it only rescales
``beta`` for interior bonds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import BoundaryCondition, BoxGeometry, HeightField, ZERO_BC

FREE = "free"
FLOOR = "floor"
FLOOR_CEILING = "floor_ceiling"
MODES = (FREE, FLOOR, FLOOR_CEILING)
MODE_CODES = {FREE: 0, FLOOR: 1, FLOOR_CEILING: 2}

# exp(-35) ~ 6e-16: heights further than the window from every neighbour are dropped
_TAIL_EXPONENT = 35.0


class ConstraintError(ValueError):
    """A height field or proposed height violates the floor/ceiling constraints."""


@dataclass(frozen=True)
class ModelParams:
    p: float
    beta: float
    mode: str = FLOOR_CEILING
    n_plus: int | None = None
    bc: BoundaryCondition = field(default=ZERO_BC)
    bond_double_count: bool = False

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == FLOOR_CEILING:
            if self.n_plus is None or int(self.n_plus) != self.n_plus or self.n_plus < 1:
                raise ValueError("floor_ceiling mode needs an integer n_plus >= 1")

    @property
    def window(self) -> int:
        return free_window(self.beta, self.p)

    def with_mode(self, mode: str, n_plus: int | None = None) -> "ModelParams":
        return replace(self, mode=mode, n_plus=n_plus)

    def to_json(self) -> dict:
        return {"p": self.p, "beta": self.beta, "mode": self.mode, "n_plus": self.n_plus,
                "bc": self.bc.to_json(), "bond_double_count": self.bond_double_count}

    @classmethod
    def from_json(cls, obj: dict, geometry: BoxGeometry | None = None) -> "ModelParams":
        return cls(p=float(obj["p"]), beta=float(obj["beta"]), mode=obj.get("mode", FLOOR_CEILING),
                   n_plus=obj.get("n_plus"), bc=BoundaryCondition.from_json(obj.get("bc"), geometry),
                   bond_double_count=bool(obj.get("bond_double_count", False)))


def free_window(beta: float, p: float) -> int:
    """Half-width of the truncated heat-bath support in unconstrained directions."""
    return math.ceil((_TAIL_EXPONENT / beta) ** (1.0 / p)) + 1


def _is_integer_p(p: float) -> bool:
    return float(p).is_integer()


def check_field(heights: np.ndarray, params: ModelParams) -> None:
    if params.mode == FREE:
        return
    if heights.min() < 0:
        raise ConstraintError("heights must be nonnegative under a floor")
    if params.mode == FLOOR_CEILING and heights.max() > params.n_plus:
        raise ConstraintError(f"heights must not exceed the ceiling n_plus={params.n_plus}")


def check_height(h: int, params: ModelParams) -> None:
    if params.mode != FREE and h < 0:
        raise ConstraintError(f"height {h} below the floor")
    if params.mode == FLOOR_CEILING and h > params.n_plus:
        raise ConstraintError(f"height {h} above the ceiling n_plus={params.n_plus}")


def _bond_weights(L: int, double: bool):
    wv = np.ones((L + 1, L))
    wh = np.ones((L, L + 1))
    if double:
        wv[1:L, :] = 2.0
        wh[:, 1:L] = 2.0
    return wv, wh


def _pow_sum(d: np.ndarray, w: np.ndarray, p: float, axes) -> np.ndarray:
    d = np.abs(d)
    if _is_integer_p(p):
        terms = d ** int(p)
        if np.all(w == 1.0):
            return terms.sum(axis=axes).astype(np.float64)
        return (terms * w.astype(np.int64)).sum(axis=axes).astype(np.float64)
    return (d.astype(np.float64) ** p * w).sum(axis=axes)


def energies(states: np.ndarray, params: ModelParams) -> np.ndarray:
    """Energies of a stack of fields of shape ``(n, L, L)``; no constraint checks."""
    states = np.asarray(states, dtype=np.int64)
    n, L, _ = states.shape
    pad = np.broadcast_to(params.bc.padded(BoxGeometry(L)), (n, L + 2, L + 2)).copy()
    pad[:, 1:-1, 1:-1] = states
    dv = pad[:, 1:, 1:-1] - pad[:, :-1, 1:-1]
    dh = pad[:, 1:-1, 1:] - pad[:, 1:-1, :-1]
    wv, wh = _bond_weights(L, params.bond_double_count)
    return _pow_sum(dv, wv, params.p, (1, 2)) + _pow_sum(dh, wh, params.p, (1, 2))


def total_energy(eta: HeightField, params: ModelParams) -> float:
    """Energy of ``eta``: sum over bonds touching the box of ``|grad|^p``."""
    check_field(eta.heights, params)
    return float(energies(eta.heights[None], params)[0])


def _local_terms(eta: HeightField, site, params: ModelParams):
    x, y = site
    L = eta.geometry.L
    pad = eta.padded(params.bc)
    nbs, ws = [], []
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nx, ny = x + dx, y + dy
        nbs.append(pad[nx, ny])
        interior = 1 <= nx <= L and 1 <= ny <= L
        ws.append(2.0 if (interior and params.bond_double_count) else 1.0)
    return np.array(nbs, dtype=np.int64), np.array(ws)


def _site_energy(h, nbs, ws, p) -> np.ndarray:
    d = np.abs(np.asarray(h, dtype=np.int64)[..., None] - nbs)
    if _is_integer_p(p):
        return (d ** int(p) * ws).sum(axis=-1).astype(np.float64)
    return (d.astype(np.float64) ** p * ws).sum(axis=-1)


def energy_delta(eta: HeightField, site, new_h: int, params: ModelParams) -> float:
    """Energy change from setting ``site`` to ``new_h``, from the four incident bonds."""
    check_height(new_h, params)
    nbs, ws = _local_terms(eta, site, params)
    old_h = eta[site]
    return float(_site_energy(new_h, nbs, ws, params.p) - _site_energy(old_h, nbs, ws, params.p))


def support_bounds(nbs: np.ndarray, params: ModelParams) -> tuple[int, int]:
    if params.mode == FLOOR_CEILING:
        return 0, int(params.n_plus)
    W = params.window
    hi = int(nbs.max()) + W
    if params.mode == FLOOR:
        return 0, max(hi, W)
    return int(nbs.min()) - W, hi


@dataclass(frozen=True)
class LocalDistribution:
    """Heat-bath law of one height given its neighbours."""

    support: np.ndarray
    probs: np.ndarray
    weights: np.ndarray  # unnormalized, max-shifted; drives the inverse CDF

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def sample(self, u: float) -> int:
        """Inverse-CDF draw: the smallest height whose cumulative weight exceeds ``u``."""
        cum = np.cumsum(self.weights)
        k = int(np.searchsorted(cum, u * cum[-1], side="right"))
        return int(self.support[min(k, len(self.support) - 1)])

    def prob(self, h: int) -> float:
        k = h - int(self.support[0])
        if 0 <= k < len(self.support):
            return float(self.probs[k])
        return 0.0

    def mode_height(self) -> int:
        return int(self.support[np.argmax(self.probs)])


def local_distribution(nbs, ws, params: ModelParams, lo: int | None = None) -> LocalDistribution:
    """Heat-bath law for a site with neighbour heights ``nbs`` and bond weights ``ws``."""
    nbs = np.asarray(nbs, dtype=np.int64)
    ws = np.asarray(ws, dtype=np.float64)
    a, b = support_bounds(nbs, params)
    if lo is not None:
        a = max(a, lo)
    support = np.arange(a, b + 1)
    logw = -params.beta * _site_energy(support, nbs, ws, params.p)
    logw -= logw.max()
    weights = np.exp(logw)
    return LocalDistribution(support, weights / weights.sum(), weights)


def heat_bath_distribution(eta: HeightField, site, params: ModelParams) -> LocalDistribution:
    nbs, ws = _local_terms(eta, site, params)
    return local_distribution(nbs, ws, params)


def log_gibbs_weight(eta: HeightField, params: ModelParams) -> float:
    return -params.beta * total_energy(eta, params)


def gibbs_weight(eta: HeightField, params: ModelParams) -> float:
    """Unnormalized weight ``exp(-beta H)``; underflows to 0.0 for very large energies."""
    return math.exp(log_gibbs_weight(eta, params))
