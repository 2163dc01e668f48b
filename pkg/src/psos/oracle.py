"""Exact Gibbs measures on tiny boxes and the inequality checks built on them.

Two independent routes compute probabilities:

* :class:`ExactMeasure` enumerates every state of a height window in
  mixed-radix order (row-major sites, first site most significant).
* :class:`TransferMeasure` sums the same weights site by site with a
  frontier tensor; it only answers product events
  ``lower <= eta <= upper`` but reaches much wider windows.

Unbounded measures (free, floor) are truncated to a window that is grown
until one more layer changes ``log Z`` by less than a tolerance; the
resulting change of any event probability is at most that amount.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import contour as ct
from .gibbs import FLOOR, FLOOR_CEILING, FREE, ModelParams, energies, local_distribution
from .lattice import BoxGeometry

DEFAULT_CAP = 10 ** 8


class EnumerationCapError(RuntimeError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"state space of {required} states exceeds the enumeration cap {cap}")
        self.required = required
        self.cap = cap


# ---------------------------------------------------------------- transfer route


def _pow(d, p):
    d = np.abs(d)
    return d ** int(p) if float(p).is_integer() else d.astype(float) ** p


class TransferMeasure:
    """Product-event probabilities on a height window by site-by-site transfer."""

    def __init__(self, params: ModelParams, L: int, window: tuple[int, int]):
        self.params = params
        self.L = L
        self.window = (int(window[0]), int(window[1]))
        self.hv = np.arange(self.window[0], self.window[1] + 1)
        beta, p = params.beta, params.p
        diff = self.hv[:, None] - self.hv[None, :]
        w_in = 2.0 if params.bond_double_count else 1.0
        self._C = np.exp(-beta * w_in * _pow(diff, p))
        pad = params.bc.padded(BoxGeometry(L))
        self._site_logf = np.zeros((L, L, len(self.hv)))
        for i in range(L):
            for j in range(L):
                for ni, nj in ((i, j + 1), (i + 2, j + 1), (i + 1, j), (i + 1, j + 2)):
                    if not (1 <= ni <= L and 1 <= nj <= L):
                        self._site_logf[i, j] -= beta * _pow(self.hv - pad[ni, nj], p)
        self.log_Z = self.log_z()

    def log_z(self, lower=None, upper=None) -> float:
        L, hv = self.L, self.hv
        T = None
        logscale = 0.0
        for i in range(L):
            for j in range(L):
                f = np.exp(self._site_logf[i, j] - self._site_logf[i, j].max())
                logscale += self._site_logf[i, j].max()
                if lower is not None:
                    f = f * (hv >= lower[i, j]) * (hv <= upper[i, j])
                if i == 0:
                    if j == 0:
                        T = f.copy()
                    else:
                        T = T[..., :, None] * self._C * f
                else:
                    T = np.moveaxis(T, j, -1) @ self._C
                    T = T * f
                    if j > 0:
                        shape = [1] * T.ndim
                        shape[j - 1] = len(hv)
                        shape[-1] = len(hv)
                        T = T * self._C.reshape(shape)
                    T = np.moveaxis(T, -1, j)
                s = T.max()
                if s == 0.0:
                    return -math.inf
                T = T / s
                logscale += math.log(s)
        return logscale + math.log(T.sum())

    def product_event_probability(self, lower, upper) -> float:
        lower, upper = _bounds_arrays(lower, upper, self.L)
        if np.any(lower > upper):
            return 0.0
        lz = self.log_z(lower, upper)
        return 0.0 if lz == -math.inf else math.exp(lz - self.log_Z)

    def one_point_tail(self, site, h: int) -> float:
        L = self.L
        lower = np.full((L, L), -np.inf)
        lower[site[0] - 1, site[1] - 1] = h
        return self.product_event_probability(lower, np.full((L, L), np.inf))


def _bounds_arrays(lower, upper, L):
    lower = np.full((L, L), -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full((L, L), np.inf) if upper is None else np.asarray(upper, dtype=float)
    return lower, upper


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int
    delta: float  # change of log Z from one more layer
    tail: float  # estimated TV distance to the untruncated measure


def certified_window(params: ModelParams, L: int, tol: float = 1e-10, max_steps: int = 200) -> Window:
    """Smallest window whose one-layer enlargement moves ``log Z`` by less than ``tol``."""
    if params.mode == FLOOR_CEILING:
        return Window(0, int(params.n_plus), 0.0, 0.0)

    def win(k):
        return (0, k) if params.mode == FLOOR else (-k, k)

    prev_lz = TransferMeasure(params, L, win(0)).log_Z
    prev_delta = None
    for k in range(1, max_steps):
        lz = TransferMeasure(params, L, win(k)).log_Z
        delta = lz - prev_lz
        if delta < tol and k >= 2:
            r = delta / prev_delta if prev_delta else 0.0
            tail = delta / (1.0 - r) if r < 1 else math.inf
            lo, hi = win(k - 1)
            return Window(lo, hi, delta, tail)
        prev_lz, prev_delta = lz, delta
    raise RuntimeError("window certification did not converge")


def peierls_measure(params: ModelParams, L: int, h_max: int, tol: float = 1e-10) -> TransferMeasure:
    """Free-mode transfer measure on a certified window that also spans ``[-(h_max+2), h_max+2]``."""
    w = certified_window(params, L, tol)
    K = max(w.hi, h_max + 2)
    tm = TransferMeasure(params, L, (-K, K))
    tm.certificate = w
    return tm


def transfer_measure(params: ModelParams, L: int, tol: float = 1e-10) -> TransferMeasure:
    w = certified_window(params, L, tol)
    tm = TransferMeasure(params, L, (w.lo, w.hi))
    tm.certificate = w
    return tm


# ---------------------------------------------------------------- enumeration route


class ExactMeasure:
    """Fully enumerated Gibbs measure on ``{lo..hi}^box``."""

    def __init__(self, params: ModelParams, L: int, window: tuple[int, int],
                 cap: int = DEFAULT_CAP, certificate: Window | None = None):
        lo, hi = int(window[0]), int(window[1])
        base = hi - lo + 1
        n_states = base ** (L * L)
        if n_states > cap:
            raise EnumerationCapError(n_states, cap)
        self.params = params
        self.L = L
        self.window = (lo, hi)
        self.base = base
        self.certificate = certificate
        self.radix = base ** np.arange(L * L - 1, -1, -1, dtype=np.int64)
        idx = np.arange(n_states, dtype=np.int64)
        digits = (idx[:, None] // self.radix) % base
        self.states = (digits + lo).reshape(-1, L, L)
        self.log_weights = -params.beta * energies(self.states, params)
        self.log_Z = float(logsumexp(self.log_weights))
        self.probs = np.exp(self.log_weights - self.log_Z)

    @property
    def n_states(self) -> int:
        return len(self.probs)

    def index(self, heights) -> int:
        return int((np.asarray(heights).ravel() - self.window[0]) @ self.radix)

    def mask(self, predicate) -> np.ndarray:
        if callable(predicate):
            m = np.asarray(predicate(self.states), dtype=bool)
        else:
            m = np.asarray(predicate, dtype=bool)
        if m.shape != (self.n_states,):
            raise ValueError("predicate must give one boolean per state")
        return m

    def event_probability(self, predicate) -> float:
        """Exact probability of an event (boolean mask, or vectorized predicate on the state stack)."""
        return math.fsum(self.probs[self.mask(predicate)])

    def conditional(self, predicate) -> "ConditionalMeasure":
        m = self.mask(predicate)
        mass = math.fsum(self.probs[m])
        if mass == 0.0:
            raise ValueError("cannot condition on an event of zero mass")
        return ConditionalMeasure(self, m, mass)

    def product_event_probability(self, lower, upper) -> float:
        lower, upper = _bounds_arrays(lower, upper, self.L)
        m = np.all((self.states >= lower) & (self.states <= upper), axis=(1, 2))
        return math.fsum(self.probs[m])

    def one_point_tail(self, site, h: int) -> float:
        return math.fsum(self.probs[self.states[:, site[0] - 1, site[1] - 1] >= h])


class ConditionalMeasure:
    """An enumerated measure conditioned on an event, sharing the parent's state list."""

    def __init__(self, parent: ExactMeasure, mask: np.ndarray, mass: float):
        self.parent = parent
        self.support = mask
        self.mass = mass
        self.params = parent.params
        self.L = parent.L
        self.states = parent.states
        self.probs = np.where(mask, parent.probs / mass, 0.0)

    @property
    def n_states(self):
        return len(self.probs)

    def mask(self, predicate):
        return self.parent.mask(predicate)

    def event_probability(self, predicate) -> float:
        return math.fsum(self.probs[self.mask(predicate)])


def enumerate_measure(params: ModelParams, L: int, window: tuple[int, int] | None = None,
                      cap: int = DEFAULT_CAP, tol: float = 1e-10) -> ExactMeasure:
    """Exact measure for ``params`` on the ``L x L`` box.

    Bounded mode enumerates ``{0..n_plus}``; free and floor modes use the
    given window or a certified one.
    """
    cert = None
    if window is None:
        cert = certified_window(params, L, tol)
        window = (cert.lo, cert.hi)
    base = window[1] - window[0] + 1
    if base ** (L * L) > cap:
        raise EnumerationCapError(base ** (L * L), cap)
    return ExactMeasure(params, L, window, cap, cert)


# ---------------------------------------------------------------- dynamics checks


def transition_matrix(measure: ExactMeasure) -> np.ndarray:
    """Single-site heat-bath kernel on the enumerated states (bounded mode)."""
    params = measure.params
    if params.mode != FLOOR_CEILING:
        raise ValueError("the Glauber kernel is defined on the bounded state space")
    L, n = measure.L, measure.L * measure.L
    S = measure.n_states
    P = np.zeros((S, S))
    pad_bc = params.bc.padded(BoxGeometry(L))
    for s in range(S):
        pad = pad_bc.copy()
        pad[1:-1, 1:-1] = measure.states[s]
        for k in range(n):
            x, y = divmod(k, L)
            x, y = x + 1, y + 1
            nbs, ws = [], []
            for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                nbs.append(pad[nx, ny])
                inside = 1 <= nx <= L and 1 <= ny <= L
                ws.append(2.0 if inside and params.bond_double_count else 1.0)
            dist = local_distribution(nbs, ws, params)
            cur = measure.states[s, x - 1, y - 1]
            for h, q in zip(dist.support, dist.probs):
                t = s + (h - cur) * measure.radix[k]
                P[s, t] += q / n
    return P


def detailed_balance_residual(measure: ExactMeasure, P: np.ndarray | None = None) -> float:
    """``max |pi(a) P(a,b) - pi(b) P(b,a)|`` over all state pairs."""
    if P is None:
        P = transition_matrix(measure)
    flow = measure.probs[:, None] * P
    return float(np.abs(flow - flow.T).max())


# ---------------------------------------------------------------- reports


def _report(check: str, inputs: dict, entries: list, extra: dict | None = None) -> dict:
    violations = sum(1 for e in entries if not e["pass"])
    out = {"check": check, "inputs": inputs, "n_checked": len(entries),
           "violations": violations, "passed": violations == 0, "entries": entries}
    if extra:
        out.update(extra)
    return out


def _params_json(params: ModelParams, L: int) -> dict:
    return {"L": L, **params.to_json()}


def peierls_holds(prob: float, bound: float, err: float = 0.0, rtol: float = 1e-9) -> bool:
    """``prob <= bound`` up to relative rounding ``rtol`` and a truncation error ``err``."""
    return prob <= bound * (1.0 + rtol) + err


def verify_peierls(measure, h_values=(1,), max_perimeter: int = 8, nested: bool = True,
                   nested_perimeter: int | None = None) -> dict:
    """Compare exact contour probabilities with ``exp(-beta |gamma|)``.

    Covers every contour inside the box with perimeter up to ``max_perimeter``
    and each level in ``h_values``.  With ``nested`` it also checks
    ``P(C_{gamma,h} | C_{gamma',h'}) <= exp(-beta |gamma|)`` for every contour
    ``gamma'`` whose interior contains that of ``gamma`` and ``h' < h``
    (``h' in {h-1, h-2}``), skipping conditioning events of zero mass.
    """
    params, L = measure.params, measure.L
    if params.mode != FREE:
        raise ValueError("the basic Peierls bound is checked on the free measure")
    geometry = BoxGeometry(L)
    cert = getattr(measure, "certificate", None)
    slack = cert.tail if cert is not None else 0.0
    # the same quantities one layer wider on each side estimate the truncation error
    wider = None
    if isinstance(measure, TransferMeasure):
        wider = TransferMeasure(params, L, (measure.window[0] - 1, measure.window[1] + 1))

    def prob2(lo, up):
        p1 = measure.product_event_probability(lo, up)
        return p1, (abs(wider.product_event_probability(lo, up) - p1) if wider is not None else 0.0)
    contours = ct.box_contours(L)
    small = [g for g in contours if g.perimeter <= max_perimeter]
    outer = contours if nested_perimeter is None else [g for g in contours if g.perimeter <= nested_perimeter]
    entries, nested_entries = [], []
    for h in h_values:
        for g in small:
            bounds = ct.event_bounds(g, h, geometry, params.bc)
            prob, err = (0.0, 0.0) if bounds is None else prob2(*bounds)
            bound = math.exp(-params.beta * g.perimeter)
            entries.append({"contour": g.to_json(), "perimeter": g.perimeter, "area": g.area, "h": h,
                            "probability": prob, "bound": bound, "slack": bound - prob, "truncation_error": err,
                            "pass": peierls_holds(prob, bound, err + slack)})
            if not nested:
                continue
            worst, n_pairs, n_fail = None, 0, 0
            for gp in outer:
                if not g.interior <= gp.interior:
                    continue
                for hp in (h - 1, h - 2):
                    b2 = ct.event_bounds(gp, hp, geometry, params.bc)
                    if b2 is None:
                        continue
                    denom = measure.product_event_probability(*b2)
                    if denom <= 1e-300:
                        continue
                    if bounds is None:
                        cond, err = 0.0, 0.0
                    else:
                        lo = np.maximum(bounds[0], b2[0])
                        up = np.minimum(bounds[1], b2[1])
                        cond = measure.product_event_probability(lo, up) / denom
                        err = 0.0
                        if wider is not None:
                            d2 = wider.product_event_probability(*b2)
                            err = abs(wider.product_event_probability(lo, up) / d2 - cond)
                    ok = peierls_holds(cond, bound, err)
                    n_pairs += 1
                    n_fail += not ok
                    if worst is None or bound - cond < worst["slack"]:
                        worst = {"outer_contour": gp.to_json(), "h_outer": hp, "conditional_probability": cond,
                                 "slack": bound - cond, "truncation_error": err}
            # one row per (gamma, h): the outer contour with the least slack
            nested_entries.append({"contour": g.to_json(), "h": h, "perimeter": g.perimeter, "bound": bound,
                                   "n_pairs": n_pairs, "n_failed": n_fail, "worst": worst,
                                   "pass": n_fail == 0})
    nv = sum(e["n_failed"] for e in nested_entries)
    n_pairs = sum(e["n_pairs"] for e in nested_entries)
    extra = {"truncation_tv": slack,
             "nested": {"n_checked": n_pairs, "violations": nv, "entries": nested_entries}}
    rep = _report("peierls", {**_params_json(params, L), "h_values": list(h_values),
                              "max_perimeter": max_perimeter, "window": list(measure.window)},
                  entries, extra)
    rep["passed"] = rep["violations"] == 0 and nv == 0
    return rep


def is_increasing(measure: ExactMeasure, mask: np.ndarray) -> bool:
    """Closure of an event under raising one height by one (equivalent to the pointwise order)."""
    mask = np.asarray(mask, dtype=bool)
    lo, hi = measure.window
    flat = measure.states.reshape(measure.n_states, -1)
    for k in range(measure.L * measure.L):
        can = mask & (flat[:, k] < hi)
        src = np.nonzero(can)[0]
        if not mask[src + measure.radix[k]].all():
            return False
    return True


def threshold_events(measure: ExactMeasure) -> list[tuple[str, np.ndarray]]:
    """Events ``{eta_x >= a}`` for every site and every nontrivial level of the window."""
    lo, hi = measure.window
    L = measure.L
    out = []
    for x in range(1, L + 1):
        for y in range(1, L + 1):
            for a in range(lo + 1, hi + 1):
                out.append((f"eta{(x, y)}>={a}", measure.states[:, x - 1, y - 1] >= a))
    return out


def verify_fkg(measure: ExactMeasure, increasing_events=None, tol: float = 1e-12,
               check_decreasing: bool = True) -> dict:
    """Check ``P(E and F) >= P(E) P(F)`` on every pair of increasing events.

    Events are ``(name, mask)`` pairs; by default all threshold events.
    Each is verified to be increasing first.  With ``check_decreasing`` the
    covariance of every increasing event with the complement of another is
    also checked to be ``<= tol``.
    """
    events = threshold_events(measure) if increasing_events is None else list(increasing_events)
    for name, m in events:
        if not is_increasing(measure, m):
            raise ValueError(f"event {name} is not increasing")
    probs = measure.probs
    pe = [math.fsum(probs[m]) for _, m in events]
    entries, dec_entries = [], []
    for (i, (n1, m1)), (j, (n2, m2)) in itertools.combinations_with_replacement(enumerate(events), 2):
        joint = math.fsum(probs[m1 & m2])
        cov = joint - pe[i] * pe[j]
        entries.append({"E": n1, "F": n2, "P(E)": pe[i], "P(F)": pe[j], "P(EF)": joint,
                        "covariance": cov, "pass": cov >= -tol})
        if check_decreasing and i != j:
            for (a, ma, pa), (b, mb, pb) in (((n1, m1, pe[i]), (n2, m2, pe[j])),
                                            ((n2, m2, pe[j]), (n1, m1, pe[i]))):
                jd = math.fsum(probs[ma & ~mb])
                cd = jd - pa * (1.0 - pb)
                dec_entries.append({"E": a, "F": f"not({b})", "covariance": cd, "pass": cd <= tol})
    nd = sum(1 for e in dec_entries if not e["pass"])
    rep = _report("fkg", {**_params_json(measure.params, measure.L), "n_events": len(events)}, entries,
                  {"decreasing": {"n_checked": len(dec_entries), "violations": nd, "entries": dec_entries}})
    rep["passed"] = rep["violations"] == 0 and nd == 0
    return rep


def verify_sandwich(floor_measure: ExactMeasure, ceiling_measure: ExactMeasure,
                    events=None, ratio_tol: float = 1e-12, rel_tol: float = 1e-14) -> dict:
    """Floor-only vs floor-and-ceiling probabilities of events inside ``{0..n_plus}^box``.

    Checks ``P_floor(A) <= P_ceil(A)`` (up to ``rel_tol`` relative rounding)
    and ``P_ceil(A) / P_floor(A) = 1 / P_floor(eta <= n_plus)`` to
    ``ratio_tol``.  ``events`` is a boolean matrix (events x ceiling states);
    by default every nonempty subset of the ceiling state space.
    """
    fp, cp = floor_measure.params, ceiling_measure.params
    if fp.mode != FLOOR or cp.mode != FLOOR_CEILING:
        raise ValueError("need a floor measure and a floor_ceiling measure")
    if (fp.p, fp.beta, fp.bc, fp.bond_double_count) != (cp.p, cp.beta, cp.bc, cp.bond_double_count):
        raise ValueError("the two measures must differ only in the ceiling")
    n_plus = cp.n_plus
    if floor_measure.window[1] < n_plus:
        raise ValueError("floor window does not reach the ceiling")
    idx = np.array([floor_measure.index(s) for s in ceiling_measure.states])
    pbar_states = floor_measure.probs[idx]
    pc_states = ceiling_measure.probs
    inside = math.fsum(pbar_states)
    S = ceiling_measure.n_states
    if events is None:
        if S > 20:
            raise ValueError("exhaustive events need at most 20 states")
        ids = np.arange(1, 1 << S, dtype=np.int64)
        events = ((ids[:, None] >> np.arange(S)) & 1).astype(bool)
    events = np.asarray(events, dtype=bool)
    pbar = events.astype(float) @ pbar_states
    pc = events.astype(float) @ pc_states
    lower_ok = pbar <= pc * (1.0 + rel_tol)
    pos = pbar > 0
    ratio = np.where(pos, pc / np.where(pos, pbar, 1.0), np.nan)
    ratio_err = np.where(pos, np.abs(ratio - 1.0 / inside), 0.0)
    ratio_ok = ratio_err <= ratio_tol
    ok = lower_ok & ratio_ok
    worst = int(np.argmax(ratio_err))
    entries = []
    for s in range(S):  # singletons recorded in full
        e = np.zeros(S, bool)
        e[s] = True
        k = np.nonzero((events == e).all(axis=1))[0]
        if len(k):
            k = int(k[0])
            entries.append({"event": [int(v) for v in ceiling_measure.states[s].ravel()],
                            "P_floor": float(pbar[k]), "P_ceiling": float(pc[k]),
                            "ratio": float(ratio[k]), "pass": bool(ok[k])})
    rep = _report("sandwich", {**_params_json(cp, ceiling_measure.L), "floor_window": list(floor_measure.window)},
                  entries, {"n_events": int(len(events)), "event_violations": int((~ok).sum()),
                            "P_floor(eta<=n_plus)": inside, "predicted_ratio": 1.0 / inside,
                            "max_ratio_error": float(ratio_err[worst]),
                            "lower_violations": int((~lower_ok).sum())})
    rep["passed"] = bool(ok.all())
    rep["violations"] = int((~ok).sum())
    return rep


def one_point_tail(measure, site, h: int) -> float:
    """Exact ``P(eta_site >= h)``."""
    return measure.one_point_tail(site, h)


def boundary_bulk_tails(measure, h_values=(1, 2)) -> dict:
    """Exact one-point tails at a corner, an edge midpoint and the centre.

    A qualitative probe: sites next to the boundary should have lighter
    tails than the centre.  The asymptotic crossover scale is not tested.
    """
    L = measure.L
    c = (L + 1) // 2
    sites = {"corner": (1, 1), "edge": (1, c), "centre": (c, c)}
    rows = []
    for h in h_values:
        t = {k: measure.one_point_tail(s, h) for k, s in sites.items()}
        rows.append({"h": int(h), **t, "ordered": t["corner"] <= t["edge"] <= t["centre"]})
    return {"L": L, "sites": {k: list(v) for k, v in sites.items()}, "tails": rows,
            "passed": all(r["ordered"] for r in rows)}
