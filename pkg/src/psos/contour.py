"""Dual-lattice contours, h-contour events and the downward shift map.

Dual vertex ``(a, b)`` is the corner point ``(a + 1/2, b + 1/2)`` shared by
primal sites ``(a, b)``, ``(a+1, b)``, ``(a, b+1)`` and ``(a+1, b+1)``.  The
dual bond ``(a, b)-(a, b+1)`` crosses the primal edge ``(a, b+1)-(a+1, b+1)``
and the dual bond ``(a, b)-(a+1, b)`` crosses ``(a+1, b)-(a+1, b+1)``.

Where four level-set bonds meet at a dual vertex they are split with a fixed
rule: the north bond is paired with the west bond and the south bond with the
east bond.  High sites touching along a south-west/north-east diagonal thus
share one circuit, while high sites touching along the other diagonal get
separate circuits.  Every pairing is linked in the sense of lying on one
side of a 45-degree diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .lattice import BoundaryCondition, BoxGeometry, HeightField, ZERO_BC


def _crossed_edge(u, v):
    """Primal edge (pair of sites) crossed by the dual bond ``u-v``."""
    (a, b), (c, d) = sorted((u, v))
    if a == c and d == b + 1:
        return ((a, b + 1), (a + 1, b + 1))
    if b == d and c == a + 1:
        return ((a + 1, b), (a + 1, b + 1))
    raise ValueError(f"{u} and {v} are not adjacent dual vertices")


def _dual_bond(x, y):
    """Dual bond separating adjacent primal sites ``x`` and ``y``."""
    (x1, y1), (x2, y2) = sorted((tuple(x), tuple(y)))
    if x1 == x2 and y2 == y1 + 1:
        return ((x1 - 1, y1), (x1, y1))
    if y1 == y2 and x2 == x1 + 1:
        return ((x1, y1 - 1), (x1, y1))
    raise ValueError(f"{x} and {y} are not nearest neighbours")


def _bond_key(u, v):
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Contour:
    """Closed circuit of dual bonds, stored as its cyclic vertex sequence."""

    vertices: tuple

    def __post_init__(self):
        vs = tuple(tuple(int(c) for c in v) for v in self.vertices)
        if len(vs) > 1 and vs[0] == vs[-1]:
            vs = vs[:-1]
        object.__setattr__(self, "vertices", vs)
        n = len(vs)
        if n < 4:
            raise ValueError("a contour needs at least four bonds")
        seen = set()
        for i in range(n):
            u, v = vs[i], vs[(i + 1) % n]
            if abs(u[0] - v[0]) + abs(u[1] - v[1]) != 1:
                raise ValueError(f"consecutive vertices {u}, {v} are not adjacent")
            key = _bond_key(u, v)
            if key in seen:
                raise ValueError(f"bond {key} used twice")
            seen.add(key)

    @property
    def bonds(self) -> list:
        n = len(self.vertices)
        return [_bond_key(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    @property
    def perimeter(self) -> int:
        return len(self.vertices)

    @cached_property
    def crossed_edges(self) -> list:
        return [_crossed_edge(u, v) for u, v in self.bonds]

    @cached_property
    def _bbox(self):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), max(xs) + 1, min(ys), max(ys) + 1

    @cached_property
    def interior(self) -> frozenset:
        """Primal sites strictly enclosed, by horizontal-ray crossing parity."""
        x0, x1, y0, y1 = self._bbox
        nx, ny = x1 - x0 + 1, y1 - y0 + 1
        cross = np.zeros((nx, ny), dtype=np.int64)
        for a, b in self.crossed_edges:
            if a[1] == b[1]:  # horizontal primal edge (a, y)-(a+1, y)
                cross[a[0] - x0, a[1] - y0] += 1
        parity = np.cumsum(cross[::-1], axis=0)[::-1] % 2
        xs, ys = np.nonzero(parity)
        return frozenset((int(x) + x0, int(y) + y0) for x, y in zip(xs, ys))

    @property
    def area(self) -> int:
        return len(self.interior)

    @cached_property
    def inner_boundary(self) -> frozenset:
        """Sites of the interior adjacent to a bond of the contour."""
        inside = self.interior
        return frozenset(s for e in self.crossed_edges for s in e if s in inside)

    @cached_property
    def outer_boundary(self) -> frozenset:
        inside = self.interior
        return frozenset(s for e in self.crossed_edges for s in e if s not in inside)

    def to_json(self) -> list:
        return [list(v) for v in self.vertices]

    @classmethod
    def from_json(cls, obj) -> "Contour":
        return cls(tuple(tuple(v) for v in obj))

    @classmethod
    def around(cls, sites: Iterable) -> "Contour":
        """The single circuit bounding a set of sites (must be one contour)."""
        sites = set(map(tuple, sites))
        xs = [s[0] for s in sites]
        ys = [s[1] for s in sites]
        x0, y0 = min(xs) - 1, min(ys) - 1
        L = max(max(xs) - x0, max(ys) - y0)
        h = np.zeros((L, L), dtype=np.int64)
        for x, y in sites:
            h[x - x0 - 1, y - y0 - 1] = 1
        circuits = level_circuits(h, 1, ZERO_BC)
        if len(circuits) != 1:
            raise ValueError("site set is not bounded by a single circuit")
        (c, _), = circuits
        return cls(tuple((a + x0, b + y0) for a, b in c.vertices))


def exterior_flood_fill(gamma: Contour) -> frozenset:
    """Sites of the bounding box (plus margin) reachable from outside without crossing the contour."""
    x0, x1, y0, y1 = gamma._bbox
    x0, x1, y0, y1 = x0 - 1, x1 + 1, y0 - 1, y1 + 1
    blocked = {frozenset(e) for e in gamma.crossed_edges}
    start = (x0, y0)
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if x0 <= nb[0] <= x1 and y0 <= nb[1] <= y1 and nb not in seen \
                    and frozenset(((x, y), nb)) not in blocked:
                seen.add(nb)
                stack.append(nb)
    return frozenset(seen)


def _boundary_value(site, geometry: BoxGeometry, bc: BoundaryCondition, heights):
    if geometry.contains(site):
        return int(heights[site[0] - 1, site[1] - 1])
    return bc.value(site) if bc.is_constant else bc.values.get(tuple(site))


def level_bonds(heights: np.ndarray, h: int, bc: BoundaryCondition = ZERO_BC) -> set:
    """Dual bonds separating ``{eta >= h}`` from ``{eta <= h-1}`` on edges touching the box."""
    heights = np.asarray(heights)
    L = heights.shape[0]
    pad = bc.padded(BoxGeometry(L))
    pad[1:-1, 1:-1] = heights
    high = pad >= h
    out = set()
    dv = high[1:, 1:-1] != high[:-1, 1:-1]
    for i, j in zip(*np.nonzero(dv)):
        out.add(_dual_bond((i, j + 1), (i + 1, j + 1)))
    dh = high[1:-1, 1:] != high[1:-1, :-1]
    for i, j in zip(*np.nonzero(dh)):
        out.add(_dual_bond((i + 1, j), (i + 1, j + 1)))
    return out


def _other_at_saddle(v, u):
    """Partner of the bond ``v-u`` at a four-bond vertex ``v`` (N with W, S with E)."""
    dx, dy = u[0] - v[0], u[1] - v[1]
    partner = {(0, 1): (-1, 0), (-1, 0): (0, 1), (0, -1): (1, 0), (1, 0): (0, -1)}[(dx, dy)]
    return (v[0] + partner[0], v[1] + partner[1])


def level_circuits(heights: np.ndarray, h: int, bc: BoundaryCondition = ZERO_BC):
    """All closed circuits of the level-``h`` bond set.

    Returns ``(contour, high_inside)`` pairs.  Circuits with the high side
    outside bound holes of the ``{eta >= h}`` region.  Raises ``ValueError``
    if a non-constant boundary condition leaves open level lines.
    """
    bonds = level_bonds(heights, h, bc)
    inc: dict = {}
    for u, v in bonds:
        inc.setdefault(u, []).append(v)
        inc.setdefault(v, []).append(u)
    for v, nbs in inc.items():
        if len(nbs) not in (2, 4):
            raise ValueError(f"open level line at dual vertex {v}")
    unused = set(bonds)
    L = np.asarray(heights).shape[0]
    geometry = BoxGeometry(L)
    out = []
    for start in sorted(bonds):
        if start not in unused:
            continue
        prev, cur = start
        path = [prev]
        unused.discard(start)
        while True:
            path.append(cur)
            nbs = inc[cur]
            if len(nbs) == 2:
                nxt = nbs[0] if nbs[1] == prev else nbs[1]
            else:
                nxt = _other_at_saddle(cur, prev)
            key = _bond_key(cur, nxt)
            if key == start:
                break
            unused.discard(key)
            prev, cur = cur, nxt
        gamma = Contour(tuple(path))
        a, b = gamma.crossed_edges[0]
        inner = a if a in gamma.interior else b
        high_inside = _boundary_value(inner, geometry, bc, heights) >= h
        out.append((gamma, high_inside))
    return out


def extract_h_contours(eta: HeightField | np.ndarray, h: int, bc: BoundaryCondition = ZERO_BC) -> list:
    """The h-contours of ``eta``: level-``h`` circuits with ``eta >= h`` inside."""
    heights = eta.heights if isinstance(eta, HeightField) else np.asarray(eta)
    return [g for g, high in level_circuits(heights, h, bc) if high]


def is_h_contour(gamma: Contour, eta: HeightField | np.ndarray, h: int,
                 bc: BoundaryCondition = ZERO_BC) -> bool:
    """Whether ``eta >= h`` on the inner boundary of ``gamma`` and ``<= h-1`` on the outer one."""
    heights = eta.heights if isinstance(eta, HeightField) else np.asarray(eta)
    geometry = BoxGeometry(heights.shape[0])
    for s in gamma.inner_boundary | gamma.outer_boundary:
        if not (geometry.contains(s) or geometry.is_boundary(s)):
            raise ValueError(f"contour touches site {s} outside the box and its boundary")
    return all(_boundary_value(s, geometry, bc, heights) >= h for s in gamma.inner_boundary) and \
        all(_boundary_value(s, geometry, bc, heights) <= h - 1 for s in gamma.outer_boundary)


def event_bounds(gamma: Contour, h: int, geometry: BoxGeometry, bc: BoundaryCondition = ZERO_BC):
    """The event ``C_{gamma,h}`` as per-site bounds ``lower <= eta <= upper``.

    Returns ``None`` when the boundary condition alone rules the event out.
    Unconstrained entries are +-inf (as floats).
    """
    L = geometry.L
    lower = np.full((L, L), -np.inf)
    upper = np.full((L, L), np.inf)
    for s in gamma.inner_boundary:
        if geometry.contains(s):
            lower[s[0] - 1, s[1] - 1] = max(lower[s[0] - 1, s[1] - 1], h)
        elif bc.value(s) < h:
            return None
    for s in gamma.outer_boundary:
        if geometry.contains(s):
            upper[s[0] - 1, s[1] - 1] = min(upper[s[0] - 1, s[1] - 1], h - 1)
        elif bc.value(s) > h - 1:
            return None
    return lower, upper


@dataclass
class ShiftResult:
    field: HeightField
    floor_violated: bool


def shift_down(eta: HeightField, gamma: Contour, floor: bool = False) -> ShiftResult:
    """Lower every height inside ``gamma`` by one.

    ``floor_violated`` flags a result that went below zero; with
    ``floor=True`` it is set whenever some interior height was already 0.
    """
    out = eta.heights.copy()
    for x, y in gamma.interior:
        if eta.geometry.contains((x, y)):
            out[x - 1, y - 1] -= 1
    flagged = bool(out.min() < 0) if floor else False
    return ShiftResult(HeightField(out, eta.geometry), flagged)


def interior_area(gamma: Contour) -> int:
    return gamma.area


def perimeter(gamma: Contour) -> int:
    return gamma.perimeter


def max_contour_area(eta: HeightField | np.ndarray, h: int, bc: BoundaryCondition = ZERO_BC) -> int:
    contours = extract_h_contours(eta, h, bc)
    return max((g.area for g in contours), default=0)


def atypical_membership(eta: HeightField | np.ndarray, h: int, area_threshold: float,
                        bc: BoundaryCondition = ZERO_BC) -> bool:
    """True iff no h-contour of ``eta`` encloses more than ``area_threshold`` sites."""
    return max_contour_area(eta, h, bc) <= area_threshold


def box_contours(L: int, max_perimeter: int | None = None) -> list[Contour]:
    """Every contour whose interior is a subset of the ``L x L`` box.

    Found by enumerating site subsets whose level set is a single circuit
    enclosing exactly that subset; feasible for ``L <= 4``.
    """
    n = L * L
    if n > 16:
        raise ValueError("contour enumeration is limited to boxes with at most 16 sites")
    out = []
    for mask in range(1, 1 << n):
        bits = np.array([(mask >> k) & 1 for k in range(n)], dtype=np.int64).reshape(L, L)
        circuits = level_circuits(bits, 1, ZERO_BC)
        if len(circuits) != 1:
            continue
        gamma, high = circuits[0]
        if not high or (max_perimeter is not None and gamma.perimeter > max_perimeter):
            continue
        sites = {(int(x) + 1, int(y) + 1) for x, y in zip(*np.nonzero(bits))}
        if gamma.interior == sites:
            out.append(gamma)
    return out
