"""Box geometry, boundary conditions and height fields.

Sites use 1-based ``(x, y)`` coordinates, so the box is ``{1..L}^2``.  A
height field is stored as an ``(L, L)`` integer array indexed by
``[x - 1, y - 1]``; serialized site indices are 0-based and row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class BoxGeometry:
    """The square box ``{1..L}^2`` and its outer boundary."""

    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"box side must be a positive integer, got {self.L!r}")

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    def sites(self) -> Iterator[tuple[int, int]]:
        for x in range(1, self.L + 1):
            for y in range(1, self.L + 1):
                yield (x, y)

    def contains(self, site) -> bool:
        x, y = site
        return 1 <= x <= self.L and 1 <= y <= self.L

    def outer_boundary(self) -> list[tuple[int, int]]:
        """Sites of ``Z^2`` at l1-distance exactly 1 from the box (``4L`` of them)."""
        L = self.L
        out = []
        for k in range(1, L + 1):
            out += [(0, k), (L + 1, k), (k, 0), (k, L + 1)]
        return sorted(out)

    def is_boundary(self, site) -> bool:
        x, y = site
        L = self.L
        if self.contains(site):
            return False
        return (x in (0, L + 1) and 1 <= y <= L) or (y in (0, L + 1) and 1 <= x <= L)

    def index(self, site) -> int:
        """0-based row-major index of a box site."""
        self._check(site)
        x, y = site
        return (x - 1) * self.L + (y - 1)

    def site(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_sites:
            raise ValueError(f"index {index} outside box of {self.n_sites} sites")
        return (index // self.L + 1, index % self.L + 1)

    def _check(self, site):
        if not self.contains(site):
            raise ValueError(f"site {site} is outside the box of side {self.L}")

    def to_json(self) -> dict:
        return {"L": self.L}


def neighbors(site, geometry: BoxGeometry) -> list[tuple[tuple[int, int], str]]:
    """The four nearest neighbours of a box site, tagged ``interior`` or ``boundary``."""
    geometry._check(site)
    x, y = site
    out = []
    for dx, dy in _STEPS:
        nb = (x + dx, y + dy)
        out.append((nb, "interior" if geometry.contains(nb) else "boundary"))
    return out


def dist_to_boundary(site, geometry: BoxGeometry) -> int:
    """Graph (l1) distance from a box site to the nearest outer-boundary site."""
    geometry._check(site)
    x, y = site
    L = geometry.L
    return min(x, y, L + 1 - x, L + 1 - y)


@dataclass(frozen=True)
class BoundaryCondition:
    """Integer heights on the outer boundary.

    A constant condition is kept as a single value; ``values`` holds an
    explicit map otherwise.  Missing entries of a map are an error.
    """

    const: int | None = 0
    values: dict = field(default=None, hash=False, compare=True)

    def __post_init__(self):
        if (self.const is None) == (self.values is None):
            raise ValueError("give exactly one of const or values")

    @classmethod
    def constant(cls, value: int = 0) -> "BoundaryCondition":
        return cls(const=int(value))

    @classmethod
    def from_map(cls, values: dict, geometry: BoxGeometry) -> "BoundaryCondition":
        vals = {tuple(k): int(v) for k, v in values.items()}
        missing = set(geometry.outer_boundary()) - set(vals)
        extra = set(vals) - set(geometry.outer_boundary())
        if missing or extra:
            raise ValueError(
                f"boundary map must cover exactly the outer boundary "
                f"(missing {sorted(missing)[:4]}, extra {sorted(extra)[:4]})")
        return cls(const=None, values=vals)

    @property
    def is_constant(self) -> bool:
        return self.const is not None

    def value(self, site) -> int:
        if self.const is not None:
            return self.const
        return self.values[tuple(site)]

    def padded(self, geometry: BoxGeometry) -> np.ndarray:
        """``(L+2, L+2)`` array holding the boundary values on its outer ring.

        The four corners are not boundary sites; they are filled with the
        value of an adjacent boundary site so that the array is usable for
        level-set computations.
        """
        L = geometry.L
        pad = np.zeros((L + 2, L + 2), dtype=np.int64)
        if self.const is not None:
            pad[:] = self.const
            return pad
        for (x, y), v in self.values.items():
            pad[x, y] = v
        pad[0, 0], pad[0, L + 1] = pad[0, 1], pad[0, L]
        pad[L + 1, 0], pad[L + 1, L + 1] = pad[L + 1, 1], pad[L + 1, L]
        return pad

    def to_json(self) -> dict:
        if self.const is not None:
            return {"kind": "const", "value": self.const}
        items = sorted(self.values.items())
        return {"kind": "map", "values": [[x, y, v] for (x, y), v in items]}

    @classmethod
    def from_json(cls, obj, geometry: BoxGeometry | None = None) -> "BoundaryCondition":
        if obj is None:
            return cls.constant(0)
        if isinstance(obj, (int, np.integer)):
            return cls.constant(int(obj))
        kind = obj.get("kind", "const")
        if kind == "const":
            return cls.constant(int(obj.get("value", 0)))
        if kind == "map":
            if geometry is None:
                raise ValueError("a map boundary condition needs the box geometry")
            return cls.from_map({(x, y): v for x, y, v in obj["values"]}, geometry)
        raise ValueError(f"unknown boundary condition kind {kind!r}")


ZERO_BC = BoundaryCondition.constant(0)


@dataclass
class HeightField:
    """Integer heights on the box together with its geometry."""

    heights: np.ndarray
    geometry: BoxGeometry

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.int64)
        L = self.geometry.L
        if self.heights.shape != (L, L):
            raise ValueError(f"heights must have shape {(L, L)}, got {self.heights.shape}")

    @classmethod
    def from_array(cls, heights) -> "HeightField":
        heights = np.asarray(heights, dtype=np.int64)
        return cls(heights, BoxGeometry(heights.shape[0]))

    @classmethod
    def constant(cls, L: int, value: int = 0) -> "HeightField":
        return cls(np.full((L, L), value, dtype=np.int64), BoxGeometry(L))

    def __getitem__(self, site) -> int:
        x, y = site
        self.geometry._check(site)
        return int(self.heights[x - 1, y - 1])

    def with_height(self, site, h: int) -> "HeightField":
        self.geometry._check(site)
        out = self.heights.copy()
        out[site[0] - 1, site[1] - 1] = h
        return HeightField(out, self.geometry)

    def copy(self) -> "HeightField":
        return HeightField(self.heights.copy(), self.geometry)

    def padded(self, bc: BoundaryCondition) -> np.ndarray:
        pad = bc.padded(self.geometry)
        pad[1:-1, 1:-1] = self.heights
        return pad

    def __eq__(self, other):
        if not isinstance(other, HeightField):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.heights, other.heights)


def leq(eta: HeightField, other: HeightField) -> bool:
    """Pointwise order: ``eta <= other`` at every site."""
    if eta.geometry != other.geometry:
        raise ValueError("cannot compare height fields on different boxes")
    return bool(np.all(eta.heights <= other.heights))
