import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psos.lattice import BoundaryCondition, BoxGeometry, HeightField, ZERO_BC, dist_to_boundary, leq, neighbors


def tags(site, L):
    return sorted(t for _, t in neighbors(site, BoxGeometry(L)))


def test_neighbor_tags():
    assert tags((2, 2), 3) == ["interior"] * 4
    assert tags((1, 1), 3) == ["boundary", "boundary", "interior", "interior"]
    assert tags((1, 1), 1) == ["boundary"] * 4


def test_neighbors_outside_box():
    with pytest.raises(ValueError):
        neighbors((0, 1), BoxGeometry(3))


def test_boundary_tagged_neighbors_lie_on_outer_boundary():
    for L in (1, 2, 5):
        g = BoxGeometry(L)
        outer = set(g.outer_boundary())
        for s in g.sites():
            for nb, tag in neighbors(s, g):
                assert (tag == "boundary") == (nb in outer)


def test_outer_boundary_is_l1_shell():
    for L in (1, 2, 4, 7):
        g = BoxGeometry(L)
        box = set(g.sites())
        near = set()
        for x, y in box:
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if (x + dx, y + dy) not in box:
                    near.add((x + dx, y + dy))
        assert set(g.outer_boundary()) == near
        assert len(near) == 4 * L


def test_neighbor_symmetry():
    g = BoxGeometry(4)
    for s in g.sites():
        for nb, tag in neighbors(s, g):
            if tag == "interior":
                assert s in [n for n, _ in neighbors(nb, g)]


def test_dist_examples():
    assert dist_to_boundary((3, 3), BoxGeometry(5)) == 3
    assert dist_to_boundary((1, 3), BoxGeometry(5)) == 1
    assert {dist_to_boundary(s, BoxGeometry(2)) for s in BoxGeometry(2).sites()} == {1}


def test_dist_brute_force():
    for L in range(1, 9):
        g = BoxGeometry(L)
        outer = g.outer_boundary()
        for x, y in g.sites():
            brute = min(abs(x - a) + abs(y - b) for a, b in outer)
            assert dist_to_boundary((x, y), g) == brute


def test_index_roundtrip():
    g = BoxGeometry(4)
    assert [g.index(s) for s in g.sites()] == list(range(16))
    assert all(g.site(g.index(s)) == s for s in g.sites())


def test_leq_examples():
    z, o = HeightField.constant(3, 0), HeightField.constant(3, 1)
    assert leq(z, o) and not leq(o, z)
    assert leq(z, z)
    a = z.with_height((1, 1), 1)
    b = z.with_height((2, 2), 1)
    assert not leq(a, b) and not leq(b, a)


def test_leq_geometry_mismatch():
    with pytest.raises(ValueError):
        leq(HeightField.constant(2), HeightField.constant(3))


fields3 = st.lists(st.integers(-2, 2), min_size=9, max_size=9).map(
    lambda v: HeightField.from_array(np.array(v).reshape(3, 3)))


@settings(max_examples=200, deadline=None)
@given(fields3, fields3, fields3)
def test_leq_partial_order(a, b, c):
    assert leq(a, a)
    if leq(a, b) and leq(b, a):
        assert a == b
    if leq(a, b) and leq(b, c):
        assert leq(a, c)


def test_bc_json_roundtrip():
    g = BoxGeometry(2)
    vals = {s: i for i, s in enumerate(g.outer_boundary())}
    bc = BoundaryCondition.from_map(vals, g)
    again = BoundaryCondition.from_json(bc.to_json(), g)
    assert again.to_json() == bc.to_json()
    assert all(again.value(s) == v for s, v in vals.items())
    assert BoundaryCondition.from_json(ZERO_BC.to_json()) == ZERO_BC


def test_bc_map_must_be_total():
    g = BoxGeometry(2)
    with pytest.raises(ValueError):
        BoundaryCondition.from_map({(0, 1): 1}, g)


def test_padded_places_boundary_values():
    g = BoxGeometry(3)
    vals = {s: 10 * s[0] + s[1] for s in g.outer_boundary()}
    pad = BoundaryCondition.from_map(vals, g).padded(g)
    for (x, y), v in vals.items():
        assert pad[x, y] == v
