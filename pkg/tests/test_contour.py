import numpy as np
import pytest

from psos.contour import (Contour, box_contours, event_bounds, exterior_flood_fill, extract_h_contours,
                          is_h_contour, level_circuits, max_contour_area, shift_down, atypical_membership)
from psos.gibbs import FREE, ModelParams, total_energy
from psos.lattice import BoxGeometry, HeightField

P_VALUES = (1.0, 1.5, 2.0, 3.0)


def field(rows):
    return HeightField.from_array(np.array(rows, dtype=np.int64))


def test_single_spike():
    eta = field([[0, 0, 0], [0, 1, 0], [0, 0, 0]])
    (g,) = extract_h_contours(eta, 1)
    assert g.perimeter == 4 and g.area == 1
    assert g.interior == {(2, 2)}
    assert g.outer_boundary == {(1, 2), (3, 2), (2, 1), (2, 3)}
    assert extract_h_contours(eta, 2) == []


def test_domino():
    (g,) = extract_h_contours(field([[1, 1, 0], [0, 0, 0], [0, 0, 0]]), 1)
    assert (g.perimeter, g.area) == (6, 2)


def test_plateau_contours_nest():
    eta = field([[1, 1, 1, 0], [1, 2, 1, 0], [1, 1, 1, 0], [0, 0, 0, 0]])
    (g1,) = extract_h_contours(eta, 1)
    (g2,) = extract_h_contours(eta, 2)
    assert (g1.perimeter, g1.area) == (12, 9)
    assert (g2.perimeter, g2.area) == (4, 1)
    assert g2.interior < g1.interior


def test_diagonal_linking_rule():
    # south-west/north-east neighbours share one circuit
    sw_ne = extract_h_contours(field([[1, 0, 0], [0, 1, 0], [0, 0, 0]]), 1)
    assert [(g.perimeter, g.area) for g in sw_ne] == [(8, 2)]
    other = extract_h_contours(field([[0, 1, 0], [1, 0, 0], [0, 0, 0]]), 1)
    assert sorted((g.perimeter, g.area) for g in other) == [(4, 1), (4, 1)]


def test_hole_is_not_an_h_contour():
    eta = field([[1, 1, 1], [1, 0, 1], [1, 1, 1]])
    circuits = level_circuits(eta.heights, 1)
    assert sorted((g.perimeter, high) for g, high in circuits) == [(4, False), (12, True)]
    assert [g.perimeter for g in extract_h_contours(eta, 1)] == [12]


def test_box_contour_counts():
    # 3x3 box, perimeter <= 8: 9 monominoes, 12 dominoes, 4 squares, 6 straight
    # and 16 bent triominoes, 4 linked diagonal pairs
    counts = {}
    for g in box_contours(3):
        counts[g.perimeter] = counts.get(g.perimeter, 0) + 1
    assert counts[4] == 9 and counts[6] == 12 and counts[8] == 30


def test_isoperimetric_inequality():
    for g in box_contours(3):
        assert g.area <= g.perimeter ** 2 / 16


def test_interior_matches_flood_fill():
    for g in box_contours(3):
        x0, x1, y0, y1 = g._bbox
        box = {(x, y) for x in range(x0 - 1, x1 + 2) for y in range(y0 - 1, y1 + 2)}
        enclosed = box - exterior_flood_fill(g)
        assert g.interior <= enclosed
        if len(set(g.vertices)) == g.perimeter:  # no pinch at a saddle vertex
            assert g.interior == enclosed


def test_json_roundtrip_and_rotation_invariance():
    g = Contour.around([(1, 1), (1, 2)])
    assert Contour.from_json(g.to_json()) == g
    with pytest.raises(ValueError):
        Contour(((0, 0), (0, 1), (1, 1)))
    with pytest.raises(ValueError):
        Contour(((0, 0), (0, 2), (1, 2), (1, 0)))


def test_contours_are_h_contours_of_their_field():
    rng = np.random.default_rng(11)
    for _ in range(300):
        L = int(rng.integers(2, 7))
        eta = HeightField.from_array(rng.integers(0, 4, size=(L, L)))
        for h in (1, 2, 3):
            contours = extract_h_contours(eta, h)
            for g in contours:
                assert is_h_contour(g, eta, h)
            # every high site lies inside some h-contour
            high = {(x + 1, y + 1) for x, y in zip(*np.nonzero(eta.heights >= h))}
            covered = set().union(*(g.interior for g in contours)) if contours else set()
            assert high <= covered


def test_event_bounds_agree_with_membership():
    rng = np.random.default_rng(12)
    geo = BoxGeometry(3)
    for g in box_contours(3, 8):
        lower, upper = event_bounds(g, 1, geo)
        for _ in range(20):
            eta = rng.integers(-1, 3, size=(3, 3))
            inside = bool(np.all(eta >= lower) and np.all(eta <= upper))
            assert inside == is_h_contour(g, eta, 1)


def test_event_bounds_ruled_out_by_boundary():
    g = Contour.around([(1, 1)])
    from psos.lattice import BoundaryCondition
    assert event_bounds(g, 1, BoxGeometry(3), BoundaryCondition.constant(5)) is None


def shift_triples(rng, n):
    """Random (eta, gamma, h) with eta in C_{gamma,h}, gamma read off eta itself."""
    out = []
    while len(out) < n:
        L = int(rng.integers(2, 7))
        eta = HeightField.from_array(rng.integers(-2, 4, size=(L, L)))
        h = int(rng.integers(-1, 4))
        contours = extract_h_contours(eta, h) if h >= 1 else []
        if contours:
            out.append((eta, contours[int(rng.integers(len(contours)))], h))
    return out


def test_shift_energy_law():
    rng = np.random.default_rng(13)
    for eta, g, h in shift_triples(rng, 1000):
        shifted = shift_down(eta, g).field
        for p in P_VALUES:
            params = ModelParams(p, 1.0, FREE)
            assert total_energy(shifted, params) <= total_energy(eta, params) - g.perimeter + 1e-9


def test_shift_down_floor_flag():
    eta = field([[1, 0], [0, 0]])
    g = Contour.around([(1, 1)])
    r = shift_down(eta, g, floor=True)
    assert not r.floor_violated and r.field.heights.sum() == 0
    r = shift_down(field([[0, 0], [0, 0]]), g, floor=True)
    assert r.floor_violated


def test_max_area_and_atypical_membership():
    eta = field([[2, 2, 0, 0], [2, 2, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1]])
    assert max_contour_area(eta, 1) == 4
    assert max_contour_area(eta, 3) == 0
    assert atypical_membership(eta, 1, 4) and not atypical_membership(eta, 1, 3.5)
