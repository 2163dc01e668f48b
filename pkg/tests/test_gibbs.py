import itertools
import math

import numpy as np
import pytest

from psos.gibbs import (FLOOR, FLOOR_CEILING, FREE, ConstraintError, ModelParams, energy_delta, energies,
                        free_window, gibbs_weight, heat_bath_distribution, local_distribution,
                        log_gibbs_weight, total_energy)
from psos.lattice import BoundaryCondition, BoxGeometry, HeightField

P_VALUES = (1.0, 1.5, 2.0, 3.0)


def naive_energy(h, p, bc=0, double=False):
    # every unordered bond with an endpoint in the box, once (twice if interior and double)
    L = h.shape[0]
    val = lambda x, y: h[x - 1, y - 1] if 1 <= x <= L and 1 <= y <= L else bc
    seen = set()
    e = 0.0
    for x in range(1, L + 1):
        for y in range(1, L + 1):
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                b = frozenset([(x, y), (x + dx, y + dy)])
                if b in seen:
                    continue
                seen.add(b)
                w = 2 if double and 1 <= x + dx <= L and 1 <= y + dy <= L else 1
                e += w * abs(val(x, y) - val(x + dx, y + dy)) ** p
    return e


def spike(L=3):
    return HeightField.constant(L, 0).with_height((2, 2), 1)


def test_energy_examples():
    for p in P_VALUES:
        assert total_energy(HeightField.constant(3, 0), ModelParams(p, 1.0, FREE)) == 0
    assert total_energy(spike(), ModelParams(2, 1.0, FREE)) == 4
    assert total_energy(HeightField.constant(2, 1), ModelParams(1.5, 1.0, FREE)) == 8


def test_energy_against_naive_sum():
    rng = np.random.default_rng(3)
    for _ in range(200):
        L = int(rng.integers(1, 6))
        h = rng.integers(-3, 4, size=(L, L))
        p = float(rng.choice(P_VALUES))
        bc = int(rng.integers(-2, 3))
        double = bool(rng.integers(2))
        params = ModelParams(p, 1.0, FREE, bc=BoundaryCondition.constant(bc), bond_double_count=double)
        assert total_energy(HeightField.from_array(h), params) == pytest.approx(naive_energy(h, p, bc, double),
                                                                                 rel=1e-12, abs=1e-12)


def test_integer_p_energy_is_exact_integer():
    rng = np.random.default_rng(4)
    h = rng.integers(0, 50, size=(6, 6))
    e = total_energy(HeightField.from_array(h), ModelParams(3, 1.0, FREE))
    assert e == int(naive_energy(h, 3))


def test_sign_symmetry_free():
    rng = np.random.default_rng(5)
    for p in P_VALUES:
        h = rng.integers(-4, 5, size=(4, 4))
        params = ModelParams(p, 1.0, FREE)
        assert total_energy(HeightField.from_array(h), params) == total_energy(HeightField.from_array(-h), params)


def test_double_count_only_touches_interior_bonds():
    params1 = ModelParams(2, 1.0, FREE)
    params2 = ModelParams(2, 1.0, FREE, bond_double_count=True)
    # spike at a corner of a 2x2 box: 2 boundary bonds and 2 interior bonds of gradient 1
    h = HeightField.constant(2, 0).with_height((1, 1), 1)
    assert total_energy(h, params1) == 4
    assert total_energy(h, params2) == 6


def test_constraints():
    with pytest.raises(ConstraintError):
        total_energy(HeightField.constant(2, -1), ModelParams(1, 1.0, FLOOR))
    with pytest.raises(ConstraintError):
        total_energy(HeightField.constant(2, 3), ModelParams(1, 1.0, FLOOR_CEILING, 2))
    with pytest.raises(ConstraintError):
        energy_delta(HeightField.constant(2, 0), (1, 1), 3, ModelParams(1, 1.0, FLOOR_CEILING, 2))


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.5, 1.0)
    with pytest.raises(ValueError):
        ModelParams(1, 0.0, FREE)
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, FLOOR_CEILING, None)
    p = ModelParams(1.5, 2.0, FLOOR_CEILING, 3, bond_double_count=True)
    assert ModelParams.from_json(p.to_json()) == p


def test_energy_delta_examples():
    params = ModelParams(2, 1.0, FREE)
    eta = spike()
    assert energy_delta(eta, (2, 2), 1, params) == 0
    assert energy_delta(eta, (2, 2), 0, params) == -4


def test_energy_delta_matches_recompute():
    rng = np.random.default_rng(6)
    for i in range(10_000):
        L = int(rng.integers(1, 5))
        p = float(P_VALUES[i % 4])
        params = ModelParams(p, 1.0, FREE, bc=BoundaryCondition.constant(int(rng.integers(-1, 2))))
        eta = HeightField.from_array(rng.integers(-3, 4, size=(L, L)))
        site = (int(rng.integers(1, L + 1)), int(rng.integers(1, L + 1)))
        new = int(rng.integers(-4, 5))
        full = total_energy(eta.with_height(site, new), params) - total_energy(eta, params)
        assert abs(energy_delta(eta, site, new, params) - full) <= 1e-10


def test_heat_bath_single_site():
    d = heat_bath_distribution(HeightField.constant(1, 0), (1, 1), ModelParams(1, 1.0, FLOOR_CEILING, 2))
    w = np.exp([0.0, -4.0, -8.0])
    assert list(d.support) == [0, 1, 2]
    np.testing.assert_allclose(d.probs, w / w.sum(), rtol=1e-14)


def test_heat_bath_mode_and_symmetry():
    for p in P_VALUES:
        params = ModelParams(p, 0.7, FLOOR_CEILING, 6)
        for k in range(7):
            assert local_distribution([k] * 4, [1.0] * 4, params).mode_height() == k
        d = local_distribution([2, 2, 4, 4], [1.0] * 4, params)
        for j in range(3):
            assert d.prob(3 - j) == pytest.approx(d.prob(3 + j), rel=1e-12)


def test_local_distribution_normalized():
    rng = np.random.default_rng(7)
    for mode in (FREE, FLOOR, FLOOR_CEILING):
        for p in P_VALUES:
            params = ModelParams(p, float(rng.uniform(0.2, 3)), mode, 4 if mode == FLOOR_CEILING else None)
            nbs = rng.integers(0, 5, size=4)
            d = local_distribution(nbs, [1.0] * 4, params)
            assert abs(d.probs.sum() - 1) <= 1e-12
            assert d.probs.min() >= 0
            if mode != FREE:
                assert d.support[0] == 0
            if mode == FLOOR_CEILING:
                assert d.support[-1] == 4


def test_free_window_tail_is_negligible():
    for beta in (0.5, 1.0, 2.0):
        for p in P_VALUES:
            W = free_window(beta, p)
            assert math.exp(-beta * W ** p) < 1e-15


def test_inverse_cdf_monotone_in_neighbours():
    us = np.linspace(0, 1, 41, endpoint=False)
    for p in P_VALUES:
        params = ModelParams(p, 1.3, FLOOR_CEILING, 3)
        draws = {}
        for nbs in itertools.product(range(4), repeat=4):
            d = local_distribution(nbs, [1.0] * 4, params)
            draws[nbs] = np.array([d.sample(u) for u in us])
        for nbs, hs in draws.items():
            for i in range(4):
                if nbs[i] < 3:
                    up = list(nbs)
                    up[i] += 1
                    assert np.all(hs <= draws[tuple(up)])


def test_gibbs_weight_examples():
    params = ModelParams(2, 1.0, FREE)
    assert gibbs_weight(HeightField.constant(3, 0), params) == 1.0
    assert gibbs_weight(spike(), params) == pytest.approx(math.exp(-4), rel=1e-15)
    rng = np.random.default_rng(8)
    for _ in range(50):
        eta = HeightField.from_array(rng.integers(-3, 4, size=(3, 3)))
        assert log_gibbs_weight(eta, params) == pytest.approx(-total_energy(eta, params), abs=1e-12)


def test_gibbs_weight_underflow_is_zero_not_nan():
    w = gibbs_weight(HeightField.constant(4, 1000), ModelParams(2, 5.0, FREE))
    assert w == 0.0


def test_vectorized_energies_match_scalar():
    rng = np.random.default_rng(9)
    states = rng.integers(0, 3, size=(20, 3, 3))
    params = ModelParams(1.5, 1.0, FLOOR_CEILING, 2)
    ref = [total_energy(HeightField.from_array(s), params) for s in states]
    np.testing.assert_allclose(energies(states, params), ref, rtol=1e-14)
