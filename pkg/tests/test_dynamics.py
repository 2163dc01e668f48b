import numpy as np
import pytest

from psos import oracle
from psos.dynamics import (ChainState, GlauberChain, UpdateDraw, glauber_step, grand_coupled_step,
                           hit_level_fraction, make_rng, occupation_counts, run_coupled, run_restricted,
                           run_until, tv_distance_to_equilibrium)
from psos.gibbs import FLOOR, FLOOR_CEILING, FREE, ModelParams
from psos.lattice import HeightField, leq

P_VALUES = (1.0, 1.5, 2.0, 3.0)


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(5, 1, 2).random(4)
    assert np.array_equal(a, make_rng(5, 1, 2).random(4))
    assert not np.array_equal(a, make_rng(5, 2, 1).random(4))
    assert not np.array_equal(a, make_rng(6, 1, 2).random(4))


def test_update_draw_site_is_uniform_index():
    assert UpdateDraw.from_uniforms(0.0, 0.3, 4).site == 0
    assert UpdateDraw.from_uniforms(0.999, 0.3, 4).site == 3
    assert UpdateDraw.from_uniforms(0.5, 0.3, 4).site == 2


def test_single_site_occupation_matches_exact_law():
    params = ModelParams(1, 1.0, FLOOR_CEILING, 2)
    counts = occupation_counts(params, HeightField.constant(1, 0), 10 ** 6, make_rng(1))
    w = np.exp([0.0, -4.0, -8.0])
    tv = 0.5 * np.abs(counts / counts.sum() - w / w.sum()).sum()
    assert tv <= 0.005


def test_bulk_runner_matches_stepwise_updates():
    for p in P_VALUES:
        for mode, n_plus in ((FREE, None), (FLOOR, None), (FLOOR_CEILING, 3)):
            params = ModelParams(p, 0.8, mode, n_plus)
            eta = HeightField.constant(3, 1)
            bulk = GlauberChain(params, eta, make_rng(2, 1)).run(500).field
            state = ChainState.start(eta, 2, 1)
            for _ in range(500):
                state = glauber_step(state, params)
            assert bulk == state.field


def test_floor_is_respected():
    chain = GlauberChain(ModelParams(1, 0.3, FLOOR), HeightField.constant(4, 0), make_rng(3)).sweeps(200)
    assert chain.heights.min() >= 0


def test_grand_coupling_preserves_order_stepwise():
    rng = np.random.default_rng(4)
    for p in P_VALUES:
        params = ModelParams(p, 1.0, FLOOR_CEILING, 4)
        lo = rng.integers(0, 3, size=(3, 3))
        hi = np.minimum(lo + rng.integers(0, 3, size=(3, 3)), 4)
        states = [ChainState.start(HeightField.from_array(lo), 9, int(p)),
                  ChainState(HeightField.from_array(hi))]
        for _ in range(2000):
            states = grand_coupled_step(states, params)
            assert leq(states[0].field, states[1].field)


def test_run_coupled_extremal_replicas():
    params = ModelParams(2, 1.0, FLOOR_CEILING, 3)
    fields = [HeightField.constant(4, 0), HeightField.constant(4, 1), HeightField.constant(4, 3)]
    final, violations, first = run_coupled(fields, params, 20_000, make_rng(5))
    assert violations == 0 and first == -1
    assert leq(final[0], final[1]) and leq(final[1], final[2])


def test_run_coupled_counts_broken_order():
    params = ModelParams(2, 1.0, FLOOR_CEILING, 3)
    fields = [HeightField.constant(2, 3), HeightField.constant(2, 0)]
    _, violations, first = run_coupled(fields, params, 1000, make_rng(6))
    assert violations > 0 and first >= 0


def test_run_until_and_counting_hit_agree():
    params = ModelParams(1, 0.5, FLOOR_CEILING, 3)
    eta = HeightField.constant(3, 0)
    a = run_until(ChainState.start(eta, 7), params, lambda f: (f.heights >= 2).sum() >= 5, 10 ** 5)
    b = hit_level_fraction(ChainState.start(eta, 7), params, 2, 5 / 9, 10 ** 5)
    assert a.tau == b.tau and a.tau is not None


def test_hitting_time_censoring():
    params = ModelParams(2, 5.0, FLOOR_CEILING, 3)
    rec = hit_level_fraction(ChainState.start(HeightField.constant(3, 0), 1), params, 3, 1.0, 1000)
    assert rec.censored and rec.tau_sweeps is None
    assert rec.to_json()["censored"] is True


def test_restricted_chain_targets_conditional_measure():
    params = ModelParams(1, 0.5, FLOOR_CEILING, 1)
    m = oracle.enumerate_measure(params, 2)

    def member(f):
        return f.heights.sum() <= 2

    mask = m.states.reshape(len(m.states), -1).sum(axis=1) <= 2
    target = np.where(mask, m.probs, 0) / m.probs[mask].sum()
    state = ChainState.start(HeightField.constant(2, 0), 8)
    counts = np.zeros(len(target))
    for _ in range(400):
        state = run_restricted(state, params, member, 100)
        counts[m.index(state.field.heights)] += 1
    tv = 0.5 * np.abs(counts / counts.sum() - target).sum()
    assert tv <= 0.1
    with pytest.raises(ValueError):
        run_restricted(ChainState.start(HeightField.constant(2, 1), 0), params, member, 1)


def test_tv_distance_decreases_to_noise():
    params = ModelParams(1, 1.0, FLOOR_CEILING, 1)
    m = oracle.enumerate_measure(params, 2)
    tv0, _ = tv_distance_to_equilibrium(params, HeightField.constant(2, 1), 0, 2000, measure=m)
    tv, radius = tv_distance_to_equilibrium(params, HeightField.constant(2, 1), 200, 20_000, measure=m)
    assert tv0 > 0.9
    assert tv <= 0.02 and radius < 0.05
