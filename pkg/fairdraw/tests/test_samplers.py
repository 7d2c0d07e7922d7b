import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_equal

from fairdraw.constraints import (
    CompletionSearch,
    assignment_valid,
    completion_exists,
    pair_support,
)
from fairdraw.metrics import MatchupAccumulator
from fairdraw.model import ConstraintScenario, GroupAssignment, scenario_from_index
from fairdraw.samplers import (
    HostPolicy,
    RandomStream,
    SkipSampler,
    constraint_flags,
    derive_stream_index,
    relabel_host_to_first,
    scenario_accepts,
    scenario_satisfaction_mask,
    skip_draw,
    skip_is_uniform,
    unconstrained_batch,
    unconstrained_draw,
)


def test_random_stream():
    a = RandomStream(7, 3).generator().integers(0, 1000, 10)
    b = RandomStream(7, 3).generator().integers(0, 1000, 10)
    c = RandomStream(7, 4).generator().integers(0, 1000, 10)
    assert_equal(a, b)
    assert not np.array_equal(a, c)

    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(1, -1)


def test_derive_stream_index_distinct():
    keys = {
        derive_stream_index(m, p, k, b)
        for m in range(2)
        for p in HostPolicy
        for k in range(32)
        for b in range(4)
    }
    assert len(keys) == 2 * 2 * 32 * 4


def test_skip_example1_forced_placement(example1, example1_scenario):
    sampler = SkipSampler(example1, example1_scenario)
    for last in [(4, 5), (5, 4)]:
        a = sampler.place([(0, 1), (2, 3), last])
        assert a.composition() == (frozenset({0, 2, 5}), frozenset({1, 3, 4}))
    # drawing team 5 first forces it past group A
    assert sampler.fallbacks == 1
    assert sampler.draw_count == 2


def test_skip_example1_sampled(example1, example1_scenario):
    sampler = SkipSampler(example1, example1_scenario)
    labels = sampler.sample_labels(20_000, RandomStream(2024))
    acc = MatchupAccumulator.from_labels(example1, labels)
    assert_allclose(acc.probabilities()[0, 3], 0.5, atol=0.02)
    for row in labels:
        assert assignment_valid(GroupAssignment.from_labels(example1, row), example1_scenario)


def test_skip_scenario0_never_falls_back(wc2018):
    sampler = SkipSampler(wc2018, scenario_from_index(0))
    sampler.sample_labels(50, RandomStream(1))
    assert sampler.fallbacks == 0


@pytest.mark.parametrize('k', [31, 25, 1])
@pytest.mark.parametrize('policy', list(HostPolicy))
def test_skip_draw_valid(wc2018, wc2022, k, policy):
    s = scenario_from_index(k)
    for inst in (wc2018, wc2022):
        sampler = SkipSampler(inst, s, policy)
        for row in sampler.sample_labels(20, RandomStream(k)):
            a = GroupAssignment.from_labels(inst, row)
            assert assignment_valid(a, s)
            assert a.group_of(inst.host) == 0


def test_skip_draw_deterministic(wc2022):
    s = scenario_from_index(31)
    a = skip_draw(wc2022, s, rng=RandomStream(5, 2))
    b = skip_draw(wc2022, s, rng=RandomStream(5, 2))
    assert a == b


def test_skip_pot_order(wc2018):
    s = scenario_from_index(31)
    a = skip_draw(wc2018, s, pot_order=(4, 3, 2, 1), rng=11)
    assert assignment_valid(a, s)
    with pytest.raises(ValueError):
        SkipSampler(wc2018, s, pot_order=(1, 2, 3))


def _first_fit(inst, s, orders):
    # each team tries the groups in label order with a full completion check
    search = CompletionSearch(inst, s)
    a = GroupAssignment.empty(inst)
    left = set(range(len(inst.teams)))
    for order in orders:
        for t in order:
            left.discard(t)
            p = inst.teams[t].pot - 1
            for g in range(inst.group_count):
                if a.grid[p][g] is None and completion_exists(
                    a.place(t, g), left, s, inst, search
                ):
                    a = a.place(t, g)
                    break
    return a


@pytest.mark.parametrize('k', [1, 19, 31])
def test_skip_cached_placement_matches_first_fit(wc2018, k):
    s = scenario_from_index(k)
    sampler = SkipSampler(wc2018, s)
    gen = RandomStream(k).generator()
    for _ in range(3):
        orders = [gen.permutation(urn) for urn in sampler.urns()]
        expected = _first_fit(wc2018, s, orders)
        assert sampler.place(orders).composition(labeled=False) == expected.composition(
            labeled=False
        )
    # a repeated draw is answered from the cache
    cached = len(sampler._admissible)
    sampler.place(orders)
    assert len(sampler._admissible) == cached


def test_skip_infeasible(example1):
    # three X teams cannot be spread over two groups at one per group
    with pytest.raises(ValueError):
        SkipSampler(example1, ConstraintScenario({'X': (0, 1)}))


def test_unconstrained_draw_is_first_batch_row(wc2018):
    stream = RandomStream(3, 9)
    a = unconstrained_draw(wc2018, rng=stream)
    batch = unconstrained_batch(wc2018, 1, stream)
    assert_equal(a.labels, batch[0])


def test_unconstrained_batch_structure(wc2018):
    labels = unconstrained_batch(wc2018, 200, RandomStream(0))
    for members in wc2018.pots:
        assert_equal(np.sort(labels[:, list(members)], axis=1), np.tile(np.arange(8), (200, 1)))
    assert_equal(labels[:, wc2018.host], 0)

    labels = unconstrained_batch(wc2018, 50, RandomStream(0), HostPolicy.PRE_ASSIGN)
    assert_equal(labels[:, wc2018.host], 0)


def test_unconstrained_example1_uniform(example1):
    labels = unconstrained_batch(example1, 40_000, RandomStream(8))
    codes = labels @ np.array([1, 0, 2, 0, 4, 0])
    freq = np.bincount(codes, minlength=8) / len(codes)
    sigma = np.sqrt(1 / 8 * 7 / 8 / len(codes))
    assert_allclose(freq, 1 / 8, atol=4 * sigma)


def test_constraint_flags(wc2018):
    # violates only the UEFA constraint: Germany, Spain and Denmark share group A
    groups = [
        ['Germany', 'Spain', 'Denmark', 'Nigeria'],
        ['Brazil', 'Switzerland', 'Iceland', 'Australia'],
        ['Portugal', 'Peru', 'Costa Rica', 'Japan'],
        ['Argentina', 'England', 'Sweden', 'South Korea'],
        ['Belgium', 'Colombia', 'Tunisia', 'Saudi Arabia'],
        ['Poland', 'Mexico', 'Egypt', 'Serbia'],
        ['France', 'Uruguay', 'Senegal', 'Panama'],
        ['Russia', 'Croatia', 'Iran', 'Morocco'],
    ]
    a = GroupAssignment.from_groups(wc2018, groups)
    flags = int(constraint_flags(a.labels, wc2018)[0])
    assert flags == 0b11110

    mask = scenario_satisfaction_mask(a)
    assert bin(mask).count('1') == 16
    for k in range(32):
        assert bool(mask >> k & 1) == (k % 2 == 0)
        assert bool(mask >> k & 1) == assignment_valid(a, scenario_from_index(k))


def test_scenario_accepts():
    assert scenario_accepts(0, 0)
    assert scenario_accepts(30, 0b11110)
    assert not scenario_accepts(31, 0b11110)
    assert_equal(scenario_accepts(1, np.array([0, 1, 3])), [False, True, True])


def test_scenario_satisfaction_mask_full(wc2018):
    a = skip_draw(wc2018, scenario_from_index(31), rng=RandomStream(4))
    assert scenario_satisfaction_mask(a) == 2**32 - 1
    with pytest.raises(ValueError):
        scenario_satisfaction_mask(GroupAssignment.empty(wc2018))


def test_relabel_host_to_first(wc2018):
    a = unconstrained_draw(wc2018, HostPolicy.PRE_ASSIGN, rng=1).swap_groups(0, 2)
    host = wc2018.host
    assert a.group_of(host) == 2
    b = relabel_host_to_first(a, host)
    assert b.group_of(host) == 0
    assert b.groups()[2] == a.groups()[0]
    assert b.groups()[1] == a.groups()[1]
    assert b.groups()[3:] == a.groups()[3:]
    assert b.composition(labeled=False) == a.composition(labeled=False)
    assert relabel_host_to_first(b, host) is b

    with pytest.raises(ValueError):
        relabel_host_to_first(GroupAssignment.empty(wc2018), host)


def test_rejection_stays_in_support(wc2018):
    s = scenario_from_index(31)
    labels = unconstrained_batch(wc2018, 20_000, RandomStream(6))
    keep = scenario_accepts(31, constraint_flags(labels, wc2018))
    acc = MatchupAccumulator.from_labels(wc2018, labels[keep])
    support = pair_support(wc2018, s)
    seen = {(i, j) for i, j in zip(*np.nonzero(np.triu(acc.pair_counts)))}
    assert seen <= support


def test_skip_is_uniform():
    assert skip_is_uniform(scenario_from_index(0))
    for k in (2, 4, 8, 16):
        assert skip_is_uniform(scenario_from_index(k))
    for k in (1, 3, 18, 31):
        assert not skip_is_uniform(scenario_from_index(k))


@pytest.mark.figures
def test_acceptance_rate_constraint_e(wc2018):
    gen = RandomStream(2018).generator()
    hits = 0
    for _ in range(10):
        flags = constraint_flags(unconstrained_batch(wc2018, 100_000, gen), wc2018)
        hits += scenario_accepts(1, flags).sum()
    rate = hits / 1_000_000
    assert_allclose(rate, 0.0606, atol=0.001)


@pytest.mark.figures
def test_single_prohibition_skip_is_uniform(wc2018):
    s = scenario_from_index(2)
    n = 100_000
    skip = SkipSampler(wc2018, s).sample_labels(n, RandomStream(1))
    pS = MatchupAccumulator.from_labels(wc2018, skip).probabilities()
    labels = unconstrained_batch(wc2018, 4 * n, RandomStream(2))
    keep = scenario_accepts(2, constraint_flags(labels, wc2018))
    pU = MatchupAccumulator.from_labels(wc2018, labels[keep]).probabilities()
    sigma = np.sqrt(0.25 / n + 0.25 / keep.sum())
    assert np.abs(pS - pU).max() < 5 * sigma
