import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fairdraw.frontier import (
    Interval,
    Objective,
    TradeoffWeight,
    alpha_grid,
    breakpoints,
    envelope,
    objective_lines,
    objective_value,
    optimal_scenario,
    pareto_front,
    zero_uniform_bias,
)
from fairdraw.metrics import ScenarioMetrics, read_metrics

from .conftest import DATA_DIR


@pytest.fixture(scope='module')
def figures2018():
    return zero_uniform_bias(read_metrics(DATA_DIR / 'wc2018_figures.csv'))


@pytest.fixture(scope='module')
def figures2022():
    return zero_uniform_bias(read_metrics(DATA_DIR / 'wc2022_figures.csv'))


def _quiet_breakpoints(table, kind):
    # identical zero-bias lines meet at alpha = 1
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        return breakpoints(table, kind)


def test_tradeoff_weight():
    assert TradeoffWeight(0.0).alpha == 0.0
    with pytest.raises(ValueError):
        TradeoffWeight(1.5)
    with pytest.raises(ValueError):
        objective_value('opt1', ScenarioMetrics(0, 0.1, 0.2, 5.0), -0.1)


def test_objective_value():
    m = ScenarioMetrics(3, delta=0.5, omega=4.0, psi=7.0)
    assert objective_value(Objective.OPT1, m, 0) == 7.0
    assert objective_value(Objective.OPT2, m, TradeoffWeight(0.0)) == 7.0
    assert objective_value(Objective.OPT1, m, 1) == 5.0
    assert objective_value('opt2', m, 1) == 4.0
    assert_allclose(objective_value('opt2', m, 0.25), 0.25 * 4.0 + 0.75 * 7.0)


def test_zero_uniform_bias(figures2018):
    raw = {m.scenario: m for m in read_metrics(DATA_DIR / 'wc2018_figures.csv')}
    zeroed = {m.scenario: m for m in figures2018}
    for k in (0, 2, 4, 8, 16):
        assert zeroed[k].delta == zeroed[k].omega == 0.0
        assert zeroed[k].psi == raw[k].psi
    for k in (1, 3, 6, 31):
        assert zeroed[k] == raw[k]


def test_objective_ties_at_table_boundary(figures2018):
    rows = {m.scenario: m for m in figures2018}
    left = objective_value('opt1', rows[30], 0.2329)
    right = objective_value('opt1', rows[31], 0.2329)
    assert_allclose(left, right, atol=1e-3)


@pytest.mark.parametrize(
    'kind, alpha, expected',
    [('opt1', 0.1, 31), ('opt1', 0.4, 30), ('opt1', 0.6, 10), ('opt1', 0.9, 2)],
)
def test_optimal_scenario_2018(figures2018, kind, alpha, expected):
    assert optimal_scenario(kind, figures2018, alpha) == expected


def test_optimal_scenario_2022(figures2022):
    assert optimal_scenario('opt2', figures2022, 0.3) == 30


def test_breakpoints_2018(figures2018):
    intervals = _quiet_breakpoints(figures2018, Objective.OPT1)
    assert [i.scenario for i in intervals] == [31, 30, 10, 2]
    assert_allclose([i.alpha_high for i in intervals[:-1]], [0.2329, 0.5404, 0.6873], atol=5e-4)

    intervals = _quiet_breakpoints(figures2018, Objective.OPT2)
    assert [i.scenario for i in intervals] == [31, 14, 10, 18, 2]
    assert_allclose(
        [i.alpha_high for i in intervals[:-1]], [0.1711, 0.3238, 0.6398, 0.8106], atol=5e-4
    )


def test_breakpoints_2022(figures2022):
    intervals = _quiet_breakpoints(figures2022, Objective.OPT1)
    assert [i.scenario for i in intervals] == [31, 30, 18, 16]
    assert_allclose([i.alpha_high for i in intervals[:-1]], [0.2105, 0.2293, 0.2637], atol=5e-4)

    intervals = _quiet_breakpoints(figures2022, Objective.OPT2)
    assert [i.scenario for i in intervals] == [31, 30, 16]
    assert_allclose([i.alpha_high for i in intervals[:-1]], [0.2127, 0.4272], atol=5e-4)


def test_pareto_front(figures2018, figures2022):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        assert pareto_front(figures2018, 'opt1') == {2, 10, 30, 31}
        assert pareto_front(figures2018, 'opt2') == {2, 18, 10, 14, 31}
        assert pareto_front(figures2022, 'opt1') == {16, 18, 30, 31}
        assert pareto_front(figures2022, 'opt2') == {16, 30, 31}


def test_breakpoints_cover_unit_interval(figures2018):
    for kind in Objective:
        intervals = _quiet_breakpoints(figures2018, kind)
        assert intervals[0].alpha_low == 0.0
        assert intervals[-1].alpha_high == 1.0
        for left, right in zip(intervals, intervals[1:]):
            assert left.alpha_high == right.alpha_low
            assert left.scenario != right.scenario
        assert pareto_front(figures2018, kind) == {i.scenario for i in intervals}


def test_breakpoints_agree_with_grid(figures2022):
    for kind in Objective:
        intervals = _quiet_breakpoints(figures2022, kind)
        for alpha in np.arange(0.0005, 1.0, 0.001):
            inside = [i for i in intervals if i.alpha_low < alpha < i.alpha_high]
            if not inside:
                continue
            if min(alpha - inside[0].alpha_low, inside[0].alpha_high - alpha) < 1e-6:
                continue
            assert optimal_scenario(kind, figures2022, alpha) == inside[0].scenario


def test_interval_endpoints_are_ties(figures2018, figures2022):
    for table in (figures2018, figures2022):
        rows = {m.scenario: m for m in table}
        for kind in Objective:
            for interval in _quiet_breakpoints(table, kind):
                mid = (interval.alpha_low + interval.alpha_high) / 2
                assert optimal_scenario(kind, table, mid) == interval.scenario
                for alpha in (interval.alpha_low, interval.alpha_high):
                    best = rows[optimal_scenario(kind, table, alpha)]
                    assert_allclose(
                        objective_value(kind, best, alpha),
                        objective_value(kind, rows[interval.scenario], alpha),
                        atol=1e-6,
                    )

    # zeroed scenarios 2 and 16 meet at alpha = 1, where the tie rule takes the lower index
    assert _quiet_breakpoints(figures2022, Objective.OPT1)[-1].scenario == 16
    assert optimal_scenario('opt1', figures2022, 1.0) == 2
    env = envelope(figures2022, 'opt1', step=0.05)
    assert env['scenario'].values[-1] == 2


def test_single_scenario():
    table = [ScenarioMetrics(12, delta=0.3, omega=2.0, psi=8.0)]
    assert breakpoints(table, 'opt1') == [Interval(0.0, 1.0, 12)]
    assert pareto_front(table, 'opt2') == {12}


def test_identical_scenarios_tie_break():
    table = [ScenarioMetrics(k, delta=0.3, omega=2.0, psi=8.0) for k in (2, 3, 7)]
    # scenario 7 has the most active constraints
    assert breakpoints(table, 'opt1') == [Interval(0.0, 1.0, 7)]
    assert optimal_scenario('opt2', table, 0.5) == 7


def test_lines_meeting_at_one():
    table = [
        ScenarioMetrics(0, delta=0.0, omega=0.0, psi=10.0),
        ScenarioMetrics(1, delta=0.0, omega=0.0, psi=9.0),
    ]
    assert breakpoints(table, 'opt1') == [Interval(0.0, 1.0, 1)]
    # exact tie at alpha = 1 goes to the scenario with more constraints
    assert optimal_scenario('opt1', table, 1.0) == 1


def test_degenerate_interval_warns():
    eps = 1e-11
    table = [
        ScenarioMetrics(0, delta=0.0, omega=1.0, psi=1.0),
        ScenarioMetrics(1, delta=0.0, omega=0.5, psi=1.5),
        ScenarioMetrics(2, delta=0.0, omega=eps, psi=2.0 + eps),
    ]
    # scenario 1 wins only between 0.5 and 0.5 + eps
    with pytest.warns(UserWarning, match='dropped'):
        intervals = breakpoints(table, 'opt2')
    assert [i.scenario for i in intervals] == [0, 2]
    assert_allclose(intervals[0].alpha_high, 0.5, atol=1e-9)


def test_nan_rows_are_skipped():
    table = [
        ScenarioMetrics(0, delta=float('nan'), omega=float('nan'), psi=10.0),
        ScenarioMetrics(31, delta=0.6, omega=10.0, psi=6.0),
    ]
    with pytest.warns(UserWarning, match='missing metrics'):
        assert optimal_scenario('opt1', table, 0.5) == 31
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            optimal_scenario('opt1', table[:1], 0.5)


def test_alpha_grid():
    grid = alpha_grid(0.25)
    assert_allclose(grid, [0, 0.25, 0.5, 0.75, 1.0])
    assert len(alpha_grid(0.01)) == 101
    with pytest.raises(ValueError):
        alpha_grid(0)


def test_envelope_is_line_minimum(figures2018):
    lines = objective_lines(figures2018, 'opt2', step=0.05)
    assert lines.dims == ('scenario', 'alpha')
    assert lines.sizes['scenario'] == 32
    env = envelope(figures2018, 'opt2', step=0.05)
    assert_allclose(env['value'].values, lines.min('scenario').values)
    for alpha, k in zip(env['alpha'].values, env['scenario'].values):
        assert_allclose(lines.sel(scenario=k, alpha=alpha), env['value'].sel(alpha=alpha))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0, max_value=2),
            st.floats(min_value=0, max_value=5),
            st.floats(min_value=0, max_value=12),
        ),
        min_size=1,
        max_size=32,
    )
)
def test_breakpoints_partition(values):
    table = [
        ScenarioMetrics(k, delta=min(d, o), omega=max(d, o), psi=p)
        for k, (d, o, p) in enumerate(values)
    ]
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        intervals = breakpoints(table, 'opt2')
    assert intervals[0].alpha_low == 0.0
    assert intervals[-1].alpha_high == 1.0
    for left, right in zip(intervals, intervals[1:]):
        assert left.alpha_high == right.alpha_low
    for interval in intervals:
        mid = (interval.alpha_low + interval.alpha_high) / 2
        best = min(objective_value('opt2', m, mid) for m in table)
        chosen = next(m for m in table if m.scenario == interval.scenario)
        assert objective_value('opt2', chosen, mid) <= best + 1e-9
