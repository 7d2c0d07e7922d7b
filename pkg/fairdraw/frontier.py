"""
Weighted-sum trade-off between non-uniformity and attractiveness.

For a weight alpha, the objective of a scenario is

    alpha * nonuniformity + (1 - alpha) * psi

with nonuniformity either 10 * delta (OPT1) or omega (OPT2). Every scenario is a
line in alpha, so optimal scenarios follow from the lower envelope of the lines.
"""

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import xarray as xr

from .model import scenario_from_index
from .samplers import skip_is_uniform

DELTA_MULTIPLIER = 10
DEGENERATE_WIDTH = 1e-9
TIE_TOLERANCE = 1e-12


class Objective(Enum):
    OPT1 = 'opt1'
    OPT2 = 'opt2'


@dataclass(frozen=True)
class TradeoffWeight:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f'alpha must be in [0, 1], got {self.alpha}.')


@dataclass(frozen=True)
class Interval:
    alpha_low: float
    alpha_high: float
    scenario: int

    @property
    def width(self):
        return self.alpha_high - self.alpha_low


def _alpha(w):
    return w.alpha if isinstance(w, TradeoffWeight) else TradeoffWeight(float(w)).alpha


def nonuniformity(kind, m):
    kind = Objective(kind)
    return DELTA_MULTIPLIER * m.delta if kind is Objective.OPT1 else m.omega


def objective_value(kind, m, w):
    """Objective of scenario metrics `m` at weight `w` (TradeoffWeight or float)."""
    alpha = _alpha(w)
    return alpha * nonuniformity(kind, m) + (1 - alpha) * m.psi


def _usable(table):
    rows = [m for m in table if m.complete]
    if len(rows) < len(table):
        skipped = sorted(m.scenario for m in table if not m.complete)
        warnings.warn(f'Scenarios {skipped} have missing metrics and are left out.')
    if not rows:
        raise ValueError('No scenario with complete metrics.')
    return rows


def _rank(m):
    # ties: more active constraints first, then lower index
    return (-scenario_from_index(m.scenario).active_count, m.scenario)


def _best(rows, values):
    low = min(values)
    tied = [m for m, v in zip(rows, values) if v - low <= TIE_TOLERANCE]
    return min(tied, key=_rank)


def optimal_scenario(kind, table, w):
    """
    Scenario minimising the objective at `w`.

    Ties go to the scenario with more active constraints, then to the lower index.
    Interval endpoints of `breakpoints` are such ties, so the scenario returned there
    may belong to the neighbouring interval or to neither.
    """
    rows = _usable(table)
    return _best(rows, [objective_value(kind, m, w) for m in rows]).scenario


def _lines(kind, rows):
    # value(alpha) = intercept + slope * alpha
    return [(m.psi, nonuniformity(kind, m) - m.psi) for m in rows]


def breakpoints(table, kind):
    """
    Partition [0, 1] into maximal alpha intervals with one optimal scenario.

    The envelope is swept from alpha = 0. At each step the current line is
    followed until the nearest intersection with a line of smaller slope.
    Endpoints are exact intersection points. An interval's scenario is the unique
    optimum on its interior. At the endpoints several scenarios tie and
    `optimal_scenario` applies its tie rule, so at alpha = 1 it can differ from the
    last interval when lines meet there (zeroed-bias scenarios under OPT1).

    Returns
    -------
    list of Interval
    """
    rows = _usable(table)
    lines = _lines(kind, rows)

    def pick(candidates):
        # lowest slope continues below the others; identical lines fall back to the tie rule
        slope = min(lines[c][1] for c in candidates)
        keep = [c for c in candidates if lines[c][1] - slope <= TIE_TOLERANCE]
        return min(keep, key=lambda c: _rank(rows[c]))

    at_zero = [b for b, _ in lines]
    low = min(at_zero)
    current = pick([c for c, v in enumerate(at_zero) if v - low <= TIE_TOLERANCE])

    raw = []
    alpha = 0.0
    while True:
        b0, m0 = lines[current]
        crossings = []
        for c, (b, m) in enumerate(lines):
            if m < m0 - TIE_TOLERANCE:
                a = (b - b0) / (m0 - m)
                if a > alpha:
                    crossings.append((a, c))
        nxt = min((a for a, _ in crossings), default=math.inf)
        if nxt >= 1.0:
            raw.append(Interval(alpha, 1.0, rows[current].scenario))
            break
        raw.append(Interval(alpha, nxt, rows[current].scenario))
        current = pick([c for a, c in crossings if a - nxt <= TIE_TOLERANCE])
        alpha = nxt

    intervals = []
    for interval in raw:
        if interval.width < DEGENERATE_WIDTH:
            warnings.warn(
                f'Scenario {interval.scenario} is optimal only on '
                f'[{interval.alpha_low:.12f}, {interval.alpha_high:.12f}] and is dropped.'
            )
            if intervals:
                intervals[-1] = replace(intervals[-1], alpha_high=interval.alpha_high)
            continue
        if intervals and intervals[-1].scenario == interval.scenario:
            intervals[-1] = replace(intervals[-1], alpha_high=interval.alpha_high)
        elif not intervals and interval.alpha_low > 0.0:
            intervals.append(replace(interval, alpha_low=0.0))
        else:
            intervals.append(interval)
    return intervals


def pareto_front(table, kind):
    """Scenarios optimal for some alpha in [0, 1]."""
    return frozenset(interval.scenario for interval in breakpoints(table, kind))


def alpha_grid(step):
    if not 0.0 < step <= 1.0:
        raise ValueError(f'alpha step must be in (0, 1], got {step}.')
    count = int(round(1.0 / step))
    grid = np.round(np.arange(count + 1) * step, 12)
    return grid[grid <= 1.0]


def objective_lines(table, kind, step=0.01):
    """
    Objective of every scenario on an alpha grid.

    Returns
    -------
    xr.DataArray
      dims ('scenario', 'alpha').
    """
    rows = _usable(table)
    alphas = alpha_grid(step)
    lines = np.array(_lines(kind, rows))
    values = lines[:, :1] + lines[:, 1:] * alphas[None, :]
    return xr.DataArray(
        values,
        dims=('scenario', 'alpha'),
        coords={'scenario': [m.scenario for m in rows], 'alpha': alphas},
        name='objective',
        attrs={'kind': Objective(kind).value},
    )


def envelope(table, kind, step=0.01):
    """
    Lower envelope of the objective lines on an alpha grid.

    Returns
    -------
    xr.Dataset
      Variables `scenario` (optimal scenario) and `value` along `alpha`.
    """
    lines = objective_lines(table, kind, step)
    scenarios = [optimal_scenario(kind, table, a) for a in lines['alpha'].values]
    return xr.Dataset(
        {
            'scenario': ('alpha', np.array(scenarios, dtype=int)),
            'value': ('alpha', lines.min('scenario').values),
        },
        coords={'alpha': lines['alpha'].values},
        attrs={'kind': Objective(kind).value},
    )


def zero_uniform_bias(table):
    """
    Set delta and omega to zero where Skip is known to be uniform.

    Sampled bias of such scenarios is pure Monte Carlo noise.
    """
    return [
        replace(m, delta=0.0, omega=0.0) if skip_is_uniform(scenario_from_index(m.scenario)) else m
        for m in table
    ]
