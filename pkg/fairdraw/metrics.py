"""
Matchup accumulation, bias measures and the attractiveness measure.
"""

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import sparse as sps
import xarray as xr

from .model import SCENARIO_COUNT, scenario_from_index
from .samplers import scenario_accepts

FLOAT_FORMAT = '%.6f'

METRIC_COLUMNS = [
    'scenario',
    'constraints',
    'validity',
    'psi',
    'psi_uniform',
    'psi_skip',
    'delta',
    'omega',
    'uniform_draws',
    'skip_draws',
]


def win_expectancy(r_i, r_j):
    """
    Elo win expectancy of a team rated `r_i` against a team rated `r_j`.

    Accepts scalars or arrays.
    """
    result = 1.0 / (1.0 + np.power(10.0, -np.subtract(r_i, r_j, dtype=float) / 400.0))
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class Entrant:
    """A rated team in a play-off bracket."""

    name: str
    confederation: str
    elo: float


def _winner_distribution(bracket):
    if isinstance(bracket, Entrant):
        if bracket.elo is None or not math.isfinite(bracket.elo):
            raise ValueError(f'Entrant {bracket.name!r} has no finite rating.')
        return {bracket: 1.0}
    if isinstance(bracket, (tuple, list)) and len(bracket) == 2:
        left = _winner_distribution(bracket[0])
        right = _winner_distribution(bracket[1])
        out = {}
        for x, px in left.items():
            out[x] = px * sum(py * win_expectancy(x.elo, y.elo) for y, py in right.items())
        for y, py in right.items():
            out[y] = py * sum(px * win_expectancy(y.elo, x.elo) for x, px in left.items())
        return out
    raise ValueError(f'Malformed bracket node: {bracket!r}')


def placeholder_distribution(bracket):
    """
    Confederation of the winner of a single-elimination bracket.

    Parameters
    ----------
    bracket : Entrant or pair of brackets
      A leaf is an Entrant; a match is a 2-tuple of sub-brackets. IPO1 of 2022 is
      ``(peru, (australia, uae))``.

    Returns
    -------
    dict
      Confederation code -> probability.
    """
    dist = {}
    for entrant, p in _winner_distribution(bracket).items():
        dist[entrant.confederation] = dist.get(entrant.confederation, 0.0) + p
    return dist


def psi_weights(inst, labels):
    """Expected same-confederation matches of each draw in a (draws, teams) label array."""
    labels = np.atleast_2d(labels)
    same = (labels[:, :, None] == labels[:, None, :]) & (labels[:, :, None] >= 0)
    return (same * inst.similarity).sum(axis=(1, 2)) / 2


def intra_confed_weight(a, inst=None):
    """
    Expected number of same-confederation group matches in a complete assignment.

    Each pair in a group contributes the probability that both come from the same
    confederation, so a pair (AFC team, placeholder with AFC probability 0.2235)
    adds 0.2235.
    """
    if not a.complete:
        raise ValueError('intra_confed_weight needs a complete assignment.')
    inst = a.instance if inst is None else inst
    return float(psi_weights(inst, a.labels)[0])


def _pair_counts(labels, n):
    labels = np.atleast_2d(labels)
    same = (labels[:, :, None] == labels[:, None, :]) & (labels[:, :, None] >= 0)
    counts = same.sum(axis=0).astype(np.int64)
    np.fill_diagonal(counts, 0)
    return counts


@dataclass(eq=False)
class MatchupAccumulator:
    """
    Co-occurrence counts and attractiveness sums over simulated draws.

    ``pair_counts`` is symmetric; each draw adds one to both (i, j) and (j, i) for
    every pair sharing a group.
    """

    instance: object = field(repr=False)
    pair_counts: np.ndarray = field(default=None, repr=False)
    draw_count: int = 0
    psi_sum: float = 0.0

    def __post_init__(self):
        n = len(self.instance.teams)
        if self.pair_counts is None:
            self.pair_counts = np.zeros((n, n), dtype=np.int64)

    @classmethod
    def from_labels(cls, inst, labels):
        labels = np.atleast_2d(labels)
        return cls(
            inst,
            _pair_counts(labels, len(inst.teams)),
            labels.shape[0],
            float(psi_weights(inst, labels).sum()),
        )

    def copy(self):
        return MatchupAccumulator(
            self.instance, self.pair_counts.copy(), self.draw_count, self.psi_sum
        )

    def add(self, a):
        """Record one complete assignment in place."""
        if not a.complete:
            raise ValueError('Only complete assignments can be recorded.')
        if a.instance != self.instance:
            raise ValueError('The assignment belongs to another instance.')
        self.add_labels(a.labels[None, :])
        return self

    def add_labels(self, labels):
        """Record a (draws, teams) label array of complete draws in place."""
        labels = np.atleast_2d(labels)
        self.pair_counts += _pair_counts(labels, len(self.instance.teams))
        self.draw_count += labels.shape[0]
        self.psi_sum += float(psi_weights(self.instance, labels).sum())
        return self

    def merge(self, other):
        if other.instance != self.instance:
            raise ValueError('Cannot merge accumulators of different instances.')
        return MatchupAccumulator(
            self.instance,
            self.pair_counts + other.pair_counts,
            self.draw_count + other.draw_count,
            self.psi_sum + other.psi_sum,
        )

    def probabilities(self):
        if self.draw_count == 0:
            raise ValueError('No draws recorded.')
        return self.pair_counts / self.draw_count


def record(acc, a):
    """Functional form of `MatchupAccumulator.add`."""
    return acc.copy().add(a)


def merge(x, y):
    return x.merge(y)


def pattern_accumulators(inst, labels, flags):
    """
    Split a batch of unconstrained draws by constraint-flag pattern.

    Returns
    -------
    list of MatchupAccumulator
      Entry f accumulates the draws whose A-E flags equal f.
    """
    n = len(inst.teams)
    labels = np.atleast_2d(labels)
    flags = np.asarray(flags, dtype=np.int64)
    patterns = SCENARIO_COUNT
    d, i, j = np.nonzero(labels[:, :, None] == labels[:, None, :])
    keep = i != j
    key = (flags[d[keep]] * n + i[keep]) * n + j[keep]
    counts = np.bincount(key, minlength=patterns * n * n).reshape(patterns, n, n)
    draws = np.bincount(flags, minlength=patterns)
    psi = np.bincount(flags, weights=psi_weights(inst, labels), minlength=patterns)
    return [
        MatchupAccumulator(inst, counts[f].astype(np.int64), int(draws[f]), float(psi[f]))
        for f in range(patterns)
    ]


def merge_patterns(xs, ys):
    return [x.merge(y) for x, y in zip(xs, ys)]


def scenario_accumulator(patterns, k):
    """Accumulator of the draws scenario `k` accepts, merged in pattern order."""
    acc = MatchupAccumulator(patterns[0].instance)
    for f, pattern in enumerate(patterns):
        if scenario_accepts(k, f):
            acc = acc.merge(pattern)
    return acc


def matchup_probabilities(acc):
    """Estimated matchup matrix as a labelled DataArray."""
    names = list(acc.instance.team_names)
    return xr.DataArray(
        acc.probabilities(),
        dims=('team_i', 'team_j'),
        coords={'team_i': names, 'team_j': names},
        name='matchup_probability',
    )


def _support_index(support):
    if len(support) == 0:
        raise ValueError('The support is empty.')
    rows, cols = np.array(sorted(support)).T
    return rows, cols


def _gaps(pU, pS, support):
    rows, cols = _support_index(support)
    return np.abs(np.asarray(pU)[rows, cols] - np.asarray(pS)[rows, cols])


def mean_abs_bias(pU, pS, support):
    """Mean absolute matchup gap over the support, in percentage points."""
    gaps = _gaps(pU, pS, support)
    return 100 * gaps.sum() / len(gaps)


def max_abs_bias(pU, pS, support):
    """Maximum absolute matchup gap over the support, in percentage points."""
    return 100 * _gaps(pU, pS, support).max()


def psi(acc):
    """Average expected same-confederation matches per recorded draw."""
    if acc.draw_count == 0:
        raise ValueError('Cannot compute psi of an empty accumulator.')
    return acc.psi_sum / acc.draw_count


def pair_bias(pU, pS, support, inst):
    """
    Signed bias 100 * (pS - pU) of every support pair.

    Returns
    -------
    xr.DataArray
      A DataArray backed by a sparse.COO array, dims ('team_i', 'team_j'), upper triangle.
    """
    rows, cols = _support_index(support)
    values = 100 * (
        np.asarray(pS, dtype=float)[rows, cols] - np.asarray(pU, dtype=float)[rows, cols]
    )
    n = len(inst.teams)
    names = list(inst.team_names)
    return xr.DataArray(
        sps.COO(np.stack([rows, cols]), values, (n, n)),
        dims=('team_i', 'team_j'),
        coords={'team_i': names, 'team_j': names},
        name='bias_pp',
    )


def pair_bias_table(pU, pS, support, inst):
    """Per-pair report of `pair_bias` with columns team_i, team_j, pU, pS, bias_pp."""
    bias = pair_bias(pU, pS, support, inst).data.todense()
    rows, cols = _support_index(support)
    names = np.asarray(inst.team_names)
    return pd.DataFrame(
        {
            'team_i': names[rows],
            'team_j': names[cols],
            'pU': np.asarray(pU, dtype=float)[rows, cols],
            'pS': np.asarray(pS, dtype=float)[rows, cols],
            'bias_pp': bias[rows, cols],
        }
    )


def read_pair_bias(path, inst):
    """Read a per-pair report back into the sparse bias matrix of `pair_bias`."""
    if not Path(path).exists():
        raise IOError(f'Pair bias file not found on disk.\n{path}')
    df = pd.read_csv(path)
    if not {'team_i', 'team_j', 'bias_pp'}.issubset(df.columns):
        raise ValueError(
            'Pair bias file should have columns `team_i`, `team_j` and `bias_pp`.'
        )
    rows = np.array([inst.index(name) for name in df['team_i']], dtype=int)
    cols = np.array([inst.index(name) for name in df['team_j']], dtype=int)
    n = len(inst.teams)
    names = list(inst.team_names)
    return xr.DataArray(
        sps.COO(np.stack([rows, cols]), df['bias_pp'].to_numpy(dtype=float), (n, n)),
        dims=('team_i', 'team_j'),
        coords={'team_i': names, 'team_j': names},
        name='bias_pp',
    )


def team_mean_abs_bias(pU, pS, support, inst):
    """
    Mean absolute bias of every team over its support opponents, in percentage points.

    Returns
    -------
    xr.DataArray
      Indexed by team; NaN for a team without support pairs.
    """
    gaps = abs(pair_bias(pU, pS, support, inst).data)
    # upper triangle: a team appears as row or as column
    total = (gaps.sum(axis=1) + gaps.sum(axis=0)).todense()
    rows, cols = _support_index(support)
    n = len(inst.teams)
    count = np.bincount(rows, minlength=n) + np.bincount(cols, minlength=n)
    with np.errstate(invalid='ignore', divide='ignore'):
        mean = total / count
    return xr.DataArray(
        np.where(count > 0, mean, np.nan),
        dims=('team',),
        coords={'team': list(inst.team_names), 'pot': ('team', inst.pot_of)},
        name='mean_abs_bias',
    )


@dataclass(frozen=True)
class ScenarioMetrics:
    """Fairness and attractiveness of one scenario.

    `delta` and `omega` are in percentage points, `validity` is the share of
    unconstrained draws satisfying the scenario, `psi` is the expected number of
    same-confederation matches.
    """

    scenario: int
    delta: float
    omega: float
    psi: float
    validity: float = math.nan
    uniform_draws: int = 0
    skip_draws: int = 0
    psi_uniform: float = math.nan
    psi_skip: float = math.nan

    def __post_init__(self):
        if self.delta > self.omega + 1e-9:
            raise ValueError(
                f'Scenario {self.scenario}: delta {self.delta} exceeds omega {self.omega}.'
            )
        if not math.isnan(self.validity) and not 0.0 <= self.validity <= 1.0:
            raise ValueError(f'Scenario {self.scenario}: validity {self.validity} outside [0, 1].')
        if self.psi < 0:
            raise ValueError(f'Scenario {self.scenario}: negative psi {self.psi}.')

    @property
    def constraints(self):
        return scenario_from_index(self.scenario).describe()

    @property
    def complete(self):
        return not any(math.isnan(v) for v in (self.delta, self.omega, self.psi))


def scenario_metrics(
    k, uniform, skip, support, total_draws=None, psi_mechanism='uniform'
):
    """
    Metrics of scenario `k` from its uniform and Skip accumulators.

    Parameters
    ----------
    k : int
    uniform, skip : MatchupAccumulator
      Skip may be None when the mechanism could not draw the scenario.
    support : set of pairs
    total_draws : int, optional
      Unconstrained draws behind `uniform`, for the validity share.
    psi_mechanism : {'uniform', 'skip'}
    """
    if psi_mechanism not in ('uniform', 'skip'):
        raise ValueError(f"psi_mechanism must be 'uniform' or 'skip', got {psi_mechanism!r}.")
    validity = uniform.draw_count / total_draws if total_draws else math.nan
    psi_uniform = psi(uniform) if uniform.draw_count else math.nan
    psi_skip = psi(skip) if skip is not None and skip.draw_count else math.nan
    if uniform.draw_count and skip is not None and skip.draw_count:
        pU, pS = uniform.probabilities(), skip.probabilities()
        delta = float(mean_abs_bias(pU, pS, support))
        omega = float(max_abs_bias(pU, pS, support))
    else:
        warnings.warn(f'Scenario {k} lacks draws from one mechanism; its bias is NaN.')
        delta = omega = math.nan
    return ScenarioMetrics(
        scenario=int(k),
        delta=delta,
        omega=omega,
        psi=psi_uniform if psi_mechanism == 'uniform' else psi_skip,
        validity=validity,
        uniform_draws=uniform.draw_count,
        skip_draws=0 if skip is None else skip.draw_count,
        psi_uniform=psi_uniform,
        psi_skip=psi_skip,
    )


def metrics_frame(rows):
    return pd.DataFrame(
        [
            {
                'scenario': m.scenario,
                'constraints': m.constraints,
                'validity': m.validity,
                'psi': m.psi,
                'psi_uniform': m.psi_uniform,
                'psi_skip': m.psi_skip,
                'delta': m.delta,
                'omega': m.omega,
                'uniform_draws': m.uniform_draws,
                'skip_draws': m.skip_draws,
            }
            for m in rows
        ],
        columns=METRIC_COLUMNS,
    )


def metrics_table(rows):
    """Metrics rows as an xarray Dataset indexed by scenario."""
    return xr.Dataset.from_dataframe(metrics_frame(rows).set_index('scenario'))


def write_metrics(rows, path):
    metrics_frame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_metrics(path):
    """
    Read a scenario-sweep CSV.

    Only `scenario`, `psi`, `delta` and `omega` are required; other columns are
    filled with their defaults when missing.
    """
    if not Path(path).exists():
        raise IOError(f'Metrics file not found on disk.\n{path}')
    df = pd.read_csv(path)
    if not {'scenario', 'psi', 'delta', 'omega'}.issubset(df.columns):
        raise ValueError('Metrics file should have columns `scenario`, `psi`, `delta` and `omega`.')
    rows = []
    for rec in df.to_dict('records'):
        rows.append(
            ScenarioMetrics(
                scenario=int(rec['scenario']),
                delta=float(rec['delta']),
                omega=float(rec['omega']),
                psi=float(rec['psi']),
                validity=float(rec.get('validity', math.nan)),
                uniform_draws=int(rec.get('uniform_draws', 0)),
                skip_draws=int(rec.get('skip_draws', 0)),
                psi_uniform=float(rec.get('psi_uniform', math.nan)),
                psi_skip=float(rec.get('psi_skip', math.nan)),
            )
        )
    return rows
