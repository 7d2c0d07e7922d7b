"""
Domain types for draw instances, constraint scenarios and group assignments.
"""

import math
import string
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import xarray as xr

SCENARIO_COUNT = 32

# (letter, confederation, (min_per_group, max_per_group)), bit 4 of a scenario index is A
CANONICAL_CONSTRAINTS = (
    ('A', 'AFC', (0, 1)),
    ('B', 'CAF', (0, 1)),
    ('C', 'CONCACAF', (0, 1)),
    ('D', 'CONMEBOL', (0, 1)),
    ('E', 'UEFA', (1, 2)),
)

PROBABILITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Team:
    """A team, or a play-off placeholder, sitting in one pot.

    Parameters
    ----------
    name : str
    pot : int
        1-based pot index.
    constraint_confeds : iterable of str
        Confederations counted by draw constraints. A placeholder lists every
        confederation that may still qualify through it.
    confed_distribution : dict, optional
        Confederation code -> probability, used for the attractiveness measure.
        Defaults to probability 1 for the only member of `constraint_confeds`.
    is_host : bool
    """

    name: str
    pot: int
    constraint_confeds: frozenset = frozenset()
    confed_distribution: dict = field(default=None, compare=False, hash=False)
    is_host: bool = False

    def __post_init__(self):
        confeds = self.constraint_confeds
        if isinstance(confeds, str):
            confeds = (confeds,)
        object.__setattr__(self, 'constraint_confeds', frozenset(confeds))

        dist = self.confed_distribution
        if dist is None:
            if len(self.constraint_confeds) != 1:
                raise ValueError(
                    f'Team {self.name!r} has {len(self.constraint_confeds)} confederations '
                    'and needs an explicit confed_distribution.'
                )
            dist = {next(iter(self.constraint_confeds)): 1.0}
        object.__setattr__(self, 'confed_distribution', {c: float(p) for c, p in dist.items()})

    @property
    def is_placeholder(self):
        return len(self.constraint_confeds) > 1


@dataclass(frozen=True)
class DrawInstance:
    """Teams divided into pots, to be drawn into labelled groups.

    Parameters
    ----------
    teams : sequence of Team
        Team references elsewhere in the package are indices into this sequence.
    group_count : int
    pot_count : int, optional
        Defaults to the highest pot used by `teams`.
    group_labels : sequence of str, optional
        Defaults to the first `group_count` capital letters.
    name : str, optional
    """

    teams: tuple
    group_count: int
    pot_count: int = None
    group_labels: tuple = None
    name: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'teams', tuple(self.teams))
        if self.pot_count is None:
            object.__setattr__(self, 'pot_count', max((t.pot for t in self.teams), default=0))
        labels = self.group_labels
        if labels is None:
            if self.group_count > len(string.ascii_uppercase):
                raise ValueError(
                    f'Cannot derive labels for {self.group_count} groups, pass group_labels.'
                )
            labels = string.ascii_uppercase[: self.group_count]
        object.__setattr__(self, 'group_labels', tuple(labels))

    def __len__(self):
        return len(self.teams)

    @cached_property
    def team_names(self):
        return tuple(t.name for t in self.teams)

    @cached_property
    def pots(self):
        """Team indices per pot; ``pots[0]`` is pot 1."""
        return tuple(
            tuple(i for i, t in enumerate(self.teams) if t.pot == p)
            for p in range(1, self.pot_count + 1)
        )

    @cached_property
    def pot_of(self):
        return np.array([t.pot for t in self.teams], dtype=int)

    @cached_property
    def host(self):
        """Index of the host, or None."""
        return next((i for i, t in enumerate(self.teams) if t.is_host), None)

    @cached_property
    def confederations(self):
        codes = set()
        for t in self.teams:
            codes.update(t.constraint_confeds)
            codes.update(t.confed_distribution)
        return tuple(sorted(codes))

    def index(self, team):
        """Index of a team given by name (or passed through if already an index)."""
        if isinstance(team, (int, np.integer)):
            return int(team)
        try:
            return self.team_names.index(team)
        except ValueError:
            raise KeyError(f'No team named {team!r} in instance {self.name!r}.')

    def membership(self, code):
        """Boolean vector of teams whose constraint memberships include `code`."""
        return np.array([code in t.constraint_confeds for t in self.teams], dtype=bool)

    @cached_property
    def distribution_matrix(self):
        """(teams, confederations) matrix of confederation probabilities."""
        dist = np.zeros((len(self.teams), len(self.confederations)))
        for i, t in enumerate(self.teams):
            for code, p in t.confed_distribution.items():
                dist[i, self.confederations.index(code)] = p
        return dist

    @cached_property
    def similarity(self):
        """Probability that two teams come from the same confederation, zero diagonal."""
        dist = self.distribution_matrix
        sim = dist @ dist.T
        np.fill_diagonal(sim, 0.0)
        return sim


@dataclass(frozen=True)
class ConstraintScenario:
    """Per-confederation (min, max) bounds on the number of teams in every group.

    Confederations absent from `bounds` are unbounded.
    """

    bounds: tuple = ()

    def __post_init__(self):
        items = self.bounds.items() if isinstance(self.bounds, dict) else self.bounds
        normalised = []
        for code, (low, high) in items:
            low, high = int(low), int(high)
            if low < 0:
                raise ValueError(f'Minimum for {code} must be nonnegative, got {low}.')
            if high < 1:
                raise ValueError(f'Maximum for {code} must be positive, got {high}.')
            if low > high:
                raise ValueError(f'Minimum {low} exceeds maximum {high} for {code}.')
            normalised.append((code, (low, high)))
        codes = [code for code, _ in normalised]
        if len(set(codes)) != len(codes):
            raise ValueError(f'Confederation listed twice in {codes}.')
        object.__setattr__(self, 'bounds', tuple(sorted(normalised)))

    @classmethod
    def from_bounds(cls, mapping):
        return cls(tuple(mapping.items()))

    def as_dict(self):
        return dict(self.bounds)

    @property
    def codes(self):
        return tuple(code for code, _ in self.bounds)

    def bound(self, code):
        return self.as_dict().get(code)

    @property
    def has_min(self):
        return any(low > 0 for _, (low, _) in self.bounds)

    @property
    def active_count(self):
        return len(self.bounds)

    def combine(self, other):
        """Scenario enforcing the bounds of both `self` and `other`."""
        merged = self.as_dict()
        for code, (low, high) in other.bounds:
            if code in merged:
                old_low, old_high = merged[code]
                low, high = max(low, old_low), min(high, old_high)
            merged[code] = (low, high)
        return ConstraintScenario.from_bounds(merged)

    def __or__(self, other):
        return self.combine(other)

    def describe(self):
        """Constraint letters such as 'A-E' or 'ABE' for canonical scenarios."""
        k = index_of_scenario(self)
        if k is None:
            return ' '.join(f'{code}:{low}-{high}' for code, (low, high) in self.bounds)
        letters = ''.join(
            letter for pos, (letter, _, _) in enumerate(CANONICAL_CONSTRAINTS) if k >> (4 - pos) & 1
        )
        if not letters:
            return 'none'
        if letters == 'ABCDE':
            return 'A-E'
        if letters == 'ABCD':
            return 'A-D'
        return letters


def scenario_from_index(k):
    """
    Build one of the 32 canonical scenarios.

    Parameters
    ----------
    k : int
        Scenario index in 0..31. Bits 4..0 switch on constraints A (AFC max 1),
        B (CAF max 1), C (CONCACAF max 1), D (CONMEBOL max 1) and E (UEFA min 1 max 2).

    Returns
    -------
    ConstraintScenario
    """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise TypeError(f'Scenario index must be an integer, got {type(k)}.')
    if not 0 <= k < SCENARIO_COUNT:
        raise ValueError(f'Scenario index must be in 0..{SCENARIO_COUNT - 1}, got {k}.')
    return ConstraintScenario(
        tuple(
            (code, bounds)
            for pos, (_, code, bounds) in enumerate(CANONICAL_CONSTRAINTS)
            if k >> (4 - pos) & 1
        )
    )


def index_of_scenario(s):
    """Index of a canonical scenario, or None when `s` is not one of the 32."""
    canonical = {code: (pos, bounds) for pos, (_, code, bounds) in enumerate(CANONICAL_CONSTRAINTS)}
    k = 0
    for code, bounds in s.bounds:
        if code not in canonical or canonical[code][1] != bounds:
            return None
        k |= 1 << (4 - canonical[code][0])
    return k


def uefa_min_only(pot_count=4):
    """The lower half of constraint E on its own."""
    return ConstraintScenario({'UEFA': (1, pot_count)})


def uefa_max_only():
    """The upper half of constraint E on its own."""
    return ConstraintScenario({'UEFA': (0, 2)})


@dataclass(frozen=True)
class GroupAssignment:
    """Teams placed into (pot, group) slots.

    ``grid[p][g]`` is the index of the team from pot ``p + 1`` in group ``g``,
    or None for an empty slot.
    """

    instance: DrawInstance = field(compare=False, repr=False)
    grid: tuple

    def __post_init__(self):
        inst = self.instance
        grid = tuple(tuple(None if t is None else int(t) for t in row) for row in self.grid)
        if len(grid) != inst.pot_count or any(len(row) != inst.group_count for row in grid):
            raise ValueError(
                f'Assignment grid must have shape ({inst.pot_count}, {inst.group_count}).'
            )
        seen = set()
        for p, row in enumerate(grid):
            for t in row:
                if t is None:
                    continue
                if t in seen:
                    raise ValueError(f'Team {inst.teams[t].name!r} occupies two slots.')
                if inst.teams[t].pot != p + 1:
                    raise ValueError(f'Team {inst.teams[t].name!r} is not in pot {p + 1}.')
                seen.add(t)
        object.__setattr__(self, 'grid', grid)

    @classmethod
    def empty(cls, inst):
        return cls(inst, ((None,) * inst.group_count,) * inst.pot_count)

    @classmethod
    def from_labels(cls, inst, labels):
        """Build from a vector of group indices per team (-1 for unplaced)."""
        grid = [[None] * inst.group_count for _ in range(inst.pot_count)]
        for t, g in enumerate(labels):
            if g >= 0:
                row = grid[inst.teams[t].pot - 1]
                if row[g] is not None:
                    raise ValueError(f'Slot (pot {inst.teams[t].pot}, group {g}) filled twice.')
                row[g] = t
        return cls(inst, grid)

    @classmethod
    def from_groups(cls, inst, groups):
        """Build from team lists (indices or names), one list per group label."""
        labels = np.full(len(inst.teams), -1)
        for g, members in enumerate(groups):
            for team in members:
                labels[inst.index(team)] = g
        return cls.from_labels(inst, labels)

    @property
    def labels(self):
        out = np.full(len(self.instance.teams), -1, dtype=int)
        for row in self.grid:
            for g, t in enumerate(row):
                if t is not None:
                    out[t] = g
        return out

    @property
    def slots(self):
        labels = self.instance.group_labels
        return {
            (p + 1, labels[g]): t for p, row in enumerate(self.grid) for g, t in enumerate(row)
        }

    @property
    def complete(self):
        return all(t is not None for row in self.grid for t in row)

    @property
    def placed(self):
        return frozenset(t for row in self.grid for t in row if t is not None)

    def place(self, team, group):
        """Return a copy with `team` put into `group` (index or label)."""
        inst = self.instance
        t = inst.index(team)
        g = inst.group_labels.index(group) if isinstance(group, str) else int(group)
        if t in self.placed:
            raise ValueError(f'Team {inst.teams[t].name!r} is already placed.')
        p = inst.teams[t].pot - 1
        if self.grid[p][g] is not None:
            raise ValueError(f'Slot (pot {p + 1}, group {inst.group_labels[g]}) is taken.')
        grid = [list(row) for row in self.grid]
        grid[p][g] = t
        return GroupAssignment(inst, grid)

    def groups(self):
        """Team indices per group, in label order, empty slots left out."""
        return tuple(
            tuple(row[g] for row in self.grid if row[g] is not None)
            for g in range(self.instance.group_count)
        )

    def group_of(self, team):
        t = self.instance.index(team)
        for row in self.grid:
            if t in row:
                return row.index(t)
        return None

    def swap_groups(self, g, h):
        grid = [list(row) for row in self.grid]
        for row in grid:
            row[g], row[h] = row[h], row[g]
        return GroupAssignment(self.instance, grid)

    def composition(self, labeled=True):
        """Group memberships as frozensets; a tuple in label order or, unlabelled, a frozenset."""
        comp = tuple(frozenset(members) for members in self.groups())
        return comp if labeled else frozenset(comp)

    def __str__(self):
        names = self.instance.team_names
        return ' | '.join(
            f'{label}: ' + ', '.join(names[t] for t in members)
            for label, members in zip(self.instance.group_labels, self.groups())
        )


def validate_instance(inst):
    """
    Check the structural invariants of an instance.

    Parameters
    ----------
    inst : DrawInstance

    Returns
    -------
    list of str
      One message per violated invariant; empty when the instance is valid.
    """
    problems = []

    names = [t.name for t in inst.teams]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        problems.append(f'duplicate team names: {dupes}')

    if inst.group_count < 1:
        problems.append(f'group count must be positive, got {inst.group_count}')
    if len(inst.group_labels) != inst.group_count:
        problems.append(
            f'{len(inst.group_labels)} group labels for {inst.group_count} groups'
        )
    if any(a >= b for a, b in zip(inst.group_labels, inst.group_labels[1:])):
        problems.append('group labels are not strictly ordered')

    for t in inst.teams:
        if not 1 <= t.pot <= inst.pot_count:
            problems.append(f'{t.name}: pot {t.pot} outside 1..{inst.pot_count}')
    for p, members in enumerate(inst.pots, start=1):
        if len(members) != inst.group_count:
            problems.append(
                f'pot {p} has {len(members)} teams: pot size ≠ group count ({inst.group_count})'
            )

    hosts = [t.name for t in inst.teams if t.is_host]
    if len(hosts) > 1:
        problems.append(f'more than one host: {hosts}')

    for t in inst.teams:
        probs = t.confed_distribution
        if any(not 0.0 <= p <= 1.0 for p in probs.values()):
            problems.append(f'{t.name}: confederation probabilities outside [0, 1]')
        if not math.isclose(sum(probs.values()), 1.0, abs_tol=PROBABILITY_TOLERANCE):
            problems.append(f'{t.name}: confederation probabilities sum to {sum(probs.values())}')
        stray = sorted(c for c, p in probs.items() if p > 0 and c not in t.constraint_confeds)
        if stray:
            problems.append(f'{t.name}: {stray} have probability but no constraint membership')
        if len(t.constraint_confeds) == 0:
            problems.append(f'{t.name}: no confederation')
        elif not t.is_placeholder:
            (code,) = t.constraint_confeds
            if not math.isclose(probs.get(code, 0.0), 1.0, abs_tol=PROBABILITY_TOLERANCE):
                problems.append(f'{t.name}: single confederation {code} must have probability 1')

    return problems


def confederation_pot_counts(inst):
    """
    Count constraint memberships per confederation and pot.

    A placeholder counts once for each of its confederations.

    Returns
    -------
    xr.DataArray
      Integer counts with dims ('confederation', 'pot').
    """
    codes = sorted({c for t in inst.teams for c in t.constraint_confeds})
    counts = np.zeros((len(codes), inst.pot_count), dtype=int)
    for t in inst.teams:
        for code in t.constraint_confeds:
            counts[codes.index(code), t.pot - 1] += 1
    return xr.DataArray(
        counts,
        dims=('confederation', 'pot'),
        coords={'confederation': codes, 'pot': np.arange(1, inst.pot_count + 1)},
        name='teams',
    )
