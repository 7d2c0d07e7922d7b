"""
Constraint checks, completion feasibility (deadlock detection) and pair support.
"""

import itertools
from dataclasses import dataclass

from .model import GroupAssignment


@dataclass(frozen=True)
class GroupProfile:
    """Confederation counts of the teams already in one group.

    A placeholder increments the count of every confederation it belongs to.
    """

    counts: dict
    filled_slots: frozenset

    @classmethod
    def of(cls, teams, inst):
        """Profile of the group holding `teams` (indices or names)."""
        counts = {}
        pots = set()
        for team in teams:
            t = inst.teams[inst.index(team)]
            pots.add(t.pot)
            for code in t.constraint_confeds:
                counts[code] = counts.get(code, 0) + 1
        return cls(counts, frozenset(pots))


def group_within_max(profile, s):
    """True if no bounded confederation exceeds its maximum. Minimums are not checked."""
    return all(profile.counts.get(code, 0) <= high for code, (_, high) in s.bounds)


def group_within_bounds(profile, s):
    """True if the (complete) group satisfies both minimums and maximums."""
    return all(low <= profile.counts.get(code, 0) <= high for code, (low, high) in s.bounds)


def assignment_valid(a, s):
    """
    Check a complete assignment against a scenario.

    Parameters
    ----------
    a : GroupAssignment
      Must be complete.
    s : ConstraintScenario

    Returns
    -------
    bool
    """
    if not a.complete:
        raise ValueError('assignment_valid needs a complete assignment.')
    inst = a.instance
    return all(group_within_bounds(GroupProfile.of(members, inst), s) for members in a.groups())


class CompletionSearch:
    """
    Memoised search for a valid completion of a partial assignment.

    Teams are reduced to classes: two teams are interchangeable when they hold the
    same memberships among the confederations bounded by the scenario. A search
    state is the remaining class counts per pot together with the multiset of
    group descriptors ``(counts, free_pots)``, where ``counts`` follows the order
    of ``scenario.codes`` and ``free_pots`` is a bit mask of pots (0-based) still
    open in the group. Groups are sorted before keying, so states that differ only
    by group labels share a memo entry. The memo lives as long as the object.

    Parameters
    ----------
    inst : DrawInstance
    s : ConstraintScenario
    """

    def __init__(self, inst, s):
        self.instance = inst
        self.scenario = s
        self.codes = s.codes
        self.lows = tuple(low for _, (low, _) in s.bounds)
        self.highs = tuple(high for _, (_, high) in s.bounds)

        masks = [
            sum(1 << j for j, code in enumerate(self.codes) if code in t.constraint_confeds)
            for t in inst.teams
        ]
        # most constrained class first, it is the one branched on
        self.class_masks = tuple(sorted(set(masks), key=lambda m: (-bin(m).count('1'), m)))
        self.team_class = tuple(self.class_masks.index(m) for m in masks)
        self._classes_with = tuple(
            tuple(ci for ci, m in enumerate(self.class_masks) if m >> j & 1)
            for j in range(len(self.codes))
        )
        self._has_min = any(self.lows)
        self._memo = {}

    @property
    def states_explored(self):
        return len(self._memo)

    def state_of(self, a=None, remaining=None):
        """
        Search state of a partial assignment.

        Parameters
        ----------
        a : GroupAssignment, optional
          Defaults to the empty assignment.
        remaining : iterable of team indices, optional
          Teams still to be placed. Defaults to every unplaced team.

        Returns
        -------
        rem : tuple of tuples
          Remaining class counts per pot.
        groups : list of (counts, free_pots)
          One descriptor per group, in label order.
        """
        inst = self.instance
        if a is None:
            a = GroupAssignment.empty(inst)
        remaining = (
            set(range(len(inst.teams))) - a.placed
            if remaining is None
            else {inst.index(t) for t in remaining}
        )
        if remaining & a.placed:
            raise ValueError('A remaining team is already placed.')

        rem = [[0] * len(self.class_masks) for _ in range(inst.pot_count)]
        for t in remaining:
            rem[inst.teams[t].pot - 1][self.team_class[t]] += 1

        groups = []
        for g in range(inst.group_count):
            counts = [0] * len(self.codes)
            free = 0
            for p, row in enumerate(a.grid):
                t = row[g]
                if t is None:
                    free |= 1 << p
                    continue
                mask = self.class_masks[self.team_class[t]]
                for j in range(len(self.codes)):
                    counts[j] += mask >> j & 1
            groups.append((tuple(counts), free))

        for p in range(inst.pot_count):
            open_slots = sum(free >> p & 1 for _, free in groups)
            if open_slots != sum(rem[p]):
                raise ValueError(
                    f'Pot {p + 1} has {sum(rem[p])} remaining teams for {open_slots} free slots.'
                )
        return tuple(tuple(r) for r in rem), groups

    def add(self, group, class_index, pot):
        """Descriptor after adding a team of `class_index` from `pot`; None if a maximum breaks."""
        counts, free = group
        mask = self.class_masks[class_index]
        new = list(counts)
        for j in range(len(new)):
            if mask >> j & 1:
                new[j] += 1
                if new[j] > self.highs[j]:
                    return None
        return tuple(new), free & ~(1 << pot)

    def feasible(self, rem, groups):
        """True if the state can be completed into a valid assignment."""
        for counts, _ in groups:
            if any(c > h for c, h in zip(counts, self.highs)):
                return False
        groups = tuple(sorted(groups))
        if not self._min_reachable(rem, groups):
            return False
        return self._search(rem, groups)

    def _min_reachable(self, rem, groups):
        if not self._has_min:
            return True
        for j, low in enumerate(self.lows):
            if not low:
                continue
            supply = [sum(counts[ci] for ci in self._classes_with[j]) for counts in rem]
            deficit_total = 0
            for counts, free in groups:
                deficit = low - counts[j]
                if deficit <= 0:
                    continue
                sources = sum(1 for p, n in enumerate(supply) if n and free >> p & 1)
                if sources < deficit:
                    return False
                deficit_total += deficit
            if deficit_total > sum(supply):
                return False
        return True

    def _search(self, rem, groups):
        key = (rem, groups)
        hit = self._memo.get(key)
        if hit is not None:
            return hit

        pot = next((p for p, counts in enumerate(rem) if any(counts)), None)
        if pot is None:
            result = all(
                all(c >= low for c, low in zip(counts, self.lows)) for counts, _ in groups
            )
        else:
            ci = next(i for i, n in enumerate(rem[pot]) if n)
            pot_counts = list(rem[pot])
            pot_counts[ci] -= 1
            new_rem = rem[:pot] + (tuple(pot_counts),) + rem[pot + 1 :]
            result = False
            tried = set()
            for i, group in enumerate(groups):
                if not group[1] >> pot & 1 or group in tried:
                    continue
                tried.add(group)
                placed = self.add(group, ci, pot)
                if placed is None:
                    continue
                new_groups = tuple(sorted(groups[:i] + (placed,) + groups[i + 1 :]))
                if self._min_reachable(new_rem, new_groups) and self._search(new_rem, new_groups):
                    result = True
                    break

        self._memo[key] = result
        return result


def completion_exists(a, remaining, s, inst, search=None):
    """
    Check whether a partial assignment can still be completed.

    Parameters
    ----------
    a : GroupAssignment
      Partial assignment.
    remaining : iterable of team indices or names
      All teams not yet placed.
    s : ConstraintScenario
    inst : DrawInstance
    search : CompletionSearch, optional
      Reuse a search (and its memo) built for the same instance and scenario.

    Returns
    -------
    bool
    """
    if search is None:
        search = CompletionSearch(inst, s)
    elif search.instance is not inst or search.scenario != s:
        raise ValueError('The search was built for another instance or scenario.')
    rem, groups = search.state_of(a, remaining)
    return search.feasible(rem, groups)


def pair_support(inst, s, search=None):
    """
    Team pairs that can share a group in some valid assignment.

    Parameters
    ----------
    inst : DrawInstance
    s : ConstraintScenario
    search : CompletionSearch, optional

    Returns
    -------
    frozenset of (i, j) with i < j
    """
    if search is None:
        search = CompletionSearch(inst, s)
    empty = GroupAssignment.empty(inst)
    support = set()
    for i, j in itertools.combinations(range(len(inst.teams)), 2):
        if inst.teams[i].pot == inst.teams[j].pot:
            continue
        partial = empty.place(i, 0).place(j, 0)
        rem, groups = search.state_of(partial)
        if search.feasible(rem, groups):
            support.add((i, j))
    return frozenset(support)
