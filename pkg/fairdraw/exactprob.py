"""
Exact computations on draws: validity probabilities, enumeration and the exact Skip distribution.
"""

import itertools
import math
from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .constraints import CompletionSearch, assignment_valid
from .model import GroupAssignment
from .samplers import HostPolicy, SkipSampler

MAX_OUTCOMES = 10**7


class LabelMultisetState(NamedTuple):
    """Remaining class counts per pot while groups are filled one at a time."""

    remaining: tuple
    groups_left: int


def validity_probability(inst, s, exact=False):
    """
    Probability that an unconstrained uniform draw satisfies `s`.

    Groups are filled one at a time. For each group one class is taken from every
    pot, weighted by its share of the pot, and the resulting group is checked
    against the bounds. The memo is keyed on the remaining class multisets.

    Parameters
    ----------
    inst : DrawInstance
    s : ConstraintScenario
    exact : bool, optional
      Use rational arithmetic and return a Fraction.

    Returns
    -------
    float or Fraction
    """
    search = CompletionSearch(inst, s)
    masks = search.class_masks
    n_codes = len(search.codes)
    lows, highs = search.lows, search.highs
    one = Fraction(1) if exact else 1.0

    start = [[0] * len(masks) for _ in range(inst.pot_count)]
    for t in range(len(inst.teams)):
        start[inst.teams[t].pot - 1][search.team_class[t]] += 1
    state = LabelMultisetState(tuple(tuple(r) for r in start), inst.group_count)

    def ratio(count, total):
        return Fraction(count, total) if exact else count / total

    def group_choices(remaining, groups_left):
        # (classes per pot, weight) for every admissible composition of the next group
        out = []

        def extend(p, counts, chosen, weight):
            if p == len(remaining):
                if all(c >= low for c, low in zip(counts, lows)):
                    out.append((tuple(chosen), weight))
                return
            for ci, n in enumerate(remaining[p]):
                if not n:
                    continue
                mask = masks[ci]
                new = [c + (mask >> j & 1) for j, c in enumerate(counts)]
                if any(c > h for c, h in zip(new, highs)):
                    continue
                extend(p + 1, new, chosen + [ci], weight * ratio(n, groups_left))

        extend(0, [0] * n_codes, [], one)
        return out

    @lru_cache(maxsize=None)
    def fill(remaining, groups_left):
        if groups_left == 0:
            return one
        total = 0 * one
        for chosen, weight in group_choices(remaining, groups_left):
            nxt = tuple(
                tuple(n - (ci == pick) for ci, n in enumerate(counts))
                for counts, pick in zip(remaining, chosen)
            )
            total += weight * fill(nxt, groups_left - 1)
        return total

    return fill(*state)


def _outcome_count(pools):
    return math.prod(math.factorial(len(pool)) for pool in pools)


def enumerate_valid(inst, s):
    """
    All labelled assignments valid under `s`.

    Raises
    ------
    ValueError
      If the instance has more than `MAX_OUTCOMES` labelled outcomes.
    """
    total = _outcome_count(inst.pots)
    if total > MAX_OUTCOMES:
        raise ValueError(f'{total} labelled outcomes exceed the enumeration limit {MAX_OUTCOMES}.')
    valid = []
    labels = np.empty(len(inst.teams), dtype=int)
    for perms in itertools.product(*(itertools.permutations(range(len(m))) for m in inst.pots)):
        for members, perm in zip(inst.pots, perms):
            labels[list(members)] = perm
        a = GroupAssignment.from_labels(inst, labels)
        if assignment_valid(a, s):
            valid.append(a)
    return valid


def uniform_distribution(inst, s):
    """Labelled compositions of the uniform draw over valid assignments."""
    valid = enumerate_valid(inst, s)
    if not valid:
        raise ValueError(f'No valid assignment under scenario {s.describe()}.')
    weight = Fraction(1, len(valid))
    return {a.composition(): weight for a in valid}


def exact_skip_distribution(
    inst, s, policy=HostPolicy.DRAW_AND_RELABEL, pot_order=None, labeled=False
):
    """
    Exact distribution of the Skip mechanism.

    Every within-pot drawing order is equally likely, and the placement rule is
    deterministic given the orders, so the distribution is an average over all
    order combinations.

    Parameters
    ----------
    inst : DrawInstance
    s : ConstraintScenario
    policy : HostPolicy, optional
    pot_order : sequence of int, optional
    labeled : bool, optional
      Key outcomes by labelled compositions (tuples) instead of unlabelled ones.

    Returns
    -------
    dict
      Composition -> Fraction.
    """
    sampler = SkipSampler(inst, s, policy, pot_order)
    urns = sampler.urns()
    total = _outcome_count(urns)
    if total > MAX_OUTCOMES:
        raise ValueError(f'{total} drawing orders exceed the enumeration limit {MAX_OUTCOMES}.')
    weight = Fraction(1, total)
    dist = defaultdict(Fraction)
    for orders in itertools.product(*(itertools.permutations(urn) for urn in urns)):
        dist[sampler.place(orders).composition(labeled)] += weight
    return dict(dist)


def matchup_matrix(distribution, n_teams):
    """
    Exact matchup probabilities from a distribution over compositions.

    Returns
    -------
    np.ndarray
      (n_teams, n_teams) object array holding the probability type of `distribution`.
    """
    zero = 0 * next(iter(distribution.values()))
    matrix = np.full((n_teams, n_teams), zero, dtype=object)
    for composition, p in distribution.items():
        for group in composition:
            for i, j in itertools.permutations(group, 2):
                matrix[i, j] += p
    return matrix


def expected_psi_unconstrained(inst):
    """Exact expected same-confederation matches of the unconstrained uniform draw."""
    cross = inst.pot_of[:, None] != inst.pot_of[None, :]
    return float((inst.similarity * cross).sum() / 2 / inst.group_count)
