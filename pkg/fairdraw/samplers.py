"""
Draw mechanisms: the Skip mechanism and the unconstrained (rejection) uniform draw.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constraints import CompletionSearch
from .model import CANONICAL_CONSTRAINTS, SCENARIO_COUNT, GroupAssignment

ALL_FLAGS = (1 << len(CANONICAL_CONSTRAINTS)) - 1


class HostPolicy(Enum):
    """How the host reaches the first group.

    PRE_ASSIGN fixes the host in the first group before drawing. DRAW_AND_RELABEL
    draws the host like any other team, then swaps group labels so the host's
    group carries the first label.
    """

    PRE_ASSIGN = 'pre-assign'
    DRAW_AND_RELABEL = 'draw-and-relabel'


@dataclass(frozen=True)
class RandomStream:
    """A reproducible random stream: (seed, stream_index) fixes the whole sequence."""

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f'Seed must be a 64-bit unsigned value, got {self.seed}.')
        if self.stream_index < 0:
            raise ValueError(f'Stream index must be nonnegative, got {self.stream_index}.')

    def generator(self):
        """A fresh numpy Generator positioned at the start of the stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)


def derive_stream_index(mechanism, policy, scenario, block):
    """Stream index of one simulation block; distinct for every argument tuple."""
    policy_code = list(HostPolicy).index(HostPolicy(policy))
    return (((int(mechanism) * 2 + policy_code) * 64 + int(scenario)) << 32) + int(block)


def as_generator(rng):
    """Accept a RandomStream, a numpy Generator, an integer seed or None."""
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def check_pot_order(inst, pot_order=None):
    """Validate a pot order (1-based pots); defaults to 1, 2, ..., pot_count."""
    if pot_order is None:
        return tuple(range(1, inst.pot_count + 1))
    pot_order = tuple(int(p) for p in pot_order)
    if sorted(pot_order) != list(range(1, inst.pot_count + 1)):
        raise ValueError(f'Pot order {pot_order} is not a permutation of 1..{inst.pot_count}.')
    return pot_order


def skip_is_uniform(s):
    """
    True when Skip is known to reproduce the uniform distribution for `s`.

    This holds for no constraint at all and for a single maximum of one team
    from one confederation, which amounts to a set of prohibited pairs.
    """
    if s.active_count == 0:
        return True
    return s.active_count == 1 and s.bounds[0][1] == (0, 1)


def _relabel_rows(labels, host):
    h = labels[..., host, None]
    return np.where(labels == h, 0, np.where(labels == 0, h, labels))


class SkipSampler:
    """
    The Skip mechanism for one instance, scenario, host policy and pot order.

    Pots are emptied in `pot_order`. Each drawn team goes to the alphabetically
    first group with a free slot for its pot that still leaves a valid completion
    for every remaining team. The feasibility memo and the admissible groups of every
    visited state are kept across draws.

    Parameters
    ----------
    inst : DrawInstance
    s : ConstraintScenario
    policy : HostPolicy or str, optional
    pot_order : sequence of int, optional
        1-based pots; defaults to 1, 2, ..., pot_count.

    Raises
    ------
    ValueError
      If no valid assignment exists under `policy`.
    """

    def __init__(self, inst, s, policy=HostPolicy.DRAW_AND_RELABEL, pot_order=None):
        self.instance = inst
        self.scenario = s
        self.policy = HostPolicy(policy)
        self.pot_order = check_pot_order(inst, pot_order)
        self.search = CompletionSearch(inst, s)
        self._admissible = {}
        self.fallbacks = 0
        self.draw_count = 0

        host = inst.host
        self.preassigned = host if self.policy is HostPolicy.PRE_ASSIGN else None
        start = GroupAssignment.empty(inst)
        if self.preassigned is not None:
            start = start.place(host, 0)
        self._start_labels = start.labels
        self._start_rem, self._start_groups = self.search.state_of(start)
        if not self.search.feasible(self._start_rem, self._start_groups):
            raise ValueError(
                f'No valid assignment of {inst.name or "the instance"} under scenario '
                f'{s.describe()} with policy {self.policy.value}.'
            )

    def urns(self):
        """Teams to be drawn from each pot, in pot order; a pre-assigned host is left out."""
        return [
            tuple(t for t in self.instance.pots[p - 1] if t != self.preassigned)
            for p in self.pot_order
        ]

    def admissible(self, rem, groups, class_index, pot):
        """
        Group descriptors that can take a team of `class_index` from `pot`.

        Feasibility depends on the group multiset only, so the answer is cached on the
        sorted state and shared by every labelling of it.
        """
        groups = tuple(sorted(groups))
        key = (rem, groups, class_index, pot)
        hit = self._admissible.get(key)
        if hit is not None:
            return hit
        search = self.search
        found = set()
        for i, group in enumerate(groups):
            if not group[1] >> pot & 1 or group in found:
                continue
            placed = search.add(group, class_index, pot)
            if placed is not None and search.feasible(
                rem, groups[:i] + (placed,) + groups[i + 1 :]
            ):
                found.add(group)
        hit = self._admissible[key] = frozenset(found)
        return hit

    def place_labels(self, orders):
        """
        Deterministic placement of teams drawn in the given orders.

        Parameters
        ----------
        orders : sequence of sequences of team indices
          Drawing order within each pot, aligned with `pot_order`.

        Returns
        -------
        np.ndarray
          Group index per team, host relabelling applied.
        """
        search = self.search
        labels = self._start_labels.copy()
        rem = [list(r) for r in self._start_rem]
        groups = list(self._start_groups)

        for pot, order in zip(self.pot_order, orders):
            p = pot - 1
            bit = 1 << p
            for t in order:
                ci = search.team_class[t]
                rem[p][ci] -= 1
                ok = self.admissible(tuple(tuple(r) for r in rem), groups, ci, p)
                open_groups = [g for g, group in enumerate(groups) if group[1] & bit]
                chosen = next((g for g in open_groups if groups[g] in ok), None)
                if chosen is None:
                    raise RuntimeError(
                        f'Lookahead exhausted while placing {self.instance.teams[t].name!r}.'
                    )
                if chosen != open_groups[0]:
                    self.fallbacks += 1
                groups[chosen] = search.add(groups[chosen], ci, p)
                labels[t] = chosen

        self.draw_count += 1
        if self.policy is HostPolicy.DRAW_AND_RELABEL and self.instance.host is not None:
            labels = _relabel_rows(labels, self.instance.host)
        return labels

    def place(self, orders):
        return GroupAssignment.from_labels(self.instance, self.place_labels(orders))

    def draw_labels(self, rng):
        gen = as_generator(rng)
        return self.place_labels([gen.permutation(urn) for urn in self.urns()])

    def draw(self, rng):
        """One Skip draw as a GroupAssignment."""
        return GroupAssignment.from_labels(self.instance, self.draw_labels(rng))

    def sample_labels(self, size, rng):
        """`size` consecutive draws from one generator, as a (size, teams) label array."""
        gen = as_generator(rng)
        out = np.empty((size, len(self.instance.teams)), dtype=int)
        for d in range(size):
            out[d] = self.draw_labels(gen)
        return out


def skip_draw(inst, s, policy=HostPolicy.DRAW_AND_RELABEL, pot_order=None, rng=None):
    """
    One draw of the Skip mechanism.

    Parameters
    ----------
    inst : DrawInstance
    s : ConstraintScenario
    policy : HostPolicy, optional
    pot_order : sequence of int, optional
    rng : RandomStream, numpy Generator or int, optional
      A RandomStream always restarts at the beginning of its stream; use
      `SkipSampler.sample_labels` for sequences.

    Returns
    -------
    GroupAssignment
    """
    return SkipSampler(inst, s, policy, pot_order).draw(rng)


def unconstrained_batch(inst, size, rng, policy=HostPolicy.DRAW_AND_RELABEL):
    """
    Vectorised unconstrained draws: an independent uniform permutation per pot.

    Returns
    -------
    np.ndarray
      (size, teams) array of group indices.
    """
    gen = as_generator(rng)
    policy = HostPolicy(policy)
    G = inst.group_count
    host = inst.host
    labels = np.empty((size, len(inst.teams)), dtype=int)
    for members in inst.pots:
        members = np.asarray(members)
        if policy is HostPolicy.PRE_ASSIGN and host is not None and host in members:
            labels[:, host] = 0
            others = members[members != host]
            labels[:, others] = gen.permuted(np.tile(np.arange(1, G), (size, 1)), axis=1)
        else:
            labels[:, members] = gen.permuted(np.tile(np.arange(G), (size, 1)), axis=1)
    if policy is HostPolicy.DRAW_AND_RELABEL and host is not None:
        labels = _relabel_rows(labels, host)
    return labels


def unconstrained_draw(inst, policy=HostPolicy.DRAW_AND_RELABEL, rng=None):
    """One unconstrained draw; the first row of a batch of one from the same stream."""
    return GroupAssignment.from_labels(inst, unconstrained_batch(inst, 1, rng, policy)[0])


def constraint_flags(labels, inst):
    """
    Satisfaction of the canonical constraints A-E per draw.

    Parameters
    ----------
    labels : np.ndarray
      (draws, teams) or (teams,) group indices.
    inst : DrawInstance

    Returns
    -------
    np.ndarray of int
      Bit 4..0 set iff constraint A..E holds in every group.
    """
    labels = np.atleast_2d(labels)
    onehot = labels[:, :, None] == np.arange(inst.group_count)
    flags = np.zeros(labels.shape[0], dtype=np.int64)
    for pos, (_, code, (low, high)) in enumerate(CANONICAL_CONSTRAINTS):
        counts = onehot[:, inst.membership(code), :].sum(axis=1)
        ok = ((counts >= low) & (counts <= high)).all(axis=1)
        flags |= ok.astype(np.int64) << (4 - pos)
    return flags


def scenario_accepts(k, flags):
    """Scenario `k` accepts a draw iff every constraint it switches on is satisfied."""
    return (k & ~flags & ALL_FLAGS) == 0


def scenario_satisfaction_mask(a):
    """
    32-bit mask of the canonical scenarios a complete assignment satisfies.

    Parameters
    ----------
    a : GroupAssignment

    Returns
    -------
    int
      Bit k set iff `a` is valid under ``scenario_from_index(k)``.
    """
    if not a.complete:
        raise ValueError('scenario_satisfaction_mask needs a complete assignment.')
    flags = int(constraint_flags(a.labels, a.instance)[0])
    return sum(1 << k for k in range(SCENARIO_COUNT) if scenario_accepts(k, flags))


def relabel_host_to_first(a, host):
    """
    Swap the labels of the host's group and the first group.

    Parameters
    ----------
    a : GroupAssignment
    host : int or str

    Returns
    -------
    GroupAssignment
    """
    g = a.group_of(host)
    if g is None:
        raise ValueError(f'Host {host!r} is not placed in the assignment.')
    return a if g == 0 else a.swap_groups(0, g)
