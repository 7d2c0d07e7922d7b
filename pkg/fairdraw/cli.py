"""
Command-line experiments: scenario sweeps, host-policy comparison, frontier reports
and the exact checks on the six-team example.
"""

import argparse
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import dask
import numpy as np
import pandas as pd

from . import data, exactprob, frontier
from .constraints import CompletionSearch, pair_support
from .metrics import (
    FLOAT_FORMAT,
    MatchupAccumulator,
    mean_abs_bias,
    max_abs_bias,
    merge_patterns,
    pair_bias_table,
    pattern_accumulators,
    read_metrics,
    scenario_accumulator,
    scenario_metrics,
    team_mean_abs_bias,
    write_metrics,
)
from .model import SCENARIO_COUNT, scenario_from_index
from .samplers import (
    HostPolicy,
    RandomStream,
    SkipSampler,
    check_pot_order,
    constraint_flags,
    derive_stream_index,
    scenario_accepts,
    unconstrained_batch,
)

logger = logging.getLogger(__name__)

EXPERIMENTS = ('scenario-sweep', 'host-policy', 'frontier', 'example1-verify')

# mechanism codes for stream indices
UNIFORM = 0
SKIP = 1

HOST_POLICY_SCENARIO = 31

BREAKPOINT_COLUMNS = ['kind', 'alpha_low', 'alpha_high', 'scenario', 'constraints']


@dataclass
class ExperimentConfig:
    """Settings of one experiment run.

    Parameters
    ----------
    instance : str or Path
      JSON instance file or bundled instance name.
    experiment : str
      One of `EXPERIMENTS`.
    scenarios : sequence of int, optional
      Scenario indices. Defaults to all 32, or to scenario 31 for host-policy.
    iterations : int
      Accepted uniform draws for the most restrictive scenario, and Skip draws per scenario.
    seed : int
    workers : int
      Parallel simulation blocks; results do not depend on it.
    host_policy : HostPolicy
    pot_order : sequence of int, optional
    psi_mechanism : {'uniform', 'skip'}
    alpha_step : float
    out : Path
    block_size : int
    metrics : Path, optional
      Scenario-sweep CSV reused by the frontier experiment.
    zero_uniform_bias : bool
    verbose : bool
    """

    instance: str = 'wc2018'
    experiment: str = 'scenario-sweep'
    scenarios: tuple = None
    iterations: int = 1_000_000
    seed: int = 0
    workers: int = 1
    host_policy: HostPolicy = HostPolicy.DRAW_AND_RELABEL
    pot_order: tuple = None
    psi_mechanism: str = 'uniform'
    alpha_step: float = 0.01
    out: Path = Path('.')
    block_size: int = 10_000
    metrics: Path = None
    zero_uniform_bias: bool = True
    verbose: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f'Unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}.')
        if self.iterations < 1:
            raise ValueError(f'iterations must be at least 1, got {self.iterations}.')
        if not 0.0 < self.alpha_step <= 1.0:
            raise ValueError(f'alpha step must be in (0, 1], got {self.alpha_step}.')
        if self.seed < 0:
            raise ValueError(f'seed must be non-negative, got {self.seed}.')
        if self.workers < 1:
            raise ValueError(f'workers must be at least 1, got {self.workers}.')
        if self.block_size < 1:
            raise ValueError(f'block size must be at least 1, got {self.block_size}.')
        if self.pot_order is not None:
            self.pot_order = tuple(int(p) for p in self.pot_order)
            if sorted(self.pot_order) != list(range(1, len(self.pot_order) + 1)):
                raise ValueError(f'Pot order {self.pot_order} is not a permutation.')
        if self.scenarios is not None:
            self.scenarios = tuple(int(k) for k in self.scenarios)
            for k in self.scenarios:
                scenario_from_index(k)
        if self.psi_mechanism not in ('uniform', 'skip'):
            raise ValueError(
                f"psi mechanism must be 'uniform' or 'skip', got {self.psi_mechanism!r}."
            )
        self.host_policy = HostPolicy(self.host_policy)
        self.out = Path(self.out)
        if self.metrics is not None:
            self.metrics = Path(self.metrics)

    def requested_scenarios(self):
        if self.scenarios is not None:
            return self.scenarios
        if self.experiment == 'host-policy':
            return (HOST_POLICY_SCENARIO,)
        return tuple(range(SCENARIO_COUNT))


def _uniform_block(inst, policy, seed, block, size):
    gen = RandomStream(seed, derive_stream_index(UNIFORM, policy, 0, block)).generator()
    labels = unconstrained_batch(inst, size, gen, policy)
    flags = constraint_flags(labels, inst)
    return flags, pattern_accumulators(inst, labels, flags)


def _skip_block(inst, k, policy, pot_order, seed, block, size):
    sampler = SkipSampler(inst, scenario_from_index(k), policy, pot_order)
    stream = RandomStream(seed, derive_stream_index(SKIP, policy, k, block))
    return MatchupAccumulator.from_labels(inst, sampler.sample_labels(size, stream))


def _compute(tasks, workers):
    if workers == 1:
        return dask.compute(*tasks, scheduler='synchronous')
    # an active dask scheduler setting wins over the process pool
    scheduler = dask.config.get('scheduler', 'processes')
    return dask.compute(*tasks, scheduler=scheduler, num_workers=workers)


def _feasible(inst, k):
    search = CompletionSearch(inst, scenario_from_index(k))
    return search.feasible(*search.state_of())


def simulate_uniform(inst, scenarios, config, policy=None):
    """
    Rejection stream shared by all scenarios.

    Blocks are drawn until every requested (feasible) scenario has `iterations`
    accepted draws. The last block is cut at the draw where the last target is met.

    Returns
    -------
    patterns : list of MatchupAccumulator
      Accumulators per flag pattern over the used prefix.
    total : int
      Unconstrained draws in the prefix.
    """
    policy = config.host_policy if policy is None else HostPolicy(policy)
    targets = [k for k in scenarios if _feasible(inst, k)]
    for k in sorted(set(scenarios) - set(targets)):
        logger.warning('Scenario %d has no valid assignment and gets no uniform draws.', k)

    patterns = [MatchupAccumulator(inst) for _ in range(SCENARIO_COUNT)]
    accepted = np.zeros(len(targets), dtype=np.int64)
    total = 0
    first = 0
    size = config.block_size
    while targets and accepted.min() < config.iterations:
        blocks = range(first, first + config.workers)
        tasks = [dask.delayed(_uniform_block)(inst, policy, config.seed, b, size) for b in blocks]
        for b, (flags, block_patterns) in zip(blocks, _compute(tasks, config.workers)):
            hits = np.stack([scenario_accepts(k, flags) for k in targets])
            counts = accepted[:, None] + np.cumsum(hits, axis=1)
            if counts[:, -1].min() < config.iterations:
                patterns = merge_patterns(patterns, block_patterns)
                accepted = counts[:, -1]
                total += size
                continue

            # first draw at which the slowest scenario reaches its target
            cut = int(max(np.argmax(row >= config.iterations) for row in counts)) + 1
            if cut < size:
                stream = RandomStream(config.seed, derive_stream_index(UNIFORM, policy, 0, b))
                labels = unconstrained_batch(inst, size, stream, policy)[:cut]
                block_patterns = pattern_accumulators(
                    inst, labels, constraint_flags(labels, inst)
                )
            patterns = merge_patterns(patterns, block_patterns)
            accepted = counts[:, cut - 1]
            total += cut
            break
        first += config.workers
        logger.info(
            'Uniform stream: %d draws, fewest accepted %d of %d.',
            total,
            accepted.min(),
            config.iterations,
        )
    return patterns, total


def simulate_skip(inst, k, config, policy=None):
    """Skip accumulator of scenario `k`, or None when Skip cannot draw it."""
    policy = config.host_policy if policy is None else HostPolicy(policy)
    try:
        SkipSampler(inst, scenario_from_index(k), policy, config.pot_order)
    except ValueError as err:
        logger.warning('Skip cannot draw scenario %d: %s', k, err)
        return None
    sizes = [config.block_size] * (config.iterations // config.block_size)
    if config.iterations % config.block_size:
        sizes.append(config.iterations % config.block_size)
    tasks = [
        dask.delayed(_skip_block)(inst, k, policy, config.pot_order, config.seed, b, size)
        for b, size in enumerate(sizes)
    ]
    acc = MatchupAccumulator(inst)
    for part in _compute(tasks, config.workers):
        acc = acc.merge(part)
    logger.info('Skip scenario %d: %d draws.', k, acc.draw_count)
    return acc


def scenario_sweep(inst, config):
    """ScenarioMetrics of every requested scenario."""
    scenarios = config.requested_scenarios()
    patterns, total = simulate_uniform(inst, scenarios, config)
    rows = []
    for k in scenarios:
        uniform = scenario_accumulator(patterns, k)
        skip = simulate_skip(inst, k, config)
        support = pair_support(inst, scenario_from_index(k))
        rows.append(
            scenario_metrics(
                k, uniform, skip, support, total_draws=total, psi_mechanism=config.psi_mechanism
            )
        )
    return rows


def host_policy_comparison(inst, config):
    """
    Per-team and per-pair bias of both host policies for one scenario.

    Returns
    -------
    teams : pd.DataFrame
      Columns team, pot, pre_assign, draw_and_relabel.
    pairs : pd.DataFrame
      Columns policy, team_i, team_j, pU, pS, bias_pp.
    """
    k = config.requested_scenarios()[0]
    s = scenario_from_index(k)
    support = pair_support(inst, s)
    teams = pd.DataFrame({'team': list(inst.team_names), 'pot': inst.pot_of})
    pairs = []
    for policy in HostPolicy:
        patterns, _ = simulate_uniform(inst, (k,), config, policy)
        uniform = scenario_accumulator(patterns, k)
        skip = simulate_skip(inst, k, config, policy)
        if skip is None or uniform.draw_count == 0:
            raise ValueError(f'Scenario {k} cannot be drawn with policy {policy.value}.')
        pU, pS = uniform.probabilities(), skip.probabilities()
        column = policy.value.replace('-', '_')
        teams[column] = team_mean_abs_bias(pU, pS, support, inst).values
        table = pair_bias_table(pU, pS, support, inst)
        table.insert(0, 'policy', policy.value)
        pairs.append(table)
    return teams, pd.concat(pairs, ignore_index=True)


def frontier_reports(rows, step):
    """Breakpoint, envelope and objective tables for both objectives."""
    breaks, envelopes, objectives = [], [], []
    for kind in frontier.Objective:
        for interval in frontier.breakpoints(rows, kind):
            breaks.append(
                {
                    'kind': kind.value,
                    'alpha_low': interval.alpha_low,
                    'alpha_high': interval.alpha_high,
                    'scenario': interval.scenario,
                    'constraints': scenario_from_index(interval.scenario).describe(),
                }
            )
        env = frontier.envelope(rows, kind, step).to_dataframe().reset_index()
        env.insert(0, 'kind', kind.value)
        envelopes.append(env[['kind', 'alpha', 'scenario', 'value']])
        lines = frontier.objective_lines(rows, kind, step).to_dataframe().reset_index()
        lines.insert(0, 'kind', kind.value)
        objectives.append(lines[['kind', 'scenario', 'alpha', 'objective']])
    return (
        pd.DataFrame(breaks, columns=BREAKPOINT_COLUMNS),
        pd.concat(envelopes, ignore_index=True),
        pd.concat(objectives, ignore_index=True),
    )


def verify_example1():
    """
    Exact checks on the six-team example.

    Returns
    -------
    list of (str, bool)
      Check description and outcome.
    """
    inst = data.example1()
    s = data.example1_scenario()
    one, four = inst.index('1'), inst.index('4')
    skip = exactprob.exact_skip_distribution(inst, s)
    pU = exactprob.matchup_matrix(exactprob.uniform_distribution(inst, s), len(inst))
    pS = exactprob.matchup_matrix(skip, len(inst))
    support = pair_support(inst, s)

    def named(composition):
        return frozenset(''.join(sorted(inst.team_names[t] for t in g)) for g in composition)

    expected = {
        frozenset(['136', '245']): Fraction(1, 2),
        frozenset(['145', '236']): Fraction(1, 4),
        frozenset(['146', '235']): Fraction(1, 4),
    }
    return [
        (f'uniform p(1,4) = {pU[one, four]}, expected 2/3', pU[one, four] == Fraction(2, 3)),
        (f'skip p(1,4) = {pS[one, four]}, expected 1/2', pS[one, four] == Fraction(1, 2)),
        (
            'skip composition probabilities 1/2, 1/4, 1/4',
            {named(c): p for c, p in skip.items()} == expected,
        ),
        (f'support has {len(support)} pairs, expected 12', len(support) == 12),
        ('delta = 100/9', mean_abs_bias(pU, pS, support) == Fraction(100, 9)),
        ('omega = 100/6', max_abs_bias(pU, pS, support) == Fraction(100, 6)),
    ]


def _write(df, path):
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info('Wrote %s', path)


def run(config):
    """
    Run one experiment and write its reports into `config.out`.

    Returns
    -------
    int
      Exit status: 0 on success, 1 on a failed example check, 2 on an unreadable instance.
    """
    logger.info('Running %s with %s', config.experiment, config)

    if config.experiment == 'example1-verify':
        results = verify_example1()
        for message, ok in results:
            print(f'{"PASS" if ok else "FAIL"}  {message}')
        passed = all(ok for _, ok in results)
        print('PASS' if passed else 'FAIL')
        return 0 if passed else 1

    config.out.mkdir(parents=True, exist_ok=True)
    inst = None
    if not (config.experiment == 'frontier' and config.metrics is not None):
        try:
            inst = data.open_instance(config.instance)
            check_pot_order(inst, config.pot_order)
        except (OSError, ValueError, KeyError) as err:
            logger.error('Cannot use instance %s: %s', config.instance, err)
            return 2

    if config.experiment == 'scenario-sweep':
        write_metrics(scenario_sweep(inst, config), config.out / 'scenario_metrics.csv')
        logger.info('Wrote %s', config.out / 'scenario_metrics.csv')

    elif config.experiment == 'host-policy':
        teams, pairs = host_policy_comparison(inst, config)
        _write(teams, config.out / 'host_policy_teams.csv')
        _write(pairs, config.out / 'host_policy_pairs.csv')

    elif config.experiment == 'frontier':
        if config.metrics is not None:
            rows = read_metrics(config.metrics)
        else:
            rows = scenario_sweep(inst, config)
            write_metrics(rows, config.out / 'scenario_metrics.csv')
        if config.zero_uniform_bias:
            rows = frontier.zero_uniform_bias(rows)
        breaks, env, objectives = frontier_reports(rows, config.alpha_step)
        _write(breaks, config.out / 'frontier_breakpoints.csv')
        _write(env, config.out / 'frontier_envelope.csv')
        _write(objectives, config.out / 'frontier_objectives.csv')

    return 0


def _scenario_list(tokens):
    if tokens is None or tokens == ['all']:
        return None
    out = []
    for token in tokens:
        out.extend(int(k) for k in token.split(',') if k)
    return tuple(out)


def _int_list(text):
    try:
        return tuple(int(p) for p in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='fairdraw',
        description='Fairness and attractiveness of constrained group draws.',
    )
    parser.add_argument(
        '--instance', default='wc2018', help='JSON instance file or bundled instance name.'
    )
    parser.add_argument('--experiment', choices=EXPERIMENTS, default='scenario-sweep')
    parser.add_argument(
        '--scenarios',
        nargs='+',
        default=None,
        help="Scenario indices (space or comma separated) or 'all'.",
    )
    parser.add_argument('--iterations', type=int, default=1_000_000)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--workers', type=int, default=1)
    parser.add_argument(
        '--host-policy',
        choices=[p.value for p in HostPolicy],
        default=HostPolicy.DRAW_AND_RELABEL.value,
    )
    parser.add_argument('--pot-order', type=_int_list, default=None, help='For example 1,2,3,4.')
    parser.add_argument('--psi-mechanism', choices=('uniform', 'skip'), default='uniform')
    parser.add_argument('--alpha-step', type=float, default=0.01)
    parser.add_argument('--out', type=Path, default=Path('.'))
    parser.add_argument('--block-size', type=int, default=10_000)
    parser.add_argument(
        '--metrics', type=Path, default=None, help='Scenario-sweep CSV to reuse for the frontier.'
    )
    parser.add_argument(
        '--zero-uniform-bias',
        action=argparse.BooleanOptionalAction,
        default=True,
        help='Treat scenarios where Skip is uniform as unbiased in the frontier.',
    )
    parser.add_argument('-v', '--verbose', action='store_true')
    return parser


def parse_args(argv=None):
    """Build an ExperimentConfig from command-line arguments."""
    args = build_parser().parse_args(argv)
    return ExperimentConfig(
        instance=args.instance,
        experiment=args.experiment,
        scenarios=_scenario_list(args.scenarios),
        iterations=args.iterations,
        seed=args.seed,
        workers=args.workers,
        host_policy=HostPolicy(args.host_policy),
        pot_order=args.pot_order,
        psi_mechanism=args.psi_mechanism,
        alpha_step=args.alpha_step,
        out=args.out,
        block_size=args.block_size,
        metrics=args.metrics,
        zero_uniform_bias=args.zero_uniform_bias,
        verbose=args.verbose,
    )


def main(argv=None):
    try:
        config = parse_args(argv)
    except ValueError as err:
        logging.basicConfig(level=logging.WARNING)
        logger.error('%s', err)
        return 2
    logging.basicConfig(
        level=logging.INFO if config.verbose else logging.WARNING,
        format='%(asctime)s %(name)s %(levelname)s %(message)s',
    )
    logging.captureWarnings(True)
    return run(config)


if __name__ == '__main__':
    raise SystemExit(main())
