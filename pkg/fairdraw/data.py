"""
Instance files and the bundled World Cup draws.
"""

import json
import warnings
from pathlib import Path

from .metrics import Entrant, placeholder_distribution
from .model import ConstraintScenario, DrawInstance, Team, validate_instance

INSTANCE_DIR = Path(__file__).parent / 'instances'


def bundled_instances():
    """Names of the instances shipped with the package."""
    return sorted(p.stem for p in INSTANCE_DIR.glob('*.json'))


def _bracket(node):
    if isinstance(node, dict):
        try:
            return Entrant(node['name'], node['confederation'], float(node['elo']))
        except KeyError as err:
            raise ValueError(f'Bracket entrant misses {err}: {node!r}')
    if isinstance(node, list) and len(node) == 2:
        return (_bracket(node[0]), _bracket(node[1]))
    raise ValueError(f'Malformed bracket node: {node!r}')


def _team(rec):
    confeds = rec['constraint_confeds']
    dist = rec.get('confed_distribution')
    if dist is None and 'bracket' in rec:
        dist = placeholder_distribution(_bracket(rec['bracket']))
    return Team(
        name=rec['name'],
        pot=int(rec['pot']),
        constraint_confeds=confeds,
        confed_distribution=dist,
        is_host=bool(rec.get('is_host', False)),
    )


def instance_from_dict(d):
    """
    Build a DrawInstance from its document form.

    Parameters
    ----------
    d : dict
      Keys `group_count` and `teams`; optional `name`, `pot_count`, `group_labels`.
      Each team has `name`, `pot`, `constraint_confeds`, optional `is_host` and
      either `confed_distribution` or a play-off `bracket` of rated entrants.
    """
    if not {'group_count', 'teams'}.issubset(d):
        raise ValueError('An instance needs `group_count` and `teams`.')
    return DrawInstance(
        teams=tuple(_team(rec) for rec in d['teams']),
        group_count=int(d['group_count']),
        pot_count=d.get('pot_count'),
        group_labels=tuple(d['group_labels']) if 'group_labels' in d else None,
        name=d.get('name', ''),
    )


def instance_to_dict(inst):
    teams = []
    for t in inst.teams:
        rec = {'name': t.name, 'pot': t.pot, 'constraint_confeds': sorted(t.constraint_confeds)}
        if t.is_placeholder:
            rec['confed_distribution'] = dict(sorted(t.confed_distribution.items()))
        if t.is_host:
            rec['is_host'] = True
        teams.append(rec)
    return {
        'name': inst.name,
        'group_count': inst.group_count,
        'pot_count': inst.pot_count,
        'group_labels': list(inst.group_labels),
        'teams': teams,
    }


def open_instance(source):
    """
    Load an instance from a JSON file or by bundled name.

    Parameters
    ----------
    source : str or Path
      A path to a JSON file, or one of `bundled_instances()`.

    Returns
    -------
    DrawInstance
    """
    path = Path(source)
    if not path.suffix and str(source) in bundled_instances():
        path = INSTANCE_DIR / f'{source}.json'
    elif not path.suffix:
        raise ValueError(f'Unknown bundled instance {source!r}; choose from {bundled_instances()}.')
    if not path.exists():
        raise IOError(f'Instance file not found on disk.\n{path}')

    with open(path) as f:
        d = json.load(f)
    d.setdefault('name', path.stem)
    inst = instance_from_dict(d)

    problems = validate_instance(inst)
    if problems:
        warnings.warn(f'Instance {inst.name!r} has problems: ' + '; '.join(problems))
    return inst


def wc2018():
    """2018 FIFA World Cup draw; Russia hosts."""
    return open_instance('wc2018')


def wc2022():
    """2022 FIFA World Cup draw; Qatar hosts, three pot-4 slots are play-off placeholders."""
    return open_instance('wc2022')


def example1():
    """Six teams, three pots, two groups; teams 2, 4 and 6 carry the constrained code X."""
    return open_instance('example1')


def example1_scenario():
    """At most two of teams 2, 4 and 6 in the same group."""
    return ConstraintScenario({'X': (0, 2)})
