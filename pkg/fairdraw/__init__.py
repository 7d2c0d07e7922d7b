# flake8: noqa

from . import constraints, data, exactprob, frontier, metrics, model, samplers
from .constraints import assignment_valid, completion_exists, pair_support
from .model import ConstraintScenario, DrawInstance, GroupAssignment, Team, scenario_from_index
from .samplers import HostPolicy, RandomStream, SkipSampler, skip_draw, unconstrained_draw

try:
    from ._version import __version__
except ImportError:
    __version__ = 'unknown'
