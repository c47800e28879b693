"""Analysis and simulation of two-phase mMTC networks with data aggregation.

MTDs send to nearby aggregators over ``N`` orthogonal channels (aggregation
phase); aggregators forward what they decoded to the nearest base station
(relaying phase). Stochastic-geometry closed forms live in ``aggregation``,
``relaying`` and ``metrics``; ``simulator`` is the Monte-Carlo counterpart.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .metrics import evaluate, evaluate_crs, evaluate_rrs, sweep
from .params import MetricsReport, NetworkParams, Pmf, SchedulingScheme, default_params, desk_params, validate

__all__ = [
    "__version__",
    "evaluate",
    "evaluate_rrs",
    "evaluate_crs",
    "sweep",
    "MetricsReport",
    "NetworkParams",
    "Pmf",
    "SchedulingScheme",
    "default_params",
    "desk_params",
    "validate",
]
