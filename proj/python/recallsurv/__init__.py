"""Event-age estimation from recall and current status data.

Datasets are dicts of equal-length columns s, delta, epsilon, v, m, d and,
for simulated data, t. Fits come back as plain dicts.
"""

import json

from . import _core
from ._core import Error, presets, read_csv, write_csv

__version__ = _core.__version__

__all__ = ["Error", "presets", "simulate", "read_csv", "write_csv", "fit", "npfit", "gof", "run_cli"]


def simulate(scenario="case_i", n=None, seed=0):
    """Draw a dataset from a preset name or a scenario dict."""
    spec = scenario if isinstance(scenario, str) else json.dumps(scenario)
    return _core.simulate(spec, n, seed)


def fit(data, kind="partial"):
    """Weibull maximum likelihood fit; kind is current, binary or partial."""
    return json.loads(_core.fit(data, kind))


def npfit(data, knots=(0.0, 3.0, 6.0, 9.0), kind="partial"):
    """Approximate nonparametric fit with mass on exactly recalled ages."""
    return json.loads(_core.npfit(data, list(knots), kind))


def gof(data, fitted):
    """Chi-square goodness of fit of a partial recall fit."""
    return json.loads(_core.gof(data, json.dumps(fitted)))


def run_cli(*args):
    """Run a command-line subcommand; returns (status, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
