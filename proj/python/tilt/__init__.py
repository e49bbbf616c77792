"""Joint tilted-ridge estimation under covariate shift.

The compiled core lives in ``tilt._core``; this package adds thin wrappers
that speak plain Python dicts for configs and results.
"""

import json
import math

from ._core import (
    ConfigError,
    Density,
    FeatureMap,
    PopulationContext,
    TiltError,
    exact_relative_weights,
    stream_seed,
    tilt_fit,
    weighted_ridge_fit,
)
from . import _core

__all__ = [
    "ConfigError",
    "Density",
    "FeatureMap",
    "PopulationContext",
    "TiltError",
    "default_config",
    "exact_relative_weights",
    "run",
    "stream_seed",
    "tilt_fit",
    "verify",
    "weighted_ridge_fit",
]

_NAN_FIELDS = ("level_or_L", "lambda", "target_mse")


def default_config(experiment):
    """Fully resolved default config for one experiment kind."""
    return json.loads(_core._default_config_json(experiment))


def run(config, threads=1):
    """Run an experiment config (dict) and return its trial rows and extras.

    Missing fields take the experiment's defaults, as with ``tilt run``.
    """
    out = json.loads(_core._run_json(json.dumps(config), threads))
    for row in out["trials"]:
        for key in _NAN_FIELDS:
            if row[key] is None:
                row[key] = math.nan
    return out


def verify(kind, cases=50, seed=20260101, tol=1e-8):
    """Run one identity suite; returns the JSON report as a dict."""
    return json.loads(_core.verify(kind, cases, seed, tol))
