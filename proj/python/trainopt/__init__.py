"""Trainable optimizers and benchmark harness."""

import json

from ._trainopt import *  # noqa: F401,F403
from ._trainopt import run_experiment as _run_experiment


def run(config):
    """Run an experiment from a config dict; returns (records, summary) as dicts."""
    records, summary = _run_experiment(json.dumps(config))
    return json.loads(records), json.loads(summary)
