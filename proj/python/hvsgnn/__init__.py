# SPDX-License-Identifier: Apache-2.0
"""Hybrid spiking graph neural networks: Python bindings."""

import json

from ._hvsgnn import (
    ConfigError,
    DivergenceError,
    Error,
    Graph,
    Network,
    SchemaError,
    ShapeError,
    fast_sigmoid_grad,
    gen_synthetic,
    load_dataset,
    preset_names,
    preset_spec,
    run_neuron,
    save_dataset,
    validate_spec,
)
from ._hvsgnn import run_experiment as _run_experiment


def run_experiment(config, out=""):
    """Train one model. config is a dict with the CLI's JSON config keys."""
    return json.loads(_run_experiment(json.dumps(config), str(out)))


__all__ = [
    "ConfigError",
    "DivergenceError",
    "Error",
    "Graph",
    "Network",
    "SchemaError",
    "ShapeError",
    "fast_sigmoid_grad",
    "gen_synthetic",
    "load_dataset",
    "preset_names",
    "preset_spec",
    "run_experiment",
    "run_neuron",
    "save_dataset",
    "validate_spec",
]
