"""Inversion and iterative learning control for piecewise affine systems."""

import json as _json

from ._pwainv import (
    Decoupling,
    InversePwaModel,
    PwaModel,
    PwainvError,
    build_filters,
    compute_decoupling,
    enumerate_implicit_solutions,
    invert,
    load_model,
    lowpass_impulse_response,
    model_from_json,
    nrmse,
    peak_error,
    stable_invert,
)
from . import _pwainv


def check_assumptions(model):
    return _json.loads(_pwainv.check_assumptions_json(model))


def default_bench_config():
    return _json.loads(_pwainv.default_bench_config_json())


def run_benchmark(config=None):
    return _json.loads(_pwainv.run_benchmark_json(_json.dumps(config or {})))


__all__ = [
    "Decoupling",
    "InversePwaModel",
    "PwaModel",
    "PwainvError",
    "build_filters",
    "check_assumptions",
    "compute_decoupling",
    "default_bench_config",
    "enumerate_implicit_solutions",
    "invert",
    "load_model",
    "lowpass_impulse_response",
    "model_from_json",
    "nrmse",
    "peak_error",
    "run_benchmark",
    "stable_invert",
]
