"""Deformed Wigner matrices: free convolution, sampling and experiment harness."""

import json as _json

from ._defsc import (
    DefscError,
    FreeConvolution,
    Measure,
    eigenvalues,
    list_kinds,
)

__all__ = [
    "DefscError",
    "FreeConvolution",
    "Measure",
    "eigenvalues",
    "list_kinds",
    "run_experiment",
]


def run_experiment(spec, threads=1):
    """Run a spec given as a dict or JSON string; returns the report as a dict."""
    text = spec if isinstance(spec, str) else _json.dumps(spec)
    return _json.loads(_ext_run(text, threads))


from ._defsc import _run_experiment as _ext_run  # noqa: E402
