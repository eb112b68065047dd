"""Sepsis early-warning pipeline: Python access to the C++ core."""

import json

from . import _core
from ._core import (
    InfeasibleError,
    NumericalError,
    SchemaError,
    SepsisError,
    default_lambda_grid,
    detect_onset,
    detect_si,
    fit_lasso,
    harmonize_prevalence,
    hourly_labels,
    jaccard_si,
    max_pool,
)

__all__ = [
    "InfeasibleError",
    "NumericalError",
    "SchemaError",
    "SepsisError",
    "default_lambda_grid",
    "detect_onset",
    "detect_si",
    "evaluate",
    "fit_lasso",
    "harmonize_prevalence",
    "hourly_labels",
    "jaccard_si",
    "max_pool",
    "run_all_synthetic",
]


def evaluate(stays, config=None, harmonized=False):
    """Encounter-level evaluation.

    `stays` is a sequence of (stay_id, is_case, onset or None, scores).
    Returns the report as a dict; NaN metrics come back as None.
    """
    rows = [(str(s), bool(c), None if o is None else float(o), [float(x) for x in v]) for s, c, o, v in stays]
    return json.loads(_core.evaluate_json(rows, json.dumps(config or {}), harmonized))


def run_all_synthetic(config=None):
    """Synthetic cohort through evaluation; returns the run summary dict."""
    return json.loads(_core.run_all_synthetic_json(json.dumps(config or {})))
