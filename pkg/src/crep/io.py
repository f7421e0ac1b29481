"""JSON documents for fitted and ground-truth parameters.

A parameter document is a single JSON object::

    {
      "format": "crep-params", "version": 1,
      "ground_truth": false,
      "K": 3, "N": 500, "eta": 0.47,
      "final_lpl": -29884.4, "n_iter": 420, "restart_index": 2,
      "mode": "constrained", "lpl_trace": [...],
      "node_labels": ["a", "b", ...],
      "u": [[...], ...], "v": [[...], ...], "w": [[...], ...],
      "config": {...}
    }

``u`` and ``v`` are ``N x K`` and ``w`` is ``K x K``, row-major nested lists.
Floats are written with ``repr`` precision so a round trip is exact. Keys
are sorted so identical inputs give identical bytes. Ground-truth documents
set ``ground_truth`` to true and leave the fit fields null.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .inference import FitResult
from .model import CrepParams

FORMAT = "crep-params"
VERSION = 1


class DocumentError(ValueError):
    """A parameter document is malformed."""


def _matrix(x: np.ndarray) -> list:
    return [[float(a) for a in row] for row in np.asarray(x)]


def params_document(
    params: CrepParams,
    node_labels=None,
    result: FitResult | None = None,
    ground_truth: bool = False,
    config: dict[str, Any] | None = None,
) -> dict:
    labels = list(node_labels) if node_labels is not None else [str(i) for i in range(params.N)]
    if len(labels) != params.N:
        raise ValueError("node_labels must have one entry per node")
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "ground_truth": bool(ground_truth),
        "K": params.K,
        "N": params.N,
        "eta": float(params.eta),
        "final_lpl": None,
        "n_iter": None,
        "restart_index": None,
        "mode": None,
        "lpl_trace": None,
        "node_labels": [str(x) for x in labels],
        "u": _matrix(params.u),
        "v": _matrix(params.v),
        "w": _matrix(params.w),
        "config": config or {},
    }
    if result is not None:
        doc.update(
            final_lpl=float(result.final_lpl),
            n_iter=int(result.n_iter),
            restart_index=int(result.restart_index),
            mode=result.mode,
            lpl_trace=[float(x) for x in result.lpl_trace],
        )
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def fit_to_json(result: FitResult, node_labels=None, config=None) -> str:
    return dumps(params_document(result.params, node_labels, result, config=config))


def truth_to_json(params: CrepParams, node_labels=None, config=None) -> str:
    return dumps(params_document(params, node_labels, ground_truth=True, config=config))


def load_params_document(text: str) -> dict:
    """Parse and validate a parameter document; arrays come back as numpy."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise DocumentError(f"expected a {FORMAT!r} document")
    missing = {"K", "N", "eta", "u", "v", "w", "node_labels"} - doc.keys()
    if missing:
        raise DocumentError(f"missing fields: {sorted(missing)}")
    try:
        params = CrepParams(np.array(doc["u"], dtype=float), np.array(doc["v"], dtype=float),
                            np.array(doc["w"], dtype=float), doc["eta"])
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"invalid parameters: {exc}") from None
    if params.N != doc["N"] or params.K != doc["K"] or len(doc["node_labels"]) != params.N:
        raise DocumentError("declared N/K do not match the arrays")
    doc["params"] = params
    return doc


def params_from_json(text: str) -> CrepParams:
    return load_params_document(text)["params"]


def result_from_json(text: str) -> FitResult:
    doc = load_params_document(text)
    if doc.get("ground_truth"):
        raise DocumentError("document holds ground-truth parameters, not a fit")
    return FitResult(
        params=doc["params"],
        final_lpl=doc["final_lpl"],
        n_iter=doc["n_iter"],
        restart_index=doc["restart_index"],
        lpl_trace=list(doc.get("lpl_trace") or []),
        mode=doc.get("mode") or "constrained",
    )
