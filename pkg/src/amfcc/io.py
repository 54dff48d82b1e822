"""Sample CSV and chart-model JSON persistence.

Samples use a long layout with header ``obs_id,component,t,value`` (components
numbered from 1). Models are JSON documents carrying a format version.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .basis import make_basis
from .charting import ChartModel, ParameterGrid
from .diagnostics import DiagnosticReference
from .errors import DataError, ModelFormatError
from .mfpca import MFPCAModel
from .smoothing import DiscreteSample

SAMPLE_HEADER = ["obs_id", "component", "t", "value"]
MODEL_FORMAT = "amfcc-chart"
MODEL_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def save_samples(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_HEADER)
        for s in samples:
            for k, (t, y) in enumerate(zip(s.grids, s.values), start=1):
                for tj, yj in zip(t, y):
                    w.writerow([s.obs_id, k, _fmt(tj), _fmt(yj)])


def load_samples(path, domain=(0.0, 1.0)) -> list:
    """Read long-format samples; rows are grouped per observation in order of first appearance."""
    lo, hi = domain
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file (missing header)")
        if [h.strip() for h in header] != SAMPLE_HEADER:
            raise DataError(f"{path}: line 1: expected header {','.join(SAMPLE_HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            oid = row[0].strip()
            if not oid:
                raise DataError(f"{path}: line {lineno}: empty obs_id")
            try:
                comp = int(row[1])
                t = float(row[2])
                y = float(row[3])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: unparsable number in {row!r}") from None
            if comp < 1:
                raise DataError(f"{path}: line {lineno}: component must be >= 1")
            if not (math.isfinite(t) and math.isfinite(y)):
                raise DataError(f"{path}: line {lineno}: non-finite value")
            if not lo <= t <= hi:
                raise DataError(f"{path}: line {lineno}: t={t} outside [{lo}, {hi}]")
            comps = groups.setdefault(oid, {})
            pts = comps.setdefault(comp, {})
            if t in pts:
                raise DataError(f"{path}: line {lineno}: duplicate (obs_id={oid}, component={comp}, t={t})")
            pts[t] = y
    if not groups:
        return []
    p = max(max(c) for c in groups.values())
    out = []
    for oid, comps in groups.items():
        missing = [k for k in range(1, p + 1) if k not in comps]
        if missing:
            raise DataError(f"{path}: obs {oid!r} is missing component(s) {missing}")
        grids, values = [], []
        for k in range(1, p + 1):
            ts = np.array(sorted(comps[k]))
            grids.append(ts)
            values.append(np.array([comps[k][t] for t in ts]))
        out.append(DiscreteSample(oid, tuple(grids), tuple(values)))
    return out


# --------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------

def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _model_to_dict(m: MFPCAModel) -> dict:
    return {
        "lambda": m.lambda_,
        "mean_coeffs": _arr(m.mean_coeffs),
        "dense_grid": _arr(m.dense_grid),
        "var_values": _arr(m.var_values),
        "std_maps": _arr(m.std_maps),
        "gram_sqrt": _arr(m.gram_sqrt),
        "eigenvalues": _arr(m.eigenvalues),
        "eigenvectors": _arr(m.eigenvectors),
        "n_train": m.n_train,
    }


def chart_to_dict(chart: ChartModel) -> dict:
    ref = chart.diag_reference
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_VERSION,
        "basis": chart.basis.to_dict(),
        "grid": {
            "lambdas": list(chart.grid.lambdas),
            "deltas": list(chart.grid.deltas),
            "cells": [list(c) for c in chart.grid.cells],
        },
        "alpha": chart.alpha,
        "combiner": chart.combiner,
        "n_train": chart.n_train,
        "models": [None if m is None else _model_to_dict(m) for m in chart.models],
        "reference_partials": _arr(chart.reference_partials),
        "combined_reference": _arr(chart.combined_reference),
        "control_limit": chart.control_limit,
        "diag_reference": None if ref is None else {
            "raw": _arr(ref.raw),
            "combined": _arr(ref.combined),
            "limits": _arr(ref.limits),
            "alpha": ref.alpha,
            "combiner": ref.combiner,
        },
    }


def _float_array(x, ndim, what):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != ndim:
        raise ModelFormatError(f"{what}: expected {ndim}-d array, got {a.ndim}-d")
    if not np.all(np.isfinite(a)):
        raise ModelFormatError(f"{what}: non-finite entries")
    return a


def chart_from_dict(doc: dict) -> ChartModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not an amfcc chart model")
    version = doc.get("format_version")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r} (expected {MODEL_VERSION})")
    try:
        b = doc["basis"]
        basis = make_basis(b["domain_lo"], b["domain_hi"], b["n_basis"])
        g = doc["grid"]
        grid = ParameterGrid(tuple(g["lambdas"]), tuple(g["deltas"]), tuple(tuple(c) for c in g["cells"]))
        models = []
        for i, md in enumerate(doc["models"]):
            if md is None:
                models.append(None)
                continue
            where = f"models[{i}]"
            models.append(MFPCAModel(
                lambda_=float(md["lambda"]),
                basis=basis,
                mean_coeffs=_float_array(md["mean_coeffs"], 2, where),
                dense_grid=_float_array(md["dense_grid"], 1, where),
                var_values=_float_array(md["var_values"], 2, where),
                std_maps=_float_array(md["std_maps"], 3, where),
                gram_sqrt=_float_array(md["gram_sqrt"], 2, where),
                eigenvalues=_float_array(md["eigenvalues"], 1, where),
                eigenvectors=_float_array(md["eigenvectors"], 2, where),
                n_train=int(md["n_train"]),
            ))
        if len(models) != len(grid.lambdas):
            raise ModelFormatError("number of MFPCA models does not match the lambda grid")
        partials = _float_array(doc["reference_partials"], 2, "reference_partials")
        combined = _float_array(doc["combined_reference"], 1, "combined_reference")
        if partials.shape[1] != grid.T or combined.shape[0] != partials.shape[0]:
            raise ModelFormatError("reference statistics do not match the grid")
        for i, L in grid.cells:
            if models[i] is None or not 1 <= L <= models[i].rank:
                raise ModelFormatError(f"grid cell ({i}, {L}) does not match its model")
        d = doc["diag_reference"]
        diag = None if d is None else DiagnosticReference(
            _float_array(d["raw"], 3, "diag_reference.raw"),
            _float_array(d["combined"], 2, "diag_reference.combined"),
            _float_array(d["limits"], 1, "diag_reference.limits"),
            float(d["alpha"]),
            str(d["combiner"]),
        )
        return ChartModel(
            basis=basis,
            grid=grid,
            models=tuple(models),
            reference_partials=partials,
            combined_reference=combined,
            control_limit=float(doc["control_limit"]),
            alpha=float(doc["alpha"]),
            combiner=str(doc["combiner"]),
            diag_reference=diag,
            n_train=int(doc["n_train"]),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model document: {exc!r}") from exc


def save_model(chart: ChartModel, path) -> None:
    Path(path).write_text(json.dumps(chart_to_dict(chart), allow_nan=False))


def load_model(path) -> ChartModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return chart_from_dict(doc)
