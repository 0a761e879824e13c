"""Deterministic artifact writers.

CSV files start with ``#`` comment lines carrying the schema, the package
version and the generating configuration.  JSON files carry the same
information under ``"schema"``, ``"version"`` and ``"config"``.  Nothing
time- or host-dependent is written, so equal inputs give equal bytes.
"""

import csv
import io
import json
import os

import numpy as np

from . import __version__

SCHEMAS = {
    "partition": "treedpp.partition/1",
    "basis": "treedpp.basis/1",
    "projected-kernel": "treedpp.projected-kernel/1",
    "spectrum": "treedpp.spectrum/1",
    "samples": "treedpp.samples/1",
    "lifted": "treedpp.lifted/1",
    "configurations": "treedpp.configurations/1",
    "report": "treedpp.report/1",
    "count-law": "treedpp.count-law/1",
}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    return str(obj)


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def envelope(kind, config, body):
    return {"schema": SCHEMAS[kind], "version": __version__, "config": config, **body}


def write_json(path, kind, config, body):
    text = dumps(envelope(kind, config, body))
    _write(path, text)
    return text


def csv_text(kind, config, header, rows):
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMAS[kind]}\n")
    buf.write(f"# version: treedpp {__version__}\n")
    buf.write(f"# config: {json.dumps(_plain(config), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, kind, config, header, rows):
    text = csv_text(kind, config, header, rows)
    _write(path, text)
    return text


def fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def read_csv(path):
    """Rows of a CSV artifact (comment lines skipped) as a list of dicts."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def projected_body(P):
    M = np.asarray(P.matrix)
    V = np.asarray(P.eigenvectors)
    return {
        "indices": [str(i) for i in P.indices],
        "matrix": {"shape": list(M.shape), "real": M.real.ravel(), "imag": M.imag.ravel()
                   if np.iscomplexobj(M) else np.zeros(M.size)},
        "eigenvalues": np.asarray(P.eigenvalues),
        "eigenvectors": {"shape": list(V.shape), "real": V.real.ravel(),
                         "imag": V.imag.ravel() if np.iscomplexobj(V) else np.zeros(V.size)},
        "metadata": P.metadata,
    }


def load_projected_matrix(path):
    """(labels, matrix, eigenvalues) from a projected-kernel JSON artifact."""
    d = read_json(path)
    if d.get("schema") != SCHEMAS["projected-kernel"]:
        raise ValueError(f"{path}: not a projected-kernel artifact")
    shape = tuple(d["matrix"]["shape"])
    M = np.array(d["matrix"]["real"]).reshape(shape) + 1j * np.array(d["matrix"]["imag"]).reshape(shape)
    if not np.any(M.imag):
        M = M.real
    return d["indices"], M, np.array(d["eigenvalues"])
