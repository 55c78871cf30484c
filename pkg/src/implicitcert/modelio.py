"""Model and dataset files.

Model files are a single JSON object:

    {
      "schema_version": 1,
      "n": 2, "r": 2, "q": 2,
      "A": [...],            # n*n reals, row-major
      "B": [...],            # n*r reals, row-major
      "C": [...],            # q*n reals, row-major
      "b": [...], "c": [...],
      "activation": {"kind": "relu"},   # + "slope" / "lo","hi" as needed
      "eta": [...]           # optional, strictly positive, dim n
    }

Datasets are JSON-lines: a header object {"r": ..., "q": ...} on the
first line, then one {"input": [...], "label": k} object per line.

Floats are serialized with repr (shortest round-trip form), so
load(save(net)) reproduces every parameter bit-exactly and identical
inputs produce identical bytes.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .certify import LabeledInput
from .errors import ParseError, ShapeError
from .network import ActivationSpec, ImplicitNetwork

__all__ = [
    "SCHEMA_VERSION",
    "load_model",
    "save_model",
    "load_dataset",
    "save_dataset",
    "synth_model",
    "atomic_write_text",
]

SCHEMA_VERSION = 1


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _field_array(doc: dict, name: str, length: int) -> np.ndarray:
    if name not in doc:
        raise ShapeError(f"missing field {name!r}")
    raw = doc[name]
    if not isinstance(raw, list):
        raise ShapeError(f"field {name!r} must be a JSON array")
    if len(raw) != length:
        raise ShapeError(f"field {name!r} has length {len(raw)}, expected {length}")
    arr = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"field {name!r} contains NaN or Inf")
    return arr


def _activation_from_doc(doc) -> ActivationSpec:
    if isinstance(doc, str):
        return ActivationSpec(doc)
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ShapeError("field 'activation' must be a string or an object with 'kind'")
    kind = doc["kind"]
    if kind == "leaky_relu":
        return ActivationSpec.leaky_relu(float(doc.get("slope", 0.0)))
    if kind == "saturation":
        if "lo" not in doc or "hi" not in doc:
            raise ShapeError("saturation activation needs 'lo' and 'hi'")
        return ActivationSpec.saturation(float(doc["lo"]), float(doc["hi"]))
    return ActivationSpec(kind)


def _activation_to_doc(spec: ActivationSpec) -> dict:
    doc = {"kind": spec.kind}
    if spec.kind == "leaky_relu":
        doc["slope"] = spec.slope
    elif spec.kind == "saturation":
        doc["lo"] = spec.lo
        doc["hi"] = spec.hi
    return doc


def load_model(path: str | Path) -> ImplicitNetwork:
    """Load and validate a model file; errors name the offending field."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    try:
        n, r, q = int(doc["n"]), int(doc["r"]), int(doc["q"])
    except KeyError as exc:
        raise ShapeError(f"missing field {exc.args[0]!r}") from exc
    if min(n, r, q) < 1:
        raise ShapeError(f"n, r, q must be >= 1, got ({n}, {r}, {q})")
    A = _field_array(doc, "A", n * n).reshape(n, n)
    B = _field_array(doc, "B", n * r).reshape(n, r)
    C = _field_array(doc, "C", q * n).reshape(q, n)
    b = _field_array(doc, "b", n)
    c = _field_array(doc, "c", q)
    activation = _activation_from_doc(doc.get("activation", "relu"))
    eta = None
    if doc.get("eta") is not None:
        eta = _field_array(doc, "eta", n)
        if not np.all(eta > 0):
            raise ValueError("field 'eta' entries must be strictly positive")
    return ImplicitNetwork(A=A, B=B, C=C, b=b, c=c, activation=activation, eta=eta)


def _model_doc(net: ImplicitNetwork) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": net.n,
        "r": net.r,
        "q": net.q,
        "A": net.A.ravel().tolist(),
        "B": net.B.ravel().tolist(),
        "C": net.C.ravel().tolist(),
        "b": net.b.tolist(),
        "c": net.c.tolist(),
        "activation": _activation_to_doc(net.activation),
    }
    if net.eta is not None:
        doc["eta"] = net.eta.tolist()
    return doc


def save_model(net: ImplicitNetwork, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(_model_doc(net), indent=1) + "\n")


def load_dataset(path: str | Path) -> tuple[int, int, list[LabeledInput]]:
    """Read a JSON-lines dataset; returns (r, q, records)."""
    records: list[LabeledInput] = []
    with open(path) as fh:
        lines = [ln for ln in (line.strip() for line in fh) if ln]
    if not lines:
        raise ParseError(f"{path}: empty dataset file (missing header line)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: header line is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "r" not in header or "q" not in header:
        raise ParseError(f"{path}: first line must be a header object with 'r' and 'q'")
    r, q = int(header["r"]), int(header["q"])
    for i, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{i}: not valid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "input" not in rec or "label" not in rec:
            raise ShapeError(f"{path}:{i}: record needs 'input' and 'label'")
        u = np.asarray(rec["input"], dtype=np.float64)
        if u.ndim != 1 or u.shape[0] != r:
            raise ShapeError(f"{path}:{i}: input must have length {r}")
        if not np.all(np.isfinite(u)):
            raise ValueError(f"{path}:{i}: input contains NaN or Inf")
        label = int(rec["label"])
        if not 0 <= label < q:
            raise ShapeError(f"{path}:{i}: label {label} out of range for q={q}")
        records.append(LabeledInput(u=u, label=label))
    return r, q, records


def save_dataset(r: int, q: int, records: list[LabeledInput], path: str | Path) -> None:
    lines = [json.dumps({"r": r, "q": q})]
    lines += [json.dumps({"input": rec.u.tolist(), "label": rec.label}) for rec in records]
    atomic_write_text(path, "\n".join(lines) + "\n")


def synth_model(n: int, r: int, q: int, seed: int) -> ImplicitNetwork:
    """A random ReLU network that is well posed by construction.

    A comes from the mu <= 0 parametrization with T standard normal scaled
    by 1/sqrt(n) and eta = 1 (left implicit in the file). B and C are
    standard normal scaled by 1/sqrt(r) and 1/sqrt(n); biases are normal
    with spread 0.1.
    """
    from .network import build_wellposed_weights

    if min(n, r, q) < 1:
        raise ValueError(f"n, r, q must be >= 1, got ({n}, {r}, {q})")
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((n, n)) / np.sqrt(n)
    A = build_wellposed_weights(T, np.ones(n))
    B = rng.standard_normal((n, r)) / np.sqrt(r)
    C = rng.standard_normal((q, n)) / np.sqrt(n)
    b = 0.1 * rng.standard_normal(n)
    c = 0.1 * rng.standard_normal(q)
    return ImplicitNetwork(A=A, B=B, C=C, b=b, c=c, activation=ActivationSpec.relu())
