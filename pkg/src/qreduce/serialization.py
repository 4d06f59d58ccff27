"""JSON wire formats.

matrix       {"dim": n, "re": [[...]], "im": [[...]]}        (row-major)
observable   {"dim": n, "outcomes": [{"value": a, "projection": <matrix>}]}
superop      {"dim": n, "kind": "transfer" | "kraus" | "choi", "data": ...}
apparatus    {"label": s, "dim": n, "entries": [{"outcome": x, "superoperator": <superop>}]}
             or {"observable": <observable>, "output_states": [<matrix>, ...]}
model        {"sys_dim": d, "probe_dim": k, "probe_state": <matrix>,
              "unitary": <matrix>, "probe_observable": <observable>}
chain        {"apparatuses": [<apparatus>, ...]}, a bare list, or one apparatus
joint        {"entries": [{"x": ..., "y": ..., "p": ...}]}

``transfer`` data is a d^2 x d^2 matrix acting on column-stacked operators,
``choi`` data the d^2 x d^2 Choi matrix, ``kraus`` data a list of d x d
matrices. Emitters always write the ``transfer`` kind and the full apparatus
form, so parse -> emit -> parse reproduces values exactly.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from qreduce.apparatus import Apparatus, from_output_states, make_apparatus
from qreduce.dilation import IndirectModel
from qreduce.errors import ParseError
from qreduce.operators import DEFAULT_TOL, DiscreteObservable, Outcome, Tolerances
from qreduce.sequential import JointDistribution
from qreduce.superop import SuperOperator, from_choi, from_kraus


def _require(obj: Any, key: str, kind: str):
    if not isinstance(obj, dict):
        raise ParseError(f"{kind}: expected a JSON object, got {type(obj).__name__}")
    if key not in obj:
        raise ParseError(f"{kind}: missing field {key!r}")
    return obj[key]


def _number(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{what}: expected a number, got {v!r}")
    return float(v)


# --- matrices ---------------------------------------------------------------------


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj: Any) -> np.ndarray:
    n = _require(obj, "dim", "matrix")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError(f"matrix: dim must be a positive integer, got {n!r}")
    try:
        re = np.array(_require(obj, "re", "matrix"), dtype=float)
        im = np.array(obj.get("im", np.zeros((n, n)).tolist()), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix: non-numeric entries ({exc})") from None
    if re.shape != (n, n) or im.shape != (n, n):
        raise ParseError(f"matrix: expected {n}x{n} rows, got re {re.shape} / im {im.shape}")
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise ParseError("matrix: non-finite entries")
    return re + 1j * im


# --- observables and superoperators ----------------------------------------------


def observable_to_json(A: DiscreteObservable) -> dict:
    return {
        "dim": A.dim,
        "outcomes": [{"value": o.value, "projection": matrix_to_json(o.projection)} for o in A],
    }


def observable_from_json(obj: Any, tol: Tolerances = DEFAULT_TOL) -> DiscreteObservable:
    dim = _require(obj, "dim", "observable")
    outs = _require(obj, "outcomes", "observable")
    if not isinstance(outs, list):
        raise ParseError("observable: outcomes must be a list")
    pairs = [
        Outcome(_number(_require(o, "value", "outcome"), "outcome value"),
                matrix_from_json(_require(o, "projection", "outcome")))
        for o in outs
    ]
    return DiscreteObservable(dim, tuple(pairs), tol)


def superop_to_json(L: SuperOperator) -> dict:
    return {"dim": L.dim, "kind": "transfer", "data": matrix_to_json(L.transfer)}


def superop_from_json(obj: Any) -> SuperOperator:
    dim = _require(obj, "dim", "superoperator")
    kind = _require(obj, "kind", "superoperator")
    data = _require(obj, "data", "superoperator")
    if kind == "transfer":
        return SuperOperator(dim, matrix_from_json(data))
    if kind == "choi":
        L = from_choi(matrix_from_json(data))
        if L.dim != dim:
            raise ParseError(f"superoperator: Choi matrix is for dim {L.dim}, declared {dim}")
        return L
    if kind == "kraus":
        if not isinstance(data, list):
            raise ParseError("superoperator: kraus data must be a list of matrices")
        ops = [matrix_from_json(m) for m in data]
        if any(k.shape != (dim, dim) for k in ops):
            raise ParseError(f"superoperator: Kraus operators must be {dim}x{dim}")
        return from_kraus(ops, dim)
    raise ParseError(f"superoperator: unknown kind {kind!r}")


# --- apparatuses and models ------------------------------------------------------


def apparatus_to_json(app: Apparatus) -> dict:
    return {
        "label": app.label,
        "dim": app.dim,
        "entries": [
            {"outcome": x, "superoperator": superop_to_json(L)} for x, L in app.opdist.items()
        ],
    }


def apparatus_from_json(obj: Any, tol: Tolerances = DEFAULT_TOL, validate: bool = True) -> Apparatus:
    """Parse either apparatus form; ``validate=False`` skips construction checks (full form only)."""
    if is_compact_apparatus(obj):
        A, states = compact_apparatus_parts(obj, tol)
        return from_output_states(A, states, tol, obj.get("label"))
    label = obj.get("label", "apparatus") if isinstance(obj, dict) else None
    dim = _require(obj, "dim", "apparatus")
    rows = _require(obj, "entries", "apparatus")
    if not isinstance(rows, list) or not rows:
        raise ParseError("apparatus: entries must be a non-empty list")
    entries = {}
    for row in rows:
        x = _number(_require(row, "outcome", "apparatus entry"), "outcome")
        if x in entries:
            raise ParseError(f"apparatus: duplicate outcome {x}")
        L = superop_from_json(_require(row, "superoperator", "apparatus entry"))
        if L.dim != dim:
            raise ParseError(f"apparatus: entry of dim {L.dim} in apparatus of dim {dim}")
        entries[x] = L
    return make_apparatus(label, entries, tol, validate)


def is_compact_apparatus(obj: Any) -> bool:
    return isinstance(obj, dict) and "output_states" in obj


def compact_apparatus_parts(obj: Any, tol: Tolerances = DEFAULT_TOL) -> tuple[DiscreteObservable, list[np.ndarray]]:
    """Observable and output-state matrices of the compact apparatus form."""
    A = observable_from_json(_require(obj, "observable", "apparatus"), tol)
    states = obj["output_states"]
    if not isinstance(states, list):
        raise ParseError("apparatus: output_states must be a list")
    return A, [matrix_from_json(m) for m in states]


def model_to_json(model: IndirectModel) -> dict:
    return {
        "sys_dim": model.sys_dim,
        "probe_dim": model.probe_dim,
        "probe_state": matrix_to_json(model.probe_state),
        "unitary": matrix_to_json(model.unitary),
        "probe_observable": observable_to_json(model.probe_observable),
    }


def model_from_json(obj: Any, tol: Tolerances = DEFAULT_TOL) -> IndirectModel:
    return IndirectModel(
        _require(obj, "sys_dim", "model"),
        _require(obj, "probe_dim", "model"),
        matrix_from_json(_require(obj, "probe_state", "model")),
        matrix_from_json(_require(obj, "unitary", "model")),
        observable_from_json(_require(obj, "probe_observable", "model"), tol),
        tol,
    )


def chain_from_json(obj: Any, tol: Tolerances = DEFAULT_TOL) -> list[Apparatus]:
    if isinstance(obj, dict) and "apparatuses" not in obj:
        obj = [obj]  # a single apparatus is a one-step chain
    items = obj.get("apparatuses") if isinstance(obj, dict) else obj
    if not isinstance(items, list) or not items:
        raise ParseError("chain: expected a non-empty list of apparatuses")
    return [apparatus_from_json(a, tol) for a in items]


def joint_to_json(j: JointDistribution) -> dict:
    return {"entries": [{"x": x, "y": y, "p": p} for (x, y), p in j.entries.items()]}


def joint_from_json(obj: Any) -> JointDistribution:
    rows = _require(obj, "entries", "joint distribution")
    return JointDistribution({
        (_number(_require(r, "x", "entry"), "x"), _number(_require(r, "y", "entry"), "y")):
            _number(_require(r, "p", "entry"), "p")
        for r in rows
    })


def trajectory_record(step: int, outcome: float, state: np.ndarray, run: int | None = None) -> dict:
    rec = {"step": step, "outcome": outcome, "state": matrix_to_json(state)}
    if run is not None:
        rec = {"run": run, **rec}
    return rec


# --- files ------------------------------------------------------------------------


def load_json(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from None


def dump_json(obj: Any, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def detect_kind(obj: Any) -> str:
    """Classify a parsed document: ``model``, ``superoperator``, ``apparatus`` or ``observable``."""
    if isinstance(obj, dict):
        if "sys_dim" in obj:
            return "model"
        if "kind" in obj:
            return "superoperator"
        if "entries" in obj or "output_states" in obj:
            return "apparatus"
        if "outcomes" in obj:
            return "observable"
    raise ParseError("unrecognized document: expected an apparatus, superoperator or model")
