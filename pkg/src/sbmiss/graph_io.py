"""On-disk formats: graph CSV, assignment CSV, and JSON documents.

Graph CSV: header ``i,j,value``; one row per ordered pair i != j with
1-based indices and either a number or the literal ``NA`` for an
unobserved dyad.  Round-trips are lossless for finite values and the
mask.  Self-dyad rows, duplicates, and malformed rows are rejected with
the offending line number.

JSON documents (ground truth, fit results, experiment reports) carry a
``schema_version`` field and no timestamps, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .model import Assignment, SbmParams
from .sampling import Mask, MaskDesign
from .simulate import GroundTruth, ObservedGraph

__all__ = [
    "SCHEMA_VERSION",
    "write_graph",
    "read_graph",
    "write_assignment",
    "read_assignment",
    "write_truth",
    "read_truth",
    "write_fit",
    "read_fit",
    "write_json",
    "read_json",
]

SCHEMA_VERSION = 1


def write_graph(path, g: ObservedGraph) -> None:
    obs = g.mask.observed
    vals = g.values
    n = g.n
    lines = ["i,j,value"]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            v = repr(float(vals[i, j])) if obs[i, j] else "NA"
            lines.append(f"{i + 1},{j + 1},{v}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path, family_id: str | None = None) -> ObservedGraph:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "i,j,value":
        raise ParseError("expected header 'i,j,value'", line=1)
    entries = []
    seen = set()
    max_idx = 0
    for lineno, raw in enumerate(text[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", line=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"bad indices {parts[0]!r},{parts[1]!r}", line=lineno) from None
        if i < 1 or j < 1:
            raise ParseError("indices are 1-based and positive", line=lineno)
        if i == j:
            raise ParseError(f"self-dyad ({i},{j}) not allowed", line=lineno)
        if (i, j) in seen:
            raise ParseError(f"duplicate dyad ({i},{j})", line=lineno)
        seen.add((i, j))
        val = parts[2].strip()
        if val == "NA":
            entries.append((i - 1, j - 1, None))
        else:
            try:
                entries.append((i - 1, j - 1, float(val)))
            except ValueError:
                raise ParseError(f"bad value {val!r}", line=lineno) from None
        max_idx = max(max_idx, i, j)
    n = max_idx
    values = np.full((n, n), np.nan)
    observed = np.zeros((n, n), dtype=bool)
    for i, j, v in entries:
        if v is not None:
            values[i, j] = v
            observed[i, j] = True
    return ObservedGraph(values, Mask(observed), family_id=family_id)


def write_assignment(path, z: Assignment) -> None:
    """Single CSV column of 1-based labels."""
    lines = ["label"] + [str(int(l) + 1) for l in z.labels]
    Path(path).write_text("\n".join(lines) + "\n")


def read_assignment(path, n_blocks: int | None = None) -> Assignment:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "label":
        raise ParseError("expected header 'label'", line=1)
    labels = []
    for lineno, raw in enumerate(text[1:], start=2):
        if not raw.strip():
            continue
        try:
            lab = int(raw)
        except ValueError:
            raise ParseError(f"bad label {raw!r}", line=lineno) from None
        if lab < 1:
            raise ParseError("labels are 1-based", line=lineno)
        labels.append(lab - 1)
    labels = np.array(labels, dtype=np.int64)
    q = n_blocks if n_blocks is not None else int(labels.max()) + 1
    return Assignment(labels, q)


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_truth(path, truth: GroundTruth) -> None:
    seed = truth.seed
    if isinstance(seed, (tuple, np.ndarray)):
        seed = list(np.asarray(seed).tolist())
    write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "params": truth.params_star.to_dict(),
            "z_star": [int(l) + 1 for l in truth.z_star.labels],
            "design": truth.design.to_dict(),
            "seed": seed,
        },
    )


def read_truth(path) -> dict:
    d = read_json(path)
    params = SbmParams.from_dict(d["params"])
    labels = np.asarray(d["z_star"], dtype=np.int64) - 1
    return {
        "params_star": params,
        "z_star": Assignment(labels, params.n_blocks),
        "design": MaskDesign.from_dict(d["design"]),
        "seed": d["seed"],
        "schema_version": d["schema_version"],
    }


def write_fit(path, fit) -> None:
    write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "params": fit.params.to_dict(),
            "map_labels": [int(l) + 1 for l in fit.map_labels.labels],
            "elbo_trace": [float(v) for v in fit.elbo_trace],
            "n_iters": fit.n_iters,
            "converged": fit.converged,
            "restart_id": fit.restart_id,
            "diagnostics": {
                "restart_final_elbos": [
                    float(v) for v in fit.diagnostics.get("restart_final_elbos", [])
                ],
                "prop_floor_restarts": fit.diagnostics.get("prop_floor_restarts", 0),
                "empty_cell_restarts": fit.diagnostics.get("empty_cell_restarts", 0),
            },
        },
    )


def read_fit(path) -> dict:
    d = read_json(path)
    params = SbmParams.from_dict(d["params"])
    labels = np.asarray(d["map_labels"], dtype=np.int64) - 1
    d["params"] = params
    d["map_labels"] = Assignment(labels, params.n_blocks)
    return d
