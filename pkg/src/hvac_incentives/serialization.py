"""
JSON and CSV encodings of models, specs and results.

Every JSON document carries ``schema_version`` and a ``kind`` tag; both are
checked on load.  Floats are written with ``repr`` precision, so a load
followed by a dump reproduces the same bytes.  Writes go to a temporary file
in the target directory that is renamed into place, so a failing command
never leaves partial output behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynamics import BuildingModel, DisturbanceTrace, HvacConfiguration, SimulationOutput
from .errors import SchemaError
from .static_model import Grid, KeyPoints, SampleSpec, StaticModel

SCHEMA_VERSION = "1.0"


# --- atomic file output ---------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, doc: dict) -> None:
    atomic_write_text(path, dumps(doc))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, rows))


# --- loading helpers ------------------------------------------------------

def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"no such file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return doc


def _envelope(kind: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **body}


def _check(doc: dict, kind: str, fields) -> None:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"schema_version must be {SCHEMA_VERSION!r}, got {version!r}")
    if doc.get("kind") != kind:
        raise SchemaError(f"expected a {kind!r} document, got kind={doc.get('kind')!r}")
    missing = [f for f in fields if f not in doc]
    if missing:
        raise SchemaError(f"{kind}: missing field(s) {', '.join(missing)}")


def _floats(x):
    return np.asarray(x, dtype=float).tolist()


# --- dynamics -------------------------------------------------------------

_MODEL_FIELDS = ("A", "B", "C", "t_s", "a", "b", "c", "comfort_band", "dt_steps")


def building_model_to_dict(model: BuildingModel) -> dict:
    return _envelope("building_model", {
        "name": model.name,
        "n": model.n,
        "A": _floats(model.A), "B": _floats(model.B), "C": _floats(model.C),
        "t_s": _floats(model.t_s),
        "a": model.a, "b": model.b, "c": model.c,
        "comfort_band": _floats(model.comfort_band),
        "dt_steps": model.dt_steps,
    })


def building_model_from_dict(doc: dict) -> BuildingModel:
    _check(doc, "building_model", _MODEL_FIELDS)
    return BuildingModel(**{k: doc[k] for k in _MODEL_FIELDS}, name=doc.get("name", "unnamed"))


_CFG_FIELDS = ("F_min", "F_max", "T_d", "mode", "K_F", "K_R", "R_max")


def configuration_to_dict(cfg: HvacConfiguration) -> dict:
    return _envelope("hvac_configuration", {
        "F_min": _floats(cfg.F_min), "F_max": _floats(cfg.F_max), "T_d": _floats(cfg.T_d),
        "mode": cfg.mode, "K_F": cfg.K_F, "K_R": cfg.K_R, "R_max": _floats(cfg.R_max),
    })


def configuration_from_dict(doc: dict) -> HvacConfiguration:
    _check(doc, "hvac_configuration", _CFG_FIELDS)
    return HvacConfiguration(**{k: doc[k] for k in _CFG_FIELDS})


def disturbance_to_dict(d: DisturbanceTrace) -> dict:
    return _envelope("disturbance_trace", {"o": _floats(d.o), "Q": _floats(d.Q)})


def disturbance_from_dict(doc: dict) -> DisturbanceTrace:
    _check(doc, "disturbance_trace", ("o", "Q"))
    return DisturbanceTrace(o=doc["o"], Q=doc["Q"])


def simulation_output_to_dict(out: SimulationOutput) -> dict:
    return _envelope("simulation_output", {"S": out.S, "E": out.E, "trace": _floats(out.trace)})


# --- static model ---------------------------------------------------------

_SPEC_FIELDS = ("F_min_range", "F_max_range", "mode_range", "o_range", "Q_range", "T_d", "K_F",
                "K_R", "R_max", "o_profile", "q_profile", "N", "seed")


def sample_spec_to_dict(spec: SampleSpec) -> dict:
    body = {}
    for k in _SPEC_FIELDS:
        v = getattr(spec, k)
        body[k] = list(v) if isinstance(v, tuple) else v
    return _envelope("sample_spec", body)


def sample_spec_from_dict(doc: dict) -> SampleSpec:
    _check(doc, "sample_spec", _SPEC_FIELDS)
    kw = {}
    for k in _SPEC_FIELDS:
        v = doc[k]
        if k == "mode_range":
            v = tuple(int(x) for x in v)
        elif isinstance(v, list):
            v = tuple(float(x) for x in v)
        elif k in ("N", "seed"):
            v = int(v)
        else:
            v = float(v)
        kw[k] = v
    return SampleSpec(**kw)


def encode_mask_rle(mask: np.ndarray) -> list[list[list[int]]]:
    """Per row ``i``, the list of ``[start, length]`` runs of true cells along ``j``."""
    rows = []
    for row in np.asarray(mask, dtype=bool):
        padded = np.concatenate(([False], row, [False])).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        rows.append([[int(s), int(e - s)] for s, e in zip(edges[::2], edges[1::2])])
    return rows


def decode_mask_rle(rows, shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    if len(rows) != shape[0]:
        raise SchemaError(f"mask has {len(rows)} rows, grid has {shape[0]}")
    for i, runs in enumerate(rows):
        for start, length in runs:
            if start < 0 or length < 1 or start + length > shape[1]:
                raise SchemaError(f"mask row {i}: run [{start}, {length}] leaves the grid")
            mask[i, start:start + length] = True
    return mask


def grid_to_dict(g: Grid) -> dict:
    return {"s_lo": g.s_lo, "s_hi": g.s_hi, "n_s": g.n_s, "e_lo": g.e_lo, "e_hi": g.e_hi, "n_e": g.n_e}


def static_model_to_dict(static: StaticModel) -> dict:
    work = [None if not f else float(w) for f, w in zip(static.feasible.ravel(), static.work.ravel())]
    return _envelope("static_model", {
        "grid": grid_to_dict(static.grid),
        "boundary_tol": static.boundary_tol,
        "key_points": None if static.key_points is None else static.key_points.as_dict(),
        "feasible_rle": encode_mask_rle(static.feasible),
        "work": work,
    })


def static_model_from_dict(doc: dict) -> StaticModel:
    _check(doc, "static_model", ("grid", "feasible_rle", "work", "key_points"))
    try:
        g = doc["grid"]
        grid = Grid(float(g["s_lo"]), float(g["s_hi"]), int(g["n_s"]),
                    float(g["e_lo"]), float(g["e_hi"]), int(g["n_e"]))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"static_model.grid is malformed: {exc}") from None
    feasible = decode_mask_rle(doc["feasible_rle"], grid.shape)
    flat = doc["work"]
    if len(flat) != grid.n_s * grid.n_e:
        raise SchemaError(f"work has {len(flat)} values, grid has {grid.n_s * grid.n_e} cells")
    work = np.array([np.nan if v is None else float(v) for v in flat]).reshape(grid.shape)
    if np.any(np.isnan(work[feasible])):
        raise SchemaError("work is null on a feasible cell")
    kp = None if doc["key_points"] is None else KeyPoints.from_dict(doc["key_points"])
    return StaticModel(grid=grid, feasible=feasible, work=work, key_points=kp,
                       boundary_tol=int(doc.get("boundary_tol", 0)))


# --- convenience loaders --------------------------------------------------

def load_building_model(path) -> BuildingModel:
    return building_model_from_dict(read_json(path))


def load_configuration(path) -> HvacConfiguration:
    return configuration_from_dict(read_json(path))


def load_disturbance(path) -> DisturbanceTrace:
    return disturbance_from_dict(read_json(path))


def load_sample_spec(path) -> SampleSpec:
    return sample_spec_from_dict(read_json(path))


def load_static_model(path) -> StaticModel:
    return static_model_from_dict(read_json(path))


_KP_FIELDS = ("alpha", "omega", "S_min", "S_max", "S_4", "E_min", "E_max", "E_opt", "E_3")


def key_points_to_dict(kp: KeyPoints) -> dict:
    return _envelope("key_points", kp.as_dict())


def key_points_from_dict(doc: dict) -> KeyPoints:
    _check(doc, "key_points", _KP_FIELDS)
    try:
        return KeyPoints.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"key_points: {exc}") from None


def load_key_points(path) -> KeyPoints:
    return key_points_from_dict(read_json(path))
