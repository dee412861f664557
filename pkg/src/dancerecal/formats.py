"""On-disk JSON formats: motion sequences, pooling params, skeletons, beat
tracks, geometric templates and reports.

Writers are canonical: fixed key order, shortest round-trip float repr and a
trailing newline, so equal objects serialize to identical bytes. Files are
written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .errors import (
    ConfigurationError,
    InvariantError,
    LayoutError,
    NonFiniteError,
    ParseError,
    SchemaError,
)
from .metrics import BeatTrack, Template
from .motion import LAYOUT, TOTAL_DIMS, PrimitiveSequence, Skeleton
from .pooling import SIGNAL_LENGTH, BatchNorm, ConvLayer, PoolingParams

FORMAT_VERSION = 1

_num = {"type": "number"}
_int = {"type": "integer"}
_vec = {"type": "array", "items": _num}

MOTION_SCHEMA = {
    "type": "object",
    "required": ["format_version", "fps", "layout", "kind", "data"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "fps": {"type": "number", "exclusiveMinimum": 0},
        "kind": {"enum": ["coarse", "fine", "mixed"]},
        "layout": {
            "type": "object",
            "required": ["foot", "root_translation", "root_rotation", "joint_rotations"],
            "properties": {k: _int for k in
                           ("foot", "root_translation", "root_rotation", "joint_rotations", "total")},
        },
        "batch": _int,
        "length": _int,
        "data": {"type": "array", "minItems": 1,
                 "items": {"type": "array", "minItems": 1, "items": _vec}},
    },
}

_BATCHNORM_SCHEMA = {
    "type": "object",
    "required": ["running_mean", "running_var", "gamma", "beta"],
    "properties": {"running_mean": _vec, "running_var": _vec, "gamma": _vec, "beta": _vec,
                   "epsilon": _num},
}

PARAMS_SCHEMA = {
    "type": "object",
    "required": ["format_version", "normalize", "conv_layers"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "normalize": {"type": "boolean"},
        "ln_gamma": {"type": "array", "items": _vec},
        "ln_beta": {"type": "array", "items": _vec},
        "conv_layers": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["in_channels", "out_channels", "kernel_size", "weights", "bias",
                             "activation"],
                "properties": {
                    "in_channels": {"type": "integer", "minimum": 1},
                    "out_channels": {"type": "integer", "minimum": 1},
                    "kernel_size": {"type": "integer", "minimum": 1},
                    "weights": _vec,
                    "bias": _vec,
                    "activation": {"enum": ["identity", "tanh"]},
                    "batchnorm": {"oneOf": [{"type": "null"}, _BATCHNORM_SCHEMA]},
                },
            },
        },
    },
}

SKELETON_SCHEMA = {
    "type": "object",
    "required": ["joint_names", "parents", "offsets", "mirror_pairs", "foot_joints"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "joint_names": {"type": "array", "items": {"type": "string"}},
        "parents": {"type": "array", "items": _int},
        "offsets": {"type": "array", "items": {"type": "array", "items": _num,
                                               "minItems": 3, "maxItems": 3}},
        "mirror_pairs": {"type": "array", "items": {"type": "array", "items": _int,
                                                    "minItems": 2, "maxItems": 2}},
        "foot_joints": {"type": "array", "items": _int, "minItems": 2},
    },
}

BEATS_SCHEMA = {
    "type": "object",
    "required": ["fps", "times"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "fps": {"type": "number", "exclusiveMinimum": 0},
        "times": _vec,
    },
}

TEMPLATES_SCHEMA = {
    "type": "object",
    "required": ["templates"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "templates": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "kind", "joint_a", "joint_b", "margin"],
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["above", "near"]},
                    "joint_a": {"type": ["string", "integer"]},
                    "joint_b": {"type": ["string", "integer"]},
                    "margin": _num,
                },
            },
        },
    },
}

_nullable_num = {"type": ["number", "null"]}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["format_version", "fid_k", "fid_g", "div_k", "div_g", "fsr", "bas",
                 "boundary_discontinuity", "runtime_ms", "config"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "fid_k": {"type": "number", "minimum": 0},
        "fid_g": {"type": "number", "minimum": 0},
        "div_k": {"type": "number", "minimum": 0},
        "div_g": {"type": "number", "minimum": 0},
        "fsr": {"type": "number", "minimum": 0, "maximum": 1},
        "bas": {"type": "number", "minimum": 0, "maximum": 1},
        "boundary_discontinuity": {
            "type": "object", "required": ["mean", "per_junction"],
            "properties": {"mean": _nullable_num, "per_junction": {"type": "array"}},
        },
        "runtime_ms": {"type": "number", "minimum": 0},
        "config": {
            "type": "object",
            "required": ["fsr_thresholds", "bas_sigma", "templates_sha256", "skeleton_sha256"],
        },
    },
}


# --- helpers ------------------------------------------------------------------

def _field(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _load_json(path):
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _validate(doc, schema, path):
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(doc))
    if err is not None:
        raise SchemaError(_field(err.absolute_path), f"{err.message} (in {path})")


def _finite(values, field, path):
    a = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(a))[0])
        loc = field + "".join(f"[{i}]" for i in idx)
        raise NonFiniteError(f"{path}: non-finite value at {loc}")
    return a


def _fmt(x) -> str:
    if isinstance(x, float):
        if not math.isfinite(x):
            raise NonFiniteError(f"cannot serialize non-finite value {x!r}")
        return repr(x)
    return json.dumps(x)


def _dumps(obj, indent=0, step=2) -> str:
    """Canonical JSON; lists of scalars stay on one line."""
    pad = " " * (indent + step)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dumps(v, indent + step, step)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        items = [pad + _dumps(v, indent + step, step) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + " " * indent + "]"
    if isinstance(obj, np.ndarray):
        return _dumps(obj.tolist(), indent, step)
    if isinstance(obj, (np.floating,)):
        return _fmt(float(obj))
    if isinstance(obj, (np.integer,)):
        return str(int(obj))
    return _fmt(obj)


def canonical_json(obj) -> str:
    return _dumps(obj) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        # mkstemp creates 0600; give the file the permissions open() would
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# --- motion -------------------------------------------------------------------

def motion_to_dict(seq: PrimitiveSequence) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "fps": float(seq.fps),
        "kind": seq.kind,
        "layout": LAYOUT.as_dict(),
        "batch": seq.batch,
        "length": seq.length,
        "data": seq.data.tolist(),
    }


def dumps_motion(seq: PrimitiveSequence) -> str:
    if not np.all(np.isfinite(seq.data)):
        raise NonFiniteError("refusing to write a sequence with non-finite values")
    return canonical_json(motion_to_dict(seq))


def write_motion(seq: PrimitiveSequence, path) -> None:
    atomic_write_text(path, dumps_motion(seq))


def motion_from_dict(doc, path="<memory>") -> PrimitiveSequence:
    _validate(doc, MOTION_SCHEMA, path)
    expected = LAYOUT.as_dict()
    for key, n in expected.items():
        if key in doc["layout"] and doc["layout"][key] != n:
            raise LayoutError(f"{path}: layout.{key} is {doc['layout'][key]}, expected {n}")
    declared = sum(doc["layout"][k] for k in expected if k != "total")
    if declared != TOTAL_DIMS:
        raise LayoutError(f"{path}: layout sums to {declared}, expected {TOTAL_DIMS}")
    data = doc["data"]
    n = len(data[0])
    for b, row in enumerate(data):
        if len(row) != n:
            raise LayoutError(f"{path}: data[{b}] has {len(row)} primitives, expected {n}")
        for i, prim in enumerate(row):
            if len(prim) != TOTAL_DIMS:
                raise LayoutError(f"{path}: data[{b}][{i}] has {len(prim)} channels, expected {TOTAL_DIMS}")
    for key, actual in (("batch", len(data)), ("length", n)):
        if key in doc and doc[key] != actual:
            raise LayoutError(f"{path}: {key} is {doc[key]} but data has {actual}")
    arr = _finite(data, "data", path)
    return PrimitiveSequence(arr, fps=doc["fps"], kind=doc["kind"])


def loads_motion(text: str, path="<memory>") -> PrimitiveSequence:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return motion_from_dict(doc, path)


def read_motion(path) -> PrimitiveSequence:
    return motion_from_dict(_load_json(path), path)


# --- pooling params -----------------------------------------------------------

def params_to_dict(params: PoolingParams) -> dict:
    layers = []
    for layer in params.conv_layers:
        d = {
            "in_channels": layer.in_channels,
            "out_channels": layer.out_channels,
            "kernel_size": layer.kernel_size,
            "weights": layer.weights.reshape(-1).tolist(),
            "bias": layer.bias.tolist(),
            "activation": layer.activation,
        }
        if layer.batchnorm is not None:
            bn = layer.batchnorm
            d["batchnorm"] = {
                "running_mean": bn.running_mean.tolist(),
                "running_var": bn.running_var.tolist(),
                "gamma": bn.gamma.tolist(),
                "beta": bn.beta.tolist(),
                "epsilon": bn.epsilon,
            }
        layers.append(d)
    return {
        "format_version": FORMAT_VERSION,
        "normalize": params.normalize,
        "ln_gamma": params.ln_gamma.tolist(),
        "ln_beta": params.ln_beta.tolist(),
        "conv_layers": layers,
    }


def dumps_params(params: PoolingParams) -> str:
    return canonical_json(params_to_dict(params))


def write_params(params: PoolingParams, path) -> None:
    atomic_write_text(path, dumps_params(params))


def params_from_dict(doc, path="<memory>") -> PoolingParams:
    _validate(doc, PARAMS_SCHEMA, path)
    shape = (2, SIGNAL_LENGTH)
    ln = {}
    for key, default in (("ln_gamma", np.ones(shape)), ("ln_beta", np.zeros(shape))):
        if key in doc:
            a = _finite(doc[key], key, path)
            if a.shape != shape:
                raise SchemaError(key, f"expected shape {shape}, got {a.shape} (in {path})")
            ln[key] = a
        else:
            ln[key] = default
    layers = []
    for i, d in enumerate(doc["conv_layers"]):
        where = f"conv_layers[{i}]"
        cin, cout, k = d["in_channels"], d["out_channels"], d["kernel_size"]
        if k % 2 == 0:
            raise SchemaError(f"{where}.kernel_size", f"must be odd, got {k} (in {path})")
        w = _finite(d["weights"], f"{where}.weights", path)
        if w.size != cout * cin * k:
            raise SchemaError(f"{where}.weights",
                              f"expected {cout * cin * k} values, got {w.size} (in {path})")
        b = _finite(d["bias"], f"{where}.bias", path)
        if b.size != cout:
            raise SchemaError(f"{where}.bias", f"expected {cout} values, got {b.size} (in {path})")
        bn = None
        if d.get("batchnorm") is not None:
            bd = d["batchnorm"]
            parts = {}
            for key in ("running_mean", "running_var", "gamma", "beta"):
                parts[key] = _finite(bd[key], f"{where}.batchnorm.{key}", path)
                if parts[key].size != cout:
                    raise SchemaError(f"{where}.batchnorm.{key}",
                                      f"expected {cout} values (in {path})")
            eps = float(bd.get("epsilon", 1e-5))
            _finite(eps, f"{where}.batchnorm.epsilon", path)
            try:
                bn = BatchNorm(epsilon=eps, **parts)
            except ConfigurationError as exc:
                raise InvariantError(f"{path}: {where}: {exc}") from None
        try:
            layers.append(ConvLayer(cin, cout, k, w.reshape(cout, cin, k), b, d["activation"], bn))
        except ConfigurationError as exc:
            raise InvariantError(f"{path}: {where}: {exc}") from None
    try:
        return PoolingParams(tuple(layers), doc["normalize"], ln["ln_gamma"], ln["ln_beta"])
    except ConfigurationError as exc:
        raise InvariantError(f"{path}: {exc}") from None


def read_params(path) -> PoolingParams:
    return params_from_dict(_load_json(path), path)


# --- skeleton -----------------------------------------------------------------

def skeleton_from_dict(doc, path="<memory>") -> Skeleton:
    _validate(doc, SKELETON_SCHEMA, path)
    _finite(doc["offsets"], "offsets", path)
    try:
        return Skeleton(doc["joint_names"], doc["parents"], doc["offsets"],
                        doc["mirror_pairs"], doc["foot_joints"])
    except ConfigurationError as exc:
        raise InvariantError(f"{path}: {exc}") from None


def read_skeleton(path) -> Skeleton:
    return skeleton_from_dict(_load_json(path), path)


def write_skeleton(skeleton: Skeleton, path) -> None:
    atomic_write_text(path, canonical_json({"format_version": FORMAT_VERSION, **skeleton.as_dict()}))


# --- beats --------------------------------------------------------------------

def beats_from_dict(doc, path="<memory>") -> BeatTrack:
    _validate(doc, BEATS_SCHEMA, path)
    times = _finite(doc["times"], "times", path)
    try:
        return BeatTrack(times, doc["fps"])
    except InvariantError as exc:
        raise InvariantError(f"{path}: {exc}") from None


def read_beats(path) -> BeatTrack:
    return beats_from_dict(_load_json(path), path)


def write_beats(track: BeatTrack, path) -> None:
    atomic_write_text(path, canonical_json({"format_version": FORMAT_VERSION,
                                            "fps": track.fps, "times": track.times.tolist()}))


# --- templates ----------------------------------------------------------------

def templates_from_doc(doc, path="<memory>") -> list:
    _validate(doc, TEMPLATES_SCHEMA, path)
    out = []
    for i, d in enumerate(doc["templates"]):
        _finite(d["margin"], f"templates[{i}].margin", path)
        out.append(Template(d["name"], d["kind"], d["joint_a"], d["joint_b"], float(d["margin"])))
    names = [t.name for t in out]
    if len(set(names)) != len(names):
        raise InvariantError(f"{path}: template names must be unique")
    return out


def read_templates(path) -> list:
    return templates_from_doc(_load_json(path), path)


def write_templates(templates, path) -> None:
    atomic_write_text(path, canonical_json({"format_version": FORMAT_VERSION,
                                            "templates": [t.as_dict() for t in templates]}))


# --- reports ------------------------------------------------------------------

def write_report(report: dict, path, schema=None) -> None:
    if schema is not None:
        _validate(report, schema, path)
    atomic_write_text(path, canonical_json(report))


def read_report(path) -> dict:
    return _load_json(path)


def validate_report(report: dict) -> None:
    _validate(report, REPORT_SCHEMA, "<report>")
