"""Plain-text parameter dump.

Layout::

    dgode-params 1
    config {...}              # JSON model configuration
    classes [...]
    speakers [...]
    [speaker.weight] 16 2     # section name, then the shape
    <one row per line, space separated, repr precision>
    [mixhop.gates] 2
    0.5 0.5

Values are written with ``repr`` so load(save(p)) reproduces every float.
"""
import json
from dataclasses import asdict, replace

import numpy as np

from .errors import ParseError
from .model import ModelConfig, init_params
from .odecore import OdeConfig

MAGIC = "dgode-params 1"


def config_to_dict(config):
    return asdict(config)


def config_from_dict(raw):
    raw = dict(raw)
    ode = OdeConfig(**raw.pop("ode", {}))
    raw["input_dims"] = tuple(raw.get("input_dims", ModelConfig.input_dims))
    return replace(ModelConfig(**raw), ode=ode)


def _row(values):
    return " ".join(repr(float(v)) for v in values)


def dumps(params):
    lines = [MAGIC,
             "config " + json.dumps(config_to_dict(params.config)),
             "classes " + json.dumps(list(params.classes)),
             "speakers " + json.dumps(list(params.speakers))]
    for name, arr in params.named_arrays().items():
        lines.append(f"[{name}] " + " ".join(str(n) for n in arr.shape))
        if arr.ndim == 1:
            lines.append(_row(arr))
        else:
            lines.extend(_row(r) for r in arr)
    return "\n".join(lines) + "\n"


def save_params(params, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(params))


def _meta(lines, idx, key):
    if idx >= len(lines) or not lines[idx].startswith(key + " "):
        raise ParseError(f"expected '{key}' record", line=idx + 1)
    try:
        return json.loads(lines[idx][len(key) + 1:])
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed {key} record", line=idx + 1) from exc


def loads(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError("not a parameter dump", line=1)
    try:
        config = config_from_dict(_meta(lines, 1, "config"))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad config record: {exc}", line=2) from exc
    classes = tuple(_meta(lines, 2, "classes"))
    speakers = tuple(_meta(lines, 3, "speakers"))
    params = init_params(config, seed=0, classes=classes, speakers=speakers)
    target = params.named_arrays()
    seen = set()
    i = 4
    while i < len(lines):
        head = lines[i].strip()
        if not head:
            i += 1
            continue
        if not head.startswith("["):
            raise ParseError("expected a section header", line=i + 1)
        name, _, shape_txt = head[1:].partition("]")
        if name not in target:
            raise ParseError(f"unknown parameter {name!r}", line=i + 1)
        arr = target[name]
        try:
            shape = tuple(int(s) for s in shape_txt.split())
        except ValueError as exc:
            raise ParseError("bad shape", line=i + 1) from exc
        if shape != arr.shape:
            raise ParseError(f"{name} has shape {shape}, expected {arr.shape}", line=i + 1)
        n_rows = 1 if arr.ndim == 1 else shape[0]
        rows = []
        for k in range(n_rows):
            lineno = i + 2 + k
            if lineno > len(lines):
                raise ParseError(f"truncated section {name}", line=lineno)
            try:
                rows.append([float(v) for v in lines[lineno - 1].split()])
            except ValueError as exc:
                raise ParseError("non-numeric value", line=lineno) from exc
        data = np.asarray(rows, dtype=float).reshape(-1) if rows else np.zeros(0)
        if data.size != arr.size:
            raise ParseError(f"{name}: wrong number of values", line=i + 2)
        arr[...] = data.reshape(arr.shape)
        seen.add(name)
        i += 1 + n_rows
    missing = set(target) - seen
    if missing:
        raise ParseError(f"missing parameters {sorted(missing)}", line=len(lines))
    return params


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
