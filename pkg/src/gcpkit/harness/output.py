"""CSV / JSON-lines writers with a metadata sidecar."""

from __future__ import annotations

import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .. import __version__


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no NaN/inf; keep them as strings so the output stays standard
        return v if math.isfinite(v) else _fmt(v)
    return v


def render(columns: list[str], rows: list[list], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(",".join(columns) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(v) for v in r) + "\n")
    else:
        for r in rows:
            buf.write(json.dumps(dict(zip(columns, (_jsonable(v) for v in r))), sort_keys=False) + "\n")
    return buf.getvalue()


def write_result(result, cfg, stream=None) -> None:
    """Rows go to ``cfg.out`` (or stdout); metadata goes to ``<out>.meta.json`` when writing a file."""
    text = render(result.columns, result.rows, cfg.format)
    meta = {"suite": cfg.suite, "version": __version__, "config": _jsonable(cfg.as_dict()),
            "columns": result.columns, **_jsonable(result.meta)}
    if cfg.out:
        out = Path(cfg.out)
        out.write_text(text)
        Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    else:
        (stream or sys.stdout).write(text)
