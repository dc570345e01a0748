"""Chain-spec parsing and report writers.

Chain specs are JSON documents::

    {"type": "homogeneous_rw", "g": 1, "d": 1,
     "increments": {"-1": 0.75, "1": 0.25},
     "boundary_rows": [[0.75, 0.25]]}

``"type": "band"`` additionally takes ``i0`` and ``N``; its boundary rows may
have any finite support, optional ``tail_rows`` (offset maps for rows
``i0, i0+1, ...``) precede the homogeneous ``increments``, and
``limit_increments`` (if present) must equal ``increments``.
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .bounds import IncrementLaw
from .errors import BandChainError, ChainSpecError
from .kernel import (
    BandKernel,
    HomogeneousTail,
    VaryingTail,
    band_kernel,
    build_homogeneous_rw,
)

SWEEP_HEADER = ["k", "rho_k", "unit_count", "backward_error", "wall_ms"]
STATIONARY_HEADER = ["i", "pi", "ratio"]


def fmt(x) -> str:
    """Float with 17 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.17g}"


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _increments(doc, key, text) -> dict[int, float]:
    raw = doc.get(key)
    if not isinstance(raw, dict) or not raw:
        raise ChainSpecError("expected a non-empty object of offset -> probability",
                             field=key, line=_line_of(text, key))
    out = {}
    for m, a in raw.items():
        try:
            out[int(m)] = float(a)
        except (TypeError, ValueError):
            raise ChainSpecError(f"bad entry {m!r}: {a!r}", field=key,
                                 line=_line_of(text, key)) from None
    return out


def _rows(doc, key, text) -> list:
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise ChainSpecError("expected an array of rows", field=key, line=_line_of(text, key))
    rows = []
    for i, r in enumerate(raw):
        try:
            if isinstance(r, list):
                rows.append([float(p) for p in r])
            elif isinstance(r, dict):
                rows.append({int(j): float(p) for j, p in r.items()})
            else:
                raise TypeError
        except (TypeError, ValueError):
            raise ChainSpecError(f"row {i} must be an array of numbers or an object "
                                 f"column -> probability", field=key,
                                 line=_line_of(text, key)) from None
    return rows


def _int(doc, key, text, default=None) -> int:
    if key not in doc:
        if default is not None:
            return default
        raise ChainSpecError("missing required field", field=key)
    v = doc[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ChainSpecError(f"expected an integer, got {v!r}", field=key,
                             line=_line_of(text, key))
    return v


def parse_chain_spec(text: str, name: str = "") -> BandKernel:
    """Build a :class:`BandKernel` from chain-spec JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainSpecError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ChainSpecError("top level must be an object", line=1)
    kind = doc.get("type")
    try:
        if kind == "homogeneous_rw":
            g = _int(doc, "g", text)
            d = _int(doc, "d", text)
            kernel = build_homogeneous_rw(g, d, _increments(doc, "increments", text),
                                          _rows(doc, "boundary_rows", text), name=name)
            for key in ("i0", "N"):
                if key in doc and doc[key] != getattr(kernel, key):
                    raise ChainSpecError(f"inconsistent with g/d (expected {getattr(kernel, key)})",
                                         field=key, line=_line_of(text, key))
            return kernel
        if kind == "band":
            incs = _increments(doc, "increments", text)
            law = IncrementLaw(incs)
            if "limit_increments" in doc:
                lim = IncrementLaw(_increments(doc, "limit_increments", text))
                if lim != law:
                    raise ChainSpecError("must equal the eventual tail increments",
                                         field="limit_increments",
                                         line=_line_of(text, "limit_increments"))
            i0 = _int(doc, "i0", text)
            N = _int(doc, "N", text, default=max(law.g, law.d, 1))
            tail_rows = [{int(m): float(p) for m, p in r.items()}
                         for r in doc.get("tail_rows", [])]
            if tail_rows:
                tail = VaryingTail(_ExplicitThenHomogeneous(i0, tuple(
                    tuple(sorted(r.items())) for r in tail_rows), law), law)
            else:
                tail = HomogeneousTail(law)
            return band_kernel(i0, N, _rows(doc, "boundary_rows", text), tail, name=name)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BandChainError):
            raise
        raise ChainSpecError(f"malformed value: {exc}") from None
    raise ChainSpecError(f"unknown type {kind!r} (expected 'homogeneous_rw' or 'band')",
                         field="type", line=_line_of(text, "type"))


class _ExplicitThenHomogeneous:
    """Row rule: explicit offset maps for the first rows of the tail, then ``law``."""

    def __init__(self, i0, rows, law):
        self.i0 = i0
        self.rows = rows
        self.law = law

    def __call__(self, i: int) -> dict[int, float]:
        j = i - self.i0
        offsets = dict(self.rows[j]) if j < len(self.rows) else self.law.as_dict()
        return {i + m: p for m, p in offsets.items() if p != 0.0}


def load_chain_spec(path) -> BandKernel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"chain spec not found: {path}")
    return parse_chain_spec(path.read_text(), name=path.stem)


def write_sweep_csv(results, fh) -> None:
    """Sweep table; an ``error`` column is appended only when some k failed."""
    failed = any(r.error for r in results)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER + (["error"] if failed else []))
    for r in results:
        row = [r.k, fmt(r.rho_k), "" if r.unit_count is None else r.unit_count,
               fmt(r.backward_error), fmt(r.wall_ms)]
        if failed:
            row.append(r.error or "")
        w.writerow(row)


def write_stationary_csv(pi, fh) -> None:
    """``i, pi(i), pi(i+1)/pi(i)``; the ratio is empty at the last index or where pi(i) = 0."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(STATIONARY_HEADER)
    p = np.asarray(pi.prefix)
    for i, x in enumerate(p):
        ratio = p[i + 1] / x if i + 1 < len(p) and x > 0 else None
        w.writerow([i, fmt(x), fmt(ratio)])


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)) and not math.isfinite(float(o)):
        return None
    return o


def dumps_report(report: dict) -> str:
    """JSON text; floats are written with ``repr`` so they round-trip exactly."""
    return json.dumps(_clean(report), indent=2, default=_json_default, sort_keys=False)
