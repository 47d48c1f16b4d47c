"""Artifact writers: CSV with a provenance header, JSON, and minimal SVG charts."""

from __future__ import annotations

import hashlib
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence

# keys that may differ between runs without changing any number in the output
VOLATILE_KEYS = frozenset({"workers", "out", "json", "svg", "config"})


def fmt(x: Any) -> str:
    """17 significant digits for floats, plain text for everything else."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def config_hash(config: Mapping[str, Any]) -> str:
    core = {k: v for k, v in config.items() if k not in VOLATILE_KEYS}
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def header_line(command: str, config: Mapping[str, Any]) -> str:
    return f"# rfic {command} config_sha256={config_hash(config)} seed={config.get('seed')}"


def render_csv(command: str, config: Mapping[str, Any], columns: Sequence[str],
               rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    buf.write(header_line(command, config) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def render_json(command: str, config: Mapping[str, Any], payload: Mapping[str, Any]) -> str:
    doc = {
        "command": command,
        "config_sha256": config_hash(config),
        "seed": config.get("seed"),
        "config": {k: v for k, v in config.items() if k not in VOLATILE_KEYS},
        "result": payload,
    }
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def svg_line_chart(x: Sequence[float], series: Mapping[str, Sequence[float]], title: str = "",
                   xlabel: str = "", width: int = 480, height: int = 320, comment: str = "") -> str:
    """Dependency-free SVG polyline chart with linear axes."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 40
    xs = [float(v) for v in x]
    ys = [float(v) for s in series.values() for v in s if math.isfinite(float(v))]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def py(v):
        return pad_t + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if comment:
        out.append(f"<!-- {comment} -->")
    out.append(f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>')
    if xlabel:
        out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 6}" text-anchor="middle" '
                   f'font-size="11">{xlabel}</text>')
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(xv):.1f}" y="{pad_t + ph + 14}" text-anchor="middle" '
                   f'font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{pad_l - 4}" y="{py(yv) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{yv:.3g}</text>')
    for i, (name, s) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(float(b)):.2f}" for a, b in zip(xs, s) if math.isfinite(float(b)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{pad_l + 8}" y="{pad_t + 14 + 13 * i}" font-size="11" '
                   f'fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
