"""Report emission: deterministic JSON, delimited data, run metadata and figures."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


def plain(obj):
    """Recursively convert numpy scalars/arrays and dataclass reports to JSON types."""
    if hasattr(obj, "to_json"):
        return plain(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj) -> str:
    # json writes floats with repr, the shortest round-tripping form
    return json.dumps(plain(obj), sort_keys=True, indent=2) + "\n"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return json.dumps(plain(v), sort_keys=True)


def csv_text(rows: list[dict]) -> str:
    """Rows with the union of keys as header (first-seen order)."""
    header: list[str] = []
    for row in rows:
        for k in row:
            if k not in header:
                header.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row.get(k)) for k in header])
    return buf.getvalue()


def meta(argv: list[str], seed: int | None) -> dict:
    return dict(
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        argv=list(argv),
        seed=seed,
        version=__version__,
        python=sys.version.split()[0],
        platform=platform.platform(),
        numpy=np.__version__,
    )


def write_outputs(out: Path, report, rows: list[dict], argv: list[str], seed: int | None,
                  figure=None) -> list[Path]:
    """Write ``report.json``, ``data.csv``, ``meta.json`` and, if given, ``figure.png``.

    ``figure`` is a callable taking a matplotlib ``Axes``.
    """
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "data.csv", out / "meta.json"]
    paths[0].write_text(dumps(report))
    paths[1].write_text(csv_text(rows))
    paths[2].write_text(dumps(meta(argv, seed)))
    if figure is not None:
        paths.append(render(out / "figure.png", figure))
    return paths


def render(path: Path, draw) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        draw(ax)
        fig.tight_layout()
        fig.savefig(path, dpi=100, metadata={"Software": None})
    finally:
        plt.close(fig)
    return path


def finite(xs) -> list[float]:
    return [x for x in xs if isinstance(x, (int, float)) and math.isfinite(x)]
