import csv
import io
import json
import os
import sys
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from btlbounds.core.config import settings
from btlbounds.core.errors import ConfigError
from btlbounds.core.logging import logger

PACKAGE_VERSION = "0.1.0"


def format_value(value) -> str:
    """Text form of one CSV cell; floats keep 17 significant digits."""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if value is None:
        return ""
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_csv(columns: Sequence[str], rows: Iterable[Sequence], path: Optional[str] = None) -> Optional[str]:
    """Write a table to path, or to stdout when path is None."""
    text = render_csv(columns, rows)
    if path is None:
        sys.stdout.write(text)
        return None
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"Wrote table path={path}")
    return path


def resolve_output_path(path: Optional[str]) -> Optional[str]:
    """Bare file names land in settings.OUTPUT_DIR; paths with a directory are kept."""
    if path is None or os.path.dirname(path):
        return path
    return os.path.join(settings.ensure_output_dir(), path)


def details_path_for(csv_path: str) -> str:
    directory, name = os.path.split(csv_path)
    stem, _ = os.path.splitext(name)
    return os.path.join(directory, f"Details_{stem}.json")


def write_details(csv_path: str, details: dict) -> str:
    """Run metadata (config, seed, row count, caveats) next to its CSV."""
    path = details_path_for(csv_path)
    payload = {"package_version": PACKAGE_VERSION, **details}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=4, sort_keys=True, default=_json_default)
    return path


def _json_default(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def write_plot_script(csv_path: str, x_column: str, y_columns: Sequence[str], columns: Sequence[str]) -> Optional[str]:
    """gnuplot script plotting y_columns against x_column on log-log axes."""
    if not settings.WRITE_PLOT_SCRIPT:
        return None
    stem, _ = os.path.splitext(csv_path)
    path = f"{stem}.gp"
    x = columns.index(x_column) + 1
    plots = [
        f"'{os.path.basename(csv_path)}' using {x}:{columns.index(y) + 1} with linespoints title '{y}'"
        for y in y_columns
        if y in columns
    ]
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale xy",
        f"set xlabel '{x_column}'",
        "set terminal pngcairo size 900,600",
        f"set output '{os.path.basename(stem)}.png'",
        "plot " + ", \\\n     ".join(plots),
        "",
    ]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
    return path


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
