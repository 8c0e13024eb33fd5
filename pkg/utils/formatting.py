import csv
import math
import pathlib
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

METRIC_COLUMNS = ("precision", "recall", "f1", "auc", "mcc")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV table, creating parent directories."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def format_mean_std(values: Sequence[float | None], digits: int = 4) -> str:
    """``mean±std`` with population std; a single value prints bare, missing values as ``n/a``."""
    present = [v for v in values if v is not None and not math.isnan(v)]
    if not present:
        return "n/a"
    if len(present) == 1:
        return f"{present[0]:.{digits}f}"
    arr = np.asarray(present, dtype=np.float64)
    return f"{arr.mean():.{digits}f}±{arr.std():.{digits}f}"


def format_metrics_table(
    rows: Mapping[str, Sequence[Mapping[str, float | None]]],
    columns: Sequence[str] = METRIC_COLUMNS,
) -> list[list[str]]:
    """Ablation-style table: one row per setting, one ``mean±std`` cell per metric over seeds."""
    table = []
    for label, runs in rows.items():
        table.append([label, *(format_mean_std([r.get(c) for r in runs]) for c in columns)])
    return table


def format_table_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Fixed-width rendering for the terminal."""
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(x).ljust(w) for x, w in zip(row, widths)))
    return "\n".join(lines)
