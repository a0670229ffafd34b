import json
import os
from typing import Sequence

import pandas as pd
from loguru import logger

from ...errors import HarnessError
from .records import CSV_COLUMNS, RoundMetrics

FORMATS = ("csv", "json")


def metrics_rows(series: Sequence[RoundMetrics]):
    return [{column: getattr(record, column) for column in CSV_COLUMNS} for record in series]


def export_metrics(series: Sequence[RoundMetrics], path, format="csv"):
    """Write one metrics series. Column order is fixed; an empty series gives a header-only CSV."""
    if format not in FORMATS:
        raise HarnessError(f"unknown metrics format '{format}'")
    rows = metrics_rows(series)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            if format == "csv":
                pd.DataFrame(rows, columns=CSV_COLUMNS).to_csv(f, columns=CSV_COLUMNS, index=False,
                                                               lineterminator="\n")
            else:
                json.dump(rows, f, indent=2)
                f.write("\n")
    except OSError as e:
        raise HarnessError(f"cannot write metrics to {path}: {e}") from e
    logger.info("Wrote {count} rounds to {path}", count=len(rows), path=path)
    return path


def read_metrics_json(path) -> list:
    with open(path, "r", encoding="utf-8") as f:
        return [RoundMetrics(**row) for row in json.load(f)]


def metrics_path(output, model=None, format="csv"):
    """`output` is a file stem; ensemble members get a `_m<id>` suffix."""
    stem, ext = os.path.splitext(output)
    if ext.lstrip(".") in FORMATS:
        output = stem
    if model is not None:
        output = f"{output}_m{model}"
    return f"{output}.{format}"
