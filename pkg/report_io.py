"""
Report serialization for flatstrata.
Deterministic JSON (sorted keys, floats at 12 significant digits, complex as
{re, im}) and CSV (pandas, fixed column order) writers.
"""

import dataclasses
import json
import math
from io import StringIO
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from flatstrata_errors import UnsupportedFormat

SIGNIFICANT_DIGITS = 12
FLOAT_FORMAT = f"%.{SIGNIFICANT_DIGITS}g"


def _round(x: float) -> Optional[float]:
    if not math.isfinite(x):
        return None
    rounded = float(f"{x:.{SIGNIFICANT_DIGITS}g}")
    return 0.0 if rounded == 0 else rounded


def to_jsonable(obj: Any) -> Any:
    """Convert results (dataclasses, numpy values, complex numbers, frames) to plain JSON data."""
    if hasattr(obj, "to_dict") and not isinstance(obj, (pd.DataFrame, pd.Series)):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, pd.DataFrame):
        return to_jsonable(obj.to_dict(orient="records"))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _round(complex(obj).real), "im": _round(complex(obj).imag)}
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def render_json(result: Any) -> str:
    return json.dumps(to_jsonable(result), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render_csv(rows: Union[pd.DataFrame, Iterable[Dict[str, Any]]],
               columns: Optional[Sequence[str]] = None,
               footer: Optional[Sequence[str]] = None) -> str:
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    if columns is not None:
        frame = frame.loc[:, list(columns)]
    buffer = StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    text = buffer.getvalue()
    for line in footer or ():
        text += f"# {line}\n"
    return text


def emit_report(result: Any, fmt: str = "json", out: Optional[str] = None,
                columns: Optional[Sequence[str]] = None,
                footer: Optional[Sequence[str]] = None) -> bytes:
    """
    Serialize a result deterministically.

    Args:
        result: Any module result; for CSV a DataFrame or a list of row dicts
        fmt: "json" or "csv"
        out: Optional path; the bytes are also written there
        columns: CSV header, in order
        footer: CSV comment lines appended as "# ..."

    Returns:
        UTF-8 encoded report

    Raises:
        UnsupportedFormat: fmt is neither json nor csv
    """
    if fmt == "json":
        text = render_json(result)
    elif fmt == "csv":
        text = render_csv(result, columns, footer)
    else:
        raise UnsupportedFormat(f"unsupported output format {fmt!r}")
    data = text.encode("utf-8")
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    return data


def saddle_rows(connections: Iterable) -> List[Dict[str, Any]]:
    """CSV rows for saddle connections, already sorted by (length, angle)."""
    return [
        {"length": sc.length, "re": sc.holonomy.real, "im": sc.holonomy.imag,
         "start": sc.start_mark, "end": sc.end_mark}
        for sc in connections
    ]
