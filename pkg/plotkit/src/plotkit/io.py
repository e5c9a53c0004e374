"""CSV loading and schema checks."""

import numpy as np


class PlotkitError(Exception):
    """Base class for input problems; the CLI prints these and exits 1."""


class EmptyTableError(PlotkitError):
    pass


class SchemaError(PlotkitError):
    pass


def load_table(path):
    """Read one CSV into a dict of float column arrays.

    Lines starting with # (the manifest stamp) and blank lines are
    skipped; the first remaining line is the comma-separated header.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise EmptyTableError(f"{path}: no header row")
    names = [c.strip() for c in lines[0].split(",")]
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(names):
            raise SchemaError(
                f"{path}: row has {len(cells)} cells for columns {names}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise SchemaError(f"{path}: non-numeric cell ({exc})") from None
    if not rows:
        raise EmptyTableError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    return {name: data[:, k] for k, name in enumerate(names)}


def require_columns(table, required, path, kind):
    """Fail with both expected and found column names on any mismatch."""
    missing = [c for c in required if c not in table]
    if missing:
        raise SchemaError(
            f"{path}: kind '{kind}' needs columns {list(required)}, "
            f"found {sorted(table)} (missing {missing})"
        )
