"""CSV and text outputs.

Every CSV starts with one ``#`` comment naming its schema and version,
followed by a header row.  ``read_csv`` refuses files whose schema line or
header differ from what the caller expects, so a silent column change shows
up as an error rather than as misaligned numbers.
"""

import csv
import io
import math
import numbers
import os
from pathlib import Path

from .errors import ConfigError, SchemaError

SCHEMAS = {
    "trajectory": 1,
    "sweep": 1,
    "dal-summary": 1,
}


def schema_line(name, columns):
    return f"# schema: dalgame.{name}/v{SCHEMAS[name]} columns={','.join(columns)}"


def fmt(x):
    """Round-trip text for a cell; blanks for ``None``."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, numbers.Integral):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def csv_text(name, columns, rows):
    buf = io.StringIO()
    buf.write(schema_line(name, columns) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, header has {len(columns)}")
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def read_csv(path, name, columns=None):
    """Parse a CSV written by ``csv_text``; returns ``(header, rows)`` of strings.

    Raises SchemaError on a missing or different schema line, or a header
    that does not match the schema's column list (or ``columns`` if given).
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise SchemaError(f"{path}: missing schema comment line")
    prefix = f"# schema: dalgame.{name}/v{SCHEMAS[name]} columns="
    if not lines[0].startswith(prefix):
        raise SchemaError(f"{path}: expected schema {prefix!r}, got {lines[0]!r}")
    declared = lines[0][len(prefix):].split(",")
    reader = csv.reader(lines[1:])
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{path}: missing header row") from None
    if header != declared:
        raise SchemaError(f"{path}: header {header} does not match schema columns {declared}")
    if columns is not None and list(columns) != header:
        raise SchemaError(f"{path}: columns {header} differ from expected {list(columns)}")
    rows = list(reader)
    for k, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {k + 1} has {len(row)} cells, expected {len(header)}")
    return header, rows


def check_writable(paths, overwrite):
    """Refuse to clobber existing outputs unless ``overwrite`` is set."""
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not overwrite:
        raise ConfigError("refusing to overwrite existing output (pass --overwrite): "
                          + ", ".join(existing))


def write_text(path, text):
    """Write via a temporary sibling and rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)
