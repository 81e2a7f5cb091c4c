"""Plain-text export and import of traces, maps, and run manifests.

Every file is tab-delimited with `# key = value` metadata lines on top,
so outputs stay plottable by anything and diff-able in tests.  Nothing
here writes timestamps or machine identifiers: the same inputs must
produce byte-identical files, which is what the manifest digests get
compared against.
"""

import hashlib

import numpy as np

FLOAT_FMT = "%.10g"
MANIFEST_NAME = "manifest.txt"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _header_lines(header: dict | None) -> list:
    return [f"# {key} = {_fmt(val)}" for key, val in (header or {}).items()]


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def write_table(path, columns, header: dict | None = None) -> None:
    """Write named 1-d columns as a tab-separated table.

    `columns` is a sequence of (name, array) pairs; all arrays must share
    one length.
    """
    names = [name for name, _ in columns]
    arrays = [np.asarray(vals) for _, vals in columns]
    if not arrays:
        raise ValueError("no columns to write")
    length = arrays[0].shape[0]
    if any(a.ndim != 1 or a.shape[0] != length for a in arrays):
        raise ValueError("columns must be 1-d arrays of equal length")
    lines = _header_lines(header)
    lines.append("# columns = " + "\t".join(names))
    for i in range(length):
        lines.append("\t".join(_fmt(a[i]) for a in arrays))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path):
    """Inverse of `write_table`: returns (header dict, {name: array})."""
    header, names, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# columns = "):
                names = line[len("# columns = "):].split("\t")
            elif line.startswith("# ") and " = " in line:
                key, _, val = line[2:].partition(" = ")
                header[key] = _parse_value(val)
            elif line.strip():
                rows.append([_parse_value(v) for v in line.split("\t")])
    if names is None:
        raise ValueError(f"{path}: missing '# columns' line")
    data = {name: np.array([row[i] for row in rows])
            for i, name in enumerate(names)}
    return header, data


def write_matrix(path, matrix, row_axis, col_axis,
                 header: dict | None = None) -> None:
    """Write a 2-d map with labelled axes.

    `row_axis` and `col_axis` are (name, values) pairs; the first data
    row carries the column coordinates, each following row starts with
    its row coordinate.
    """
    m = np.asarray(matrix)
    row_name, row_vals = row_axis
    col_name, col_vals = col_axis
    row_vals = np.asarray(row_vals)
    col_vals = np.asarray(col_vals)
    if m.shape != (row_vals.size, col_vals.size):
        raise ValueError(f"matrix shape {m.shape} does not match axes "
                         f"({row_vals.size}, {col_vals.size})")
    lines = _header_lines(header)
    lines.append(f"# rows = {row_name}")
    lines.append(f"# cols = {col_name}")
    lines.append("\t".join([row_name + "\\" + col_name]
                           + [_fmt(v) for v in col_vals]))
    for r in range(row_vals.size):
        lines.append("\t".join([_fmt(row_vals[r])]
                               + [_fmt(v) for v in m[r]]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path):
    """Inverse of `write_matrix`: (header, row values, col values, matrix)."""
    header, rows = {}, []
    col_vals = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# ") and " = " in line:
                key, _, val = line[2:].partition(" = ")
                header[key] = _parse_value(val)
            elif line.strip() and "\\" in line.split("\t", 1)[0]:
                col_vals = np.array([float(v) for v in line.split("\t")[1:]])
            elif line.strip():
                rows.append([float(v) for v in line.split("\t")])
    if col_vals is None:
        raise ValueError(f"{path}: missing axis row")
    body = np.array(rows)
    return header, body[:, 0], col_vals, body[:, 1:]


def file_digest(path) -> str:
    """sha256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(directory, command: str, config_hash: str, seed,
                   files, extra: dict | None = None) -> str:
    """Record what a run produced: command, config hash, seed, digests.

    `files` are paths inside `directory`; they are listed sorted by name
    with their content digests, so re-running with the same seed and
    configuration must reproduce the manifest byte for byte.
    """
    from pathlib import Path

    directory = Path(directory)
    lines = [f"command = {command}",
             f"config_hash = {config_hash}",
             f"seed = {_fmt(seed)}"]
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {_fmt(val)}")
    for name in sorted(Path(f).name for f in files):
        lines.append(f"file = {name} sha256 = {file_digest(directory / name)}")
    path = directory / MANIFEST_NAME
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)
