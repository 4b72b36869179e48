"""CSV and JSON writers for maps, scans, spectra and click records.

Every CSV begins with ``#`` comment lines carrying the config hash and a
parameter echo, followed by a column header. Numbers are written in
exponent notation with a configurable number of significant digits
(default 9, overridable through the ``CPCS_PRECISION`` environment variable).
"""

import json
import os
from pathlib import Path

import numpy as np

from .units import HARTREE_EV, au_to_fs

DEFAULT_PRECISION = 9


def precision(default=DEFAULT_PRECISION):
    env = os.environ.get("CPCS_PRECISION")
    if env:
        try:
            p = int(env)
        except ValueError:
            raise ValueError(f"CPCS_PRECISION must be an integer, got {env!r}") from None
        if p < 1:
            raise ValueError("CPCS_PRECISION must be >= 1")
        return p
    return default


def _header(meta):
    lines = []
    for key, value in meta.items():
        if not isinstance(value, str):
            value = json.dumps(value, sort_keys=True, separators=(",", ":"))
        lines.append(f"{key}={value}")
    return lines


def write_table(path, columns, data, meta=None, digits=None):
    """Write ``data`` (2-D array, one column per name) as a commented CSV."""
    digits = precision() if digits is None else digits
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = _header(meta or {})
    fmt = f"%.{digits - 1}e"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        np.savetxt(fh, np.asarray(data, dtype=float).reshape(-1, len(columns)), fmt=fmt, delimiter=",")
    return path


def read_table(path):
    """Read a CSV written by :func:`write_table`; returns (meta dict, {column: array})."""
    meta, header = {}, None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
                continue
            header = line.strip().split(",")
            break
        if header is None:
            raise ValueError(f"{path}: no column header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: expected {len(header)} columns, got {data.shape[1]}")
    return meta, {name: data[:, i] for i, name in enumerate(header)}


def write_map_csv(path, times, values, meta=None, digits=None):
    """Upper-triangle map (t2 >= t1) in t1-major order with columns t1_fs, t2_fs, value."""
    times_fs = au_to_fs(np.asarray(times))
    i, j = np.triu_indices(len(times_fs))
    data = np.column_stack([times_fs[i], times_fs[j], np.asarray(values)[i, j]])
    return write_table(path, ["t1_fs", "t2_fs", "value"], data, meta, digits)


def write_scan_csv(path, scan, meta=None, digits=None):
    data = np.column_stack([au_to_fs(scan.delays), scan.c, scan.f])
    return write_table(path, ["T_fs", "c_Hz", "f_Hz"], data, meta, digits)


def read_scan_csv(path):
    """Returns (meta, delays_au, c, f)."""
    from .units import fs_to_au

    meta, cols = read_table(path)
    missing = {"T_fs", "c_Hz", "f_Hz"} - set(cols)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return meta, fs_to_au(cols["T_fs"]), cols["c_Hz"], cols["f_Hz"]


def write_spectrum_csv(path, spec, meta=None, digits=None):
    data = np.column_stack([spec.omega, spec.omega * HARTREE_EV, spec.magnitude])
    return write_table(path, ["omega_au", "omega_eV", "magnitude"], data, meta, digits)


def write_clicks_csv(path, clicks, meta=None, digits=None):
    """Click records as rows (trajectory_id, time_au, channel_id); time is written in fs."""
    clicks = np.asarray(clicks, dtype=float).reshape(-1, 3)
    data = np.column_stack([clicks[:, 0], au_to_fs(clicks[:, 1]), clicks[:, 2]])
    return write_table(path, ["trajectory_id", "time_fs", "channel_id"], data, meta, digits)


def write_summary(path, summary):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")
