"""Kernel files (JSON), experiment configs (TOML) and CSV output.

Kernel file::

    {"dim": 2, "order": 2,
     "entries": [{"index": [1, 1], "value": 0.7071067811865476}]}

A sequence file holds ``{"sequence": [kernel, kernel, ...]}``; each element
may itself be a list of kernels (one vector per sequence index).
"""
from __future__ import annotations

import csv
import hashlib
import json
import re
import sys
from pathlib import Path

from . import __version__
from .symtensor import SymKernel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class KernelFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _entry_lines(text: str) -> list:
    return [text.count("\n", 0, m.start()) + 1 for m in re.finditer(r'"index"', text)]


def _kernel_from_obj(obj, text: str = "", line_offset: int = 0) -> SymKernel:
    lines = _entry_lines(text)
    try:
        dim, order = int(obj["dim"]), int(obj["order"])
        raw = obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise KernelFileError(f"kernel needs integer 'dim', 'order' and a list 'entries' ({exc})") from exc
    if dim < 1 or order < 0:
        raise KernelFileError("dim must be >= 1 and order >= 0")
    entries = {}
    for i, item in enumerate(raw):
        line = lines[line_offset + i] if line_offset + i < len(lines) else None
        try:
            idx = tuple(int(a) for a in item["index"])
            value = float(item["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise KernelFileError(f"entry {i}: needs 'index' (int list) and 'value' ({exc})", line) from exc
        if len(idx) != order:
            raise KernelFileError(f"entry {i}: index {list(idx)} has length {len(idx)}, order is {order}", line)
        if any(a < 1 or a > dim for a in idx):
            raise KernelFileError(f"entry {i}: index {list(idx)} has labels outside 1..{dim}", line)
        if list(idx) != sorted(idx):
            raise KernelFileError(f"entry {i}: index {list(idx)} is not sorted non-decreasing", line)
        if idx in entries:
            raise KernelFileError(f"entry {i}: duplicate index {list(idx)}", line)
        entries[idx] = value
    return SymKernel(dim, order, entries)


def kernel_to_obj(f: SymKernel) -> dict:
    return {
        "dim": f.dim,
        "order": f.order,
        "entries": [{"index": list(k), "value": v} for k, v in sorted(f.items())],
    }


def loads_kernel(text: str) -> SymKernel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelFileError(exc.msg, exc.lineno) from exc
    return _kernel_from_obj(obj, text)


def dumps_kernel(f: SymKernel) -> str:
    return json.dumps(kernel_to_obj(f), indent=1) + "\n"


def read_kernel(path) -> SymKernel:
    return loads_kernel(Path(path).read_text())


def write_kernel(path, f: SymKernel) -> None:
    Path(path).write_text(dumps_kernel(f))


def read_sequence(path) -> list:
    """Kernels (or lists of kernels) from a sequence file; a bare kernel file is a one-element sequence."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelFileError(exc.msg, exc.lineno) from exc
    if isinstance(obj, dict) and "sequence" in obj:
        out, offset = [], 0
        for item in obj["sequence"]:
            group = item if isinstance(item, list) else [item]
            ks = []
            for kobj in group:
                ks.append(_kernel_from_obj(kobj, text, offset))
                offset += len(kobj.get("entries", []))
            out.append(ks if isinstance(item, list) else ks[0])
        return out
    return [_kernel_from_obj(obj, text)]


def read_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def fmt(x) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(fh, columns: list, rows: list, meta: dict, notes: list = ()) -> None:
    """CSV with ``#``-prefixed metadata: tool version, seed, config hash, column notes."""
    fh.write(f"# tool: fourthmoment {__version__}\n")
    for key, value in meta.items():
        fh.write(f"# {key}: {value}\n")
    for note in notes:
        fh.write(f"# {note}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c, "")) for c in columns])
