"""Binary TT file format.

Layout: one line of canonical JSON (sorted keys, no spaces) terminated by
``\\n``, followed by the payload.  The header has keys ``field``
(``"real"`` or ``"complex"``), ``dims`` and ``ranks``; an orthogonalized
tensor also carries ``center``, in which case the ``r x r`` center factor
follows the cores.  Every array is written in colexicographic order
(``left, phys, right`` for cores) as little-endian 8-byte doubles, complex
values as interleaved real/imaginary pairs.
"""

from __future__ import annotations

import json
from math import prod
from pathlib import Path

import numpy as np

from .ortho import OrthTT
from .tt_core import TTTensor


class TTFormatError(ValueError):
    pass


def _header_bytes(header: dict) -> bytes:
    return (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode("ascii")


def _array_bytes(a: np.ndarray, field: str) -> bytes:
    flat = a.ravel(order="F")
    if field == "complex":
        return flat.astype("<c16").tobytes()
    return flat.astype("<f8").tobytes()


def dumps(X) -> bytes:
    """Serialize a :class:`TTTensor` or :class:`OrthTT`."""
    field = "complex" if np.iscomplexobj(X.cores[0]) else "real"
    header = {"field": field, "dims": list(X.dims), "ranks": list(X.ranks)}
    if isinstance(X, OrthTT):
        header["center"] = int(X.center)
    parts = [_header_bytes(header)]
    parts += [_array_bytes(c, field) for c in X.cores]
    if isinstance(X, OrthTT):
        parts.append(_array_bytes(np.asarray(X.S), field))
    return b"".join(parts)


def loads(buf: bytes):
    nl = buf.find(b"\n")
    if nl < 0:
        raise TTFormatError("missing header line")
    try:
        header = json.loads(buf[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TTFormatError(f"corrupt header: {exc}") from None
    if not isinstance(header, dict):
        raise TTFormatError("header is not a JSON object")
    extra = set(header) - {"field", "dims", "ranks", "center"}
    if extra:
        raise TTFormatError(f"unknown header keys: {sorted(extra)}")
    try:
        field = header["field"]
        dims = [int(n) for n in header["dims"]]
        ranks = [int(r) for r in header["ranks"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise TTFormatError(f"invalid header: {exc}") from None
    if field not in ("real", "complex"):
        raise TTFormatError(f"unknown field {field!r}")
    if len(ranks) != len(dims) + 1 or not dims or ranks[0] != 1 or ranks[-1] != 1:
        raise TTFormatError("ranks do not fit dims")
    if min(dims) < 1 or min(ranks) < 1:
        raise TTFormatError("dims and ranks must be positive")
    dtype = np.dtype("<c16") if field == "complex" else np.dtype("<f8")
    shapes = [(ranks[i], n, ranks[i + 1]) for i, n in enumerate(dims)]
    center = header.get("center")
    if center is not None:
        center = int(center)
        if not 0 <= center <= len(dims):
            raise TTFormatError("center out of range")
        shapes.append((ranks[center], ranks[center]))
    expected = sum(prod(s) for s in shapes) * dtype.itemsize
    payload = buf[nl + 1 :]
    if len(payload) != expected:
        raise TTFormatError(f"payload has {len(payload)} bytes, expected {expected}")
    arrays, off = [], 0
    for s in shapes:
        k = prod(s)
        a = np.frombuffer(payload, dtype=dtype, count=k, offset=off).reshape(s, order="F")
        arrays.append(a.astype(dtype.newbyteorder("=")))
        off += k * dtype.itemsize
    if center is None:
        return TTTensor(arrays)
    return OrthTT(arrays[:-1], center, arrays[-1])


def save(path, X) -> None:
    Path(path).write_bytes(dumps(X))


def load(path):
    return loads(Path(path).read_bytes())
