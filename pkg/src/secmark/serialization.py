"""Versioned binary container for trained models.

Layout::

    MAGIC (8 bytes) | format version (u32 LE) | header length (u32 LE)
    | header (UTF-8 JSON) | array payloads, concatenated

The header carries the model kind, a JSON-able ``meta`` map and one entry
per named section (dtype, shape, byte offset into the payload).  Output is
byte-deterministic: no timestamps, sorted keys.
"""

import json
import struct

import numpy as np

from .errors import DataError

MAGIC = b"SECMARK\x00"
FORMAT_VERSION = 1


def dumps(kind, meta, sections):
    header_sections = []
    payload = []
    offset = 0
    for name in sorted(sections):
        arr = np.ascontiguousarray(sections[name])
        if arr.dtype == object:
            raise TypeError(f"section {name!r} has object dtype")
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        header_sections.append(
            {"name": name, "dtype": arr.dtype.str.lstrip("<>|="), "shape": list(arr.shape),
             "offset": offset, "nbytes": len(raw)}
        )
        payload.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"kind": kind, "meta": meta, "sections": header_sections},
        sort_keys=True, ensure_ascii=False, separators=(",", ":"),
    ).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header, *payload])


def loads(blob, expected_kind=None):
    if blob[:8] != MAGIC:
        raise DataError("not a model file (bad magic header)")
    version, hlen = struct.unpack("<II", blob[8:16])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version}")
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    if expected_kind is not None and header["kind"] != expected_kind:
        raise DataError(f"expected a {expected_kind!r} model, found {header['kind']!r}")
    base = 16 + hlen
    sections = {}
    for sec in header["sections"]:
        start = base + sec["offset"]
        dtype = np.dtype(sec["dtype"]).newbyteorder("<")
        arr = np.frombuffer(blob[start:start + sec["nbytes"]], dtype=dtype)
        sections[sec["name"]] = arr.astype(dtype.newbyteorder("="), copy=True).reshape(sec["shape"])
    return header["kind"], header["meta"], sections


def save(path, kind, meta, sections):
    with open(path, "wb") as fh:
        fh.write(dumps(kind, meta, sections))


def load(path, expected_kind=None):
    with open(path, "rb") as fh:
        return loads(fh.read(), expected_kind)
