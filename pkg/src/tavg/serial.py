"""Versioned little-endian array container ("TAVG1") with CRC checking.

Layout: 6-byte magic, uint32 header length, JSON header (kind, metadata,
array index), raw array payload, trailing uint32 CRC32 of all preceding
bytes. Used for training checkpoints and feature-extractor weight files.
"""

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"TAVG1\x00"


from .errors import DataError


class BlobError(DataError):
    """Unreadable, corrupt, or wrong-version container file."""


def write_blob(path, kind: str, meta: dict, arrays: dict) -> None:
    index = []
    payload = bytearray()
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        le = arr.dtype.newbyteorder("<")
        data = arr.astype(le, copy=False).tobytes()  # tobytes emits C order
        index.append({"name": name, "dtype": le.str, "shape": list(arr.shape),
                      "offset": len(payload), "nbytes": len(data)})
        payload.extend(data)
    header = json.dumps({"kind": kind, "meta": meta, "arrays": index},
                        sort_keys=True).encode()
    body = MAGIC + struct.pack("<I", len(header)) + header + bytes(payload)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def read_blob(path, expect_kind: str | None = None):
    """Return (meta, arrays) after verifying magic and checksum."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise BlobError(f"cannot read {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 8:
        raise BlobError(f"{path}: truncated file")
    if raw[:len(MAGIC)] != MAGIC:
        raise BlobError(f"{path}: bad or unsupported version header "
                        f"(expected {MAGIC[:5].decode()})")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise BlobError(f"{path}: checksum mismatch (corrupt file)")
    (header_len,) = struct.unpack_from("<I", body, len(MAGIC))
    header_start = len(MAGIC) + 4
    try:
        header = json.loads(body[header_start:header_start + header_len])
    except ValueError as exc:
        raise BlobError(f"{path}: unparseable header") from exc
    if expect_kind is not None and header.get("kind") != expect_kind:
        raise BlobError(f"{path}: expected a {expect_kind} file, "
                        f"found {header.get('kind')!r}")
    payload = body[header_start + header_len:]
    arrays = {}
    for entry in header["arrays"]:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(payload):
            raise BlobError(f"{path}: array {entry['name']} out of bounds")
        arr = np.frombuffer(payload[start:start + n], dtype=entry["dtype"])
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header["meta"], arrays
