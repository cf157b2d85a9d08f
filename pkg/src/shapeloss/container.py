"""Self-describing binary array container.

A container file is: an 8-byte magic, a little-endian uint64 header length,
a UTF-8 JSON header, zero padding up to a 64-byte boundary, then the raw
C-contiguous little-endian array payloads back to back.  The header carries a
format version, a free-form ``meta`` dict and, per array, name/dtype/shape/
offset.  Writing is deterministic: same arrays + meta -> same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ShapeLossError

MAGIC = b"SLABIN01"
FORMAT_VERSION = 1
_ALIGN = 64


class ContainerError(ShapeLossError):
    """Malformed or truncated container file."""


def _dtype_tag(dtype: np.dtype) -> str:
    # '<f8' style, endianness pinned so files are portable
    return np.dtype(dtype).newbyteorder("<").str


def save_container(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays plus a JSON meta dict to ``path``."""
    path = Path(path)
    entries = []
    blobs = []
    offset = 0
    for name in arrays:  # caller-supplied order is preserved
        arr = np.ascontiguousarray(arrays[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = arr.tobytes()
        entries.append({
            "name": str(name),
            "dtype": _dtype_tag(arr.dtype),
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format_version": FORMAT_VERSION,
        "meta": meta if meta is not None else {},
        "arrays": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    prefix_len = len(MAGIC) + 8 + len(header_bytes)
    pad = (-prefix_len) % _ALIGN
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint64(len(header_bytes)).tobytes())
        fh.write(header_bytes)
        fh.write(b"\x00" * pad)
        for blob in blobs:
            fh.write(blob)
    tmp.replace(path)


def load_container(path, mmap: bool = False):
    """Read a container; returns (arrays dict, meta dict).

    With ``mmap=True`` array payloads are memory-mapped read-only instead of
    copied into RAM.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ContainerError(f"{path}: bad magic {magic!r}")
        (hlen,) = np.frombuffer(fh.read(8), dtype="<u8")
        header = json.loads(fh.read(int(hlen)).decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise ContainerError(f"{path}: unsupported format_version "
                                 f"{header.get('format_version')}")
        prefix_len = len(MAGIC) + 8 + int(hlen)
        data_start = prefix_len + ((-prefix_len) % _ALIGN)
        arrays = {}
        for ent in header["arrays"]:
            dtype = np.dtype(ent["dtype"])
            shape = tuple(ent["shape"])
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            if mmap:
                arr = np.memmap(path, dtype=dtype, mode="r",
                                offset=data_start + ent["offset"], shape=shape)
            else:
                fh.seek(data_start + ent["offset"])
                buf = fh.read(ent["nbytes"])
                if len(buf) != ent["nbytes"]:
                    raise ContainerError(f"{path}: truncated array {ent['name']}")
                arr = np.frombuffer(buf, dtype=dtype, count=count).reshape(shape)
            arrays[ent["name"]] = arr
    return arrays, header["meta"]
