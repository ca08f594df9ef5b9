"""Self-describing binary container for embedding and classifier models.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic  b"CMXSA\\x00\\x01\\x00"
    offset 8   uint32    format version (currently 1)
    offset 12  uint32    header length H in bytes
    offset 16  H bytes   UTF-8 JSON header (sorted keys)
    ...        payload   tensors back to back, in header order

The JSON header holds ``kind``, free-form ``meta`` (configs, vocabularies) and
a ``tensors`` list of ``{"name", "dtype", "shape", "offset", "nbytes"}``
entries; offsets are relative to the start of the payload. Tensor dtypes are
``<f4`` (floats), ``|u1`` (boolean masks) and ``<i8`` (integer counts).
"""

import json
import struct
from typing import Any, BinaryIO, Dict, Tuple

import numpy as np

MAGIC = b"CMXSA\x00\x01\x00"
VERSION = 1

_ALLOWED = {"<f4": np.float32, "|u1": np.uint8, "<i8": np.int64}


class FormatError(ValueError):
    pass


def _coerce(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    # copy=False: the embedding table can run to gigabytes
    if arr.dtype == np.bool_:
        return arr.astype("|u1", copy=False)
    if np.issubdtype(arr.dtype, np.floating):
        return arr.astype("<f4", copy=False)
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype("<i8", copy=False)
    raise TypeError(f"unsupported tensor dtype {arr.dtype}")


def dump(fh: BinaryIO, kind: str, meta: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> None:
    entries, arrays, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(_coerce(arr))
        entries.append(
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
             "offset": offset, "nbytes": arr.nbytes}
        )
        arrays.append(arr)
        offset += arr.nbytes
    header = json.dumps(
        {"kind": kind, "meta": meta, "tensors": entries},
        sort_keys=True, ensure_ascii=False, separators=(",", ":"),
    ).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, len(header)))
    fh.write(header)
    for arr in arrays:
        fh.write(memoryview(arr).cast("B"))


def load(fh: BinaryIO, expected_kind: str = None) -> Tuple[str, Dict[str, Any], Dict[str, np.ndarray]]:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise FormatError("not a model container (bad magic)")
    version, hlen = struct.unpack("<II", fh.read(8))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    header = json.loads(fh.read(hlen).decode("utf-8"))
    kind = header["kind"]
    if expected_kind is not None and not kind.startswith(expected_kind):
        raise FormatError(f"expected a {expected_kind!r} container, found {kind!r}")
    tensors, position = {}, 0
    for entry in header["tensors"]:
        dtype = entry["dtype"]
        if dtype not in _ALLOWED:
            raise FormatError(f"tensor {entry['name']}: unsupported dtype {dtype}")
        if entry["offset"] != position:
            raise FormatError(f"tensor {entry['name']}: offset {entry['offset']} out of order")
        arr = np.empty(entry["shape"], dtype=dtype)
        if arr.nbytes != entry["nbytes"]:
            raise FormatError(f"tensor {entry['name']}: size does not match its shape")
        # read straight into the array so large tables are never held twice
        if fh.readinto(memoryview(arr).cast("B")) != arr.nbytes:
            raise FormatError(f"tensor {entry['name']}: truncated payload")
        position += arr.nbytes
        tensors[entry["name"]] = arr.astype(_ALLOWED[dtype], copy=False)
    return kind, header["meta"], tensors


def save_file(path, kind, meta, tensors) -> None:
    with open(path, "wb") as fh:
        dump(fh, kind, meta, tensors)


def load_file(path, expected_kind=None):
    with open(path, "rb") as fh:
        return load(fh, expected_kind)
