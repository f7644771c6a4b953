"""Binary field snapshots and checkpoints.

Format (all integers little-endian):

    bytes 0..7    magic "MEMFLW01"
    4 x uint32    version, grid size N, component count, N_s
                  (N_s is 0 for plain fields, the slice count for
                  age-history stacks)
    payload       float64, row-major
    uint64        FNV-1a hash of the payload bytes

Reads validate magic, sizes, and checksum; a write/read round trip is
bit-exact.  Checkpoints are directories holding one snapshot per state
field plus a JSON metadata file with exact (hex) float values, so a
restarted run reproduces the original bit for bit.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MEMFLW01"
VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _fnv1a_python(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


try:  # numba gives ~100x on large payloads; results are identical
    import numba

    @numba.njit(cache=True)
    def _fnv1a_numba(arr):  # pragma: no cover - thin wrapper
        h = numba.uint64(_FNV_OFFSET)
        prime = numba.uint64(_FNV_PRIME)
        for i in range(arr.size):
            h = (h ^ numba.uint64(arr[i])) * prime
        return h

    def fnv1a_64(data: bytes) -> int:
        return int(_fnv1a_numba(np.frombuffer(data, dtype=np.uint8)))

except Exception:  # pragma: no cover - numba optional

    def fnv1a_64(data: bytes) -> int:
        return _fnv1a_python(data)


class SnapshotFormatError(ValueError):
    pass


def write_field(path, array: np.ndarray, n_s: int = 0) -> None:
    """Write a field or history stack; shape is recovered from the header."""
    arr = np.ascontiguousarray(array, dtype=np.float64)
    n = arr.shape[-1]
    if arr.shape[-2] != n:
        raise SnapshotFormatError(f"field must end in square spatial axes, got {arr.shape}")
    if n_s:
        if arr.shape != (n_s, 2, 2, n, n):
            raise SnapshotFormatError(f"history stack shape {arr.shape} inconsistent with N_s={n_s}")
        ncomp = 4
    else:
        lead = arr.shape[:-2]
        ncomp = int(np.prod(lead, dtype=int)) if lead else 1
        if ncomp not in (1, 2, 4):
            raise SnapshotFormatError(f"unsupported component count {ncomp}")
    payload = arr.tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", VERSION, n, ncomp, n_s))
        fh.write(payload)
        fh.write(struct.pack("<Q", fnv1a_64(payload)))


def read_field(path) -> np.ndarray:
    """Read a snapshot, validating magic, sizes, and the payload checksum."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 16 + 8:
        raise SnapshotFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:8] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {raw[:8]!r} at byte offset 0")
    version, n, ncomp, n_s = struct.unpack_from("<4I", raw, 8)
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    if n_s:
        shape = (n_s, 2, 2, n, n)
    elif ncomp == 1:
        shape = (n, n)
    elif ncomp == 2:
        shape = (2, n, n)
    elif ncomp == 4:
        shape = (2, 2, n, n)
    else:
        raise SnapshotFormatError(f"{path}: bad component count {ncomp}")
    n_payload = int(np.prod(shape, dtype=np.int64)) * 8
    expected = 24 + n_payload + 8
    if len(raw) != expected:
        raise SnapshotFormatError(
            f"{path}: size mismatch at byte offset {min(len(raw), expected)}: "
            f"have {len(raw)} bytes, header implies {expected}"
        )
    payload = raw[24 : 24 + n_payload]
    (stored,) = struct.unpack_from("<Q", raw, 24 + n_payload)
    actual = fnv1a_64(payload)
    if stored != actual:
        raise SnapshotFormatError(
            f"{path}: checksum mismatch at byte offset {24 + n_payload}: "
            f"stored {stored:#018x}, computed {actual:#018x}"
        )
    return np.frombuffer(payload, dtype=np.float64).reshape(shape).copy()


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def write_checkpoint(directory, *, step, t, y_value, y_integrand, u, history, head, oracle_tau=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_field(d / "u.fld", u)
    write_field(d / "history.fld", history, n_s=history.shape[0])
    meta = {
        "step": int(step),
        "t": float(t).hex(),
        "y_value": float(y_value).hex(),
        "y_integrand": float(y_integrand).hex(),
        "head": int(head),
        "has_oracle": oracle_tau is not None,
    }
    if oracle_tau is not None:
        write_field(d / "oracle_tau.fld", oracle_tau)
    (d / "meta.json").write_text(json.dumps(meta, indent=1))


def read_checkpoint(directory) -> dict:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    out = {
        "step": int(meta["step"]),
        "t": float.fromhex(meta["t"]),
        "y_value": float.fromhex(meta["y_value"]),
        "y_integrand": float.fromhex(meta["y_integrand"]),
        "head": int(meta["head"]),
        "u": read_field(d / "u.fld"),
        "history": read_field(d / "history.fld"),
        "oracle_tau": read_field(d / "oracle_tau.fld") if meta.get("has_oracle") else None,
    }
    return out
