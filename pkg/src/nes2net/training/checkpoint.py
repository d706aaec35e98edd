"""Named-array checkpoints with a fixed little-endian binary layout.

Layout::

    b"N2NCKPT1"
    u32 entry count
    per entry: u16 name length, name (utf-8), u8 dtype code (0=f32, 1=f64),
               u8 rank, rank x u32 extents, raw little-endian data
    u32 metadata length, metadata text (utf-8 "key=value" lines)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"N2NCKPT1"
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    entries: dict[str, np.ndarray]
    metadata: dict[str, str] = field(default_factory=dict)

    def schema(self) -> list[tuple[str, str, tuple[int, ...]]]:
        return [(k, v.dtype.str, v.shape) for k, v in self.entries.items()]

    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<I", len(self.entries))]
        for name, arr in self.entries.items():
            arr = np.asarray(arr)
            if arr.dtype not in _CODES:
                raise CheckpointError(f"{name}: unsupported dtype {arr.dtype}")
            raw = name.encode("utf-8")
            out.append(struct.pack("<H", len(raw)) + raw)
            out.append(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
            out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            out.append(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
        meta = "".join(f"{k}={v}\n" for k, v in self.metadata.items()).encode("utf-8")
        out.append(struct.pack("<I", len(meta)) + meta)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if blob[:8] != MAGIC:
            raise CheckpointError("bad magic; not a checkpoint")
        pos = 8

        def take(fmt):
            nonlocal pos
            size = struct.calcsize(fmt)
            if pos + size > len(blob):
                raise CheckpointError("truncated checkpoint")
            vals = struct.unpack_from(fmt, blob, pos)
            pos += size
            return vals

        (count,) = take("<I")
        entries = {}
        for _ in range(count):
            (nlen,) = take("<H")
            if pos + nlen > len(blob):
                raise CheckpointError("truncated checkpoint")
            try:
                name = blob[pos:pos + nlen].decode("utf-8")
            except UnicodeDecodeError:
                raise CheckpointError("entry name is not utf-8") from None
            pos += nlen
            if name in entries:
                raise CheckpointError(f"duplicate entry {name}")
            code, rank = take("<BB")
            if code not in _DTYPES:
                raise CheckpointError(f"{name}: unknown dtype code {code}")
            shape = take(f"<{rank}I")
            dt = _DTYPES[code]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
            if pos + nbytes > len(blob):
                raise CheckpointError("truncated checkpoint")
            arr = np.frombuffer(blob, dtype=dt, count=nbytes // dt.itemsize, offset=pos)
            entries[name] = arr.reshape(shape).astype(dt.newbyteorder("="))
            pos += nbytes
        (mlen,) = take("<I")
        if pos + mlen != len(blob):
            raise CheckpointError("metadata length does not match file size")
        try:
            text = blob[pos:pos + mlen].decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("metadata is not utf-8") from None
        meta = {}
        for line in text.splitlines():
            key, _, val = line.partition("=")
            meta[key] = val
        return cls(entries, meta)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())


def average_checkpoints(ckpts: list[Checkpoint], sources: list[str] | None = None) -> Checkpoint:
    """Elementwise mean of every entry; all inputs must share one schema."""
    if not ckpts:
        raise CheckpointError("nothing to average")
    schema = ckpts[0].schema()
    for c in ckpts[1:]:
        if c.schema() != schema:
            raise CheckpointError("checkpoint schemas differ (names, dtypes or shapes)")
    entries = {}
    for name, arr in ckpts[0].entries.items():
        # summing in sorted order makes the mean independent of input order
        stacked = np.sort(np.stack([c.entries[name] for c in ckpts]).astype(np.float64), axis=0)
        entries[name] = (stacked.sum(axis=0) / len(ckpts)).astype(arr.dtype)
    meta = dict(ckpts[0].metadata)
    meta["averaged_from"] = ",".join(sources or [c.metadata.get("epoch", "?") for c in ckpts])
    meta["n_averaged"] = str(len(ckpts))
    return Checkpoint(entries, meta)
