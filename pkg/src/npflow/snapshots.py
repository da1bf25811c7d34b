"""Binary state snapshots.

Layout (little-endian throughout):

    magic   8 bytes  b"NPFSNAP1"
    u32     container version (currently 1)
    u32     grid size n
    u8      model tag (0 = NPE, 1 = NPD)
    u32     species count
    f64     time
    per species: f64 z, f64 D
    per field:   n*n complex128 coefficients, row-major
                 (species in order, then vorticity for NPE)
    u32     CRC-32 of everything above

Writing the same state twice produces identical bytes, so snapshots can be
compared with plain file equality.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .models import DarcyFluid, EulerFluid, IonSpecies, SimState, make_state
from .spectral import SpectralField, make_grid

MAGIC = b"NPFSNAP1"
VERSION = 1
_MODEL_TAGS = {"NPE": 0, "NPD": 1}
_TAG_MODELS = {v: k for k, v in _MODEL_TAGS.items()}


def _field_bytes(f: SpectralField) -> bytes:
    return np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()


def snapshot_bytes(state: SimState) -> bytes:
    """Serialize a state; see the module docstring for the layout."""
    model = "NPE" if state.is_euler else "NPD"
    parts = [MAGIC,
             struct.pack("<II", VERSION, state.grid.n),
             struct.pack("<BI", _MODEL_TAGS[model], len(state.species)),
             struct.pack("<d", state.time)]
    for sp in state.species:
        parts.append(struct.pack("<dd", sp.z, sp.D))
    for sp in state.species:
        parts.append(_field_bytes(sp.c))
    if state.is_euler:
        parts.append(_field_bytes(state.fluid.omega))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def write_snapshot(path: str | Path, state: SimState) -> None:
    Path(path).write_bytes(snapshot_bytes(state))


class _Cursor:
    def __init__(self, buf: bytes, label: str):
        self.buf = buf
        self.label = label
        self.pos = 0

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if end > len(self.buf):
            raise SnapshotError(f"{self.label}: truncated snapshot file")
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_snapshot(path: str | Path) -> SimState:
    """Read a snapshot back into a fully-derived state."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[:len(MAGIC)] != MAGIC:
        raise SnapshotError(f"{path}: not a snapshot file (bad magic)")
    body, (stored,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != stored:
        raise SnapshotError(f"{path}: checksum mismatch")
    cur = _Cursor(body, str(path))
    cur.take(len(MAGIC))
    version, n = cur.unpack("<II")
    if version != VERSION:
        raise SnapshotError(
            f"{path}: unsupported snapshot version {version}, expected {VERSION}")
    tag, count = cur.unpack("<BI")
    if tag not in _TAG_MODELS:
        raise SnapshotError(f"{path}: unknown model tag {tag}")
    (time,) = cur.unpack("<d")
    grid = make_grid(n)
    params = [cur.unpack("<dd") for _ in range(count)]

    def field() -> SpectralField:
        blob = cur.take(16 * n * n)
        coeffs = np.frombuffer(blob, dtype="<c16").reshape(n, n)
        return SpectralField(grid, coeffs.astype(np.complex128))

    species = tuple(IonSpecies(z=z, D=d, c=field()) for z, d in params)
    if _TAG_MODELS[tag] == "NPE":
        fluid: EulerFluid | DarcyFluid = EulerFluid(field())
    else:
        fluid = DarcyFluid()
    if cur.pos != len(body):
        raise SnapshotError(f"{path}: trailing bytes after field data")
    return make_state(grid, species, fluid, time)
