"""
Binary checkpoints of a single member.

Layout, all little-endian::

    magic        8 bytes  b"QGERGO01"
    version      u32
    N            u32
    step         u64
    t            f64
    omega        N*N f64, m-major / n-minor
    z            N*N f64, same order
    seed         u64
    step counter u64   (forcing-stream position; the RNG resumes from it)

The member id is not part of the payload; the run layout stores it in the
file name (``member_XXXXX.bin``).
"""

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagicError, TruncatedPayloadError, VersionMismatchError
from .integrator import FlowState

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "Checkpoint",
    "encode",
    "decode",
    "dump_state",
    "load_state",
    "write_checkpoint",
    "read_checkpoint",
    "step_dir",
    "member_file",
]

MAGIC = b"QGERGO01"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIQd")
_TRAILER = struct.Struct("<QQ")


@dataclass(frozen=True)
class Checkpoint:
    N: int
    step: int
    t: float
    omega: np.ndarray
    z: np.ndarray
    seed: int
    counter: int

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return encode(self) == encode(other)

    def to_state(self, params, noise, member=0):
        """Rebuild a :class:`FlowState`; ``params``/``noise`` come from the run config."""
        return FlowState(self.omega.copy(), self.z.copy(), self.counter, params, noise,
                         self.seed, member)

    @classmethod
    def from_state(cls, state):
        return cls(state.params.N, state.step, state.t, state.omega, state.z, state.seed,
                   state.step)


def encode(ckpt):
    N = ckpt.N
    omega = np.ascontiguousarray(ckpt.omega, dtype="<f8")
    z = np.ascontiguousarray(ckpt.z, dtype="<f8")
    if omega.shape != (N, N) or z.shape != (N, N):
        raise ValueError(f"fields must be {N}x{N}")
    return b"".join([
        _HEADER.pack(MAGIC, FORMAT_VERSION, N, ckpt.step, ckpt.t),
        omega.tobytes(),
        z.tobytes(),
        _TRAILER.pack(ckpt.seed, ckpt.counter),
    ])


def decode(data):
    data = bytes(data)
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagicError("not a checkpoint: bad magic")
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"header needs {_HEADER.size} bytes, got {len(data)}")
    _, version, N, step, t = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version}, expected {FORMAT_VERSION}")
    size = _HEADER.size + 16 * N * N + _TRAILER.size
    if len(data) < size:
        raise TruncatedPayloadError(f"payload needs {size} bytes, got {len(data)}")
    if len(data) > size:
        raise TruncatedPayloadError(f"{len(data) - size} unexpected trailing bytes")
    off = _HEADER.size
    omega = np.frombuffer(data, "<f8", N * N, off).reshape(N, N).astype(float)
    z = np.frombuffer(data, "<f8", N * N, off + 8 * N * N).reshape(N, N).astype(float)
    seed, counter = _TRAILER.unpack_from(data, off + 16 * N * N)
    return Checkpoint(N, step, t, omega, z, seed, counter)


def dump_state(state):
    """Serialize a :class:`FlowState`."""
    return encode(Checkpoint.from_state(state))


def load_state(data, params, noise, member=0):
    """Inverse of :func:`dump_state` given the run's model and noise."""
    ckpt = decode(data)
    if ckpt.N != params.N:
        raise VersionMismatchError(f"checkpoint has N={ckpt.N}, model has N={params.N}")
    return ckpt.to_state(params, noise, member)


def step_dir(root, step):
    return Path(root) / "checkpoints" / f"step_{step:010d}"


def member_file(root, step, member):
    return step_dir(root, step) / f"member_{member:05d}.bin"


def write_checkpoint(path, ckpt):
    """Atomic write: a partially written file never carries the final name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(encode(ckpt))
    os.replace(tmp, path)


def read_checkpoint(path):
    return decode(Path(path).read_bytes())
