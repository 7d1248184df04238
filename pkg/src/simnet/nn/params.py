"""Named parameter storage, seeded initialization, and checkpoint files.

Checkpoints are flat containers of ``(name, shape, little-endian float32)``
records behind the magic string ``SIMNG1`` and a format-version byte.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ContractError, FormatError
from .tensor import Tensor

CHECKPOINT_MAGIC = b"SIMNG1"
CHECKPOINT_VERSION = 1


class ParameterStore:
    """Map from parameter path to trainable Tensor, plus non-trainable buffers.

    Creation order is whatever the model builder does (it draws from the
    seeded rng in that order), but iteration is always lexicographic so the
    optimizer walks parameters deterministically.
    """

    def __init__(self, seed: int = 0, dtype=np.float32):
        self.seed = seed
        self.dtype = dtype
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}

    # -- creation -----------------------------------------------------------

    def create(self, name: str, shape, init: str = "kaiming", fan_in: int | None = None) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        shape = tuple(int(s) for s in shape)
        if init == "kaiming":
            # uniform fan-in rule: U(-sqrt(6/fan_in), sqrt(6/fan_in))
            if fan_in is None:
                fan_in = shape[0] if len(shape) > 1 else shape[-1]
            bound = np.sqrt(6.0 / fan_in)
            data = self._rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "identity_flat":
            k = int(round(np.sqrt(shape[-1])))
            if k * k != shape[-1]:
                raise ContractError(f"identity_flat needs a square size, got {shape}")
            data = np.tile(np.eye(k).reshape(-1), shape[:-1] + (1,)) if len(shape) > 1 else np.eye(k).reshape(-1)
        else:
            raise ContractError(f"unknown init {init!r}")
        t = Tensor(np.asarray(data, dtype=self.dtype), requires_grad=True, validate=False)
        self._params[name] = t
        return t

    def buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._buffers:
            raise ContractError(f"duplicate buffer name {name!r}")
        self._buffers[name] = np.asarray(value, dtype=self.dtype)
        return self._buffers[name]

    # -- access ---------------------------------------------------------------

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return sorted(self._params)

    def items(self):
        """Parameters in lexicographic name order."""
        for name in sorted(self._params):
            yield name, self._params[name]

    def buffers(self):
        for name in sorted(self._buffers):
            yield name, self._buffers[name]

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def n_values(self) -> int:
        return sum(p.size for p in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self._params.items()}
        state.update({name: b.copy() for name, b in self._buffers.items()})
        return state

    def load_state(self, state: dict[str, np.ndarray]):
        for name, p in self._params.items():
            if name not in state:
                raise ContractError(f"state is missing parameter {name!r}")
            if state[name].shape != p.data.shape:
                raise ContractError(
                    f"shape mismatch for {name!r}: {state[name].shape} vs {p.data.shape}"
                )
            p.data[...] = state[name]
        for name, b in self._buffers.items():
            if name in state:
                b[...] = state[name]


# -- checkpoint format -------------------------------------------------------


def save_checkpoint(state: dict[str, np.ndarray] | ParameterStore, path):
    if isinstance(state, ParameterStore):
        state = state.snapshot()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(state)))
        for name in sorted(state):
            arr = np.ascontiguousarray(state[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic")
    off = len(CHECKPOINT_MAGIC)
    version = blob[off]
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off += 1
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    state: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            ndim = blob[off]
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, off)
            off += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
            off += 4 * n
            state[name] = arr.copy()
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated checkpoint ({exc})") from exc
    if off != len(blob):
        raise FormatError(f"{path}: trailing bytes after last record")
    return state
