"""Common CS codebook and the preamble-bit <-> column-index map."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_CODEBOOK_BYTES = 1 << 30
_HEADER = struct.Struct("<qqQ")  # Lp, Bp, seed


class SizeOverflow(MemoryError):
    pass


@dataclass(frozen=True, eq=False)
class Codebook:
    """Columns ``a[:, i-1]`` with squared norm ``Lp`` for preamble index ``i``."""

    a: np.ndarray
    seed: int

    @property
    def Lp(self) -> int:
        return self.a.shape[0]

    @property
    def Bp(self) -> int:
        return int(self.a.shape[1]).bit_length() - 1

    def column(self, index: int) -> np.ndarray:
        """Codeword for the 1-based preamble index."""
        return self.a[:, index - 1]


def build_codebook(seed: int, Lp: int, Bp: int, max_bytes: int = MAX_CODEBOOK_BYTES) -> Codebook:
    if Lp < 1 or Bp < 1:
        raise ValueError("Lp and Bp must be >= 1")
    n_bytes = 16 * Lp * 2**Bp
    if n_bytes > max_bytes:
        raise SizeOverflow(f"codebook needs {n_bytes} bytes, cap is {max_bytes}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, Lp, Bp]))
    a = rng.standard_normal((Lp, 2**Bp)) + 1j * rng.standard_normal((Lp, 2**Bp))
    a *= np.sqrt(Lp) / np.linalg.norm(a, axis=0)
    a.setflags(write=False)
    return Codebook(a, seed)


def cs_encode(v_p) -> int:
    """1-based column index of a preamble, reading bits MSB first."""
    index = 0
    for bit in np.asarray(v_p, dtype=np.int64).ravel():
        index = (index << 1) | int(bit)
    return index + 1


def cs_decode_index(index: int, Bp: int) -> np.ndarray:
    """Inverse of :func:`cs_encode`."""
    value = int(index) - 1
    if not 0 <= value < 2**Bp:
        raise ValueError(f"index {index} outside [1, 2**{Bp}]")
    return np.array([(value >> (Bp - 1 - b)) & 1 for b in range(Bp)], dtype=np.int8)


def save_codebook(codebook: Codebook, path: str | Path) -> None:
    """Header (Lp, Bp, seed) then row-major little-endian re/im float64 pairs."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(codebook.Lp, codebook.Bp, codebook.seed & (2**64 - 1)))
        fh.write(np.ascontiguousarray(codebook.a, dtype="<c16").tobytes())


def load_codebook(path: str | Path) -> Codebook:
    raw = Path(path).read_bytes()
    Lp, Bp, seed = _HEADER.unpack_from(raw)
    a = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(Lp, 2**Bp).copy()
    a.setflags(write=False)
    return Codebook(a, seed)
