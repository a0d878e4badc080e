"""Modulation, zero padding, index-driven interleaving and frame assembly."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codebook import Codebook, cs_encode
from .config import SystemConfig
from .ldpc import LdpcCode, ldpc_encode

_MASK64 = (1 << 64) - 1


class OddLength(ValueError):
    pass


def splitmix64(state: int):
    """Infinite splitmix64 stream starting from ``state``."""
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def mix_seed(global_seed: int, index: int) -> int:
    gen = splitmix64((global_seed ^ (index * 0xD1B54A32D192ED03)) & _MASK64)
    return next(gen)


@lru_cache(maxsize=8192)
def _permutation(index: int, Lc: int, global_seed: int) -> np.ndarray:
    perm = list(range(Lc))
    gen = splitmix64(mix_seed(global_seed, index))
    for i in range(Lc - 1, 0, -1):
        j = next(gen) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    out = np.array(perm, dtype=np.intp)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Interleaver:
    """``interleave(s)[t] = s[perm[t]]``; position ``j`` of the input lands at ``where[j]``."""

    perm: np.ndarray
    index: int
    global_seed: int

    @property
    def where(self) -> np.ndarray:
        return np.argsort(self.perm)

    def interleave(self, s: np.ndarray) -> np.ndarray:
        return np.asarray(s)[self.perm]

    def deinterleave(self, t: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.asarray(t))
        out[self.perm] = t
        return out


def build_interleaver(index: int, Lc: int, global_seed: int) -> Interleaver:
    if index < 1:
        raise ValueError("preamble index is 1-based")
    return Interleaver(_permutation(int(index), int(Lc), int(global_seed)), int(index), int(global_seed))


def modulate(bits, modulation: str = "BPSK") -> np.ndarray:
    """BPSK: 1 -> +1, 0 -> -1.  QPSK: bit pairs (re, im), each 1 -> +1/sqrt2."""
    b = np.asarray(bits, dtype=np.int8).ravel()
    sym = 2.0 * b - 1.0
    if modulation == "BPSK":
        return sym.astype(complex)
    if modulation == "QPSK":
        if b.size % 2:
            raise OddLength("QPSK needs an even number of bits")
        return (sym[0::2] + 1j * sym[1::2]) / np.sqrt(2.0)
    raise ValueError(f"unknown modulation {modulation!r}")


def pad(symbols: np.ndarray, Lc: int) -> np.ndarray:
    out = np.zeros(Lc, dtype=complex)
    out[: symbols.size] = symbols
    return out


def data_section(cfg: SystemConfig, code: LdpcCode, codeword, index: int,
                 interleaver_seed: int) -> np.ndarray:
    """Unit-power LDPC-phase block ``pi_i(pad(modulate(codeword)))`` of length Lc."""
    s = pad(modulate(codeword, cfg.modulation), cfg.Lc)
    return build_interleaver(index, cfg.Lc, interleaver_seed).interleave(s)


@dataclass(frozen=True, eq=False)
class Frame:
    x: np.ndarray      # length L, already scaled by sqrt(P)
    Lp: int

    @property
    def cs_part(self) -> np.ndarray:
        return self.x[: self.Lp]

    @property
    def ldpc_part(self) -> np.ndarray:
        return self.x[self.Lp:]


def build_frame(cfg: SystemConfig, codebook: Codebook, code: LdpcCode, index: int,
                v_c, interleaver_seed: int) -> Frame:
    """Frame for preamble index ``index`` carrying the LDPC bits ``v_c``."""
    word = ldpc_encode(code, v_c)
    x = np.concatenate([codebook.column(index),
                        data_section(cfg, code, word, index, interleaver_seed)])
    return Frame(np.sqrt(cfg.power) * x, cfg.Lp)


def frame(cfg: SystemConfig, codebook: Codebook, code: LdpcCode, v,
          interleaver_seed: int | None = None) -> tuple[Frame, int]:
    """Split a B-bit message into preamble and LDPC parts and build its frame."""
    v = np.asarray(v, dtype=np.uint8).ravel()
    if v.size != cfg.B:
        raise ValueError(f"expected {cfg.B} message bits, got {v.size}")
    index = cs_encode(v[: cfg.Bp])
    seed = cfg.seed if interleaver_seed is None else interleaver_seed
    return build_frame(cfg, codebook, code, index, v[cfg.Bp:], seed), index
