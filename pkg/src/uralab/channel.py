"""i.i.d. Rayleigh block-fading MIMO uplink."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatch(ValueError):
    pass


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(rng: np.random.Generator, Ka: int, M: int) -> np.ndarray:
    """Ka x M matrix of CN(0, 1) gains, constant over the whole frame."""
    if Ka < 0 or M < 1:
        raise ValueError("need Ka >= 0 and M >= 1")
    return complex_normal(rng, (Ka, M))


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    y: np.ndarray
    Lp: int

    @property
    def y_p(self) -> np.ndarray:
        return self.y[: self.Lp]

    @property
    def y_c(self) -> np.ndarray:
        return self.y[self.Lp:]


def superpose(signals: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Noiseless sum of ``x_k h_k^T`` for the rows of ``signals`` (K x L) and ``h`` (K x M)."""
    signals = np.atleast_2d(signals)
    h = np.atleast_2d(h)
    if signals.shape[0] != h.shape[0]:
        raise DimensionMismatch(f"{signals.shape[0]} signals but {h.shape[0]} channel rows")
    return signals.T @ h


def transmit(frames, h: np.ndarray, sigma2: float, rng: np.random.Generator,
             length: int | None = None, M: int | None = None) -> np.ndarray:
    """Received block ``Y = sum_k x_k h_k^T + Z`` with ``Z ~ CN(0, sigma2)``.

    ``frames`` is a sequence of 1-D signals (or :class:`~uralab.framing.Frame`).
    With no frames, ``length`` and ``M`` fix the shape of the pure-noise block.
    """
    xs = [np.asarray(getattr(f, "x", f)) for f in frames]
    h = np.asarray(h)
    if xs:
        lengths = {x.size for x in xs}
        if len(lengths) != 1:
            raise DimensionMismatch(f"frames of unequal length {sorted(lengths)}")
        if h.ndim != 2 or h.shape[0] != len(xs):
            raise DimensionMismatch(f"{len(xs)} frames but channel shape {h.shape}")
        length, M = xs[0].size, h.shape[1]
        y = superpose(np.stack(xs), h)
    else:
        if length is None or M is None:
            M = M if M is not None else (h.shape[1] if h.ndim == 2 else None)
            if length is None or M is None:
                raise DimensionMismatch("empty frame list needs length and M")
        y = np.zeros((length, M), dtype=complex)
    return y + complex_normal(rng, y.shape, sigma2)
