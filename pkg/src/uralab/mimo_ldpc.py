"""Joint MIMO detection and LDPC decoding with successive interference cancellation.

Every detected device contributes one interleaved, zero-padded symbol stream to
the LDPC-phase block. Observation nodes are the ``(row, antenna)`` entries of
that block; each device's Tanner graph hangs off its own symbols. Bits map to
symbols one-to-one for BPSK and in (real, imaginary) pairs for QPSK.

Message arrays use the axes ``(device, bit or symbol, antenna)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import DimensionMismatch
from .framing import Interleaver, build_interleaver, modulate, pad
from .ldpc import LdpcCode

LLR_CLAMP = 50.0
TANH_CLAMP = 19.0
PROD_EPS = 1e-15


def logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def symbol_stats(p_bits: np.ndarray, modulation: str):
    """Mean and variance of each symbol given bit-one probabilities.

    ``p_bits`` has the bit axis second: ``(K, n, M)``. Returns ``(K, S, M)``.
    """
    if modulation == "BPSK":
        return 2.0 * p_bits - 1.0, 4.0 * p_bits * (1.0 - p_bits)
    pr, pi = p_bits[:, 0::2], p_bits[:, 1::2]
    mean = ((2.0 * pr - 1.0) + 1j * (2.0 * pi - 1.0)) / np.sqrt(2.0)
    var = 2.0 * (pr - pr ** 2 + pi - pi ** 2)
    return mean, var


def check_update(q: np.ndarray, dc: int) -> np.ndarray:
    """Sum-product check rule on edge arrays of shape ``(..., N * dc)``.

    Each output excludes its own input through prefix/suffix products.
    """
    shape = q.shape
    t = np.tanh(np.clip(q, -2 * TANH_CLAMP, 2 * TANH_CLAMP) / 2.0).reshape(shape[:-1] + (-1, dc))
    pre = np.ones_like(t)
    suf = np.ones_like(t)
    pre[..., 1:] = np.cumprod(t[..., :-1], axis=-1)
    suf[..., :-1] = np.cumprod(t[..., :0:-1], axis=-1)[..., ::-1]
    prod = np.clip(pre * suf, -1.0 + PROD_EPS, 1.0 - PROD_EPS)
    return (2.0 * np.arctanh(prod)).reshape(shape)


class LdpcMimoGraph:
    """One inner round of MIMO-LDPC message passing over a fixed device set.

    Parameters
    ----------
    code : LdpcCode
    y : (Lc, M) complex
        LDPC-phase observations (after any cancellation).
    h : (K, M) complex
        Effective channels, transmit amplitude included.
    positions : (K, S) int
        Row of ``y`` that carries each device's symbol ``j``.
    modulation : {"BPSK", "QPSK"}
    noise : float or (Lc, M)
    """

    def __init__(self, code: LdpcCode, y, h, positions, modulation="BPSK", noise=1.0):
        self.code = code
        self.modulation = modulation
        y = np.asarray(y, dtype=complex)
        self.h = np.asarray(h, dtype=complex)
        self.pos = np.asarray(positions, dtype=np.intp)
        K = self.h.shape[0]
        if self.pos.shape[0] != K:
            raise DimensionMismatch(f"{K} channels but {self.pos.shape[0]} position rows")
        self.K, self.M, self.Lc = K, y.shape[1], y.shape[0]
        self.n = code.n
        self.edge_var = code.check_vars.ravel()
        self.y_at = y[self.pos]                                   # (K, S, M)
        noise = np.broadcast_to(np.asarray(noise, dtype=float), y.shape)
        self.noise_at = noise[self.pos]
        self.R = np.zeros((K, self.edge_var.size))
        self.Q = np.zeros_like(self.R)
        self.lam = np.zeros((K, self.n, self.M))
        self.P = np.full((K, self.n, self.M), 0.5)
        self.L = np.zeros((K, self.n))
        self.frozen = np.zeros(K, dtype=bool)
        self.hard = np.zeros((K, self.n), dtype=np.uint8)
        self.iterations = 0

    # ------------------------------------------------------------------
    def _stats(self):
        mean, var = symbol_stats(self.P, self.modulation)
        if self.frozen.any():
            f = self.frozen
            sym = modulate_rows(self.hard[f], self.modulation)
            mean[f] = (sym.real if self.modulation == "BPSK" else sym)[..., None]
            var[f] = 0.0
        return mean, var

    def lambda_update(self):
        mean, var = self._stats()
        h = self.h[:, None, :]
        c_mean = h * mean
        c_var = np.abs(h) ** 2 * var
        flat = self.pos.ravel()
        tot_mean = np.zeros((self.Lc, self.M), dtype=complex)
        tot_var = np.zeros((self.Lc, self.M))
        np.add.at(tot_mean, flat, c_mean.reshape(-1, self.M))
        np.add.at(tot_var, flat, c_var.reshape(-1, self.M))
        mu_z = tot_mean[self.pos] - c_mean
        var_z = np.maximum(tot_var[self.pos] - c_var, 0.0) + self.noise_at
        resid = np.conj(h) * (self.y_at - mu_z)
        if self.modulation == "BPSK":
            lam = 2.0 / var_z * resid.real
        else:
            sym = 2.0 * np.sqrt(2.0) / var_z * resid
            lam = np.empty((self.K, self.n, self.M))
            lam[:, 0::2], lam[:, 1::2] = sym.real, sym.imag
        self.lam = np.clip(lam, -LLR_CLAMP, LLR_CLAMP)

    def _r_sum(self) -> np.ndarray:
        return self.R[:, self.code.var_edges].sum(-1)

    def q_update(self):
        total = self.lam.sum(-1) + self._r_sum()
        self.Q = total[:, self.edge_var] - self.R

    def r_update(self):
        self.R = check_update(self.Q, self.code.check_vars.shape[1])

    def p_update(self):
        self.L = self.lam.sum(-1) + self._r_sum()
        self.P = logistic(np.clip(self.L[..., None] - self.lam, -LLR_CLAMP, LLR_CLAMP))

    def decide(self):
        """Hard decisions and per-device parity flags."""
        bits = (self.L > 0).astype(np.uint8)
        synd = (bits.astype(np.int64) @ self.code.h.T.astype(np.int64)) & 1
        return bits, ~synd.any(-1)

    def iterate(self, n_iter: int):
        """Run until every device is parity-valid or ``n_iter`` is reached."""
        for _ in range(n_iter):
            if self.frozen.all():
                break
            self.lambda_update()
            self.q_update()
            self.r_update()
            self.p_update()
            self.iterations += 1
            bits, valid = self.decide()
            new = valid & ~self.frozen
            self.hard[new] = bits[new]
            self.frozen |= new
        return self


def modulate_rows(bits: np.ndarray, modulation: str) -> np.ndarray:
    return np.stack([modulate(b, modulation) for b in bits]) if len(bits) else \
        np.zeros((0, 0), dtype=complex)


def symbol_positions(interleavers, n_symbols: int) -> np.ndarray:
    """Row index of every data symbol for each interleaver."""
    if not interleavers:
        return np.zeros((0, n_symbols), dtype=np.intp)
    return np.stack([il.where[:n_symbols] for il in interleavers])


def sic_subtract(y_c, decoded_words, interleavers, h_hat, modulation="BPSK", power=1.0):
    """Cancel decoded devices from the original LDPC-phase block.

    ``h_hat`` rows align with ``decoded_words``; ``power`` is the symbol power
    the channel estimates do not already include.
    """
    y_c = np.asarray(y_c, dtype=complex)
    words = list(decoded_words)
    if not words:
        return y_c.copy()
    h_hat = np.atleast_2d(np.asarray(h_hat, dtype=complex))
    if h_hat.shape[0] != len(words) or len(interleavers) != len(words):
        raise DimensionMismatch("decoded words, interleavers and channels disagree")
    if h_hat.shape[1] != y_c.shape[1]:
        raise DimensionMismatch(f"channel width {h_hat.shape[1]} vs {y_c.shape[1]} antennas")
    Lc = y_c.shape[0]
    s = np.stack([il.interleave(pad(modulate(w, modulation), Lc))
                  for w, il in zip(words, interleavers)])
    return y_c - np.sqrt(power) * s.T @ h_hat


@dataclass
class LdpcSicResult:
    words: dict = field(default_factory=dict)   # stream position -> codeword
    order: list = field(default_factory=list)   # positions in decoding order
    rounds: int = 0
    iterations: int = 0

    @property
    def decoded_set(self) -> list:
        return sorted(self.words)


def run_ldpc_sic(cfg, code: LdpcCode, y_c, h_hat, interleaver_indices,
                 interleaver_seed: int | None = None, noise=None,
                 interleavers: list[Interleaver] | None = None) -> LdpcSicResult:
    """Decode every candidate stream, cancelling parity-valid words between rounds.

    Parameters
    ----------
    h_hat : (K, M)
        Channel estimates for the candidate streams (unit transmit power).
    interleaver_indices : sequence of int
        Preamble index selecting each stream's interleaver.
    noise : float or (Lc, M), optional
        Defaults to ``cfg.sigma2``.
    """
    y_c = np.asarray(y_c, dtype=complex)
    h_hat = np.asarray(h_hat, dtype=complex).reshape(-1, y_c.shape[1])
    if interleavers is None:
        seed = cfg.seed if interleaver_seed is None else interleaver_seed
        interleavers = [build_interleaver(i, cfg.Lc, seed) for i in interleaver_indices]
    if len(interleavers) != h_hat.shape[0]:
        raise DimensionMismatch(f"{h_hat.shape[0]} channels but {len(interleavers)} interleavers")
    result = LdpcSicResult()
    K = h_hat.shape[0]
    if K == 0:
        return result
    amp = np.sqrt(cfg.power)
    pos_all = symbol_positions(interleavers, cfg.n_symbols)
    noise = cfg.sigma2 if noise is None else noise
    remaining = list(range(K))
    while remaining:
        done = result.order
        y = sic_subtract(y_c, [result.words[k] for k in done], [interleavers[k] for k in done],
                         h_hat[done], cfg.modulation, cfg.power)
        graph = LdpcMimoGraph(code, y, amp * h_hat[remaining], pos_all[remaining],
                              cfg.modulation, noise).iterate(cfg.n_iter_ldpc)
        result.rounds += 1
        result.iterations += graph.iterations
        new = [k for k, f in zip(remaining, graph.frozen) if f]
        if not new:
            break
        for k, row in zip(remaining, graph.hard):
            if k in new:
                result.words[k] = row.copy()
                result.order.append(k)
        remaining = [k for k in remaining if k not in result.words]
        if not cfg.sic:
            break
    return result
