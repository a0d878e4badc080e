"""End-to-end receiver: preamble estimation, collision resolution, data decoding
and data-aided channel re-estimation.

Correctly decoded codewords are known symbols, so once a device decodes, its
LDPC-phase block becomes a long pilot. Each outer round re-estimates every
stream's channel from the preamble blocks plus those pilots, rebuilds the
residual from the original LDPC-phase block and decodes the remaining streams
again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, cs_decode_index
from .collision import ProtocolResult, Stream, UplinkSession, run_protocol
from .config import SystemConfig
from .dadce import DadCeGraph
from .framing import build_interleaver, modulate, pad
from .ldpc import LdpcCode
from .mimo_ldpc import run_ldpc_sic, sic_subtract


@dataclass
class PipelineResult:
    messages: set                      # recovered B-bit tuples
    streams: list                      # Stream per candidate device
    h_hat: np.ndarray                  # (n_streams, M) final channel estimates
    words: dict                        # stream position -> codeword
    protocol: ProtocolResult
    joint_rounds: int = 0
    decoded_per_round: list = field(default_factory=list)
    h_trace: list = field(default_factory=list)   # channel estimates after each CE pass

    @property
    def detected_indices(self) -> list:
        return [s.final_index for s in self.streams]


def stitch_message(stream_or_index, v_c_hat, Bp: int | None = None) -> np.ndarray:
    """Concatenate the resolved preamble with the decoded LDPC message bits."""
    if isinstance(stream_or_index, Stream):
        v_p = stream_or_index.preamble
    else:
        v_p = cs_decode_index(int(stream_or_index), Bp)
    return np.concatenate([np.asarray(v_p, dtype=np.uint8), np.asarray(v_c_hat, dtype=np.uint8)])


class _RecordedLink:
    """A single received frame with no feedback path."""

    def __init__(self, cfg: SystemConfig, y):
        self.y = np.asarray(y, dtype=complex)
        if self.y.shape != (cfg.L, cfg.M):
            raise ValueError(f"y must be {cfg.L} x {cfg.M}, got {self.y.shape}")
        self.Lp = cfg.Lp

    def preamble_block(self):
        return self.y[: self.Lp]

    def retransmit(self, collided):
        raise RuntimeError("a recorded frame cannot request retransmissions")

    def data_block(self, policy=None):
        return self.y[self.Lp:]


def _data_symbols(cfg, word, interleaver) -> np.ndarray:
    return interleaver.interleave(pad(modulate(word, cfg.modulation), cfg.Lc))


def soft_pilot_estimate(cfg: SystemConfig, codebook: Codebook, protocol: ProtocolResult,
                        streams: list, y_c: np.ndarray, words: dict, interleavers: list,
                        h_hat: np.ndarray):
    """Re-estimate every stream's channel with decoded data as extra pilots.

    Rows are all preamble blocks followed by the LDPC-phase block. A stream's
    column carries its preamble codeword in the blocks it was seen in and, once
    decoded, its transmitted data symbols. Undecoded streams add their
    expected power to the noise of the data rows they occupy.
    """
    amp = np.sqrt(cfg.power)
    n_blocks = len(protocol.blocks)
    K = len(streams)
    rows = n_blocks * cfg.Lp + cfg.Lc
    A = np.zeros((rows, K), dtype=complex)
    for k, s in enumerate(streams):
        for t, idx in s.chain:
            A[t * cfg.Lp:(t + 1) * cfg.Lp, k] = amp * codebook.column(idx)
    noise = np.full((rows, cfg.M), cfg.sigma2)
    base = n_blocks * cfg.Lp
    for k in range(K):
        il = interleavers[k]
        if k in words:
            A[base:, k] = amp * _data_symbols(cfg, words[k], il)
        else:
            occupied = il.where[: cfg.n_symbols]
            noise[base + occupied] += cfg.power * np.abs(h_hat[k]) ** 2
    y = np.concatenate(list(protocol.blocks) + [y_c])
    prev_mu = np.stack([s.mu for s in streams])
    prev_cov = np.stack([s.sigma for s in streams])
    graph = DadCeGraph(A, y, noise, diag=cfg.diag_approx, fixed_activity=True,
                       output_prior=(prev_mu, prev_cov), damping=cfg.damping)
    return graph.iterate(cfg.n_iter_dadce).finalize()


def _uncancelled_noise(cfg: SystemConfig, words: dict, interleavers: list, h_hat: np.ndarray):
    """Noise seen by the decoder when decoded streams stay in the block.

    With cancellation on this is just ``sigma2``. Without it, every decoded
    stream adds its received power to the rows it occupies.
    """
    if cfg.sic or not words:
        return cfg.sigma2
    noise = np.full((cfg.Lc, cfg.M), cfg.sigma2)
    for k in words:
        noise[interleavers[k].where[: cfg.n_symbols]] += cfg.power * np.abs(h_hat[k]) ** 2
    return noise


def run_joint(cfg: SystemConfig, codebook: Codebook, code: LdpcCode, link) -> PipelineResult:
    """Full receiver for one frame.

    ``link`` is an :class:`UplinkSession` (supports retransmissions) or an
    ``L x M`` received block, in which case collisions are flagged but never
    retransmitted.
    """
    if not isinstance(link, UplinkSession) and isinstance(link, np.ndarray):
        link = _RecordedLink(cfg, link)
        cfg = cfg.replace(t_max=0)
    protocol = run_protocol(cfg, codebook, link)
    y_c = link.data_block(cfg.ldpc_policy)
    streams = protocol.streams
    K = len(streams)
    h_hat = np.stack([s.mu for s in streams]) if K else np.zeros((0, cfg.M), dtype=complex)
    result = PipelineResult(set(), streams, h_hat.copy(), {}, protocol, h_trace=[h_hat.copy()])
    if K == 0:
        return result
    interleavers = [build_interleaver(s.interleaver_index(cfg.ldpc_policy), cfg.Lc, cfg.seed)
                    for s in streams]
    words: dict[int, np.ndarray] = {}
    y_r = y_c
    for rnd in range(max(cfg.n_iter_joint, 1)):
        pending = [k for k in range(K) if k not in words]
        dec = run_ldpc_sic(cfg, code, y_r, h_hat[pending], None,
                           interleavers=[interleavers[k] for k in pending],
                           noise=_uncancelled_noise(cfg, words, interleavers, h_hat))
        new = {pending[p]: w for p, w in dec.words.items()}
        words.update(new)
        result.decoded_per_round.append(len(new))
        result.joint_rounds = rnd + 1
        if not new or not cfg.joint:
            break
        est = soft_pilot_estimate(cfg, codebook, protocol, streams, y_c, words, interleavers, h_hat)
        h_hat = est.mu_dec
        result.h_trace.append(h_hat.copy())
        if len(words) == K:
            break
        if cfg.sic:
            done = sorted(words)
            y_r = sic_subtract(y_c, [words[k] for k in done], [interleavers[k] for k in done],
                               h_hat[done], cfg.modulation, cfg.power)
    result.h_hat = h_hat
    result.words = words
    result.messages = {tuple(int(b) for b in stitch_message(streams[k], w[: code.k]))
                       for k, w in words.items()}
    return result
