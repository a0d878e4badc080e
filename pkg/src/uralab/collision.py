"""Collision detection and resolution for the CS preamble.

Two devices that draw the same preamble column are indistinguishable to the
activity detector; the estimated channel is then the sum of theirs and carries
roughly twice the energy. The receiver flags such columns, the flagged devices
slide their ``Bp``-bit window ``B0`` bits into the message and send a fresh
preamble block, and the receiver links the new windows back to the old ones
through the ``Bp - B0`` bits they share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, lgamma

import numpy as np

from .channel import sample_channels, transmit
from .codebook import Codebook, cs_decode_index, cs_encode
from .config import SystemConfig
from .dadce import DadCeResult, run_dad_ce
from .framing import data_section
from .ldpc import LdpcCode, ldpc_encode


class WindowOutOfRange(IndexError):
    pass


class OverlapMismatch(ValueError):
    pass


class AmbiguousSplice(ValueError):
    pass


# ----------------------------------------------------------------------
# window arithmetic

def energy_detect(h_hat) -> float:
    """Per-antenna energy of an estimated channel."""
    h = np.asarray(h_hat).ravel()
    return float(np.vdot(h, h).real / h.size)


def window_fits(t: int, B: int, Bp: int, B0: int) -> bool:
    return t * B0 + Bp <= B


def slide_window(v, t: int, Bp: int, B0: int) -> np.ndarray:
    """Bits ``v[t*B0 : t*B0 + Bp]``."""
    v = np.asarray(v)
    if t < 0 or not window_fits(t, v.size, Bp, B0):
        raise WindowOutOfRange(f"window {t} of length {Bp} step {B0} exceeds {v.size} bits")
    return v[t * B0: t * B0 + Bp].copy()


def overlaps(prev, new, B0: int) -> bool:
    """Do consecutive windows agree on their shared ``Bp - B0`` bits?"""
    prev, new = np.asarray(prev), np.asarray(new)
    return bool(np.array_equal(prev[B0:], new[: prev.size - B0]))


def stitch(windows, B0: int) -> np.ndarray:
    """Rebuild the bit string covered by consecutive windows."""
    windows = [np.asarray(w) for w in windows]
    if not windows:
        return np.zeros(0, dtype=np.int8)
    out = [windows[0]]
    for prev, new in zip(windows, windows[1:]):
        if not overlaps(prev, new, B0):
            raise OverlapMismatch(f"windows {prev} and {new} disagree on their common part")
        out.append(new[new.size - B0:])
    return np.concatenate(out)


def link_window(candidates, new, B0: int) -> int | None:
    """Position of the single candidate window that ``new`` continues.

    Returns None when nothing matches and raises :class:`AmbiguousSplice`
    when more than one candidate shares the common part.
    """
    hits = [i for i, w in enumerate(candidates) if overlaps(w, new, B0)]
    if len(hits) > 1:
        raise AmbiguousSplice(f"window {np.asarray(new)} continues {len(hits)} chains")
    return hits[0] if hits else None


# ----------------------------------------------------------------------
# analytics and index-level Monte Carlo

def falling_ratio(M: float, k: float) -> float:
    """``M (M-1) ... (M-k+1) / M**k``, extended to real ``k`` through gamma functions."""
    if k <= 1:
        return 1.0
    if k > M:
        return 0.0
    return exp(lgamma(M + 1) - lgamma(M - k + 1) - k * np.log(M))


def p_no_collision(Ka: int, Mp: int) -> float:
    if Ka > Mp:
        return 0.0
    p = 1.0
    for j in range(Ka):
        p *= (Mp - j) / Mp
    return p


def expected_collided_groups(Ka: int, Mp: int) -> float:
    """Expected number of preamble columns picked by two or more devices."""
    q = 1.0 - 1.0 / Mp
    return Mp * (1.0 - q ** Ka - Ka / Mp * q ** (Ka - 1))


def collision_analytics(Ka: int, Mp: int, B0: int, Bp: int, l: int) -> dict:
    """Round-by-round collision figures for ``l`` window slides.

    ``k0 = Ka (1 - P_no)`` and ``bound[r] = Ka (1 - P_no)**(r + 1)`` are the
    closed forms. ``expected_collided`` starts from the exact mean number of
    collided devices, splits it evenly over the expected number of collided
    columns and shrinks each group by ``g_{r+1} = g_r (1 - P_no(2**B0, g_r))``.
    """
    p0 = p_no_collision(Ka, Mp)
    q = 1.0 - 1.0 / Mp
    mean0 = Ka * (1.0 - q ** (Ka - 1)) if Ka > 0 else 0.0
    groups = expected_collided_groups(Ka, Mp) if Ka > 0 else 0.0
    ks = [mean0]
    g = mean0 / groups if groups > 0 else 0.0
    for _ in range(l):
        g = g * (1.0 - falling_ratio(2 ** B0, g))
        ks.append(groups * g)
    return {
        "p_no_colli": p0,
        "k0": Ka * (1.0 - p0),
        "p_common_distinct": falling_ratio(2 ** (Bp - B0), groups) if Bp > B0 else 0.0,
        "expected_collided": np.array(ks),
        "bound": Ka * (1.0 - p0) ** (np.arange(l + 1) + 1),
    }


def _collided(values: np.ndarray) -> np.ndarray:
    _, inv, counts = np.unique(values, return_inverse=True, return_counts=True)
    return counts[inv] > 1


def simulate_collisions(Ka: int, Bp: int, B0: int, B: int, rounds: int, trials: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Collided-device counts per round for uniformly random ``B``-bit messages.

    Returns ``(trials, rounds + 1)`` integers. Round 0 counts devices sharing
    their first window; round ``r`` counts devices among the previous round's
    collided set that still share their ``r``-th window.
    """
    out = np.zeros((trials, rounds + 1), dtype=int)
    for trial in range(trials):
        msgs = rng.integers(0, 2, size=(Ka, B))
        active = np.arange(Ka)
        for r in range(rounds + 1):
            if active.size == 0 or not window_fits(r, B, Bp, B0):
                break
            win = np.array([cs_encode(slide_window(msgs[k], r, Bp, B0)) for k in active])
            hit = _collided(win)
            out[trial, r] = hit.sum()
            active = active[hit]
    return out


# ----------------------------------------------------------------------
# devices and air interface

class UplinkSession:
    """Ground truth for one frame: messages, channels and every block on the air.

    Devices keep their own window counter. A device slides only when it sent
    the last preamble block and the broadcast collided set contains its
    current preamble index.
    """

    def __init__(self, cfg: SystemConfig, codebook: Codebook, code: LdpcCode,
                 messages, channels, rng: np.random.Generator):
        self.cfg, self.codebook, self.code, self.rng = cfg, codebook, code, rng
        self.messages = np.asarray(messages, dtype=np.uint8).reshape(-1, cfg.B)
        self.channels = np.asarray(channels, dtype=complex).reshape(self.messages.shape[0], cfg.M)
        self.window = np.zeros(self.Ka, dtype=int)
        self.index = np.array([cs_encode(m[: cfg.Bp]) for m in self.messages], dtype=int)
        self.root_index = self.index.copy()
        self.on_air = np.ones(self.Ka, dtype=bool)
        self.retransmissions = 0

    @classmethod
    def random(cls, cfg, codebook, code, rng):
        msgs = rng.integers(0, 2, size=(cfg.Ka, cfg.B), dtype=np.uint8)
        return cls(cfg, codebook, code, msgs, sample_channels(rng, cfg.Ka, cfg.M), rng)

    @property
    def Ka(self) -> int:
        return self.messages.shape[0]

    @property
    def channel_uses(self) -> int:
        return self.cfg.L + self.retransmissions * self.cfg.Lp

    def _preamble(self, devices) -> np.ndarray:
        amp = np.sqrt(self.cfg.power)
        xs = [amp * self.codebook.column(self.index[k]) for k in devices]
        return transmit(xs, self.channels[list(devices)].reshape(len(xs), self.cfg.M),
                        self.cfg.sigma2, self.rng, length=self.cfg.Lp, M=self.cfg.M)

    def preamble_block(self) -> np.ndarray:
        return self._preamble(range(self.Ka))

    def retransmit(self, collided) -> np.ndarray:
        """Slide every device whose current index was flagged and return the new block."""
        cfg = self.cfg
        collided = {int(i) for i in collided}
        movers = []
        for k in range(self.Ka):
            if (self.on_air[k] and self.index[k] in collided
                    and window_fits(self.window[k] + 1, cfg.B, cfg.Bp, cfg.slide)):
                self.window[k] += 1
                self.index[k] = cs_encode(slide_window(self.messages[k], self.window[k], cfg.Bp, cfg.slide))
                movers.append(k)
        self.on_air[:] = False
        self.on_air[movers] = True
        self.retransmissions += 1
        return self._preamble(movers)

    def interleaver_index(self, k: int, policy: str | None = None) -> int:
        policy = policy or self.cfg.ldpc_policy
        return int(self.index[k] if policy == "final" else self.root_index[k])

    def data_block(self, policy: str | None = None) -> np.ndarray:
        """LDPC-phase block, each device interleaving with the index its policy selects."""
        cfg = self.cfg
        amp = np.sqrt(cfg.power)
        xs = [amp * data_section(cfg, self.code, ldpc_encode(self.code, m[cfg.Bp:]),
                                 self.interleaver_index(k, policy), cfg.seed)
              for k, m in enumerate(self.messages)]
        return transmit(xs, self.channels, cfg.sigma2, self.rng, length=cfg.Lc, M=cfg.M)

    def true_messages(self) -> set[tuple]:
        return {tuple(int(b) for b in m) for m in self.messages}


# ----------------------------------------------------------------------
# receiver side

@dataclass
class Stream:
    """One resolved preamble chain and its channel estimate."""

    chain: list            # [(round, 1-based index), ...]
    mu: np.ndarray
    sigma: np.ndarray
    epsilon: float
    Bp: int
    B0: int

    @property
    def windows(self) -> list:
        return [cs_decode_index(idx, self.Bp) for _, idx in self.chain]

    @property
    def root_index(self) -> int:
        return self.chain[0][1]

    @property
    def final_index(self) -> int:
        return self.chain[-1][1]

    @property
    def rounds(self) -> int:
        return self.chain[-1][0]

    @property
    def covered_bits(self) -> np.ndarray:
        return stitch(self.windows, self.B0)

    @property
    def preamble(self) -> np.ndarray:
        return self.covered_bits[: self.Bp]

    def interleaver_index(self, policy: str) -> int:
        return self.final_index if policy == "final" else self.root_index

    def extend(self, t, index, mu, sigma, epsilon) -> "Stream":
        return Stream(self.chain + [(t, int(index))], mu, sigma, epsilon, self.Bp, self.B0)


def new_stream(index, mu, sigma, epsilon, Bp, B0) -> Stream:
    return Stream([(0, int(index))], mu, sigma, epsilon, Bp, B0)


@dataclass
class CollisionRound:
    t: int
    collided_indices: list
    accepted_indices: list
    window_offset: int


@dataclass
class ProtocolResult:
    streams: list
    rounds: list
    blocks: list                          # received preamble blocks, round order
    estimates: list                       # DadCeResult per block
    ambiguous: int = 0
    dropped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def retransmissions(self) -> int:
        return len(self.blocks) - 1


def _closest_chain(pending, prev, window, B0, mu) -> int:
    """Break an overlap tie by channel direction; a device keeps its channel across rounds."""
    hits = [j for j, w in enumerate(prev) if overlaps(w, window, B0)]
    corr = [abs(np.vdot(pending[j].mu, mu)) / (np.linalg.norm(pending[j].mu) + 1e-30) for j in hits]
    return hits[int(np.argmax(corr))]


def _round_pa(cfg: SystemConfig, n_collided: int) -> float:
    Mp = 2 ** cfg.Bp
    return float(np.clip(2.0 * n_collided / Mp, 1.0 / Mp, 0.5))


def run_protocol(cfg: SystemConfig, codebook: Codebook, session: UplinkSession,
                 estimator=run_dad_ce) -> ProtocolResult:
    """Estimate, flag collisions, drive retransmissions and link windows.

    ``estimator(cfg, codebook, y_p, pa=...)`` returns a :class:`DadCeResult`.
    """
    B0 = cfg.slide
    y0 = session.preamble_block()
    est = estimator(cfg, codebook, y0)
    out = ProtocolResult([], [], [y0], [est])

    def candidates(res: DadCeResult):
        for col in res.active_set:
            yield col + 1, res.mu_dec[col], res.sigma_dec[col], energy_detect(res.mu_dec[col])

    if not cfg.collision_resolution:
        out.streams = [new_stream(i, mu, sg, e, cfg.Bp, B0) for i, mu, sg, e in candidates(est)]
        return out

    pending: list[Stream] = []

    def classify(t: int, cands: list[Stream]):
        nonlocal pending
        pending = []
        accepted = []
        can_slide = t < cfg.t_max and window_fits(t + 1, cfg.B, cfg.Bp, B0)
        for s in cands:
            if s.epsilon <= cfg.gamma:
                out.dropped += 1
            elif s.epsilon < cfg.eta or not can_slide:
                # past the last allowed slide the estimate is kept as is
                out.streams.append(s)
                accepted.append(s.final_index)
            else:
                pending.append(s)
        out.rounds.append(CollisionRound(t, [s.final_index for s in pending], accepted, t * B0))

    classify(0, [new_stream(i, mu, sg, e, cfg.Bp, B0) for i, mu, sg, e in candidates(est)])
    t = 0
    while pending:
        t += 1
        collided = [s.final_index for s in pending]
        y = session.retransmit(collided)
        est = estimator(cfg, codebook, y, pa=_round_pa(cfg, len(collided)))
        out.blocks.append(y)
        out.estimates.append(est)
        prev = [s.windows[-1] for s in pending]
        cands = []
        for i, mu, sg, e in candidates(est):
            try:
                hit = link_window(prev, cs_decode_index(i, cfg.Bp), B0)
            except AmbiguousSplice:
                out.ambiguous += 1
                hit = _closest_chain(pending, prev, cs_decode_index(i, cfg.Bp), B0, mu)
            if hit is None:
                out.dropped += 1
                continue
            cands.append(pending[hit].extend(t, i, mu, sg, e))
        classify(t, cands)
    return out
