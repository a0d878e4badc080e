"""Monte Carlo trials, error metrics and CSV output."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codebook import Codebook, build_codebook
from .collision import UplinkSession
from .config import InvalidConfig, SystemConfig, validate
from .ldpc import LdpcCode, build_ldpc
from .pipeline import PipelineResult, run_joint

log = logging.getLogger(__name__)

NMSE_FLOOR_DB = -100.0
CSV_COLUMNS = ("axis", "value", "trials", "p_md", "p_fa", "p_e", "nmse_db",
               "avg_rounds", "avg_channel_uses", "seed")
SWEEP_AXES = ("ebn0_db", "M", "Ka", "L", "Rc")


def compute_pmd_pfa(truth, decoded) -> tuple[float, float]:
    """Missed-detection and false-alarm rates over sets of full messages."""
    truth, decoded = set(truth), set(decoded)
    p_md = len(truth - decoded) / len(truth) if truth else 0.0
    p_fa = len(decoded - truth) / len(decoded) if decoded else 0.0
    return p_md, p_fa


def nmse_db(err_energy: float, ref_energy: float) -> float:
    if ref_energy <= 0:
        return float("nan")
    if err_energy <= 0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(err_energy / ref_energy), NMSE_FLOOR_DB)


def compute_nmse(h_true, h_est, association: dict) -> float:
    """NMSE in dB of estimated rows against true rows.

    ``association`` maps a true row to an estimated row; true rows missing from
    it are scored against a zero estimate.
    """
    h_true = np.atleast_2d(np.asarray(h_true))
    h_est = np.atleast_2d(np.asarray(h_est))
    err = ref = 0.0
    for k, row in enumerate(h_true):
        est = h_est[association[k]] if association.get(k) is not None else 0.0
        err += float(np.sum(np.abs(row - est) ** 2))
        ref += float(np.sum(np.abs(row) ** 2))
    return nmse_db(err, ref)


@dataclass
class TrialMetrics:
    p_md: float
    p_fa: float
    nmse_db: float
    rounds: int
    iterations: int
    channel_uses_total: int
    seed: int
    err_energy: float = 0.0
    ref_energy: float = 0.0


@lru_cache(maxsize=16)
def cached_codebook(seed: int, Lp: int, Bp: int) -> Codebook:
    return build_codebook(seed, Lp, Bp)


@lru_cache(maxsize=16)
def cached_code(seed: int, Bc: int) -> LdpcCode:
    return build_ldpc(seed, Bc)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent stream for trial ``trial``; reproducible on its own."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(trial)]))


def associate(session: UplinkSession, result: PipelineResult) -> dict:
    """True device -> stream position through the device's final preamble index.

    Among streams sharing an index, a decoded one is preferred.
    """
    out = {}
    for k in range(session.Ka):
        hits = [j for j, s in enumerate(result.streams) if s.final_index == session.index[k]]
        if hits:
            decoded = [j for j in hits if j in result.words]
            out[k] = (decoded or hits)[0]
    return out


def score(session: UplinkSession, result: PipelineResult, seed: int) -> TrialMetrics:
    p_md, p_fa = compute_pmd_pfa(session.true_messages(), result.messages)
    assoc = associate(session, result)
    err = ref = 0.0
    for k, h in enumerate(session.channels):
        est = result.h_hat[assoc[k]] if k in assoc else 0.0
        err += float(np.sum(np.abs(h - est) ** 2))
        ref += float(np.sum(np.abs(h) ** 2))
    return TrialMetrics(p_md, p_fa, nmse_db(err, ref), result.protocol.retransmissions,
                        result.joint_rounds, session.channel_uses, seed, err, ref)


def run_trial(cfg: SystemConfig, trial: int, master_seed: int | None = None,
              codebook: Codebook | None = None, code: LdpcCode | None = None,
              keep: bool = False):
    """Draw one frame, run the receiver and score it.

    With ``keep`` the session and pipeline result are returned as well.
    """
    master = cfg.seed if master_seed is None else master_seed
    codebook = codebook or cached_codebook(cfg.seed, cfg.Lp, cfg.Bp)
    code = code or cached_code(cfg.seed, cfg.Bc)
    session = UplinkSession.random(cfg, codebook, code, trial_rng(master, trial))
    result = run_joint(cfg, codebook, code, session)
    metrics = score(session, result, trial)
    return (metrics, session, result) if keep else metrics


@dataclass
class SweepRow:
    axis: str
    value: float
    trials: int
    p_md: float = float("nan")
    p_fa: float = float("nan")
    p_e: float = float("nan")
    nmse_db: float = float("nan")
    avg_rounds: float = float("nan")
    avg_channel_uses: float = float("nan")
    seed: int = 0
    error: str | None = None

    def as_csv(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def aggregate(axis: str, value, records: list[TrialMetrics], seed: int) -> SweepRow:
    return SweepRow(
        axis, value, len(records),
        p_md=float(np.mean([r.p_md for r in records])),
        p_fa=float(np.mean([r.p_fa for r in records])),
        p_e=float(np.mean([r.p_md for r in records]) + np.mean([r.p_fa for r in records])),
        nmse_db=float(np.median([r.nmse_db for r in records])),
        avg_rounds=float(np.mean([r.rounds for r in records])),
        avg_channel_uses=float(np.mean([r.channel_uses_total for r in records])),
        seed=seed)


def point_config(base: SystemConfig, axis: str, value) -> SystemConfig:
    if axis not in SWEEP_AXES:
        raise InvalidConfig(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if axis == "Rc":
        return base.replace(L=int(round(base.B / float(value))))
    if axis == "ebn0_db":
        return base.replace(ebn0_db=float(value))
    return base.replace(**{axis: int(value)})


def run_sweep(base_cfg: SystemConfig, axis: str, values, trials: int,
              master_seed: int | None = None) -> list[SweepRow]:
    """One aggregate row per sweep value; a bad point is reported, not fatal."""
    seed = base_cfg.seed if master_seed is None else master_seed
    rows = []
    for value in values:
        try:
            cfg = validate(point_config(base_cfg, axis, value))
            records = [run_trial(cfg, t, seed) for t in range(trials)]
        except InvalidConfig as exc:
            log.warning("skipping %s=%s: %s", axis, value, exc)
            rows.append(SweepRow(axis, value, 0, seed=seed, error=str(exc)))
            continue
        rows.append(aggregate(axis, value, records, seed))
    return rows


def write_csv(rows, out=None) -> str:
    """Render rows (header first) and optionally write them to ``out``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(["" if isinstance(v, float) and np.isnan(v) else v for v in row.as_csv()])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text
