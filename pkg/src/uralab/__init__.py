"""Unsourced random access over a massive-MIMO uplink.

Two-phase transmission (compressed-sensing preamble plus LDPC-coded data),
a message-passing receiver for activity detection, channel estimation and
decoding, and a window-sliding collision resolution protocol.
"""

from .codebook import Codebook, build_codebook, cs_decode_index, cs_encode
from .collision import UplinkSession, collision_analytics, run_protocol
from .config import InvalidConfig, SystemConfig, ebn0_to_power, validate
from .dadce import DadCeResult, run_dad_ce
from .harness import compute_nmse, compute_pmd_pfa, run_sweep, run_trial
from .ldpc import LdpcCode, build_ldpc, ldpc_encode, parity_check
from .mimo_ldpc import run_ldpc_sic, sic_subtract
from .pipeline import PipelineResult, run_joint, stitch_message

__all__ = [
    "Codebook", "build_codebook", "cs_decode_index", "cs_encode",
    "UplinkSession", "collision_analytics", "run_protocol",
    "InvalidConfig", "SystemConfig", "ebn0_to_power", "validate",
    "DadCeResult", "run_dad_ce",
    "compute_nmse", "compute_pmd_pfa", "run_sweep", "run_trial",
    "LdpcCode", "build_ldpc", "ldpc_encode", "parity_check",
    "run_ldpc_sic", "sic_subtract",
    "PipelineResult", "run_joint", "stitch_message",
]
