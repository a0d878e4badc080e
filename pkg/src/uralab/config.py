"""Scenario parameters and the quantities derived from them."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

MODULATIONS = ("BPSK", "QPSK")
LDPC_POLICIES = ("final", "original")


class InvalidConfig(ValueError):
    """Raised when a configuration violates one of its invariants."""


@dataclass(frozen=True)
class SystemConfig:
    # message split
    B: int = 32          # total message bits
    Bp: int = 8          # preamble (CS-phase) bits
    Bc: int = 24         # LDPC-phase information bits
    # channel uses
    Lp: int = 64         # CS-phase length
    L: int = 400         # frame length, Lc = L - Lp
    # scenario
    M: int = 8           # BS antennas
    Ka: int = 8          # active devices
    ebn0_db: float = 10.0
    modulation: str = "BPSK"
    sigma2: float = 1.0
    pa: float | None = None        # None -> Ka / 2**Bp
    # receiver iteration caps
    n_iter_dadce: int = 20
    n_iter_ldpc: int = 30
    n_iter_joint: int = 20
    # collision resolution
    t_max: int = 3
    B0: int | None = None          # None -> Bp // 2
    eta: float = 1.5
    gamma: float = 0.05
    ldpc_policy: str = "final"
    # switches for the ablations
    collision_resolution: bool = True
    sic: bool = True
    joint: bool = True
    diag_approx: bool = True
    damping: float = 0.2
    seed: int = 2024

    # ------------------------------------------------------------------
    @property
    def Lc(self) -> int:
        return self.L - self.Lp

    @property
    def n_ldpc(self) -> int:
        """LDPC codeword length (rate 1/2)."""
        return 2 * self.Bc

    @property
    def n_symbols(self) -> int:
        """Occupied LDPC-phase channel uses before zero padding."""
        return self.n_ldpc if self.modulation == "BPSK" else self.n_ldpc // 2

    @property
    def code_rate(self) -> float:
        return self.B / self.L

    @property
    def power(self) -> float:
        return ebn0_to_power(self.ebn0_db, self.L, self.B)

    @property
    def spectral_efficiency(self) -> float:
        return self.B * self.Ka / (self.L * self.M)

    @property
    def activity_prior(self) -> float:
        return self.pa if self.pa is not None else self.Ka / 2**self.Bp

    @property
    def slide(self) -> int:
        return self.B0 if self.B0 is not None else self.Bp // 2

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def ebn0_to_power(ebn0_db: float, L: int, B: int) -> float:
    """Per-symbol transmit power P such that Eb/N0 = L*P / (2*B)."""
    if L <= 0 or B <= 0:
        raise InvalidConfig("L and B must be positive")
    return 2.0 * B * 10.0 ** (ebn0_db / 10.0) / L


def validate(cfg: SystemConfig) -> SystemConfig:
    """Check every invariant of ``cfg`` and return it unchanged.

    Raises
    ------
    InvalidConfig
        Message names the first violated invariant.
    """
    counts = {k: getattr(cfg, k) for k in ("B", "Bp", "Bc", "Lp", "L", "M", "Ka",
                                            "n_iter_dadce", "n_iter_ldpc", "n_iter_joint")}
    for name, value in counts.items():
        if int(value) != value or value <= 0:
            raise InvalidConfig(f"{name} must be a positive integer, got {value!r}")
    if cfg.Bp + cfg.Bc != cfg.B:
        raise InvalidConfig(f"Bp + Bc != B ({cfg.Bp} + {cfg.Bc} != {cfg.B})")
    if cfg.Lc <= 0:
        raise InvalidConfig(f"Lp + Lc != L requires Lp < L (Lp={cfg.Lp}, L={cfg.L})")
    if cfg.t_max < 0:
        raise InvalidConfig("t_max must be >= 0")
    if not 0 < cfg.slide < cfg.Bp:
        raise InvalidConfig(f"requires 0 < B0 < Bp (B0={cfg.slide}, Bp={cfg.Bp})")
    if cfg.modulation not in MODULATIONS:
        raise InvalidConfig(f"modulation must be one of {MODULATIONS}")
    if cfg.n_symbols > cfg.Lc:
        raise InvalidConfig(
            f"{cfg.modulation} needs {cfg.n_symbols} LDPC-phase channel uses, Lc={cfg.Lc}")
    if cfg.Bc < 6 or cfg.Bc % 2:
        raise InvalidConfig("Bc must be even and >= 6 for a (3,6)-regular code")
    if not cfg.eta > cfg.gamma > 0:
        raise InvalidConfig(f"requires eta > gamma > 0 (eta={cfg.eta}, gamma={cfg.gamma})")
    if not 0 < cfg.activity_prior < 1:
        raise InvalidConfig(f"pa must lie in (0, 1), got {cfg.activity_prior}")
    if cfg.sigma2 <= 0:
        raise InvalidConfig("sigma2 must be positive")
    if not 0 <= cfg.damping < 1:
        raise InvalidConfig("damping must lie in [0, 1)")
    if cfg.ldpc_policy not in LDPC_POLICIES:
        raise InvalidConfig(f"ldpc_policy must be one of {LDPC_POLICIES}")
    return cfg


# ----------------------------------------------------------------------
# key=value files

_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}


def _parse_value(name: str, text: str):
    text = text.strip()
    default = _FIELDS[name].default
    if text.lower() in ("none", "") and name in ("pa", "B0"):
        return None
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise InvalidConfig(f"{name}: expected a boolean, got {text!r}")
    if isinstance(default, str):
        return text.upper() if name == "modulation" else text
    if name in ("pa", "ebn0_db", "sigma2", "eta", "gamma", "damping"):
        return float(text)
    return int(text)


def parse_overrides(pairs: dict[str, str]) -> dict:
    out = {}
    for name, text in pairs.items():
        if name not in _FIELDS:
            raise InvalidConfig(f"unknown config key {name!r}")
        try:
            out[name] = _parse_value(name, text)
        except ValueError as exc:
            raise InvalidConfig(f"{name}: {exc}") from None
    return out


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    """Read a plain ``key = value`` file; ``#`` starts a comment."""
    pairs = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value
    return (base or SystemConfig()).replace(**parse_overrides(pairs))


def dump_config(cfg: SystemConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        lines.append(f"{name} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"

