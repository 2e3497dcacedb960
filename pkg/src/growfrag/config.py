"""Run configuration: plain key = value files plus CLI overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GeometricGrid, Profile, custom_profile, peak_profile, smooth_profile
from .scheme import DivisionRate

__all__ = ["RunConfig", "parse_config_file", "max_stable_half_extent"]

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def max_stable_half_extent(n: int, coeff: float, exponent: float) -> int | None:
    """Largest N with ``dt * max B <= 1`` for ``B = coeff * x**exponent``.

    Returns ``None`` when every N is admissible, raises ``ConfigError`` when
    none is.
    """
    dt = 1.0 - 2.0 ** (-1.0 / n)
    if exponent <= 0:
        if dt * coeff <= 1.0:
            return None
        raise ConfigError(
            f"dt * B = {dt * coeff:.3g} > 1 for a non-increasing rate; "
            "no domain choice can stabilize it at this n"
        )
    nmax = math.floor(n * math.log2(1.0 / (dt * coeff)) / exponent)
    if nmax < 1:
        raise ConfigError(
            "no admissible domain: even N = 1 violates the stability certificate"
        )
    return nmax


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one experiment deterministically."""

    n: int = 32
    N: int | None = None
    gamma: float = 2.0
    rate_coeff: float = 1.0
    rate_table: str | None = None
    mode: str = "standard"
    profile: str = "peak"
    peak_location: float = 2.0
    horizon_periods: float = 12.0
    K_modes: int = 16
    variant: str = "exact"
    cfl_fraction: float = 0.9
    snapshot_every: int | None = None
    track_modes: tuple[int, ...] = (0, 1)
    eigen_tolerance: float | None = None
    out: str = "runs"

    def validate(self) -> "RunConfig":
        if self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.mode not in ("standard", "conservative"):
            raise ConfigError("mode must be standard or conservative")
        if self.variant not in ("exact", "diffusive"):
            raise ConfigError("variant must be exact or diffusive")
        if self.variant == "diffusive" and not 0.0 < self.cfl_fraction < 1.0:
            raise ConfigError("cfl_fraction must lie strictly inside (0, 1)")
        if self.profile not in ("peak", "smooth"):
            raise ConfigError("profile must be peak or smooth")
        if self.horizon_periods < 0:
            raise ConfigError("horizon_periods must be nonnegative")
        if self.K_modes < 0:
            raise ConfigError("K_modes must be nonnegative")
        cfg = self
        if cfg.rate_table is None:
            cap = max_stable_half_extent(cfg.n, cfg.rate_coeff, cfg.gamma)
            if cfg.N is None:
                auto = 8 * cfg.n if cap is None else min(8 * cfg.n, cap)
                cfg = replace(cfg, N=auto)
            elif cap is not None and cfg.N > cap:
                raise ConfigError(
                    f"stability certificate violated: dt * max B > 1 on "
                    f"[2**(-{cfg.N}/{cfg.n}), 2**({cfg.N}/{cfg.n})]; "
                    f"maximum admissible N at n = {cfg.n} for this rate is {cap}"
                )
        elif cfg.N is None:
            raise ConfigError("N is required when the rate comes from a table")
        if cfg.N is not None and cfg.N < 1:
            raise ConfigError("N must be a positive integer")
        return cfg

    def build_grid(self) -> GeometricGrid:
        cfg = self.validate()
        return GeometricGrid(n=cfg.n, N=cfg.N)

    def build_rate(self, grid: GeometricGrid) -> DivisionRate:
        if self.rate_table is not None:
            table = np.loadtxt(self.rate_table, delimiter=",", ndmin=2)
            rate = DivisionRate.from_table(
                grid, table[:, 0], table[:, 1], mode=self.mode
            )
        else:
            rate = DivisionRate.from_power_law(
                grid, coeff=self.rate_coeff, exponent=self.gamma, mode=self.mode
            )
        if not rate.is_stable:
            raise ConfigError(
                f"stability certificate violated: dt * max B = "
                f"{rate.stability_margin:.4g} > 1"
            )
        return rate

    def build_profile(self) -> Profile:
        if self.profile == "peak":
            return peak_profile(self.peak_location)
        return smooth_profile()

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_INT_KEYS = {"n", "N", "K_modes", "snapshot_every"}
_FLOAT_KEYS = {
    "gamma",
    "rate_coeff",
    "peak_location",
    "horizon_periods",
    "cfl_fraction",
    "eigen_tolerance",
}
_STR_KEYS = {"mode", "profile", "variant", "out", "rate_table"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _STR_KEYS:
        return raw
    if key == "track_modes":
        return tuple(int(part) for part in raw.split(",") if part.strip())
    raise ConfigError(f"unknown configuration key: {key}")


def parse_config_file(path: str | Path) -> RunConfig:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    overrides: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = body.split("=", 1)
        key = key.strip()
        try:
            overrides[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return RunConfig(**overrides)
