"""Phase-matching arithmetic for the four SPDC propagation geometries.

Wavelengths are vacuum values in nm at this module's boundary; wavevectors are
in rad/um.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .dispersion import (
    CrystalAxis,
    SellmeierModel,
    ThermalExpansionModel,
    grating_vector,
    refractive_index,
)
from .errors import ConfigError, DomainError


class ProcessGeometry(enum.Enum):
    """Propagation direction of (signal, idler) relative to the pump.

    ``-`` means co-propagating, ``+`` counter-propagating; the symbols are the
    signs of ``k_s`` and ``k_i`` in ``k_p -+ k_s -+ k_i``.
    """

    CO_CO = "--"
    CO_COUNTER = "-+"
    COUNTER_CO = "+-"
    COUNTER_COUNTER = "++"

    @property
    def signal_sign(self) -> int:
        return 1 if self.value[0] == "+" else -1

    @property
    def idler_sign(self) -> int:
        return 1 if self.value[1] == "+" else -1

    @property
    def is_counter(self) -> bool:
        return self.value[0] != self.value[1]

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        try:
            return cls(text.strip())
        except ValueError:
            raise ValueError(f"unknown geometry {text!r}; expected one of --, -+, +-, ++") from None

    def __str__(self):
        return self.value


ALL_GEOMETRIES = tuple(ProcessGeometry)


@dataclass(frozen=True)
class DesignProcess:
    """The converter's own phase-matched process ``input -> pump + target``."""

    input_nm: float
    target_nm: float


@dataclass(frozen=True)
class CrystalConfig:
    length_mm: float
    domain_length_um: float
    duty_cycle: float
    temperature_c: float
    pump_nm: float
    sellmeier: dict
    axes: dict = field(default_factory=lambda: {"pump": CrystalAxis.Z, "signal": CrystalAxis.Z, "idler": CrystalAxis.Z})
    expansion: ThermalExpansionModel = ThermalExpansionModel()
    design: DesignProcess | None = None
    raman_shifts_cm: tuple = ()
    name: str = ""

    def __post_init__(self):
        axes = {k: CrystalAxis(v) for k, v in self.axes.items()}
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "raman_shifts_cm", tuple(self.raman_shifts_cm))
        problems = self.validate()
        if problems:
            raise ConfigError(problems)

    def validate(self) -> list[str]:
        problems = []
        if not self.length_mm > 0:
            problems.append(f"length_mm: must be > 0, got {self.length_mm}")
        if not self.domain_length_um > 0:
            problems.append(f"domain_length_um: must be > 0, got {self.domain_length_um}")
        if not 0 < self.duty_cycle < 1:
            problems.append(f"duty_cycle: must be in (0, 1), got {self.duty_cycle}")
        if not self.pump_nm > 0:
            problems.append(f"pump_nm: must be > 0, got {self.pump_nm}")
        if not np.isfinite(self.temperature_c):
            problems.append("temperature_c: must be finite")
        for fld in ("pump", "signal", "idler"):
            if fld not in self.axes:
                problems.append(f"axes.{fld}: missing axis assignment")
            elif self.axes[fld] not in self.sellmeier:
                problems.append(f"sellmeier.{self.axes[fld].value}: no model for axis used by {fld}")
        return problems

    @property
    def period_um(self) -> float:
        """Poling period at the expansion reference temperature (two domains)."""
        return 2.0 * self.domain_length_um

    @property
    def length_um(self) -> float:
        return self.length_mm * 1e3

    def model(self, fld: str) -> SellmeierModel:
        return self.sellmeier[self.axes[fld]]

    def grating_vector(self, temperature_c=None):
        t = self.temperature_c if temperature_c is None else temperature_c
        return grating_vector(self.period_um, self.expansion, t)

    def at_temperature(self, temperature_c) -> "CrystalConfig":
        return replace(self, temperature_c=float(temperature_c))


@dataclass(frozen=True)
class EfficiencyWeightParams:
    pump_amplitude: float = 1.0
    nonlinear_coeff: float = 1.0


def idler_wavelength(pump_nm, signal_nm):
    """Idler wavelength from energy conservation, in nm."""
    ls = np.asarray(signal_nm, dtype=float)
    if np.any(ls <= pump_nm):
        raise DomainError(f"signal {signal_nm!r} nm must be longer than pump {pump_nm} nm")
    li = 1.0 / (1.0 / pump_nm - 1.0 / ls)
    return float(li) if li.ndim == 0 else li


def wavevector(model, wl_nm, temperature_c):
    """``2 pi n / lambda`` in rad/um."""
    wl_um = np.asarray(wl_nm, dtype=float) * 1e-3
    return 2.0 * np.pi * refractive_index(model, wl_um, temperature_c) / wl_um


def spdc_mismatch(cfg: CrystalConfig, geom: ProcessGeometry, signal_nm, temperature_c=None):
    """``k_p + s_s k_s + s_i k_i`` (rad/um) for the signs of ``geom``."""
    t = cfg.temperature_c if temperature_c is None else temperature_c
    li = idler_wavelength(cfg.pump_nm, signal_nm)
    kp = wavevector(cfg.model("pump"), cfg.pump_nm, t)
    ks = wavevector(cfg.model("signal"), signal_nm, t)
    ki = wavevector(cfg.model("idler"), li, t)
    return kp + geom.signal_sign * ks + geom.idler_sign * ki


def qpm_mismatch(dk_spdc, m, dk_g):
    """Residual mismatch after ``m`` grating quanta."""
    return dk_spdc - m * dk_g


def fractional_order(cfg: CrystalConfig, geom: ProcessGeometry, signal_nm, temperature_c=None):
    """``dk_spdc / dk_g``; integral exactly at a phase-matched peak."""
    return spdc_mismatch(cfg, geom, signal_nm, temperature_c) / cfg.grating_vector(temperature_c)


def is_extrapolated(cfg: CrystalConfig, signal_nm):
    """True where any of pump, signal or idler index is outside its model's range."""
    ls = np.asarray(signal_nm, dtype=float)
    li = 1.0 / (1.0 / cfg.pump_nm - 1.0 / ls)
    out = ~cfg.model("pump").in_range(cfg.pump_nm * 1e-3)
    out = out | ~cfg.model("signal").in_range(ls * 1e-3)
    out = out | ~cfg.model("idler").in_range(li * 1e-3)
    return bool(out) if np.ndim(out) == 0 else out


def sin_pi(x):
    """``sin(pi x)`` with exact zeros at integers."""
    x = np.asarray(x, dtype=float)
    k = np.round(x)
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    return sign * np.sin(np.pi * (x - k))


def _sinc(x):
    # unnormalized sin(x)/x
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def relative_efficiency(params: EfficiencyWeightParams, cfg: CrystalConfig, m, dk_m):
    """Relative SPDC weight ``|E_p d (2/(pi m)) sin(pi m D) sinc(dk_m L/2)|^2``.

    The crystal-length prefactor is common to every process in one crystal and
    is left out, so weights compare directly across orders and geometries.
    """
    if np.any(np.asarray(m) == 0):
        raise DomainError("order m = 0 has no QPM efficiency weight")
    m = np.asarray(m, dtype=float)
    amp = (
        params.pump_amplitude
        * params.nonlinear_coeff
        * (2.0 / (np.pi * m))
        * sin_pi(m * cfg.duty_cycle)
        * _sinc(np.asarray(dk_m) * cfg.length_um / 2.0)
    )
    w = amp * amp
    return float(w) if np.ndim(w) == 0 else w


def design_mismatch(cfg: CrystalConfig, target_nm=None, temperature_c=None):
    """Mismatch ``k_in - k_p - k_target`` of the converter's design process."""
    if cfg.design is None:
        raise ValueError("config has no design process")
    t = cfg.temperature_c if temperature_c is None else temperature_c
    lt = np.asarray(cfg.design.target_nm if target_nm is None else target_nm, dtype=float)
    lin = 1.0 / (1.0 / cfg.pump_nm + 1.0 / lt)
    return (
        wavevector(cfg.model("signal"), lin, t)
        - wavevector(cfg.model("pump"), cfg.pump_nm, t)
        - wavevector(cfg.model("signal"), lt, t)
    )


def design_order(cfg: CrystalConfig, target_nm=None):
    return design_mismatch(cfg, target_nm) / cfg.grating_vector()
