"""Refractive-index models for the crystal axes.

Sellmeier sets are loaded from JSON files so they can be swapped without code
changes. Wavelengths in this module are in micrometres, temperatures in °C.

Supported functional forms (``n^2`` as a function of ``w = lambda^2``):

``pole``
    ``A + B1/(w - C1) + B2/(w - C2) + ...`` with coeffs ``[A, B1, C1, B2, C2, ...]``
``pole_ir``
    same as ``pole`` with a trailing ``- D*w`` term; coeffs ``[A, B1, C1, ..., D]``
``sellmeier``
    ``1 + B1*w/(w - C1) + ...`` with coeffs ``[B1, C1, B2, C2, ...]``
``constant``
    ``n = coeffs[0]`` (dispersionless; useful for analytic checks)

The thermo-optic coefficient is ``dn/dT = sum_k dndt[k] * lambda**(-k)`` and is
applied linearly in ``T - t_ref_c``.
"""
from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

FORMS = ("pole", "pole_ir", "sellmeier", "constant")


class CrystalAxis(str, enum.Enum):
    Y = "y"
    Z = "z"


@dataclass(frozen=True)
class SellmeierModel:
    form: str
    coeffs: tuple[float, ...]
    range_um: tuple[float, float]
    dndt: tuple[float, ...] = ()
    t_ref_c: float = 20.0
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "dndt", tuple(float(c) for c in self.dndt))
        object.__setattr__(self, "range_um", tuple(float(r) for r in self.range_um))
        problems = self.validate()
        if problems:
            raise ValueError("; ".join(problems))

    def validate(self) -> list[str]:
        problems = []
        if self.form not in FORMS:
            problems.append(f"form: unknown functional form {self.form!r}")
            return problems
        n = len(self.coeffs)
        if self.form == "constant" and n != 1:
            problems.append("coeffs: constant form takes exactly one coefficient")
        elif self.form == "pole" and (n < 1 or n % 2 != 1):
            problems.append("coeffs: pole form needs [A, B1, C1, ...] (odd length)")
        elif self.form == "pole_ir" and (n < 2 or n % 2 != 0):
            problems.append("coeffs: pole_ir form needs [A, B1, C1, ..., D] (even length)")
        elif self.form == "sellmeier" and (n < 2 or n % 2 != 0):
            problems.append("coeffs: sellmeier form needs [B1, C1, ...] pairs")
        lo, hi = self.range_um
        if not (0 < lo < hi):
            problems.append(f"range_um: need 0 < lo < hi, got {self.range_um}")
        return problems

    def _n_ref(self, wl):
        c = self.coeffs
        if self.form == "constant":
            return np.full_like(wl, c[0])
        w = wl * wl
        if self.form == "sellmeier":
            n2 = 1.0 + sum(b * w / (w - p) for b, p in zip(c[0::2], c[1::2]))
        else:
            body = c[:-1] if self.form == "pole_ir" else c
            n2 = body[0] + sum(b / (w - p) for b, p in zip(body[1::2], body[2::2]))
            if self.form == "pole_ir":
                n2 = n2 - c[-1] * w
        with np.errstate(invalid="ignore"):
            return np.sqrt(n2)

    def dn_dT(self, wl_um):
        """Thermo-optic coefficient in 1/K."""
        wl = np.asarray(wl_um, dtype=float)
        return sum(a * wl ** (-k) for k, a in enumerate(self.dndt)) if self.dndt else np.zeros_like(wl)

    def in_range(self, wl_um):
        wl = np.asarray(wl_um, dtype=float)
        return (wl >= self.range_um[0]) & (wl <= self.range_um[1])


@dataclass(frozen=True)
class ThermalExpansionModel:
    """Linear (plus optional quadratic) expansion of the poling period."""

    alpha_per_k: float = 0.0
    beta_per_k2: float = 0.0
    t_ref_c: float = 25.0
    source: str = field(default="", compare=False)

    def factor(self, temperature_c):
        dt = np.asarray(temperature_c, dtype=float) - self.t_ref_c
        return 1.0 + self.alpha_per_k * dt + self.beta_per_k2 * dt * dt

    def dfactor_dT(self, temperature_c):
        dt = np.asarray(temperature_c, dtype=float) - self.t_ref_c
        return self.alpha_per_k + 2.0 * self.beta_per_k2 * dt


def refractive_index(model: SellmeierModel, wl_um, temperature_c, full_output=False):
    """Refractive index at vacuum wavelength ``wl_um`` and temperature.

    Values outside ``model.range_um`` are still returned. With
    ``full_output=True`` the result is ``(n, extrapolated)`` where the flag marks
    wavelengths outside the stated validity range.

    Raises
    ------
    DomainError
        For non-positive wavelengths, or where the formula gives no real n > 1
        (e.g. on top of a pole).
    """
    wl = np.asarray(wl_um, dtype=float)
    if np.any(~np.isfinite(wl)) or np.any(wl <= 0):
        raise DomainError(f"wavelength must be positive and finite, got {wl_um!r}")
    n = model._n_ref(wl) + model.dn_dT(wl) * (temperature_c - model.t_ref_c)
    if np.any(~np.isfinite(n)) or np.any(n <= 1.0):
        raise DomainError(f"{model.form} model has no valid index at {wl_um!r} um")
    if n.ndim == 0:
        n = float(n)
    if full_output:
        flag = ~model.in_range(wl)
        return n, (bool(flag) if np.ndim(flag) == 0 else flag)
    return n


def group_index(model: SellmeierModel, wl_um, temperature_c, step_nm=0.1):
    """Group index ``n - lambda dn/dlambda`` by central difference.

    The stencil ``lambda +- step`` must lie where the model is evaluable; it may
    leave the stated validity range (mid-IR idlers routinely do).
    """
    h = step_nm * 1e-3
    wl = np.asarray(wl_um, dtype=float)
    if np.any(wl - h <= 0):
        raise DomainError(f"wavelength {wl_um!r} um too close to 0 for step {step_nm} nm")
    n = refractive_index(model, wl, temperature_c)
    n_hi = refractive_index(model, wl + h, temperature_c)
    n_lo = refractive_index(model, wl - h, temperature_c)
    return n - wl * (n_hi - n_lo) / (2.0 * h)


def grating_vector(period_um, expansion: ThermalExpansionModel, temperature_c):
    """Grating vector ``2 pi / Lambda(T)`` in rad/um."""
    if np.any(np.asarray(period_um) <= 0):
        raise DomainError(f"poling period must be positive, got {period_um!r}")
    return 2.0 * np.pi / (period_um * expansion.factor(temperature_c))


def data_dir() -> Path:
    """Bundled data directory, overridable via ``QPM_NOISE_DATA``."""
    env = os.environ.get("QPM_NOISE_DATA")
    return Path(env) if env else Path(__file__).parent / "data"


def sellmeier_from_dict(doc: dict) -> SellmeierModel:
    return SellmeierModel(
        form=doc["form"],
        coeffs=tuple(doc["coeffs"]),
        range_um=tuple(doc["range_um"]),
        dndt=tuple(doc.get("dndt", ())),
        t_ref_c=float(doc.get("t_ref_c", 20.0)),
        source=doc.get("source", ""),
    )


def load_sellmeier(path) -> SellmeierModel:
    with open(path) as fh:
        return sellmeier_from_dict(json.load(fh))


def default_ktp() -> dict[CrystalAxis, SellmeierModel]:
    d = data_dir()
    return {
        CrystalAxis.Y: load_sellmeier(d / "ktp_y_kato2002.json"),
        CrystalAxis.Z: load_sellmeier(d / "ktp_z_kato2002.json"),
    }
