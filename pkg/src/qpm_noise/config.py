"""Loading and validation of crystal configuration files."""
from __future__ import annotations

import json
from pathlib import Path

from .dispersion import CrystalAxis, ThermalExpansionModel, data_dir, sellmeier_from_dict
from .errors import ConfigError
from .qpm_core import CrystalConfig, DesignProcess

DEFAULT_CONFIG = "ktp_converter.json"


def _resolve(ref: str, base: Path) -> Path | None:
    p = Path(ref)
    if p.is_absolute():
        return p if p.exists() else None
    for root in (base, data_dir()):
        if (root / p).exists():
            return root / p
    return None


def _number(doc, key, violations, default=None):
    if key not in doc:
        if default is None:
            violations.append(f"{key}: missing")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        violations.append(f"{key}: expected a number, got {val!r}")
        return default
    return float(val)


def load_config(path) -> CrystalConfig:
    """Read a crystal config JSON file and its referenced Sellmeier files.

    Relative Sellmeier paths are looked up next to the config first, then in
    the bundled data directory. Every problem found is reported together in
    one :class:`ConfigError`.
    """
    path = Path(path)
    if not path.exists():
        alt = _resolve(str(path), Path.cwd())
        if alt is None:
            raise ConfigError([f"config: file not found: {path}"])
        path = alt
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON in {path}: {exc}"]) from None
    return config_from_dict(doc, base=path.parent)


def config_from_dict(doc: dict, base: Path | None = None) -> CrystalConfig:
    base = Path.cwd() if base is None else base
    v: list[str] = []
    length = _number(doc, "length_mm", v)
    dom = _number(doc, "domain_length_um", v)
    duty = _number(doc, "duty_cycle", v, 0.5)
    temp = _number(doc, "temperature_c", v, 25.0)
    pump = _number(doc, "pump_nm", v)

    for key, val in (("length_mm", length), ("domain_length_um", dom), ("pump_nm", pump)):
        if val is not None and val <= 0:
            v.append(f"{key}: must be > 0, got {val}")
    if duty is not None and not 0 < duty < 1:
        v.append(f"duty_cycle: must be in (0, 1), got {duty}")

    axes = {}
    for fld, ax in doc.get("axes", {"pump": "z", "signal": "z", "idler": "z"}).items():
        try:
            axes[fld] = CrystalAxis(ax)
        except ValueError:
            v.append(f"axes.{fld}: unknown axis {ax!r}")

    sellmeier = {}
    for ax, ref in doc.get("sellmeier", {}).items():
        try:
            axis = CrystalAxis(ax)
        except ValueError:
            v.append(f"sellmeier.{ax}: unknown axis")
            continue
        if isinstance(ref, dict):
            sdoc = ref
        else:
            found = _resolve(str(ref), base)
            if found is None:
                v.append(f"sellmeier.{ax}: file not found: {ref}")
                continue
            try:
                sdoc = json.loads(found.read_text())
            except json.JSONDecodeError as exc:
                v.append(f"sellmeier.{ax}: invalid JSON in {found}: {exc}")
                continue
        try:
            sellmeier[axis] = sellmeier_from_dict(sdoc)
        except (KeyError, ValueError, TypeError) as exc:
            v.append(f"sellmeier.{ax}: {exc}")
    for fld, ax in axes.items():
        if ax not in sellmeier and not any(p.startswith(f"sellmeier.{ax.value}") for p in v):
            v.append(f"sellmeier.{ax.value}: required by axes.{fld} but not given")

    exp_doc = doc.get("expansion", {})
    expansion = ThermalExpansionModel(
        alpha_per_k=float(exp_doc.get("alpha_per_k", 0.0)),
        beta_per_k2=float(exp_doc.get("beta_per_k2", 0.0)),
        t_ref_c=float(exp_doc.get("t_ref_c", 25.0)),
        source=exp_doc.get("source", ""),
    )
    design = None
    if "design" in doc:
        d = doc["design"]
        try:
            design = DesignProcess(float(d["input_nm"]), float(d["target_nm"]))
        except (KeyError, TypeError, ValueError):
            v.append("design: needs numeric input_nm and target_nm")

    if v:
        raise ConfigError(v)
    return CrystalConfig(
        length_mm=length,
        domain_length_um=dom,
        duty_cycle=duty,
        temperature_c=temp,
        pump_nm=pump,
        sellmeier=sellmeier,
        axes=axes,
        expansion=expansion,
        design=design,
        raman_shifts_cm=tuple(doc.get("raman_shifts_cm", ())),
        name=doc.get("name", ""),
    )


def default_config() -> CrystalConfig:
    """The bundled 20 mm ppKTP converter (1064 nm pump, 7.85 um domains)."""
    return load_config(data_dir() / DEFAULT_CONFIG)
