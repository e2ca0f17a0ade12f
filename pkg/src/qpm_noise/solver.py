"""Locate quasi-phase-matched SPDC peaks and annotate them.

Roots of ``dk_spdc(lambda_s) - m dk_g`` are bracketed by sign changes on a
dense wavelength grid and refined by bisection. Each peak carries its
theoretical FWHM, temperature-tuning slope and relative efficiency weight.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dispersion import group_index
from .errors import DomainError, ResolutionError
from .qpm_core import (
    ALL_GEOMETRIES,
    CrystalConfig,
    EfficiencyWeightParams,
    ProcessGeometry,
    fractional_order,
    idler_wavelength,
    is_extrapolated,
    relative_efficiency,
    spdc_mismatch,
)

C_UM_PER_PS = 299.792458
# full width of sinc^2(x) at half maximum, in x
SINC2_FWHM = 2.7831


@dataclass(frozen=True)
class PhaseMatchPeak:
    geometry: ProcessGeometry
    order: int
    signal_nm: float
    idler_nm: float
    bandwidth_ghz: float
    bandwidth_pm: float
    dlambda_dT_pm_per_k: float
    rel_weight: float
    extrapolated: bool
    residual: float = 0.0


@dataclass(frozen=True)
class ScanWindow:
    lambda_min_nm: float
    lambda_max_nm: float
    geometries: tuple = ALL_GEOMETRIES
    orders: tuple = (1, 50)
    tol: float = 1e-6
    grid_step_nm: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "geometries", tuple(ProcessGeometry.parse(g) for g in self.geometries))
        if not self.lambda_min_nm < self.lambda_max_nm:
            raise ValueError(f"window: need lambda_min < lambda_max, got {self.lambda_min_nm}, {self.lambda_max_nm}")
        m_min, m_max = self.orders
        if m_min < 1 or m_max < m_min:
            raise ValueError(f"orders: need 1 <= m_min <= m_max, got {self.orders}")
        if self.tol <= 0 or self.grid_step_nm <= 0:
            raise ValueError("tol and grid_step_nm must be positive")


def _grid(lo, hi, step):
    n = int(math.ceil((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def _bisect(f, a, fa, b, tol):
    # converge to the floating-point sign change; tol only guards the exit
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def _roots_on_grid(cfg, geom, m, grid, dk, dk_g, tol):
    f_grid = dk - m * dk_g
    roots = []
    zero = np.flatnonzero(f_grid == 0.0)
    roots.extend(float(grid[i]) for i in zero)
    sc = np.flatnonzero(f_grid[:-1] * f_grid[1:] < 0)

    def f(x):
        return float(spdc_mismatch(cfg, geom, x)) - m * dk_g

    for i in sc:
        roots.append(_bisect(f, grid[i], f_grid[i], grid[i + 1], tol))
    return sorted(roots)


def _geometry_grid(cfg, geom, lo, hi, step):
    grid = _grid(lo, hi, step)
    dk = spdc_mismatch(cfg, geom, grid)
    dk_g = float(cfg.grating_vector())
    jump = np.max(np.abs(np.diff(dk))) / dk_g if grid.size > 1 else 0.0
    if jump > 0.5:
        raise ResolutionError(
            f"grid step {step} nm too coarse for geometry {geom}: fractional order jumps "
            f"by {jump:.2f} between points; use a finer grid"
        )
    return grid, dk, dk_g


def find_peaks(cfg: CrystalConfig, win: ScanWindow, workers=None, params=EfficiencyWeightParams()):
    """All phase-matched peaks in ``win``, sorted by signal wavelength.

    Parameters
    ----------
    workers : int, optional
        Thread count for the (geometry, order) tasks. Results do not depend
        on it.
    """
    if win.lambda_min_nm <= cfg.pump_nm:
        raise DomainError(f"scan window must lie above the pump wavelength {cfg.pump_nm} nm")
    grids = {g: _geometry_grid(cfg, g, win.lambda_min_nm, win.lambda_max_nm, win.grid_step_nm) for g in win.geometries}
    tasks = [(g, m) for g in win.geometries for m in range(win.orders[0], win.orders[1] + 1)]

    def run(task):
        g, m = task
        grid, dk, dk_g = grids[g]
        return [(g, m, lam) for lam in _roots_on_grid(cfg, g, m, grid, dk, dk_g, win.tol)]

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            found = list(ex.map(run, tasks))
    else:
        found = [run(t) for t in tasks]

    peaks = [annotate(cfg, g, m, lam, params) for batch in found for (g, m, lam) in batch]
    peaks.sort(key=lambda p: (p.signal_nm, p.geometry.value, p.order))
    return peaks


def annotate(cfg, geom, m, signal_nm, params=EfficiencyWeightParams()) -> PhaseMatchPeak:
    dk_g = float(cfg.grating_vector())
    resid = float(spdc_mismatch(cfg, geom, signal_nm)) - m * dk_g
    bw_ghz, bw_pm = bandwidth(cfg, geom, signal_nm)
    return PhaseMatchPeak(
        geometry=geom,
        order=int(m),
        signal_nm=float(signal_nm),
        idler_nm=idler_wavelength(cfg.pump_nm, signal_nm),
        bandwidth_ghz=bw_ghz,
        bandwidth_pm=bw_pm,
        dlambda_dT_pm_per_k=temperature_tuning(cfg, geom, m, signal_nm),
        rel_weight=relative_efficiency(params, cfg, m, 0.0),
        extrapolated=bool(is_extrapolated(cfg, signal_nm)),
        residual=resid,
    )


def _group_indices(cfg, signal_nm, temperature_c=None):
    t = cfg.temperature_c if temperature_c is None else temperature_c
    li = idler_wavelength(cfg.pump_nm, signal_nm)
    ngs = group_index(cfg.model("signal"), np.asarray(signal_nm) * 1e-3, t)
    ngi = group_index(cfg.model("idler"), np.asarray(li) * 1e-3, t)
    return ngs, ngi


def mismatch_slope(cfg: CrystalConfig, geom: ProcessGeometry, signal_nm):
    """``d(dk)/d(nu_s)`` in (rad/um)/THz, with the idler following energy conservation."""
    ngs, ngi = _group_indices(cfg, signal_nm)
    return 2.0 * np.pi * (geom.signal_sign * ngs - geom.idler_sign * ngi) / C_UM_PER_PS


def bandwidth(cfg: CrystalConfig, geom: ProcessGeometry, signal_nm):
    """Theoretical FWHM as ``(GHz, pm)`` at signal wavelength ``signal_nm``.

    Uses the sum of group indices for counter-propagating geometries and
    their difference for ordinary ones.
    """
    ngs, ngi = _group_indices(cfg, signal_nm)
    denom = abs(geom.signal_sign * ngs - geom.idler_sign * ngi)
    dnu_thz = C_UM_PER_PS / (2.0 * np.pi * cfg.length_um) * 2.0 * SINC2_FWHM / denom
    lam_um = np.asarray(signal_nm) * 1e-3
    dlam_pm = lam_um**2 * dnu_thz / C_UM_PER_PS * 1e6
    return float(dnu_thz * 1e3), float(dlam_pm)


def temperature_tuning(cfg: CrystalConfig, geom: ProcessGeometry, m, signal_nm, method="central", dT=0.5):
    """Shift of a constant-mismatch feature with temperature, in pm/K.

    ``m`` is the QPM order of the peak. Passing ``m=None`` uses the fractional
    order at ``signal_nm``, which follows a feature of the phase-mismatched
    background. ``method`` is ``"central"`` (finite difference over ``+-dT``)
    or ``"analytic"`` (thermo-optic polynomials and expansion derivative).
    """
    if m is None:
        m = float(fractional_order(cfg, geom, signal_nm))
    t = cfg.temperature_c
    if method == "central":
        def f(temp):
            return float(spdc_mismatch(cfg, geom, signal_nm, temp)) - m * float(cfg.grating_vector(temp))

        df_dT = (f(t + dT) - f(t - dT)) / (2.0 * dT)
    elif method == "analytic":
        li = idler_wavelength(cfg.pump_nm, signal_nm)
        terms = 0.0
        for fld, wl_nm, sign in (("pump", cfg.pump_nm, 1), ("signal", signal_nm, geom.signal_sign), ("idler", li, geom.idler_sign)):
            wl_um = wl_nm * 1e-3
            terms += sign * 2.0 * np.pi * float(cfg.model(fld).dn_dT(wl_um)) / wl_um
        g = float(cfg.grating_vector())
        dg_dT = -g * float(cfg.expansion.dfactor_dT(t)) / float(cfg.expansion.factor(t))
        df_dT = terms - m * dg_dT
    else:
        raise ValueError(f"unknown method {method!r}")
    # d(dk)/d(lambda_s) via d(dk)/d(nu_s) * d(nu)/d(lambda); rad/um per um
    lam_um = signal_nm * 1e-3
    df_dlam = float(mismatch_slope(cfg, geom, signal_nm)) * (-C_UM_PER_PS / lam_um**2)
    return -df_dT / df_dlam * 1e6


@dataclass
class TuningCurve:
    geometry: ProcessGeometry
    order: float
    points: list = field(default_factory=list)
    truncated: bool = False

    @property
    def temperatures(self):
        return np.array([p[0] for p in self.points])

    @property
    def wavelengths(self):
        return np.array([p[1] for p in self.points])

    def slope_pm_per_k(self):
        """Least-squares slope of the curve in pm/K."""
        if len(self.points) < 2:
            return float("nan")
        return float(np.polyfit(self.temperatures, self.wavelengths, 1)[0] * 1e3)


def tuning_curve(cfg, geom, m, temperatures, signal_nm, window=(1100.0, 2000.0), search_nm=5.0, grid_step_nm=0.01, tol=1e-6):
    """Track the peak of order ``m`` starting near ``signal_nm`` across ``temperatures``.

    At each temperature the root is re-solved within ``+-search_nm`` of the
    previous position and the nearest one kept, so the curve never hops
    orders. If the peak leaves ``window`` or vanishes, the curve stops and
    ``truncated`` is set. ``m`` may be fractional to follow background
    features of constant mismatch.
    """
    geom = ProcessGeometry.parse(geom)
    curve = TuningCurve(geom, m)
    prev = float(signal_nm)
    for temp in temperatures:
        c = cfg.at_temperature(temp)
        lo = max(prev - search_nm, window[0], cfg.pump_nm + 1e-6)
        hi = min(prev + search_nm, window[1])
        if hi <= lo:
            curve.truncated = True
            break
        grid, dk, dk_g = _geometry_grid(c, geom, lo, hi, grid_step_nm)
        roots = _roots_on_grid(c, geom, m, grid, dk, dk_g, tol)
        if not roots:
            curve.truncated = True
            break
        prev = min(roots, key=lambda r: abs(r - prev))
        curve.points.append((float(temp), prev))
    return curve
