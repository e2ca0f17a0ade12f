"""Measured-trace handling and inverse analysis.

Covers Raman-shift axes, Voigt-sum fitting of Raman lines, peak detection,
assignment of detected peaks to QPM orders, poling-period inference from
peak positions, and forward synthesis of a noise spectrum.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, signal, special
from scipy.ndimage import gaussian_filter1d

from .errors import DomainError
from .qpm_core import ALL_GEOMETRIES, CrystalConfig, ProcessGeometry, idler_wavelength, spdc_mismatch
from .solver import SINC2_FWHM, ScanWindow, find_peaks

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass
class SpectrumTrace:
    wavelength_nm: np.ndarray
    values: np.ndarray
    resolution_nm: float
    integration_s: float | None = None
    pump_axis: str | None = None
    det_axis: str | None = None
    temperature_c: float | None = None
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.wavelength_nm = np.asarray(self.wavelength_nm, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.wavelength_nm.shape != self.values.shape or self.wavelength_nm.ndim != 1:
            raise ValueError("wavelength and value arrays must be 1-D and the same length")
        if self.wavelength_nm.size > 1 and np.any(np.diff(self.wavelength_nm) <= 0):
            raise ValueError("wavelength grid must be strictly increasing")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("trace values must be finite and >= 0")
        if not self.resolution_nm > 0:
            raise ValueError("resolution_nm must be > 0")

    @property
    def step_nm(self):
        return float(np.median(np.diff(self.wavelength_nm)))

    def window(self, lo, hi) -> "SpectrumTrace":
        sel = (self.wavelength_nm >= lo) & (self.wavelength_nm <= hi)
        return SpectrumTrace(
            self.wavelength_nm[sel], self.values[sel], self.resolution_nm, self.integration_s,
            self.pump_axis, self.det_axis, self.temperature_c, self.provenance, dict(self.meta),
        )


_META_KEYS = {
    "resolution_nm": float,
    "integration_s": float,
    "pump_axis": str,
    "det_axis": str,
    "temperature_c": float,
    "provenance": str,
}


def read_trace(path) -> SpectrumTrace:
    """Read a trace CSV (``# key: value`` header lines, then ``wavelength_nm,value``)."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            if line[0].isalpha():
                continue
            a, b = line.split(",")[:2]
            rows.append((float(a), float(b)))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    kw = {k: conv(meta.pop(k)) for k, conv in _META_KEYS.items() if k in meta and meta[k] != ""}
    if "resolution_nm" not in kw:
        raise ValueError(f"{path}: missing '# resolution_nm:' header")
    return SpectrumTrace(data[:, 0], data[:, 1], meta=meta, **kw)


def format_trace(trace: SpectrumTrace) -> str:
    """CSV text of ``trace`` with ``# key: value`` metadata headers."""
    lines = []
    for key in _META_KEYS:
        val = getattr(trace, key)
        if val is not None and val != "":
            lines.append(f"# {key}: {val}")
    for key, val in sorted(trace.meta.items()):
        lines.append(f"# {key}: {val}")
    lines.append("wavelength_nm,value")
    lines.extend(f"{x:.6f},{y:.9g}" for x, y in zip(trace.wavelength_nm, trace.values))
    return "\n".join(lines) + "\n"


def write_trace(trace: SpectrumTrace, path):
    with open(path, "w") as fh:
        fh.write(format_trace(trace))


# --- Raman axis -----------------------------------------------------------

def wavelength_to_raman_shift(wavelength_nm, pump_nm):
    """Raman shift ``1e7 (1/lambda_p - 1/lambda)`` in cm^-1 (Stokes positive)."""
    wl = np.asarray(wavelength_nm, dtype=float)
    if np.any(wl <= 0) or pump_nm <= 0:
        raise DomainError("wavelengths must be positive")
    out = 1e7 * (1.0 / pump_nm - 1.0 / wl)
    return float(out) if out.ndim == 0 else out


def raman_shift_to_wavelength(shift_cm, pump_nm):
    out = 1.0 / (1.0 / pump_nm - np.asarray(shift_cm, dtype=float) * 1e-7)
    return float(out) if np.ndim(out) == 0 else out


# --- Voigt fitting --------------------------------------------------------

@dataclass(frozen=True)
class VoigtComponent:
    """One Voigt line; ``amplitude`` is the integrated area."""

    center: float
    gamma: float
    sigma: float
    amplitude: float

    def __post_init__(self):
        if self.gamma < 0 or self.sigma < 0:
            raise ValueError("Voigt widths must be >= 0")
        if self.amplitude < 0:
            raise ValueError("Voigt amplitude must be >= 0")

    def __call__(self, x):
        return voigt(x, self.center, self.gamma, self.sigma, self.amplitude)


def voigt(x, center, gamma, sigma, amplitude=1.0):
    """Area-normalized Voigt line (Faddeeva-function based) scaled by ``amplitude``."""
    return amplitude * special.voigt_profile(np.asarray(x, dtype=float) - center, sigma, gamma)


@dataclass
class VoigtFit:
    components: list
    baseline: tuple
    baseline_ref_nm: float
    residual_norm: float
    signal_norm: float
    uncertainties: list
    converged: bool
    nfev: int
    message: str

    def model(self, x):
        x = np.asarray(x, dtype=float)
        y = _baseline(x, self.baseline, self.baseline_ref_nm)
        for c in self.components:
            y = y + c(x)
        return y

    def to_dict(self, pump_nm=None):
        comps = []
        for c, u in zip(self.components, self.uncertainties):
            d = asdict(c)
            d["uncertainty"] = u
            if pump_nm is not None:
                d["raman_shift_cm"] = wavelength_to_raman_shift(c.center, pump_nm)
            comps.append(d)
        return {
            "components": comps,
            "baseline": list(self.baseline),
            "baseline_ref_nm": self.baseline_ref_nm,
            "residual_norm": self.residual_norm,
            "signal_norm": self.signal_norm,
            "converged": self.converged,
            "nfev": self.nfev,
            "message": self.message,
        }


_BASELINE_TERMS = {"none": 0, "constant": 1, "linear": 2}


def _baseline(x, coeffs, ref):
    y = np.zeros_like(x)
    for k, c in enumerate(coeffs):
        y = y + c * (x - ref) ** k
    return y


def _seed_components(trace, n, resolution):
    peaks = detect_peaks(trace, prominence=0.0)
    if len(peaks) < n:
        raise ValueError(f"only {len(peaks)} local maxima found, cannot seed {n} components")
    # keep the most prominent seeds; overlapping seeds lose to the higher prominence
    chosen = []
    for p in sorted(peaks, key=lambda p: -p.prominence):
        if all(abs(p.center_nm - q.center_nm) > 0.5 * resolution for q in chosen):
            chosen.append(p)
        if len(chosen) == n:
            break
    if len(chosen) < n:
        raise ValueError(f"could not find {n} separated peaks to seed the fit")
    chosen.sort(key=lambda p: p.center_nm)
    seeds = []
    for p in chosen:
        width = max(p.fwhm_nm, resolution)
        seeds.append(VoigtComponent(p.center_nm, resolution / 2.0, resolution / FWHM_PER_SIGMA, p.prominence * width))
    return seeds


def fit_voigt_sum(trace: SpectrumTrace, n_components=None, baseline="linear", init="detect", window=None, max_nfev=5000):
    """Least-squares fit of a sum of Voigt lines plus a polynomial baseline.

    Parameters
    ----------
    n_components : int
        Number of lines; inferred from ``init`` when a component list is given.
    baseline : {"linear", "constant", "none"}
    init : "detect" or sequence of VoigtComponent
        ``"detect"`` seeds centers/areas from :func:`detect_peaks` and widths
        from the trace resolution.
    window : (lo, hi), optional
        Restrict the fit to this wavelength range.

    Returns
    -------
    VoigtFit
        Non-convergence is reported through ``converged`` (with a warning);
        the best parameters found are still returned.
    """
    tr = trace.window(*window) if window is not None else trace
    x, y = tr.wavelength_nm, tr.values
    if baseline not in _BASELINE_TERMS:
        raise ValueError(f"baseline must be one of {sorted(_BASELINE_TERMS)}")
    if isinstance(init, str):
        if init != "detect":
            raise ValueError(f"unknown init strategy {init!r}")
        if not n_components or n_components < 1:
            raise ValueError("n_components must be >= 1")
        seeds = _seed_components(tr, n_components, tr.resolution_nm)
    else:
        seeds = list(init)
        if n_components is not None and n_components != len(seeds):
            raise ValueError("n_components does not match the number of initial components")
    n = len(seeds)
    nb = _BASELINE_TERMS[baseline]
    ref = float(0.5 * (x[0] + x[-1]))
    span = float(x[-1] - x[0])

    p0, lo, hi = [], [], []
    for s in seeds:
        p0 += [s.center, s.gamma, s.sigma, s.amplitude]
        lo += [x[0], 0.0, 0.0, 0.0]
        hi += [x[-1], span, span, np.inf]
    base0 = [float(np.min(y))] + [0.0] * (nb - 1)
    p0 += base0[:nb]
    lo += [-np.inf] * nb
    hi += [np.inf] * nb
    p0 = np.clip(np.array(p0, dtype=float), lo, hi)

    def unpack(p):
        comps = [p[4 * i:4 * i + 4] for i in range(n)]
        return comps, p[4 * n:]

    def model(p):
        comps, b = unpack(p)
        out = _baseline(x, b, ref)
        for c, g, s, a in comps:
            out = out + voigt(x, c, g, s, a)
        return out

    res = optimize.least_squares(
        lambda p: model(p) - y, p0, bounds=(lo, hi), jac="3-point", x_scale="jac",
        ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=max_nfev,
    )
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"Voigt fit did not converge: {res.message}", RuntimeWarning, stacklevel=2)
    dof = max(x.size - res.x.size, 1)
    s2 = float(res.fun @ res.fun) / dof
    cov = np.linalg.pinv(res.jac.T @ res.jac) * s2
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    comps, b = unpack(res.x)
    components = [VoigtComponent(float(c), float(g), float(s), float(a)) for c, g, s, a in comps]
    uncert = [
        dict(zip(("center", "gamma", "sigma", "amplitude"), map(float, err[4 * i:4 * i + 4])))
        for i in range(n)
    ]
    order = np.argsort([c.center for c in components])
    return VoigtFit(
        components=[components[i] for i in order],
        baseline=tuple(float(v) for v in b),
        baseline_ref_nm=ref,
        residual_norm=float(np.linalg.norm(res.fun)),
        signal_norm=float(np.linalg.norm(y)),
        uncertainties=[uncert[i] for i in order],
        converged=converged,
        nfev=int(res.nfev),
        message=str(res.message),
    )


# --- peak detection -------------------------------------------------------

@dataclass(frozen=True)
class DetectedPeak:
    center_nm: float
    height: float
    fwhm_nm: float
    prominence: float


def detect_peaks(trace: SpectrumTrace, prominence=0.0, min_width_nm=0.0):
    """Local maxima with at least ``prominence``, sorted by wavelength.

    Centers are refined by a three-point parabola; the FWHM is measured
    between the linearly interpolated crossings of half the peak's
    prominence.
    """
    x, y = trace.wavelength_nm, trace.values
    if y.size < 3:
        return []
    step = trace.step_nm
    width = min_width_nm / step if min_width_nm > 0 else None
    idx, props = signal.find_peaks(y, prominence=prominence, width=width, rel_height=0.5)
    if idx.size == 0:
        return []
    _, _, left, right = signal.peak_widths(y, idx, rel_height=0.5, prominence_data=(props["prominences"], props["left_bases"], props["right_bases"]))
    samples = np.arange(x.size)
    out = []
    for k, i in enumerate(idx):
        c = float(x[i])
        if 0 < i < x.size - 1:
            a, b, d = y[i - 1], y[i], y[i + 1]
            den = a - 2 * b + d
            if den < 0:
                off = 0.5 * (a - d) / den
                c = float(np.interp(i + off, samples, x))
        fwhm = float(np.interp(right[k], samples, x) - np.interp(left[k], samples, x))
        out.append(DetectedPeak(c, float(y[i]), fwhm, float(props["prominences"][k])))
    return out


# --- order assignment -----------------------------------------------------

@dataclass(frozen=True)
class PeakAssignment:
    peak: DetectedPeak
    kind: str  # "spdc", "design", "raman" or "unassigned"
    geometry: ProcessGeometry | None = None
    order: int | None = None
    predicted_nm: float | None = None
    residual_nm: float | None = None
    ambiguous: bool = False
    n_candidates: int = 0

    @property
    def label(self):
        if self.kind == "spdc":
            return f"{self.geometry} m={self.order}"
        if self.kind == "design":
            return "design m=1"
        return self.kind

    def to_dict(self):
        return {
            "center_nm": self.peak.center_nm,
            "height": self.peak.height,
            "fwhm_nm": self.peak.fwhm_nm,
            "kind": self.kind,
            "geometry": None if self.geometry is None else self.geometry.value,
            "order": self.order,
            "predicted_nm": self.predicted_nm,
            "residual_nm": self.residual_nm,
            "ambiguous": self.ambiguous,
            "n_candidates": self.n_candidates,
        }


def _evaluable_from(cfg, lo_nm, hi_nm, step_nm=0.05):
    # long-wave idlers run into the Sellmeier poles; scan only where every index exists
    if not hi_nm > lo_nm:
        return None
    grid = np.linspace(lo_nm, hi_nm, int(math.ceil((hi_nm - lo_nm) / step_nm)) + 1)
    ok = np.ones(grid.size, dtype=bool)
    for fld, wl_nm in (("signal", grid), ("idler", idler_wavelength(cfg.pump_nm, grid))):
        model = cfg.model(fld)
        wl = wl_nm * 1e-3
        with np.errstate(all="ignore"):
            n = model._n_ref(wl) + model.dn_dT(wl) * (cfg.temperature_c - model.t_ref_c)
        ok &= np.isfinite(n) & (n > 1.0)
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return float(grid[bad[-1] + 1]) if bad.size else float(lo_nm)


def spdc_peaks_in(cfg: CrystalConfig, lo_nm, hi_nm, geometries=ALL_GEOMETRIES, orders=(1, 60), workers=None):
    """SPDC peaks in ``[lo_nm, hi_nm]``, skipping the part where an index is undefined."""
    lo = _evaluable_from(cfg, max(lo_nm, cfg.pump_nm + 1.0), hi_nm)
    if lo is None or not hi_nm > lo:
        return []
    return find_peaks(cfg, ScanWindow(lo, hi_nm, tuple(geometries), tuple(orders)), workers=workers)


def predicted_lines(cfg: CrystalConfig, lo_nm, hi_nm, geometries=ALL_GEOMETRIES, orders=(1, 60)):
    """(wavelength, kind, geometry, order) for every line expected in a range."""
    lines = [(p.signal_nm, "spdc", p.geometry, p.order) for p in spdc_peaks_in(cfg, lo_nm, hi_nm, geometries, orders)]
    if cfg.design is not None and lo_nm <= cfg.design.target_nm <= hi_nm:
        lines.append((cfg.design.target_nm, "design", ProcessGeometry.CO_CO, 1))
    for shift in cfg.raman_shifts_cm:
        wl = raman_shift_to_wavelength(shift, cfg.pump_nm)
        if lo_nm <= wl <= hi_nm:
            lines.append((wl, "raman", None, None))
    return lines


def assign_orders(peaks, cfg: CrystalConfig, geometries=ALL_GEOMETRIES, tolerance_nm=2.0, orders=(1, 60)):
    """Match each detected peak to the nearest predicted line within tolerance.

    ``peaks`` may be :class:`DetectedPeak` objects or bare center wavelengths.
    Predictions include SPDC resonances of the given geometries and orders,
    the config's design process, and its Raman lines. A peak with more than
    one prediction inside the tolerance is flagged ``ambiguous``.
    """
    peaks = [p if isinstance(p, DetectedPeak) else DetectedPeak(float(p), float("nan"), float("nan"), float("nan")) for p in peaks]
    if not peaks:
        return []
    centers = [p.center_nm for p in peaks]
    lines = predicted_lines(cfg, min(centers) - tolerance_nm - 1.0, max(centers) + tolerance_nm + 1.0, geometries, orders)
    out = []
    for p in peaks:
        cands = sorted((abs(wl - p.center_nm), wl, kind, g, m) for wl, kind, g, m in lines if abs(wl - p.center_nm) <= tolerance_nm)
        if not cands:
            out.append(PeakAssignment(p, "unassigned"))
            continue
        _, wl, kind, g, m = cands[0]
        out.append(PeakAssignment(p, kind, g, m, wl, p.center_nm - wl, len(cands) > 1, len(cands)))
    return out


# --- period inference -----------------------------------------------------

@dataclass(frozen=True)
class PeriodEstimate:
    period_um: float
    std_um: float
    period_ref_um: float
    pair_periods: tuple
    consistent: bool


def infer_period(centers_nm, cfg: CrystalConfig, geometry, orders=None, rel_tol=0.01):
    """Poling period from peak positions of one geometry.

    For neighbouring orders ``2 pi / (dk_spdc(lambda_{m+1}) - dk_spdc(lambda_m))``;
    with explicit ``orders`` the difference is divided by the order gap.
    Without ``orders`` the peaks are taken to be consecutive. The period in
    ``cfg`` is not used. ``period_ref_um`` removes the thermal expansion back
    to the expansion reference temperature.
    """
    geometry = ProcessGeometry.parse(geometry)
    lam = np.asarray(centers_nm, dtype=float)
    if lam.size < 2:
        raise ValueError("need at least two peaks")
    dk = np.asarray(spdc_mismatch(cfg, geometry, lam), dtype=float)
    if orders is None:
        dk_sorted = np.sort(dk)
        diffs = np.diff(dk_sorted)
        gaps = np.ones_like(diffs)
    else:
        m = np.asarray(orders, dtype=float)
        if m.shape != lam.shape:
            raise ValueError("orders must match centers one to one")
        idx = np.argsort(m)
        diffs = np.diff(dk[idx])
        gaps = np.diff(m[idx])
        if np.any(gaps == 0):
            raise ValueError("duplicate orders")
    if np.any(diffs == 0):
        raise DomainError("two peaks have identical mismatch; period undefined")
    pairs = 2.0 * np.pi * gaps / diffs
    if np.any(pairs <= 0):
        raise DomainError("peak order does not follow the mismatch; check orders")
    mean = float(np.mean(pairs))
    std = float(np.std(pairs, ddof=1)) if pairs.size > 1 else 0.0
    consistent = std <= rel_tol * mean
    if not consistent:
        warnings.warn(f"pairwise periods scatter by {std / mean:.2%}", RuntimeWarning, stacklevel=2)
    ref = mean / float(cfg.expansion.factor(cfg.temperature_c))
    return PeriodEstimate(mean, std, ref, tuple(float(p) for p in pairs), bool(consistent))


# --- synthesis ------------------------------------------------------------

def sinc2_line(wavelength_nm, center_nm, fwhm_nm, height):
    x = SINC2_FWHM * (np.asarray(wavelength_nm) - center_nm) / fwhm_nm
    return height * np.sinc(x / np.pi) ** 2


def synthesize_spectrum(
    cfg: CrystalConfig,
    window,
    resolution_nm,
    peaks=(),
    pedestal=None,
    raman=(),
    peak_scale=1.0,
    step_nm=None,
    calibration=None,
    provenance="synthetic",
):
    """Render a model noise spectrum seen through a Gaussian instrument response.

    Parameters
    ----------
    peaks : sequence of PhaseMatchPeak
        Drawn as sinc^2 lines of their theoretical FWHM with height
        ``rel_weight * peak_scale``.
    pedestal : float, PedestalResult or (dk, values), optional
        A constant level, or a response spectrum evaluated at the ordinary
        (--) mismatch of each wavelength.
    raman : sequence of VoigtComponent
        Centers in nm.
    calibration : (value, wavelength_nm), optional
        Scale the result so it equals ``value`` at that wavelength; otherwise
        units are relative.
    """
    lo, hi = map(float, window)
    if not hi > lo:
        raise ValueError("window must have hi > lo")
    if resolution_nm <= 0 or resolution_nm >= hi - lo:
        raise ValueError("resolution must be positive and finer than the window")
    step_nm = resolution_nm / 5.0 if step_nm is None else step_nm
    widths = [p.bandwidth_pm * 1e-3 for p in peaks]
    fine = min([resolution_nm / 20.0] + [w / 8.0 for w in widths])
    pad = 4.0 * resolution_nm
    xf = np.arange(lo - pad, hi + pad + fine / 2, fine)
    yf = np.zeros_like(xf)
    for p, w in zip(peaks, widths):
        if lo - pad - 10 * w <= p.signal_nm <= hi + pad + 10 * w:
            yf += sinc2_line(xf, p.signal_nm, w, p.rel_weight * peak_scale)
    if pedestal is not None:
        if np.isscalar(pedestal):
            yf += float(pedestal)
        else:
            dk_grid, vals = (pedestal.dk, pedestal.mean) if hasattr(pedestal, "mean") else pedestal
            dk_here = spdc_mismatch(cfg, ProcessGeometry.CO_CO, xf)
            yf += np.interp(dk_here, dk_grid, vals)
    for comp in raman:
        yf += comp(xf)
    yf = gaussian_filter1d(yf, resolution_nm / FWHM_PER_SIGMA / fine, mode="nearest")
    x = np.arange(lo, hi + step_nm / 2, step_nm)
    y = np.clip(np.interp(x, xf, yf), 0.0, None)
    meta = {"instrument_response": "gaussian", "instrument_fwhm_nm": resolution_nm, "units": "relative"}
    if calibration is not None:
        value, at_nm = calibration
        ref = float(np.interp(at_nm, x, y))
        if ref <= 0:
            raise ValueError("cannot calibrate: spectrum is zero at the anchor wavelength")
        y = y * (value / ref)
        meta["units"] = f"calibrated to {value} at {at_nm} nm"
    return SpectrumTrace(x, y, resolution_nm, temperature_c=cfg.temperature_c, provenance=provenance, meta=meta)
