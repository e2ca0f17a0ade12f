"""Monte-Carlo model of poling errors and the resulting nonlinearity spectrum.

A domain sequence is described by its boundary positions ``z_0 = 0 < z_1 <
... < z_N = L`` and alternating polarities starting at +1. Its normalized
effective-nonlinearity spectrum is

    g(dk) = (1/L) sum_j p_j (exp(i dk z_{j+1}) - exp(i dk z_j)) / (i dk)

reported as ``|g|^2 / (2/pi)^2`` so that a perfect 50:50 grating gives 1 at
its first-order peak and ``1/m^2`` at odd orders ``m``.
"""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .qpm_core import sin_pi

NORM = (2.0 / np.pi) ** 2
MIN_DOMAIN_UM = 1e-3


class ErrorKind(str, enum.Enum):
    JITTER = "independent-boundary-jitter"
    DUTY_OFFSET = "duty-cycle-offset"
    MIXED = "mixed"


@dataclass(frozen=True)
class ErrorModel:
    """Poling-error model.

    ``JITTER`` displaces every boundary independently by N(0, sigma).
    ``DUTY_OFFSET`` is the deterministic grating with duty cycle D (sigma is
    ignored). ``MIXED`` keeps the period starts fixed and jitters only the
    boundary inside each period, i.e. a random duty cycle around D.
    """

    domain_length_um: float
    duty_cycle: float = 0.5
    sigma_um: float = 0.0
    kind: ErrorKind = ErrorKind.JITTER

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        if self.sigma_um < 0:
            raise ValueError(f"sigma_um must be >= 0, got {self.sigma_um}")
        if not 0 < self.duty_cycle < 1:
            raise ValueError(f"duty_cycle must be in (0, 1), got {self.duty_cycle}")
        if self.domain_length_um <= 0:
            raise ValueError("domain_length_um must be > 0")

    @property
    def period_um(self):
        return 2.0 * self.domain_length_um

    @property
    def is_random(self):
        return self.kind is not ErrorKind.DUTY_OFFSET and self.sigma_um > 0


@dataclass(frozen=True)
class DomainSequence:
    boundaries: np.ndarray
    model: ErrorModel
    seed: int | None = None
    n_clamped: int = 0

    @property
    def lengths(self):
        return np.diff(self.boundaries)

    @property
    def polarities(self):
        n = self.boundaries.size - 1
        return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)

    @property
    def total_length(self):
        return float(self.boundaries[-1] - self.boundaries[0])

    @property
    def n_domains(self):
        return self.boundaries.size - 1


def n_periods(model: ErrorModel, length_mm):
    """Whole periods fitting in ``length_mm`` (the sequence is snapped to them)."""
    n = int(round(length_mm * 1e3 / model.period_um))
    if n < 1:
        raise ValueError(f"crystal length {length_mm} mm shorter than one period")
    return n


def generate_sequence(model: ErrorModel, length_mm, seed=None, rng=None, warn=True) -> DomainSequence:
    """Domain sequence of ``round(L / Lambda)`` periods with the given errors.

    The crystal faces stay at 0 and ``N*Lambda``. Boundaries pushed closer
    than 1 nm to their neighbour are clamped there and counted, with a
    warning.
    """
    npd = n_periods(model, length_mm)
    lam = model.period_um
    starts = np.arange(npd + 1) * lam
    z = np.empty(2 * npd + 1)
    z[0::2] = starts
    z[1::2] = starts[:-1] + model.duty_cycle * lam
    clamped = 0
    if model.is_random:
        if rng is None:
            rng = np.random.default_rng(seed)
        if model.kind is ErrorKind.JITTER:
            z[1:-1] += rng.normal(0.0, model.sigma_um, z.size - 2)
        else:
            z[1::2] += rng.normal(0.0, model.sigma_um, npd)
        if np.any(np.diff(z) < MIN_DOMAIN_UM):
            z, clamped = _clamp(z)
            if warn:
                warnings.warn(f"{clamped} domain boundaries clamped to {MIN_DOMAIN_UM * 1e3:.0f} nm spacing", RuntimeWarning, stacklevel=2)
    return DomainSequence(z, model, seed, clamped)


def _clamp(z):
    z = z.copy()
    n = 0
    for b in range(1, z.size - 1):
        if z[b] < z[b - 1] + MIN_DOMAIN_UM:
            z[b] = z[b - 1] + MIN_DOMAIN_UM
            n += 1
    # walk back from the far face
    for b in range(z.size - 2, 0, -1):
        if z[b] > z[b + 1] - MIN_DOMAIN_UM:
            z[b] = z[b + 1] - MIN_DOMAIN_UM
            n += 1
    return z, n


def _boundary_coefficients(seq: DomainSequence):
    # sum_j p_j (e_{j+1} - e_j) = sum_b e_b (p_{b-1} - p_b), p_{-1} = p_N = 0
    p = seq.polarities
    padded = np.concatenate(([0.0], p, [0.0]))
    return padded[:-1] - padded[1:]


def _uniform_step(dk):
    if dk.size < 3:
        return None
    d = np.diff(dk)
    step = (dk[-1] - dk[0]) / (dk.size - 1)
    if step > 0 and np.allclose(d, step, rtol=1e-9, atol=0):
        return step
    return None


def response_spectrum(seq: DomainSequence, dk_grid, backend=None, fast=False):
    """Normalized ``|g(dk)|^2`` on ``dk_grid`` (rad/um).

    ``fast=True`` uses the phasor recurrence for uniform grids; otherwise the
    direct sum. ``dk = 0`` takes the analytic limit (mean polarity squared).
    """
    dk = np.atleast_1d(np.asarray(dk_grid, dtype=float))
    if not np.all(np.isfinite(dk)):
        raise ValueError("dk grid must be finite")
    k = kernels.get(backend)
    z = np.ascontiguousarray(seq.boundaries - seq.boundaries[0])
    coef = _boundary_coefficients(seq)
    step = _uniform_step(dk) if fast else None
    if step is not None:
        s = k.phasor_sum_uniform(z, coef, float(dk[0]), float(step), dk.size)
    else:
        s = k.phasor_sum(z, coef, dk)
    L = seq.total_length
    out = np.empty(dk.size)
    nz = dk != 0
    out[nz] = np.abs(s[nz] / (dk[nz] * L)) ** 2
    if np.any(~nz):
        mean_pol = float(np.sum(seq.polarities * seq.lengths)) / L
        out[~nz] = mean_pol**2
    return out / NORM


def order_weight(m, duty_cycle):
    """Closed-form normalized weight ``(sin(pi m D) / m)^2`` at ``dk = m dk_g``."""
    m = np.asarray(m, dtype=float)
    return (sin_pi(m * duty_cycle) / m) ** 2


@dataclass(frozen=True)
class PedestalResult:
    dk: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    trials: int
    seed: int
    model: ErrorModel
    ideal: np.ndarray

    def stderr(self):
        return self.std / math.sqrt(self.trials)

    @property
    def excess(self):
        """Error-induced part of the mean: the ensemble mean minus the ideal grating's response."""
        return self.mean - self.ideal


def trial_seeds(seed, trials):
    """Per-trial generators: trial ``t`` uses child ``t`` of ``SeedSequence(seed)``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def pedestal_estimate(model: ErrorModel, length_mm, trials, dk_grid, seed=0, workers=None, backend=None, fast=True):
    """Ensemble mean and standard deviation of the normalized response.

    Trials run in any order on ``workers`` threads; sums are accumulated in
    trial order so the statistics are bit-identical for a given seed.
    """
    if trials < 2:
        raise ValueError("pedestal_estimate needs at least 2 trials")
    dk = np.asarray(dk_grid, dtype=float)
    rngs = trial_seeds(seed, trials)

    def one(t):
        seq = generate_sequence(model, length_mm, rng=rngs[t], warn=False)
        return seq.n_clamped, response_spectrum(seq, dk, backend=backend, fast=fast)

    total = np.zeros(dk.size)
    total_sq = np.zeros(dk.size)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(one, range(trials)))
    else:
        results = (one(t) for t in range(trials))
    clamped = 0
    for c, r in results:
        clamped += c
        total += r
        total_sq += r * r
    if clamped:
        warnings.warn(f"{clamped} boundaries clamped over {trials} trials", RuntimeWarning, stacklevel=2)
    mean = total / trials
    var = np.maximum(total_sq / trials - mean * mean, 0.0) * trials / (trials - 1)
    ideal = response_spectrum(generate_sequence(replace(model, sigma_um=0.0), length_mm), dk, backend=backend, fast=fast)
    return PedestalResult(dk, mean, np.sqrt(var), trials, seed, model, ideal)


def even_order_strength(model: ErrorModel, orders, length_mm=20.0, trials=200, seed=0, backend=None):
    """Normalized response at ``dk = m * 2 pi / Lambda`` for each order.

    Deterministic models use one sequence; random ones average ``trials``.
    """
    orders = np.asarray(list(orders), dtype=int)
    dk = orders * 2.0 * np.pi / model.period_um
    if model.is_random:
        res = pedestal_estimate(model, length_mm, trials, dk, seed=seed, backend=backend, fast=False)
        vals = res.mean
    else:
        vals = response_spectrum(generate_sequence(model, length_mm), dk, backend=backend)
    return dict(zip(orders.tolist(), vals.tolist()))
