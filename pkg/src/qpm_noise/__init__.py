"""Noise-spectrum modelling for quasi-phase-matched frequency converters."""

__version__ = "0.1.0"

from .config import default_config, load_config
from .dispersion import (
    CrystalAxis,
    SellmeierModel,
    ThermalExpansionModel,
    grating_vector,
    group_index,
    refractive_index,
)
from .errors import ConfigError, DomainError, ResolutionError
from .poling_mc import (
    DomainSequence,
    ErrorKind,
    ErrorModel,
    PedestalResult,
    generate_sequence,
    pedestal_estimate,
    response_spectrum,
)
from .qpm_core import (
    ALL_GEOMETRIES,
    CrystalConfig,
    EfficiencyWeightParams,
    ProcessGeometry,
    fractional_order,
    idler_wavelength,
    qpm_mismatch,
    relative_efficiency,
    spdc_mismatch,
)
from .solver import PhaseMatchPeak, ScanWindow, bandwidth, find_peaks, temperature_tuning, tuning_curve
from .spectra import (
    SpectrumTrace,
    VoigtComponent,
    assign_orders,
    detect_peaks,
    fit_voigt_sum,
    infer_period,
    read_trace,
    spdc_peaks_in,
    synthesize_spectrum,
    write_trace,
)
