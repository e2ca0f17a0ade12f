import numpy as np
import pytest

from qpm_noise import CrystalAxis, CrystalConfig, SellmeierModel, ThermalExpansionModel, default_config

# peak centers of the 20 mm ppKTP converter at 31.5 C
CO_CT_CENTERS = {15: 1480.10, 16: 1518.13, 17: 1558.16, 18: 1600.59}
CT_CO_CENTERS = {36: 1607.79, 37: 1565.06, 38: 1524.63, 39: 1486.40}


@pytest.fixture(scope="session")
def cfg():
    return default_config()


def constant_index_config(n_pump=1.9, n_gen=1.8, period_um=15.7, **kw):
    """Dispersionless crystal: pump on y, signal and idler on z, no thermal effects."""
    models = {
        CrystalAxis.Y: SellmeierModel("constant", (n_pump,), (0.2, 10.0)),
        CrystalAxis.Z: SellmeierModel("constant", (n_gen,), (0.2, 10.0)),
    }
    args = dict(
        length_mm=20.0,
        domain_length_um=period_um / 2.0,
        duty_cycle=0.5,
        temperature_c=25.0,
        pump_nm=1064.661,
        sellmeier=models,
        axes={"pump": "y", "signal": "z", "idler": "z"},
        expansion=ThermalExpansionModel(0.0, 0.0, 25.0),
    )
    args.update(kw)
    return CrystalConfig(**args)


@pytest.fixture
def const_cfg():
    return constant_index_config()


def analytic_roots(c, geom, orders, lo, hi):
    """Closed-form signal wavelengths (nm) for the constant-index crystal."""
    n_p = c.sellmeier[CrystalAxis.Y].coeffs[0]
    n = c.sellmeier[CrystalAxis.Z].coeffs[0]
    lp, period = c.pump_nm * 1e-3, c.period_um
    out = []
    for m in orders:
        # dk/2pi = n_p/lp + s_s n/ls + s_i n (1/lp - 1/ls) = m/period
        a = n_p / lp + geom.idler_sign * n / lp
        b = geom.signal_sign * n - geom.idler_sign * n
        if b == 0:
            continue
        ls = b / (m / period - a)
        if lo <= ls * 1e3 <= hi:
            out.append((m, ls * 1e3))
    return out


def rng(seed=0):
    return np.random.default_rng(seed)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
