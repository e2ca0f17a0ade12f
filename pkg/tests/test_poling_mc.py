import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpm_noise import kernels
from qpm_noise.poling_mc import (
    NORM,
    ErrorKind,
    ErrorModel,
    order_weight,
    even_order_strength,
    generate_sequence,
    n_periods,
    pedestal_estimate,
    response_spectrum,
)

L_MM = 20.0
DOMAIN = 7.85
G = 2 * math.pi / (2 * DOMAIN)


@pytest.fixture(scope="module")
def ideal():
    return generate_sequence(ErrorModel(DOMAIN), L_MM)


def test_ideal_sequence_is_periodic(ideal):
    assert ideal.n_domains == 2548
    assert np.allclose(ideal.lengths, DOMAIN, rtol=0, atol=1e-9)
    assert ideal.total_length == pytest.approx(n_periods(ideal.model, L_MM) * 2 * DOMAIN)


def test_duty_offset_sequence():
    seq = generate_sequence(ErrorModel(DOMAIN, 0.49, kind=ErrorKind.DUTY_OFFSET), L_MM)
    assert np.allclose(seq.lengths[0::2], 0.98 * DOMAIN, atol=1e-9)
    assert np.allclose(seq.lengths[1::2], 1.02 * DOMAIN, atol=1e-9)


@pytest.mark.parametrize("kind", list(ErrorKind))
def test_sequence_invariants(kind):
    seq = generate_sequence(ErrorModel(DOMAIN, 0.5, 0.5, kind), L_MM, seed=3)
    assert np.all(seq.lengths > 0)
    assert seq.lengths.sum() == pytest.approx(seq.total_length, rel=1e-6)
    assert np.all(seq.polarities[:-1] == -seq.polarities[1:])
    assert seq.polarities[0] == 1.0


def test_fixed_seed_is_bit_identical():
    m = ErrorModel(DOMAIN, 0.5, 0.3)
    a = generate_sequence(m, L_MM, seed=11)
    b = generate_sequence(m, L_MM, seed=11)
    assert np.array_equal(a.boundaries, b.boundaries)
    assert not np.array_equal(a.boundaries, generate_sequence(m, L_MM, seed=12).boundaries)


def test_mixed_kind_keeps_period_starts():
    seq = generate_sequence(ErrorModel(DOMAIN, 0.5, 0.4, ErrorKind.MIXED), L_MM, seed=1)
    starts = seq.boundaries[0::2]
    assert np.allclose(starts, np.arange(starts.size) * 2 * DOMAIN, atol=1e-9)


def test_clamping_counts_and_warns():
    with pytest.warns(RuntimeWarning, match="clamped"):
        seq = generate_sequence(ErrorModel(1.0, 0.5, 2.0), 1.0, seed=0)
    assert seq.n_clamped > 0
    assert np.all(seq.lengths >= 1e-3 - 1e-12)


def test_crystal_shorter_than_period():
    with pytest.raises(ValueError):
        generate_sequence(ErrorModel(DOMAIN), 0.001)


def test_normalization_anchor(ideal):
    r = response_spectrum(ideal, [G, 2 * G, 3 * G])
    assert r[0] == pytest.approx(1.0, rel=1e-9)
    assert r[1] < 1e-6
    assert r[2] == pytest.approx(1 / 9, rel=1e-9)


def test_odd_orders_match_closed_form(ideal):
    m = np.arange(1, 46, 2)
    r = response_spectrum(ideal, m * G)
    assert np.max(np.abs(r / order_weight(m, 0.5) - 1)) < 1e-6


def test_zero_mismatch_limit():
    seq = generate_sequence(ErrorModel(DOMAIN, 0.3, kind=ErrorKind.DUTY_OFFSET), L_MM)
    mean_pol = 0.3 - 0.7
    assert response_spectrum(seq, [0.0])[0] == pytest.approx(mean_pol**2 / NORM, rel=1e-9)
    near = response_spectrum(seq, [1e-7])[0]
    assert near == pytest.approx(mean_pol**2 / NORM, rel=1e-3)


def test_non_finite_grid_rejected(ideal):
    with pytest.raises(ValueError):
        response_spectrum(ideal, [0.1, float("inf")])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.0, 3.0))
def test_response_bounded(seed, sigma):
    seq = generate_sequence(ErrorModel(DOMAIN, 0.5, sigma), 2.0, seed=seed, warn=False)
    r = response_spectrum(seq, np.linspace(0, 2, 301))
    assert np.all(r * NORM <= 1 + 1e-12)


def test_fast_path_matches_direct():
    seq = generate_sequence(ErrorModel(DOMAIN, 0.5, 0.3), L_MM, seed=5)
    dk = np.linspace(0.0, 2.0, 2001)
    direct = response_spectrum(seq, dk)
    fast = response_spectrum(seq, dk, fast=True)
    assert np.max(np.abs(fast - direct)) <= 1e-9 * np.max(direct)


@pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")
def test_backends_agree():
    seq = generate_sequence(ErrorModel(DOMAIN, 0.5, 0.3), L_MM, seed=9)
    dk = np.linspace(0.01, 1.5, 311)
    a = response_spectrum(seq, dk, backend="compiled")
    b = response_spectrum(seq, dk, backend="python")
    assert np.allclose(a, b, rtol=1e-9, atol=1e-15)
    assert np.allclose(
        response_spectrum(seq, dk, backend="compiled", fast=True), response_spectrum(seq, dk, backend="python", fast=True), rtol=1e-9, atol=1e-15
    )


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get("gpu")


def test_zero_sigma_pedestal_is_ideal():
    dk = np.linspace(0.05, 1.0, 50)
    res = pedestal_estimate(ErrorModel(DOMAIN), L_MM, 4, dk)
    assert np.all(res.std == 0)
    assert np.array_equal(res.mean, res.ideal)
    assert np.all(res.excess == 0)


def test_pedestal_needs_two_trials():
    with pytest.raises(ValueError):
        pedestal_estimate(ErrorModel(DOMAIN, 0.5, 0.1), L_MM, 1, [0.1])


def test_pedestal_deterministic_across_workers():
    m = ErrorModel(DOMAIN, 0.5, 0.2)
    dk = np.linspace(0.05, 1.0, 40)
    a = pedestal_estimate(m, L_MM, 24, dk, seed=42, workers=1)
    b = pedestal_estimate(m, L_MM, 24, dk, seed=42, workers=6)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)


def test_pedestal_mean_stable_under_doubling():
    m = ErrorModel(DOMAIN, 0.5, 0.3)
    dk = np.linspace(0.6, 0.7, 21)
    a = pedestal_estimate(m, L_MM, 200, dk, seed=1)
    b = pedestal_estimate(m, L_MM, 400, dk, seed=2)
    se = np.hypot(a.stderr(), b.stderr())
    assert np.mean(np.abs(a.mean - b.mean) / se) < 2.0


def test_pedestal_scales_with_sigma_squared():
    dk = np.linspace(0.55, 0.75, 40)
    sig = np.array([0.1, 0.2, 0.4])
    lvl = [np.mean(pedestal_estimate(ErrorModel(DOMAIN, 0.5, s), L_MM, 200, dk, seed=7).excess) for s in sig]
    slope = np.polyfit(np.log(sig), np.log(lvl), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_pedestal_clamp_warning_aggregated():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        pedestal_estimate(ErrorModel(1.0, 0.5, 2.0), 0.5, 3, [0.5], seed=0)
    msgs = [str(w.message) for w in rec if issubclass(w.category, RuntimeWarning)]
    assert len(msgs) == 1 and "over 3 trials" in msgs[0]


def test_even_orders_with_duty_offset():
    model = ErrorModel(DOMAIN, 0.49, kind=ErrorKind.DUTY_OFFSET)
    got = even_order_strength(model, [2, 10, 16])
    for m in (2, 10, 16):
        assert got[m] == pytest.approx(float(order_weight(m, 0.49)), rel=0.01)
    assert got[16] / got[10] == pytest.approx(float(order_weight(16, 0.49) / order_weight(10, 0.49)), rel=0.01)
    assert order_weight(2, 0.49) == pytest.approx(abs(2 / (2 * math.pi) * math.sin(2 * math.pi * 0.49)) ** 2 / NORM)


def test_even_orders_vanish_for_ideal_grating():
    got = even_order_strength(ErrorModel(DOMAIN), range(2, 31, 2))
    assert max(got.values()) < 1e-20


def test_random_jitter_enables_even_orders():
    got = even_order_strength(ErrorModel(DOMAIN, 0.5, 0.3), [2, 4], trials=20)
    assert all(v > 1e-8 for v in got.values())
