import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from mfduffing.errors import ShortWindow
from mfduffing.model import Cosine, ExpEnvelope, SampledPeriodic, SquareWave, SystemParams
from mfduffing.moments import susceptibility
from mfduffing.response import (
    HarmonicSeries,
    amplification_gain,
    harmonic_decompose,
    jump_mask,
    order_parameter_response,
    relative_rms,
    write_response_csv,
)
from mfduffing.stationary import static_susceptibility

SQUARE_POINT = SystemParams(mu=0.6, D=0.5)
PULSE_POINT = SystemParams(mu=0.6, D=0.45)


def test_square_wave_coefficients():
    s = harmonic_decompose(SquareWave(0.03, 0.2), 9)
    assert s.a0 == 0 and not np.any(s.a)
    k = np.arange(1, 10)
    expect = np.where(k % 2 == 1, 4 * 0.03 / (math.pi * k), 0.0)
    np.testing.assert_allclose(s.b, expect, rtol=1e-15)


def test_cosine_coefficients():
    s = harmonic_decompose(Cosine(0.04, 0.3), 5)
    assert s.a[0] == 0.04
    assert s.a0 == 0 and not np.any(s.a[1:]) and not np.any(s.b)
    assert s.tail_rms == 0.0


def test_envelope_coefficients_against_quadrature():
    sig = ExpEnvelope(0.03, 0.2, 2 * math.pi / (0.04 * math.pi))
    assert sig.T0 == pytest.approx(50.0)
    s = harmonic_decompose(sig, 6)
    T = sig.T0
    a0 = 2 / T * quad(lambda t: 0.03 * math.exp(-0.2 * t), 0, T)[0]
    assert s.a0 == pytest.approx(a0, abs=1e-8)
    for k in range(1, 7):
        w = k * sig.Omega
        ak = 2 / T * quad(lambda t: 0.03 * math.exp(-0.2 * t) * math.cos(w * t), 0, T, limit=200)[0]
        bk = 2 / T * quad(lambda t: 0.03 * math.exp(-0.2 * t) * math.sin(w * t), 0, T, limit=200)[0]
        assert s.a[k - 1] == pytest.approx(ak, abs=1e-8)
        assert s.b[k - 1] == pytest.approx(bk, abs=1e-8)


def test_sampled_coefficients_of_interpolant():
    y = (0.0, 0.02, 0.05, 0.01, -0.03, -0.02)
    sig = SampledPeriodic(y, 6.0)
    s = harmonic_decompose(sig, 8)
    knots = np.arange(7.0)
    for k in (1, 2, 5, 8):
        w = k * sig.Omega
        ak = bk = 0.0
        for j in range(6):
            ak += quad(lambda t: sig(t) * math.cos(w * t), knots[j], knots[j + 1])[0]
            bk += quad(lambda t: sig(t) * math.sin(w * t), knots[j], knots[j + 1])[0]
        assert s.a[k - 1] == pytest.approx(2 / 6 * ak, abs=1e-12)
        assert s.b[k - 1] == pytest.approx(2 / 6 * bk, abs=1e-12)
    assert s.a0 == pytest.approx(2 * np.mean(y), abs=1e-15)


def test_sampled_cosine_has_sinc_squared_gain():
    n = 16
    y = tuple(0.03 * np.cos(2 * np.pi * np.arange(n) / n))
    s = harmonic_decompose(SampledPeriodic(y, 10.0), 3)
    assert s.a[0] == pytest.approx(0.03 * np.sinc(1 / n) ** 2, rel=1e-12)


def _masked_error(sig, kmax):
    s = harmonic_decompose(sig, kmax)
    t = np.linspace(0, sig.period, 40000, endpoint=False)
    keep = jump_mask(t, sig, sig.period / (2 * kmax))
    return np.sqrt(np.mean((s(t[keep]) - sig(t[keep])) ** 2)), s.tail_rms, keep.mean()


@pytest.mark.parametrize("kmax", [5, 20])
def test_square_reconstruction_bound(kmax):
    err, _, _ = _masked_error(SquareWave(0.03, 0.5), kmax)
    assert err <= 4 * 0.03 / (math.pi * kmax)


@pytest.mark.parametrize("kmax", [5, 20, 50, 200])
def test_square_reconstruction_parseval(kmax):
    # the masked mean square cannot exceed the whole-period tail energy
    err, tail, kept = _masked_error(SquareWave(0.03, 0.5), kmax)
    assert err <= tail / math.sqrt(kept)
    assert err < 0.03 / math.sqrt(kmax)


def test_tail_rms_is_parseval_remainder():
    sig = SquareWave(0.03, 0.5)
    s = harmonic_decompose(sig, 21)
    odd = np.arange(23, 200001, 2)
    tail = math.sqrt(np.sum((4 * 0.03 / (math.pi * odd)) ** 2) / 2)
    assert s.tail_rms == pytest.approx(tail, rel=1e-3)


def test_zero_series_gives_constant():
    s = HarmonicSeries(0.2, 0.0, np.zeros(4), np.zeros(4))
    r = order_parameter_response(SQUARE_POINT, 0.0, s, np.linspace(0, 30, 7))
    assert np.all(r.X == 0.0)
    p = SystemParams(mu=0.2, D=0.05)
    r = order_parameter_response(p, 0.9545, s, [0.0, 1.0])
    assert np.all(r.X == 0.9545)


def test_dc_only_shift():
    s = HarmonicSeries(0.2, 0.02, np.zeros(3), np.zeros(3))
    r = order_parameter_response(SQUARE_POINT, 0.0, s, [0.0, 5.0])
    np.testing.assert_allclose(r.X, 0.01 * static_susceptibility(SQUARE_POINT, 0.0), rtol=1e-14)


def test_single_cosine_matches_chi():
    s = harmonic_decompose(Cosine(0.02, 0.3), 3)
    t = np.linspace(0, 40, 81)
    r = order_parameter_response(SQUARE_POINT, 0.0, s, t)
    chi = susceptibility(SQUARE_POINT, 0.0, 0.3).value
    np.testing.assert_allclose(r.X, 0.02 * (chi * np.exp(0.3j * t)).real, atol=1e-15)


coef = st.lists(st.floats(-0.02, 0.02), min_size=4, max_size=4)


@given(coef, coef, coef, coef, st.floats(-0.02, 0.02), st.floats(-0.02, 0.02))
def test_superposition_is_linear(a1, b1, a2, b2, c1, c2):
    s1 = HarmonicSeries(0.15, c1, np.array(a1), np.array(b1))
    s2 = HarmonicSeries(0.15, c2, np.array(a2), np.array(b2))
    t = np.linspace(0, 50, 26)
    r1, r2, r12 = (order_parameter_response(SQUARE_POINT, 0.0, s, t) for s in (s1, s2, s1 + s2))
    # exact up to rounding and the negligible harmonics each call chose to skip
    slack = r1.dropped_bound + r2.dropped_bound + r12.dropped_bound + 1e-12
    assert np.abs(r12.X - (r1.X + r2.X)).max() <= slack


def test_dropped_harmonics_are_bounded():
    # a huge k range makes the far harmonics negligible
    s = HarmonicSeries(0.5, 0.0, np.r_[0.03, np.zeros(199)], np.r_[np.zeros(199), 1e-14])
    r = order_parameter_response(SQUARE_POINT, 0.0, s, [0.0])
    assert 0 < r.dropped_bound < 1e-12


def test_identity_gain():
    sig = SquareWave(0.03, 0.2)
    s = harmonic_decompose(sig, 50)
    t = np.arange(0, 2 * sig.period, 0.01)
    g = amplification_gain(s, t, s(t))
    assert g.fundamental == pytest.approx(1.0, abs=1e-3)
    assert g.peak_to_peak == pytest.approx(1.0)


def test_short_window():
    s = harmonic_decompose(Cosine(0.03, 0.2), 1)
    t = np.arange(0, 10, 0.1)
    with pytest.raises(ShortWindow):
        amplification_gain(s, t, np.cos(0.2 * t))


@pytest.mark.parametrize("params, signal", [
    (SQUARE_POINT, SquareWave(0.03, 0.01 * math.pi)),
    (PULSE_POINT, ExpEnvelope(0.03, 0.2, 50.0)),
])
def test_drive_signals_amplified(params, signal):
    s = harmonic_decompose(signal)
    t = np.arange(0, signal.period, 0.1)
    r = order_parameter_response(params, 0.0, s, t)
    assert amplification_gain(s, t, r.X).fundamental > 2


def test_relative_rms_and_mask():
    ref = np.sin(np.linspace(0, 2 * np.pi, 100, endpoint=False))
    assert relative_rms(ref, ref) == 0.0
    assert relative_rms(ref, 1.1 * ref) == pytest.approx(0.1)
    m = jump_mask(np.array([0.0, 1.0, 5.0, 9.99]), ExpEnvelope(0.03, 0.2, 10.0), 0.5)
    assert m.tolist() == [False, True, True, False]
    assert jump_mask(np.array([0.0, 1.0]), Cosine(0.1, 1.0), 0.5).all()


def test_trajectory_csv():
    buf = io.StringIO()
    write_response_csv([0.0, 0.1], [0.03, 0.03], [0.1, 0.123456789012345], buf, "manifest: m.json")
    lines = buf.getvalue().splitlines()
    assert lines[:2] == ["# manifest: m.json", "t,input,response"]
    assert lines[3] == "0.1,0.03,0.123456789012"


def test_series_validation():
    with pytest.raises(ValueError):
        harmonic_decompose(Cosine(0.03, 0.2), 0)
    with pytest.raises(ValueError):
        HarmonicSeries(0.1, 0.0, np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        HarmonicSeries(0.1, 0.0, np.zeros(2), np.zeros(2)) + HarmonicSeries(0.2, 0.0, np.zeros(2), np.zeros(2))
