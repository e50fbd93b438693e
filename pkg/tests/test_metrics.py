import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spcfmcw.metrics import (
    LEDGER_HEADER,
    MetricReport,
    band_power_db,
    beat_spectrum,
    cross_isolation,
    first_null,
    papr,
    profile_psl,
    psl,
    residual_phase_error,
    scenario_hash,
    spreading_factor,
    write_ledger,
)
from spcfmcw.receiver import RangeProfile, ReceiverConfig, range_profile
from spcfmcw.signal import ComplexBaseband, chebyshev_window

FS = 1e6


def tone(f, n=256, fs=FS, amp=1.0):
    return ComplexBaseband(amp * np.exp(2j * np.pi * f * np.arange(n) / fs), fs)


def profile(x, db=100.0):
    return range_profile(x, ReceiverConfig(x.sample_rate, window_sidelobe_db=db), 1e11)


class TestPsl:
    def test_windowed_tone(self):
        assert abs(profile_psl(profile(tone(40 * FS / 256)), 100) + 100) <= 1

    def test_known_values(self):
        mag = np.array([-50.0, -3.0, 0.0, -3.0, -20.0, -60.0])
        prof = RangeProfile(mag, np.arange(6.0), np.arange(6.0), 2)
        assert psl(prof, 1) == -20.0
        assert psl(prof, 0) == -3.0

    def test_exclusion_wraps(self):
        mag = np.array([0.0, -40.0, -30.0, -50.0, -10.0])
        prof = RangeProfile(mag, np.arange(5.0), np.arange(5.0), 0)
        assert psl(prof, 1) == -30.0

    def test_zone_covers_all(self):
        prof = RangeProfile(np.zeros(5), np.arange(5.0), np.arange(5.0), 0)
        with pytest.raises(ValueError):
            psl(prof, 3)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-6, 1e6), st.integers(0, 1000))
    def test_scale_invariant(self, gain, seed):
        rng = np.random.default_rng(seed)
        x = tone(33 * FS / 256).samples + 1e-3 * rng.standard_normal(256)
        a = profile(ComplexBaseband(x, FS))
        b = profile(ComplexBaseband(gain * x, FS))
        assert psl(a, 4) == pytest.approx(psl(b, 4), abs=1e-9)


class TestPapr:
    def test_constant_modulus(self):
        assert papr(tone(1e3)) == pytest.approx(1.0, abs=1e-12)

    def test_hand_example(self):
        x = np.array([2, 1, 1, 1]) * np.exp(1j * np.array([0.1, 2, -1, 3]))
        assert papr(x) == pytest.approx(4 / (7 / 4))

    def test_zero(self):
        with pytest.raises(ValueError):
            papr(np.zeros(4))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.01, 100), min_size=2, max_size=50))
    def test_at_least_one_and_equality(self, mags):
        mags = np.asarray(mags)
        v = papr(mags.astype(complex))
        assert v >= 1 - 1e-12
        if np.ptp(mags) == 0:
            assert v == pytest.approx(1.0)
        else:
            assert v > 1.0


class TestSpreading:
    def test_values(self):
        assert spreading_factor(1) == 0.0
        assert spreading_factor(1024) == pytest.approx(30.10, abs=5e-3)
        assert spreading_factor(512) + spreading_factor(1024) == pytest.approx(57.0, abs=0.25)
        assert spreading_factor(64) == pytest.approx(18.06, abs=5e-3)
        assert spreading_factor(1000) == 10 * np.log10(1000)

    def test_invalid(self):
        with pytest.raises(ValueError):
            spreading_factor(0)


class TestCrossIsolation:
    def test_ghost(self):
        n = 256
        df = FS / n
        x = ComplexBaseband(tone(20 * df, n).samples + tone(90 * df, n).samples, FS)
        ci = cross_isolation(profile(x), 20 * df, 90 * df, 2 * df, 4)
        assert abs(ci.isolation_db) <= 3
        assert np.isnan(ci.residual_db[np.argmin(np.abs(profile(x).frequencies - 20 * df))])

    def test_spread_noise(self):
        n = 1024
        df = FS / n
        rng = np.random.default_rng(0)
        junk = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        x = ComplexBaseband(tone(100 * df, n).samples + junk, FS)
        ci = cross_isolation(profile(x), 100 * df, 300 * df, FS / 2, 4)
        # white residual as strong as the tone sits n / ENBW below its peak
        w = chebyshev_window(n, 100)
        enbw = n * np.sum(w**2) / np.sum(w) ** 2
        assert ci.mean_suppression_db == pytest.approx(10 * np.log10(n / enbw), abs=1)
        assert ci.outside_db == -np.inf or ci.outside_db < ci.inside_db

    def test_victim_missing(self):
        n = 256
        df = FS / n
        with pytest.raises(ValueError, match="victim"):
            cross_isolation(profile(tone(50 * df, n)), 20 * df, 90 * df, 2 * df, 4)


class TestNulls:
    def test_rect_code_null(self):
        # unit chips of 8 samples: sinc nulls every fs/8 around the tone
        n, spc = 1024, 8
        fb = 64 * FS / n
        recs = [ComplexBaseband(np.repeat(np.random.default_rng(s).choice([-1.0, 1.0], n // spc), spc)
                                * tone(fb, n).samples, FS) for s in range(8)]
        spec = beat_spectrum(recs, 4 * spc, 4 * spc * 16)
        assert first_null(spec, fb) == pytest.approx(fb + FS / spc, abs=spec.resolution)

    def test_uncoded_has_no_null(self):
        spec = beat_spectrum(tone(64 * FS / 1024, 1024))
        with pytest.raises(ValueError):
            first_null(spec, 64 * FS / 1024)

    def test_bad_segments(self):
        with pytest.raises(ValueError):
            beat_spectrum(tone(0, 16), 32)
        with pytest.raises(ValueError):
            beat_spectrum(tone(0, 16), 8, 4)
        with pytest.raises(ValueError):
            beat_spectrum([tone(0, 16), tone(0, 8)])
        with pytest.raises(ValueError):
            beat_spectrum([])

    def test_band_power(self):
        spec = beat_spectrum(tone(64 * FS / 1024, 1024))
        assert band_power_db(spec, 0, FS / 2) == pytest.approx(0.0, abs=1e-9)
        assert band_power_db(spec, -FS / 2, 0) < -200


class TestResidualPhase:
    def test_pure_tone_zero(self):
        eps = residual_phase_error(tone(12 * FS / 256), 12 * FS / 256)
        assert np.max(np.abs(eps)) < 1e-12

    def test_known_ramp(self):
        x = tone(10 * FS / 256)
        eps = residual_phase_error(x, 9.9 * FS / 256)
        slope = np.diff(eps).mean()
        assert slope == pytest.approx(2 * np.pi * 0.1 / 256)


class TestLedger:
    def test_row_and_file(self, tmp_path):
        r = MetricReport("psl", -99.61234567891234, "dB", "abc", 3)
        assert r.row() == ("psl", "-99.6123456789", "dB", "abc", "3")
        path = write_ledger([r], tmp_path / "m.csv")
        write_ledger([MetricReport("papr", 1.0, "ratio")], path, append=True)
        rows = list(csv.reader(path.open()))
        assert tuple(rows[0]) == LEDGER_HEADER
        assert rows[2] == ["papr", "1", "ratio", "", ""]

    def test_non_finite(self):
        with pytest.raises(ValueError):
            MetricReport("x", float("nan"), "")

    def test_hash_order_independent(self):
        assert scenario_hash({"a": 1, "b": 2}) == scenario_hash({"b": 2, "a": 1})
        assert len(scenario_hash({})) == 16
