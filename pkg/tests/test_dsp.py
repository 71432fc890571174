"""Interferogram synthesis and spectral-analysis tests."""

import numpy as np
import pytest

from edcs.detection import BeatnoteRecord
from edcs.dsp import (
    Interferogram,
    PhaseNoiseModel,
    Spectrum,
    average_spectra,
    averaged_periodogram,
    coherent_beatnote_amplitudes,
    estimate_transmittance,
    estimates_from_records,
    extract_beatnotes,
    read_interferogram,
    segment_and_fft,
    synthesize,
    write_interferogram,
)
from edcs.errors import NumericError

FS = 100e6
DF = 4e6


def rec(n, mean, var=1.0):
    return BeatnoteRecord(n, n * DF, mean, var, 1.0, 1.0)


def test_empty_noiseless_synthesis_is_zero():
    ifg = synthesize([], FS, 1e-4, include_noise=False)
    assert np.all(ifg.samples == 0.0)


def test_single_tone_recovered_exactly():
    ifg = synthesize([rec(1, 1.0)], FS, 1e-3, include_noise=False, seed=0)
    spec = average_spectra(segment_and_fft(ifg, 1e5))
    est = extract_beatnotes(spec, DF, 1)
    assert abs(est[0].amplitude - 1.0) < 1e-9


def test_aliasing_rejected():
    with pytest.raises(NumericError, match="aliasing"):
        synthesize([rec(13, 1.0)], FS, 1e-3)   # 52 MHz > 50 MHz Nyquist


def test_synthesis_deterministic_per_seed():
    records = [rec(n, 0.5, 0.8) for n in range(1, 4)]
    a = synthesize(records, FS, 1e-3, seed=5)
    b = synthesize(records, FS, 1e-3, seed=5)
    c = synthesize(records, FS, 1e-3, seed=6)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_file_round_trip_and_header(tmp_path):
    records = [rec(1, 1.0, 0.5)]
    ifg = synthesize(records, FS, 1e-3, seed=9)
    path = tmp_path / "trace.bin"
    write_interferogram(path, ifg)
    assert path.stat().st_size == 44 + 8 * len(ifg.samples)
    back = read_interferogram(path)
    assert back.sample_rate == ifg.sample_rate
    assert back.duration == ifg.duration
    assert back.seed == ifg.seed
    assert np.array_equal(back.samples, ifg.samples)


def test_file_write_is_byte_deterministic(tmp_path):
    records = [rec(1, 1.0, 0.5)]
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    write_interferogram(p1, synthesize(records, FS, 1e-3, seed=4))
    write_interferogram(p2, synthesize(records, FS, 1e-3, seed=4))
    assert p1.read_bytes() == p2.read_bytes()


def test_segment_counts_match_duration_over_rbw():
    # segment count = duration * rbw, independent of the sample rate
    ifg = Interferogram(1e6, 0.5, np.zeros(500_000), 0)
    assert len(segment_and_fft(ifg, 1e5)) == 50_000
    assert len(segment_and_fft(ifg, 1e4)) == 5_000
    assert len(segment_and_fft(ifg, 100.0)) == 50


def test_segment_longer_than_record_rejected():
    ifg = Interferogram(1e6, 1e-3, np.zeros(1000), 0)
    with pytest.raises(ValueError):
        segment_and_fft(ifg, 100.0)


def test_white_noise_normalisation():
    rng = np.random.default_rng(8)
    ifg = Interferogram(1e6, 0.2, rng.standard_normal(200_000), 8)
    for window in ("rect", "hann"):
        spec = averaged_periodogram(ifg, 1e3, window)
        assert abs(spec.power.mean() - 1.0) < 0.02


def test_parseval_consistency_rect():
    # mean bin power equals the time-domain variance (rectangular window)
    records = [rec(1, 1.2, 0.7), rec(2, 0.5, 1.0)]
    ifg = synthesize(records, FS, 2e-3, seed=3)
    spec = averaged_periodogram(ifg, 1e4)
    assert abs(spec.power.mean() / ifg.samples.var() - 1.0) < 0.02


def test_averaging_identity_and_law():
    records = [rec(1, 0.0, 1.0)]
    ifg = synthesize(records, FS, 1e-2, seed=12)
    spectra = segment_and_fft(ifg, 1e4)
    one = average_spectra([spectra[0]])
    assert np.array_equal(one.power, spectra[0].power)
    # noise-floor spread shrinks as 1/sqrt(M)
    noise_bins = slice(10, 350)
    std1 = np.std(average_spectra(spectra[:1]).power[noise_bins])
    std100 = np.std(average_spectra(spectra[:100]).power[noise_bins])
    assert abs(std100 / std1 - 0.1) < 0.02


def test_average_requires_matching_grids():
    s1 = Spectrum(1e3, np.arange(0, 5e3, 1e3), np.ones(5), 1)
    s2 = Spectrum(2e3, np.arange(0, 10e3, 2e3), np.ones(5), 1)
    with pytest.raises(ValueError):
        average_spectra([s1, s2])


def test_averaged_periodogram_equals_explicit_average():
    records = [rec(1, 1.0, 0.5)]
    ifg = synthesize(records, FS, 1e-3, seed=2)
    explicit = average_spectra(segment_and_fft(ifg, 1e5))
    fused = averaged_periodogram(ifg, 1e5, chunk=3)
    assert np.allclose(explicit.power, fused.power, rtol=1e-12)
    assert explicit.n_averaged == fused.n_averaged


def test_extracted_floors_track_noise_variance():
    # EDCS vs classical synthesis with the same means: extracted local
    # floors statistically consistent with the configured noise variances
    # (3 sigma on the seed-averaged floor), i.e. floors lower by the
    # configured squeezing
    squeeze_db = [2.1, 2.45, 2.8]
    recs_e = [rec(n + 1, 3.0, 10 ** (-squeeze_db[n] / 10)) for n in range(3)]
    recs_c = [rec(n + 1, 3.0, 1.0) for n in range(3)]
    floors_e, floors_c = [], []
    for seed in range(25):
        ifg_e = synthesize(recs_e, FS, 5e-3, seed=seed)
        ifg_c = synthesize(recs_c, FS, 5e-3, seed=seed)
        ee = extract_beatnotes(averaged_periodogram(ifg_e, 1e5), DF, 3)
        ec = extract_beatnotes(averaged_periodogram(ifg_c, 1e5), DF, 3)
        floors_e.append([b.noise_floor for b in ee])
        floors_c.append([b.noise_floor for b in ec])
    floors_e, floors_c = np.array(floors_e), np.array(floors_c)
    for k, s_db in enumerate(squeeze_db):
        for floors, target in ((floors_e[:, k], 10 ** (-s_db / 10)),
                               (floors_c[:, k], 1.0)):
            se = floors.std(ddof=1) / np.sqrt(len(floors))
            assert abs(floors.mean() - target) <= 3.0 * se + 0.01 * target
        adv = 10 * np.log10(floors_c[:, k].mean() / floors_e[:, k].mean())
        assert abs(adv - s_db) < 0.3


def test_absent_signal_consistent_with_floor():
    # no tone planted: the "amplitude" at the bin is floor-level noise
    records = [rec(1, 0.0, 1.0)]
    amps = []
    floors = []
    for seed in range(40):
        ifg = synthesize(records, FS, 1e-3, seed=100 + seed)
        est = extract_beatnotes(averaged_periodogram(ifg, 1e5), DF, 1)[0]
        amps.append(est.amplitude**2 * est.rf_freq**0)   # recovered tone power
        floors.append(est.noise_floor)
    seg_len = int(FS / 1e5)
    # tone power estimate ~ floor * 4 / L on average, far below any real tone
    assert np.mean(amps) < 10.0 * np.mean(floors) * 4.0 / seg_len


def test_extraction_rejects_off_grid_beats():
    ifg = synthesize([rec(1, 1.0)], FS, 1e-3, seed=0)
    spec = averaged_periodogram(ifg, 1e5)
    with pytest.raises(NumericError, match="integer number of beat periods"):
        extract_beatnotes(spec, DF * 1.00001, 1)


def test_phase_noise_broadens_tone():
    base = [rec(5, 2.0, 1e-12)]
    clean = synthesize(base, FS, 1e-2, include_noise=False, seed=1)
    noisy = synthesize(
        base, FS, 1e-2, include_noise=False, seed=1,
        phase_noise=PhaseNoiseModel(level_dbc_hz=-45.0, segment_s=1e-5),
    )
    amp_clean = extract_beatnotes(averaged_periodogram(clean, 1e5), DF, 5)[-1]
    amp_noisy = extract_beatnotes(averaged_periodogram(noisy, 1e5), DF, 5)[-1]
    assert amp_noisy.amplitude < amp_clean.amplitude
    assert amp_noisy.noise_floor > amp_clean.noise_floor


def test_coherent_amplitudes_keep_phase():
    records = [rec(1, 0.75 - 0.3j, 1e-12)]
    ifg = synthesize(records, FS, 1e-3, include_noise=False, seed=0)
    cb = coherent_beatnote_amplitudes(ifg, 1e5, DF, 1)[0]
    assert abs(cb.mean_amp - (0.75 - 0.3j)) < 1e-9


def test_transmittance_estimates():
    ref = estimates_from_records([rec(1, 2.0, 1.0)])
    same = estimate_transmittance(ref, ref)
    assert same[0].eta == 1.0
    # synthetic 3 dB attenuated line
    sample = estimates_from_records([rec(1, 2.0 * np.sqrt(10 ** (-0.3)), 1.0)])
    est = estimate_transmittance(sample, ref)
    assert abs(est[0].eta - 10 ** (-0.3)) < 1e-12
    with pytest.raises(ValueError):
        estimate_transmittance(sample, estimates_from_records([rec(2, 1.0, 1.0)]))


def test_transmittance_sigma_tracks_floor():
    # propagated uncertainty should cover the spread of repeated estimates
    truth = 10 ** (-0.3)
    recs_s = [rec(1, 3.0 * np.sqrt(truth), 1.0)]
    recs_r = [rec(1, 3.0, 1.0)]
    ref = estimates_from_records(recs_r)
    etas, sigmas = [], []
    for seed in range(60):
        ifg = synthesize(recs_s, FS, 2e-3, seed=300 + seed)
        ests = extract_beatnotes(averaged_periodogram(ifg, 1e5), DF, 1)
        t = estimate_transmittance(ests, ref)[0]
        etas.append(t.eta)
        sigmas.append(t.sigma)
    spread = np.std(etas)
    assert abs(np.mean(etas) - truth) < 4.0 * spread / np.sqrt(60)
    assert 0.5 < np.mean(sigmas) / spread < 2.0
