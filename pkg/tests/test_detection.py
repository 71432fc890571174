"""Heterodyne detection model tests."""

import numpy as np
import pytest

from edcs.combs import CombConfig, minimum_variance_phases
from edcs.detection import (
    IDEAL_DETECTION,
    BeatnoteRecord,
    DetectionImperfections,
    adaptive_lo_weights,
    beatnote_model,
    detection_efficiency,
    resolve_aliasing_iq,
    resolve_aliasing_two_shot,
    signal_normalized_noise,
    snr_amplitude,
)
from edcs.gaussian import (
    QuadratureSelector,
    apply_loss,
    displace,
    mixed_tmsv_from_measured,
    quadrature_variance,
    tmsv_state,
    vacuum_pair,
)

DF = 4.0e6


def aligned_lo(n_pairs=1, phase=np.pi / 2):
    return CombConfig.flat("lo", 193.4e12, 17.565e9, 0.0, n_pairs,
                           amplitude=1.0, phase=phase)


def test_classical_baseline_noise():
    imp = DetectionImperfections(1.0, 1.0, 18.0)
    rec = beatnote_model(vacuum_pair(), aligned_lo(), 1.0, 1.0, imp, DF)
    assert abs(rec.noise_var - (1.0 + 10 ** (-1.8))) < 1e-12
    assert rec.mean_amp == 0.0
    assert rec.rf_freq == DF


def test_classical_noise_independent_of_lo_power():
    imp = DetectionImperfections(0.88, 0.97, 18.0)
    for amp in (0.1, 1.0, 250.0):
        lo = aligned_lo()
        lo = CombConfig.flat("lo", lo.center_freq, lo.line_spacing, 0.0, 1, amplitude=amp)
        rec = beatnote_model(vacuum_pair(), lo, 1.0, 1.0, imp, DF)
        assert abs(rec.noise_var - (1.0 + 10 ** (-1.8))) < 1e-12


def test_pure_tmsv_perfect_detection():
    r = 0.5
    rec = beatnote_model(tmsv_state(r), aligned_lo(), 1.0, 1.0, IDEAL_DETECTION, DF)
    assert abs(rec.noise_var - np.exp(-2 * r)) < 1e-12


def test_detection_loss_composition_matches_single_loss():
    # sample loss then detection loss == one combined loss channel
    r, eta = mixed_tmsv_from_measured(2.5, 11.0)
    pair = apply_loss(tmsv_state(r), eta, eta)
    imp = DetectionImperfections(0.88, 0.97, None)
    rec = beatnote_model(pair, aligned_lo(), 0.9, 0.8, imp, DF)
    eta_det = detection_efficiency(imp)
    combined = apply_loss(pair, 0.9 * eta_det, 0.8 * eta_det)
    _, var = quadrature_variance(
        combined, QuadratureSelector((1, 1), (np.pi / 2, np.pi / 2))
    )
    assert abs(rec.noise_var - var) < 1e-12


def test_beatnote_against_beam_splitter_monte_carlo():
    # explicit beam-splitter chain: tmsv -> purity loss -> detection loss,
    # sampled mode by mode with independent vacuum inputs
    r, eta = mixed_tmsv_from_measured(2.5, 11.0)
    imp = DetectionImperfections(0.88, 0.97, None)
    eta_det = detection_efficiency(imp)
    pair = apply_loss(tmsv_state(r), eta, eta)
    rec = beatnote_model(pair, aligned_lo(), 1.0, 1.0, imp, DF)

    rng = np.random.default_rng(31)
    n = 400_000
    draws = rng.multivariate_normal(np.zeros(4), tmsv_state(r).cov, size=n)
    for trans in (eta, eta_det):
        vac = rng.standard_normal((n, 4))
        draws = np.sqrt(trans) * draws + np.sqrt(1 - trans) * vac
    q = (draws[:, 1] + draws[:, 3]) / np.sqrt(2)
    mc_var = q.var()
    assert abs(mc_var - rec.noise_var) < 5.0 * rec.noise_var * np.sqrt(2.0 / n)


def test_beatnote_mean_amplitude_and_snr():
    # displacement along the aligned (p) quadrature on both lines
    pair = displace(vacuum_pair(), 0.4j, 0.4j)
    rec = beatnote_model(pair, aligned_lo(), 1.0, 1.0, IDEAL_DETECTION, DF)
    assert abs(rec.mean_amp - (2 * 0.4 + 0j)) < 1e-12
    assert abs(snr_amplitude(rec, 1) - 0.8) < 1e-12
    assert abs(snr_amplitude(rec, 100) - 8.0) < 1e-12


def test_snr_conventions():
    e = BeatnoteRecord(1, DF, 1.0, 10 ** (-0.26), 1.0, 1.0)
    d = BeatnoteRecord(1, DF, 1.0, 1.0, 1.0, 1.0)
    ratio_amp = snr_amplitude(e, 1) / snr_amplitude(d, 1)
    assert abs(ratio_amp - 10 ** 0.13) < 1e-12
    assert abs(10 * np.log10(d.noise_var / e.noise_var) - 2.6) < 1e-12


def test_snr_rejects_bad_input():
    rec = BeatnoteRecord(1, DF, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        snr_amplitude(rec, 0)


def test_missing_lo_lines_rejected():
    with pytest.raises(ValueError):
        beatnote_model(tmsv_state(0.2, pair_index=3), aligned_lo(2), 1.0, 1.0,
                       IDEAL_DETECTION, DF)


# -- two-shot aliasing protocol ----------------------------------------------


def make_shot(mean: complex, var=1.0, index=1):
    return BeatnoteRecord(index, index * DF, mean, var, 1.0, 1.0)


def test_two_shot_zero_displacement():
    plus = make_shot(2.0 + 0j)
    minus = make_shot(2.0 + 0j)
    a_n, a_neg = resolve_aliasing_two_shot(plus, minus)
    assert a_n == 0.0
    assert a_neg == 2.0


def test_two_shot_recovers_amplitudes_exactly():
    alpha_n, alpha_neg = 1.0, 2.0
    plus = make_shot(alpha_neg + alpha_n)
    minus = make_shot(alpha_neg - alpha_n)
    a_n, a_neg = resolve_aliasing_two_shot(plus, minus)
    assert abs(a_n - 1.0) < 1e-15
    assert abs(a_neg - 2.0) < 1e-15


def test_two_shot_index_mismatch():
    with pytest.raises(ValueError):
        resolve_aliasing_two_shot(make_shot(1.0, index=1), make_shot(1.0, index=2))


def test_two_shot_no_snr_penalty_monte_carlo():
    # per recovered amplitude, two-shot variance equals a dedicated
    # unaliased measurement of the same total duration (two averaged shots)
    rng = np.random.default_rng(99)
    var = 0.7
    trials = 10_000
    alpha_n, alpha_neg = 1.3, -0.4
    noise = rng.normal(0.0, np.sqrt(var), (trials, 4))
    shot_plus = alpha_neg + alpha_n + noise[:, 0]
    shot_minus = alpha_neg - alpha_n + noise[:, 1]
    rec_n = (shot_plus - shot_minus) / 2.0
    unaliased = alpha_n + (noise[:, 2] + noise[:, 3]) / 2.0
    ratio = rec_n.var() / unaliased.var()
    assert abs(ratio - 1.0) < 0.05


# -- I/Q aliasing protocol ----------------------------------------------------


def tone(fs, n_samples, f, a_cos, a_sin):
    t = np.arange(n_samples) / fs
    return a_cos * np.cos(2 * np.pi * f * t) + a_sin * np.sin(2 * np.pi * f * t)


def test_iq_pure_cos_tone():
    fs, n = 100e6, 100_000
    x = tone(fs, n, 2 * DF, 0.8, 0.0)
    a_i, a_q = resolve_aliasing_iq(x, fs, 2, DF)
    assert abs(a_i - 0.8) < 1e-9
    assert abs(a_q) < 1e-3 * 0.8


def test_iq_pure_sin_tone():
    fs, n = 100e6, 100_000
    x = tone(fs, n, DF, 0.0, -0.5)
    a_i, a_q = resolve_aliasing_iq(x, fs, 1, DF)
    assert abs(a_q + 0.5) < 1e-9
    assert abs(a_i) < 1e-3 * 0.5


def test_iq_mixed_tone_with_noise_within_3_sigma():
    fs = 100e6
    n = 40_000   # 0.4 ms: integer periods of 4 MHz
    a_true, b_true = 0.6, -0.3
    sigma = 1.0
    est_var = 2.0 * sigma**2 / n
    rng = np.random.default_rng(17)
    errs_i, errs_q = [], []
    for _ in range(1000):
        x = tone(fs, n, DF, a_true, b_true) + rng.normal(0, sigma, n)
        a_i, a_q = resolve_aliasing_iq(x, fs, 1, DF)
        errs_i.append(a_i - a_true)
        errs_q.append(a_q - b_true)
    for errs in (errs_i, errs_q):
        v = np.var(errs)
        assert abs(v - est_var) < 3.0 * est_var * np.sqrt(2.0 / 1000)
        assert abs(np.mean(errs)) < 4.0 * np.sqrt(est_var / 1000)


def test_iq_non_integer_window_warns():
    fs, n = 100e6, 99_000   # 0.99 ms window: 4870.8 beat periods
    x = tone(fs, n, 1.23 * DF, 1.0, 0.0)
    with pytest.warns(UserWarning, match="cross-talk"):
        resolve_aliasing_iq(x, fs, 1, 1.23 * DF)


def test_protocols_agree_noiselessly():
    # same planted amplitudes through both protocols
    alpha_n, alpha_neg = 0.9, 0.35
    plus = make_shot(alpha_neg + alpha_n)
    minus = make_shot(alpha_neg - alpha_n)
    ts_n, ts_neg = resolve_aliasing_two_shot(plus, minus)
    fs, n = 100e6, 100_000
    x = tone(fs, n, DF, alpha_n, alpha_neg)
    iq_n, iq_neg = resolve_aliasing_iq(x, fs, 1, DF)
    assert abs(ts_n.real - iq_n) < 1e-9
    assert abs(ts_neg.real - iq_neg) < 1e-9


# -- adaptive LO ---------------------------------------------------------------


def ten_fifteen_pair():
    r, eta = mixed_tmsv_from_measured(10.0, 15.0)
    return apply_loss(tmsv_state(r), eta, eta)


def test_adaptive_symmetric_loss_is_balanced():
    pair = ten_fifteen_pair()
    imp = DetectionImperfections(0.88, 0.97, 18.0)
    sel = adaptive_lo_weights(pair, 0.7, 0.7, imp)
    assert sel.weights == (1.0, 1.0)
    t1, t2, _ = minimum_variance_phases(
        apply_loss(apply_loss(pair, 0.7, 0.7), *(2 * [detection_efficiency(imp)]))
    )
    assert sel.phases == (t1, t2)


def test_adaptive_dead_line_moves_weight():
    pair = ten_fifteen_pair()
    sel = adaptive_lo_weights(pair, 0.0, 1.0, IDEAL_DETECTION)
    w = np.asarray(sel.weights) / np.hypot(*sel.weights)
    assert w[0] < 1e-3
    # with all weight on the surviving line the noise is the single-mode
    # (thermal) variance of that line
    state = apply_loss(pair, 0.0, 1.0)
    var_single = state.cov[2, 2]  # x and p variances equal by symmetry
    _, var = quadrature_variance(state, QuadratureSelector((0.0, 1.0), sel.phases))
    assert abs(var - var_single) < 1e-9


def test_adaptive_strictly_beats_balanced_under_asymmetric_loss():
    pair = ten_fifteen_pair()
    sel = adaptive_lo_weights(pair, 0.5, 1.0, IDEAL_DETECTION)
    state = apply_loss(pair, 0.5, 1.0)
    t1, t2, _ = minimum_variance_phases(state)
    balanced = QuadratureSelector((1.0, 1.0), (t1, t2))
    nn_ad = signal_normalized_noise(sel, pair, 0.5, 1.0, IDEAL_DETECTION)
    nn_bal = signal_normalized_noise(balanced, pair, 0.5, 1.0, IDEAL_DETECTION)
    assert nn_ad < nn_bal - 1e-6

    # two-parameter grid-search oracle (weight split x common phase)
    best = np.inf
    for psi in np.linspace(1e-4, np.pi / 2 - 1e-4, 120):
        for s in np.linspace(0, 2 * np.pi, 240, endpoint=False):
            cand = QuadratureSelector((np.cos(psi), np.sin(psi)), (s / 2, s / 2))
            best = min(best, signal_normalized_noise(cand, pair, 0.5, 1.0, IDEAL_DETECTION))
    assert nn_ad <= best + 1e-6


def test_noise_variance_bounded_by_quadrature_extremes():
    # for any physical parameter set the beatnote noise sits between the
    # effective squeezed variance and max(1, anti-squeezed variance)
    rng = np.random.default_rng(314)
    lo = aligned_lo()
    for _ in range(50):
        s_db = rng.uniform(0.5, 10.0)
        a_db = s_db + rng.uniform(0.0, 8.0)
        r, eta = mixed_tmsv_from_measured(s_db, a_db)
        pair = apply_loss(tmsv_state(r), eta, eta)
        imp = DetectionImperfections(rng.uniform(0.5, 1.0), rng.uniform(0.8, 1.0))
        eta_n, eta_neg = rng.uniform(0.2, 1.0, 2)
        rec = beatnote_model(pair, lo, eta_n, eta_neg, imp, DF)
        state = apply_loss(
            apply_loss(pair, eta_n, eta_neg), *(2 * [detection_efficiency(imp)])
        )
        t1, t2, v_min = minimum_variance_phases(state)
        _, v_max = quadrature_variance(
            state, QuadratureSelector((1, 1), (t1 + np.pi / 2, t2 + np.pi / 2))
        )
        assert rec.noise_var >= v_min - 1e-12
        assert rec.noise_var <= max(1.0, v_max) + 1e-12


def test_records_csv_layout(tmp_path):
    from edcs.detection import records_to_csv

    recs = [BeatnoteRecord(2, 8e6, 1.0 - 0.5j, 0.7, 0.9, 1.0),
            BeatnoteRecord(1, 4e6, 2.0, 1.0, 1.0, 1.0)]
    path = tmp_path / "records.csv"
    records_to_csv(recs, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,rf_freq_hz,mean_re,mean_im,noise_var,eta_n,eta_neg"
    assert lines[1].startswith("1,")   # sorted by index
    assert lines[2].split(",")[3] == "-0.5"


def test_detection_imperfections_validation():
    with pytest.raises(ValueError):
        DetectionImperfections(0.0, 1.0)
    with pytest.raises(ValueError):
        DetectionImperfections(1.0, 1.2)
    assert DetectionImperfections(1.0, 1.0, None).electrical_variance == 0.0
