"""Headline metrics: SNR advantage, integration-time speedup, quality factor,
absorption-robustness curves and the flat-top attenuation-ratio sweep.

Aggregation over comb lines is the root-mean-square of per-line amplitude
SNRs, isolated in :func:`aggregate_snr` so the choice lives in exactly
one place.  Advantages are reported in two labelled dB conventions: the
mean-noise-power ratio (``10 log10``) and the aggregate amplitude-SNR
ratio (``20 log10``); the two coincide when signal means match exactly.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detection import (
    BeatnoteRecord,
    DetectionImperfections,
    adaptive_lo_weights,
    signal_normalized_noise,
    snr_amplitude,
)
from .combs import minimum_variance_phases
from .dsp import (
    Spectrum,
    estimates_from_records,
    estimate_transmittance,
    extract_beatnotes,
    segment_and_fft,
    synthesize,
)
from .errors import NumericError
from .gaussian import (
    PairState,
    QuadratureSelector,
    apply_loss,
    mixed_tmsv_from_measured,
    quadrature_variance,
    tmsv_state,
)

__all__ = [
    "aggregate_snr",
    "snr_advantage",
    "quality_factor",
    "SpeedupResult",
    "precision_vs_averages",
    "UarSweepResult",
    "uar_sweep",
    "absorption_robustness",
]


def aggregate_snr(per_line_snrs) -> float:
    """Root-mean-square aggregate of per-line amplitude SNRs."""
    arr = np.asarray(per_line_snrs, dtype=float)
    if arr.size == 0:
        raise ValueError("no per-line SNRs to aggregate")
    return float(np.sqrt(np.mean(arr**2)))


def snr_advantage(
    edcs_records: list[BeatnoteRecord],
    dcs_records: list[BeatnoteRecord],
    n_averages: int = 1,
) -> dict:
    """Per-line and aggregate advantage of the entangled arm over the classical one.

    Requires matched line sets and signal means.  Returns per-line values
    in both conventions plus the two aggregates.
    """
    e = sorted(edcs_records, key=lambda r: r.index)
    d = sorted(dcs_records, key=lambda r: r.index)
    if [r.index for r in e] != [r.index for r in d]:
        raise ValueError("record line sets differ")
    for re_, rd in zip(e, d):
        scale = max(abs(re_.mean_amp), abs(rd.mean_amp), 1.0)
        if abs(re_.mean_amp - rd.mean_amp) > 1e-6 * scale:
            raise ValueError(
                f"signal means differ at line {re_.index}: "
                f"{re_.mean_amp} vs {rd.mean_amp}"
            )
    per_line_power = [10.0 * np.log10(rd.noise_var / re_.noise_var) for re_, rd in zip(e, d)]
    snrs_e = [snr_amplitude(r, n_averages) for r in e]
    snrs_d = [snr_amplitude(r, n_averages) for r in d]
    per_line_amp = [20.0 * np.log10(se / sd) for se, sd in zip(snrs_e, snrs_d)]
    return {
        "indices": [r.index for r in e],
        "per_line_power_db": per_line_power,
        "per_line_amplitude_db": per_line_amp,
        "aggregate_power_db": float(
            10.0
            * np.log10(np.mean([r.noise_var for r in d]) / np.mean([r.noise_var for r in e]))
        ),
        "aggregate_amplitude_db": float(
            20.0 * np.log10(aggregate_snr(snrs_e) / aggregate_snr(snrs_d))
        ),
    }


def quality_factor(snr_amp: float, n_pairs: int, tau: float) -> float:
    """Figure of merit: amplitude SNR times total line count over sqrt(integration time)."""
    if snr_amp <= 0 or int(n_pairs) < 1:
        raise ValueError("SNR and pair count must be positive")
    if not tau > 0:
        raise ValueError(f"integration time must be > 0, got {tau}")
    return float(snr_amp * (2 * int(n_pairs)) / np.sqrt(tau))


# -- precision vs averages (speedup) ----------------------------------------


@dataclass(frozen=True)
class SpeedupResult:
    """Precision-vs-averages curves and the integration-time speedup."""

    target_precision: float
    m_dcs: float
    m_edcs: float
    speedup: float
    speedup_interp: float
    speedup_analytic: float
    m_list: tuple[int, ...]
    precision_edcs: tuple[float, ...]
    precision_dcs: tuple[float, ...]
    n_seeds: int

    def to_dict(self) -> dict:
        return {
            "target_precision": self.target_precision,
            "m_dcs": self.m_dcs,
            "m_edcs": self.m_edcs,
            "speedup": self.speedup,
            "speedup_interp": self.speedup_interp,
            "speedup_analytic": self.speedup_analytic,
            "m_list": list(self.m_list),
            "precision_edcs": list(self.precision_edcs),
            "precision_dcs": list(self.precision_dcs),
            "n_seeds": self.n_seeds,
        }


def _speedup_one_seed(args) -> tuple[np.ndarray, np.ndarray]:
    """Per-seed transmittance estimates for both arms at every averaging depth.

    The two arms share the seed so their noise realisations are common
    random numbers, which cancels most Monte Carlo noise in the speedup
    ratio without biasing either precision curve.
    """
    (records_e, records_d, fs, rbw, delta_f, m_list, imp, seed) = args
    m_max = max(m_list)
    duration = m_max / rbw
    out = []
    for records in (records_e, records_d):
        ifg = synthesize(records, fs, duration, imp, seed=seed)
        spectra = segment_and_fft(ifg, rbw)
        power = np.stack([s.power for s in spectra])
        cum = np.cumsum(power, axis=0)
        ref = estimates_from_records(records)
        etas_by_m = []
        for m in m_list:
            spec = Spectrum(rbw, spectra[0].freqs, cum[m - 1] / m, m, spectra[0].window)
            ests = extract_beatnotes(spec, delta_f, len(records))
            etas = [t.eta for t in estimate_transmittance(ests, ref)]
            etas_by_m.append(etas)
        out.append(np.array(etas_by_m))  # (n_m, n_lines)
    return out[0], out[1]


def precision_vs_averages(
    records_edcs: list[BeatnoteRecord],
    records_dcs: list[BeatnoteRecord],
    *,
    fs: float,
    rbw: float,
    delta_f: float,
    m_list: list[int],
    seeds: list[int],
    imp: DetectionImperfections | None = None,
    target_precision: float | None = None,
    n_workers: int = 1,
) -> SpeedupResult:
    """Transmittance precision vs averaged interferogram count, both arms.

    Runs the full synthesize -> segment -> extract -> estimate pipeline per
    seed, takes the per-line standard deviation across seeds and
    aggregates lines in quadrature.  The record length is the largest
    requested averaging count times the segment duration.

    The target precision defaults to the classical curve at the largest M;
    the speedup is the ratio of the M values at which the two curves reach
    it, interpolated through the fitted 1/sqrt(M) averaging law (the raw
    piecewise log-log interpolation is reported as ``speedup_interp``).
    The analytic prediction (mean noise-variance ratio) is reported
    alongside for the consistency check.
    """
    m_list = sorted(int(m) for m in m_list)
    if m_list[0] < 1:
        raise ValueError("averaging counts must be >= 1")
    if len(seeds) < 10:
        raise ValueError("need at least 10 seeds per point")
    jobs = [
        (records_edcs, records_dcs, fs, rbw, delta_f, tuple(m_list), imp, int(s))
        for s in seeds
    ]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_speedup_one_seed, jobs))
    else:
        results = [_speedup_one_seed(j) for j in jobs]
    eta_e = np.stack([r[0] for r in results])  # (n_seeds, n_m, n_lines)
    eta_d = np.stack([r[1] for r in results])

    prec_e = np.sqrt(np.mean(np.var(eta_e, axis=0, ddof=1), axis=1))
    prec_d = np.sqrt(np.mean(np.var(eta_d, axis=0, ddof=1), axis=1))

    if target_precision is None:
        target_precision = float(prec_d[-1])

    logm = np.log10(np.array(m_list, dtype=float))

    def fitted_m_at(prec: np.ndarray) -> float:
        # precision follows the averaging law prec = sqrt(beta / M); fit the
        # intercept with the slope pinned at -1/2
        intercept = float(np.mean(np.log10(prec) + 0.5 * logm))
        return 10.0 ** (2.0 * (intercept - np.log10(target_precision)))

    def interp_m_at(prec: np.ndarray) -> float:
        # piecewise-linear in log-log, monotonised for robustness
        order = np.argsort(logm)
        lp = np.log10(prec)[order]
        return 10.0 ** float(np.interp(np.log10(target_precision), lp[::-1], logm[order][::-1]))

    m_d, m_e = fitted_m_at(prec_d), fitted_m_at(prec_e)
    if m_e > 10.0 * max(m_list) or m_d > 10.0 * max(m_list):
        raise NumericError(
            f"target precision {target_precision:.3g} unreachable within "
            f"max averaging count {max(m_list)} (would need M ~ {max(m_e, m_d):.3g})"
        )
    var_ratio = float(
        np.mean([r.noise_var for r in records_dcs])
        / np.mean([r.noise_var for r in records_edcs])
    )
    return SpeedupResult(
        target_precision=float(target_precision),
        m_dcs=float(m_d),
        m_edcs=float(m_e),
        speedup=float(m_d / m_e),
        speedup_interp=float(interp_m_at(prec_d) / interp_m_at(prec_e)),
        speedup_analytic=var_ratio,
        m_list=tuple(m_list),
        precision_edcs=tuple(float(v) for v in prec_e),
        precision_dcs=tuple(float(v) for v in prec_d),
        n_seeds=len(seeds),
    )


# -- robustness analyses -----------------------------------------------------


def _pair_prototype(squeeze_db: float, antisqueeze_db: float, index: int = 1) -> PairState:
    r, eta = mixed_tmsv_from_measured(squeeze_db, antisqueeze_db)
    state = tmsv_state(r, index)
    return apply_loss(state, eta, eta)


def _per_line_snrs(
    pair: PairState,
    eta_n: float,
    eta_neg: float,
    imp: DetectionImperfections,
    sel: QuadratureSelector,
    displacement: float,
    squeezed: bool,
) -> tuple[float, float]:
    """Amplitude SNRs of the two lines of one pair under a given selector.

    Unit-displacement signals ride the measured quadrature of each line;
    line i contributes amplitude sqrt(2) d sqrt(eta_i_total) w_i / ||w||
    against the shared beatnote noise.
    """
    from .detection import detection_efficiency

    eta_det = detection_efficiency(imp)
    if squeezed:
        state = apply_loss(apply_loss(pair, eta_n, eta_neg), eta_det, eta_det)
        _, var = quadrature_variance(state, sel)
    else:
        var = 1.0
    var = var + imp.electrical_variance
    w = np.asarray(sel.weights, dtype=float)
    frac = w / np.hypot(*w)
    amp_n = np.sqrt(2.0) * displacement * np.sqrt(eta_n * eta_det) * frac[0]
    amp_neg = np.sqrt(2.0) * displacement * np.sqrt(eta_neg * eta_det) * frac[1]
    return float(amp_n / np.sqrt(var)), float(amp_neg / np.sqrt(var))


def _aligned_balanced_selector(
    pair: PairState, eta_n: float, eta_neg: float, imp: DetectionImperfections
) -> QuadratureSelector:
    from .detection import detection_efficiency

    eta_det = detection_efficiency(imp)
    state = apply_loss(apply_loss(pair, eta_n, eta_neg), eta_det, eta_det)
    t1, t2, _ = minimum_variance_phases(state)
    return QuadratureSelector((1.0, 1.0), (t1, t2))


@dataclass(frozen=True)
class UarSweepResult:
    """Advantage grid over (unattenuated-to-attenuated ratio, depth)."""

    uar_values: tuple[float, ...]
    depth_values_db: tuple[float, ...]
    n_pairs: int
    snr_edcs_balanced: np.ndarray   # shape (n_uar, n_depth)
    snr_edcs_adaptive: np.ndarray
    snr_dcs: np.ndarray
    advantage_balanced_db: np.ndarray
    advantage_adaptive_db: np.ndarray

    def rows(self):
        for i, u in enumerate(self.uar_values):
            for j, d in enumerate(self.depth_values_db):
                yield (
                    u,
                    d,
                    self.snr_edcs_balanced[i, j],
                    self.snr_edcs_adaptive[i, j],
                    self.snr_dcs[i, j],
                    self.advantage_balanced_db[i, j],
                    self.advantage_adaptive_db[i, j],
                )


def _sweep_point(
    proto: PairState,
    n_pairs: int,
    n_attenuated: int,
    depth_db: float,
    imp: DetectionImperfections,
    displacement: float,
) -> tuple[float, float, float]:
    """Aggregate SNRs (EDCS balanced, EDCS adaptive, DCS) at one grid point.

    The attenuated lines form a contiguous block at the low-frequency edge
    of the comb (negative-index lines first, pairs N, N-1, ...), mimicking
    an absorption band inside the span; for n_attenuated <= N each
    affected pair loses exactly one line.
    """
    t = 10.0 ** (-depth_db / 10.0)
    snrs_bal: list[float] = []
    snrs_ada: list[float] = []
    snrs_dcs: list[float] = []
    # number of pairs whose negative line is attenuated, then positive lines;
    # pairs are identical, so evaluate each distinct pattern once
    n_single = min(n_attenuated, n_pairs)
    n_double = max(n_attenuated - n_pairs, 0)
    patterns = [
        ((t, t), n_double),
        ((1.0, t), n_single - n_double),
        ((1.0, 1.0), n_pairs - n_single),
    ]
    for (eta_n, eta_neg), count in patterns:
        if count <= 0:
            continue
        bal = _aligned_balanced_selector(proto, eta_n, eta_neg, imp)
        bal_snr = _per_line_snrs(proto, eta_n, eta_neg, imp, bal, displacement, True)
        ada = adaptive_lo_weights(proto, eta_n, eta_neg, imp)
        ada_snr = _per_line_snrs(proto, eta_n, eta_neg, imp, ada, displacement, True)
        # the adaptive configuration never does worse than balanced
        if np.sum(np.square(ada_snr)) < np.sum(np.square(bal_snr)):
            ada_snr = bal_snr
        dcs_snr = _per_line_snrs(proto, eta_n, eta_neg, imp, bal, displacement, False)
        snrs_bal.extend(bal_snr * count)
        snrs_ada.extend(ada_snr * count)
        snrs_dcs.extend(dcs_snr * count)
    return aggregate_snr(snrs_bal), aggregate_snr(snrs_ada), aggregate_snr(snrs_dcs)


def uar_sweep(
    *,
    squeeze_db: float = 10.0,
    antisqueeze_db: float = 15.0,
    uar_values,
    depth_values_db,
    n_pairs: int = 50,
    imp: DetectionImperfections | None = None,
    displacement: float = 1.0,
) -> UarSweepResult:
    """Advantage of a flat-top entangled comb vs the attenuation pattern.

    For each (UAR, depth) grid point a ``1 / (UAR + 1)`` fraction of the
    comb lines is attenuated by the depth; aggregate SNRs are evaluated
    for the entangled comb with a balanced flat-top LO, with the adaptive
    LO, and for the classical baseline (balanced LO).  As UAR grows the
    attenuated count reaches zero and both advantages converge to the
    lossless flat-top value.
    """
    imp = imp or DetectionImperfections()
    uar_values = [float(u) for u in uar_values]
    depth_values_db = [float(d) for d in depth_values_db]
    if any(u < 0 for u in uar_values) or any(d < 0 for d in depth_values_db):
        raise ValueError("UAR values and depths must be >= 0")
    proto = _pair_prototype(squeeze_db, antisqueeze_db)
    shape = (len(uar_values), len(depth_values_db))
    snr_bal = np.zeros(shape)
    snr_ada = np.zeros(shape)
    snr_dcs = np.zeros(shape)
    for i, uar in enumerate(uar_values):
        n_att = int(round(2 * n_pairs / (uar + 1.0)))
        for j, depth in enumerate(depth_values_db):
            b, a, d = _sweep_point(proto, n_pairs, n_att, depth, imp, displacement)
            snr_bal[i, j], snr_ada[i, j], snr_dcs[i, j] = b, a, d
    return UarSweepResult(
        uar_values=tuple(uar_values),
        depth_values_db=tuple(depth_values_db),
        n_pairs=n_pairs,
        snr_edcs_balanced=snr_bal,
        snr_edcs_adaptive=snr_ada,
        snr_dcs=snr_dcs,
        advantage_balanced_db=20.0 * np.log10(snr_bal / snr_dcs),
        advantage_adaptive_db=20.0 * np.log10(snr_ada / snr_dcs),
    )


def absorption_robustness(
    depths_db,
    *,
    squeeze_db,
    antisqueeze_db,
    imp: DetectionImperfections | None = None,
    uar: float = 10.0,
    displacement: float = 1.0,
) -> list[dict]:
    """Aggregate SNRs vs absorption depth at a fixed attenuation ratio.

    ``squeeze_db`` / ``antisqueeze_db`` are per-pair arrays (the measured
    profile); a ``1 / (UAR + 1)`` fraction of lines is attenuated at each
    depth.  The classical arm's noise stays at the shot-noise level at
    every depth by construction.
    """
    imp = imp or DetectionImperfections()
    s = np.atleast_1d(np.asarray(squeeze_db, dtype=float))
    a = np.atleast_1d(np.asarray(antisqueeze_db, dtype=float))
    n_pairs = len(s)
    n_att = int(round(2 * n_pairs / (float(uar) + 1.0)))
    rows = []
    for depth in depths_db:
        t = 10.0 ** (-float(depth) / 10.0)
        snrs_e: list[float] = []
        snrs_d: list[float] = []
        n_single = min(n_att, n_pairs)
        n_double = max(n_att - n_pairs, 0)
        for k in range(n_pairs):
            proto = _pair_prototype(s[k], a[k], k + 1)
            if k < n_double:
                eta_n, eta_neg = t, t
            elif k < n_single:
                eta_n, eta_neg = 1.0, t
            else:
                eta_n, eta_neg = 1.0, 1.0
            bal = _aligned_balanced_selector(proto, eta_n, eta_neg, imp)
            snrs_e.extend(
                _per_line_snrs(proto, eta_n, eta_neg, imp, bal, displacement, True)
            )
            snrs_d.extend(
                _per_line_snrs(proto, eta_n, eta_neg, imp, bal, displacement, False)
            )
        agg_e, agg_d = aggregate_snr(snrs_e), aggregate_snr(snrs_d)
        rows.append(
            {
                "depth_db": float(depth),
                "snr_edcs": agg_e,
                "snr_dcs": agg_d,
                "advantage_db": float(20.0 * np.log10(agg_e / agg_d)),
            }
        )
    return rows
