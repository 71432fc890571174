"""Heterodyne beatnote model: pair states + LO -> RF means and noise.

The LO line amplitudes define the measurement weights and its phases the
measured quadrature of each line (see :class:`edcs.gaussian.QuadratureSelector`).
Detection imperfections enter as an effective loss ``QE * visibility**2``
on both modes, plus an additive electrical noise floor in variance units.
Noise is quoted relative to the standard quantum limit, so the classical
baseline always has ``noise_var = 1 + electrical``.

The complex beatnote amplitude combines the two lines of a pair: line +n
beats at +n * delta_f and line -n at -n * delta_f, so the negative-index
contribution enters conjugated when folded onto the positive RF axis.
This is the aliasing the two-shot and I/Q protocols resolve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .combs import CombConfig, minimum_variance_phases
from .gaussian import PairState, QuadratureSelector, apply_loss, quadrature_variance

__all__ = [
    "DetectionImperfections",
    "BeatnoteRecord",
    "detection_efficiency",
    "beatnote_model",
    "snr_amplitude",
    "resolve_aliasing_two_shot",
    "resolve_aliasing_iq",
    "adaptive_lo_weights",
    "signal_normalized_noise",
    "records_to_csv",
    "IDEAL_DETECTION",
]


@dataclass(frozen=True)
class DetectionImperfections:
    """Detector model: quantum efficiency, fringe visibility, electrical floor.

    ``electrical_noise_db_below_vacuum`` is the electrical noise level in
    dB below the vacuum (shot-noise) level; ``None`` means no electrical
    noise.
    """

    quantum_efficiency: float = 1.0
    fringe_visibility: float = 1.0
    electrical_noise_db_below_vacuum: float | None = None

    def __post_init__(self):
        if not (0.0 < self.quantum_efficiency <= 1.0):
            raise ValueError(
                f"quantum efficiency must lie in (0, 1], got {self.quantum_efficiency}"
            )
        if not (0.0 < self.fringe_visibility <= 1.0):
            raise ValueError(
                f"fringe visibility must lie in (0, 1], got {self.fringe_visibility}"
            )

    @property
    def electrical_variance(self) -> float:
        """Electrical noise floor in SQL variance units."""
        if self.electrical_noise_db_below_vacuum is None:
            return 0.0
        return 10.0 ** (-float(self.electrical_noise_db_below_vacuum) / 10.0)


IDEAL_DETECTION = DetectionImperfections()


def detection_efficiency(imp: DetectionImperfections) -> float:
    """Effective detection transmittance: QE times visibility squared."""
    return imp.quantum_efficiency * imp.fringe_visibility**2


@dataclass(frozen=True)
class BeatnoteRecord:
    """Per-RF-tone observables: complex mean amplitude and noise variance (SQL = 1)."""

    index: int
    rf_freq: float
    mean_amp: complex
    noise_var: float
    eta_n: float
    eta_neg: float

    def __post_init__(self):
        if int(self.index) < 1:
            raise ValueError(f"beatnote index must be >= 1, got {self.index}")
        if not self.noise_var > 0:
            raise ValueError(f"noise variance must be > 0, got {self.noise_var}")
        object.__setattr__(self, "index", int(self.index))
        object.__setattr__(self, "mean_amp", complex(self.mean_amp))


def beatnote_model(
    pair: PairState,
    lo: CombConfig,
    eta_n: float,
    eta_neg: float,
    imp: DetectionImperfections,
    delta_f: float,
) -> BeatnoteRecord:
    """Beatnote mean and noise for one pair after sample and detection loss.

    Applies the per-line sample transmittances, then the effective
    detection loss on both modes, and measures the LO-weighted joint
    quadrature (weights proportional to the LO line amplitudes, phases
    equal to the LO line phases).  The electrical floor is added to the
    variance.  The RF tone sits at ``pair_index * delta_f``.
    """
    n = pair.pair_index
    w = (lo.amplitude(n), lo.amplitude(-n))  # raises if the LO lacks the lines
    if w[0] == 0.0 and w[1] == 0.0:
        raise ValueError(f"LO lines +-{n} both have zero amplitude")
    theta = (lo.phase(n), lo.phase(-n))
    state = apply_loss(pair, eta_n, eta_neg)
    eta_det = detection_efficiency(imp)
    state = apply_loss(state, eta_det, eta_det)
    sel = QuadratureSelector(w, theta)
    _, var = quadrature_variance(state, sel)
    norm = np.hypot(*w)
    m = state.mean
    c_pos = w[0] / norm * np.exp(-1j * theta[0]) * (m[0] + 1j * m[1])
    c_neg = w[1] / norm * np.exp(-1j * theta[1]) * (m[2] + 1j * m[3])
    mean_amp = c_pos + np.conj(c_neg)
    return BeatnoteRecord(
        index=n,
        rf_freq=n * float(delta_f),
        mean_amp=complex(mean_amp),
        noise_var=float(var + imp.electrical_variance),
        eta_n=float(eta_n),
        eta_neg=float(eta_neg),
    )


def records_to_csv(records: list[BeatnoteRecord], path, comment: str | None = None) -> None:
    """Beatnote-record table in the documented CSV layout."""
    from .ioutil import fnum, write_csv

    write_csv(
        path,
        ["index", "rf_freq_hz", "mean_re", "mean_im", "noise_var", "eta_n", "eta_neg"],
        [
            (
                r.index,
                fnum(r.rf_freq),
                fnum(r.mean_amp.real),
                fnum(r.mean_amp.imag),
                fnum(r.noise_var),
                fnum(r.eta_n),
                fnum(r.eta_neg),
            )
            for r in sorted(records, key=lambda r: (r.index, r.rf_freq))
        ],
        comment=comment,
    )


def snr_amplitude(rec: BeatnoteRecord, n_averages: int) -> float:
    """Amplitude SNR after ``n_averages`` incoherently averaged measurements."""
    m = int(n_averages)
    if m < 1:
        raise ValueError(f"n_averages must be >= 1, got {n_averages}")
    if not rec.noise_var > 0:
        raise ValueError("record has non-positive noise variance")
    return float(abs(rec.mean_amp) / np.sqrt(rec.noise_var / m))


def resolve_aliasing_two_shot(
    shot_plus: BeatnoteRecord, shot_minus: BeatnoteRecord
) -> tuple[complex, complex]:
    """Separate the +n / -n line amplitudes from a sign-flipped shot pair.

    The two shots are prepared with +alpha and -alpha displacements on the
    positive-index lines, so the sum isolates the negative-index amplitude
    and the difference the positive-index one.  Each recovered amplitude
    has the same variance as a dedicated single-line measurement of equal
    total duration (no SNR penalty).
    """
    if shot_plus.index != shot_minus.index:
        raise ValueError(
            f"shot indices differ: {shot_plus.index} vs {shot_minus.index}"
        )
    # estimated floors fluctuate; only guard against mismatched configurations
    if not np.isclose(shot_plus.noise_var, shot_minus.noise_var, rtol=0.5, atol=0):
        raise ValueError(
            "shots must share noise statistics "
            f"({shot_plus.noise_var:.3g} vs {shot_minus.noise_var:.3g})"
        )
    alpha_neg = (shot_plus.mean_amp + shot_minus.mean_amp) / 2.0
    alpha_n = (shot_plus.mean_amp - shot_minus.mean_amp) / 2.0
    return alpha_n, alpha_neg


def resolve_aliasing_iq(
    time_series, fs: float, n: int, delta_f: float
) -> tuple[float, float]:
    """I/Q demodulation at ``n * delta_f``: cos amplitude, sin amplitude.

    Under the quadrature-separated preparation the positive-index line
    drives the in-phase (cos) component and the negative-index line the
    quadrature (sin) component, so the two demodulated amplitudes read the
    two lines independently.  The window should hold an integer number of
    beat periods; otherwise a warning reports the spectral-leakage bound.
    """
    x = np.asarray(time_series, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("time series must be a 1-d sequence")
    f = int(n) * float(delta_f)
    if int(n) < 1 or f <= 0 or f >= fs / 2:
        raise ValueError(f"beat frequency {f} Hz outside (0, fs/2)")
    periods = f * len(x) / fs
    frac = abs(periods - round(periods))
    if frac > 1e-9:
        # worst-case leakage of a unit tone into the wrong quadrature
        leak = 1.0 / (np.pi * max(periods, 1.0))
        warnings.warn(
            f"window holds a non-integer number of beat periods "
            f"(fractional part {frac:.3g}); cross-talk bounded by ~{leak:.2e} "
            "of the tone amplitude",
            stacklevel=2,
        )
    t = np.arange(len(x)) / fs
    in_phase = 2.0 / len(x) * float(x @ np.cos(2 * np.pi * f * t))
    quadrature = 2.0 / len(x) * float(x @ np.sin(2 * np.pi * f * t))
    return in_phase, quadrature


def signal_normalized_noise(
    sel: QuadratureSelector,
    pair: PairState,
    eta_n: float,
    eta_neg: float,
    imp: DetectionImperfections,
) -> float:
    """Noise variance per unit per-line signal power for a given selector.

    The per-line signal power of a selector with weights w is
    ``sum_i eta_i^tot w_i^2 / ||w||^2`` for unit displacements along the
    measured quadratures, where ``eta^tot`` includes detection loss.
    Lower is better; balanced aligned selectors are the baseline.
    """
    eta_det = detection_efficiency(imp)
    state = apply_loss(apply_loss(pair, eta_n, eta_neg), eta_det, eta_det)
    _, var = quadrature_variance(state, sel)
    w = np.asarray(sel.weights)
    frac = w**2 / np.sum(w**2)
    gain = eta_det * (eta_n * frac[0] + eta_neg * frac[1])
    if gain == 0.0:
        return np.inf
    return float((var + imp.electrical_variance) / gain)


def adaptive_lo_weights(
    pair: PairState,
    eta_n: float,
    eta_neg: float,
    imp: DetectionImperfections,
) -> QuadratureSelector:
    """LO weights and phases minimising the signal-normalised noise.

    Mimics the transmission imbalance of the pair: under asymmetric loss
    the optimum shifts LO weight toward the better-transmitted line.  The
    result is never worse than the balanced aligned selector and reduces
    to it exactly when the two transmittances are equal; with one line
    fully blocked, all weight moves to the surviving line.
    """
    eta_det = detection_efficiency(imp)
    state = apply_loss(apply_loss(pair, eta_n, eta_neg), eta_det, eta_det)
    el = imp.electrical_variance
    etas = np.array([eta_n, eta_neg]) * eta_det

    cov = state.cov

    def neg_objective(params):
        psi, t1, t2 = params
        c, s = np.cos(psi), np.sin(psi)
        v = np.array([c * np.cos(t1), c * np.sin(t1), s * np.cos(t2), s * np.sin(t2)])
        var = v @ cov @ v
        gain = etas[0] * c**2 + etas[1] * s**2
        return -(gain / (var + el))

    # coarse torus/simplex grid, then a local polish
    psis = np.linspace(0.0, np.pi / 2, 25)
    ts = np.linspace(0.0, 2 * np.pi, 40, endpoint=False)
    best, best_val = None, np.inf
    c2 = cov
    cos_t, sin_t = np.cos(ts), np.sin(ts)
    a1 = c2[0, 0] * cos_t**2 + c2[1, 1] * sin_t**2 + 2 * c2[0, 1] * sin_t * cos_t
    a2 = c2[2, 2] * cos_t**2 + c2[3, 3] * sin_t**2 + 2 * c2[2, 3] * sin_t * cos_t
    u1 = np.stack([cos_t, sin_t], axis=1)
    cross = u1 @ c2[:2, 2:] @ u1.T
    for psi in psis:
        c, s = np.cos(psi), np.sin(psi)
        var = (
            c**2 * a1[:, None] + s**2 * a2[None, :] + 2 * c * s * cross
        )
        val = -(etas[0] * c**2 + etas[1] * s**2) / (var + el)
        k = np.unravel_index(np.argmin(val), val.shape)
        if val[k] < best_val:
            best_val = val[k]
            best = np.array([psi, ts[k[0]], ts[k[1]]])
    res = minimize(
        neg_objective,
        best,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000},
    )
    psi, t1, t2 = res.x
    candidate = QuadratureSelector(
        (abs(np.cos(psi)), abs(np.sin(psi))),
        (float(np.mod(t1, 2 * np.pi)), float(np.mod(t2, 2 * np.pi))),
    )
    # balanced aligned selector is the reference; keep it on ties
    tb1, tb2, _ = minimum_variance_phases(state)
    balanced = QuadratureSelector((1.0, 1.0), (tb1, tb2))
    if signal_normalized_noise(
        balanced, pair, eta_n, eta_neg, imp
    ) <= signal_normalized_noise(candidate, pair, eta_n, eta_neg, imp) + 1e-12:
        return balanced
    return candidate
