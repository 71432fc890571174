"""Interferogram synthesis and spectral analysis.

Synthesis is done in the frequency domain: deterministic beat tones plus
a Gaussian noise floor whose per-bin variance equals each beatnote's
``noise_var`` inside a kernel around its RF frequency and the shot-noise
level (1, plus the electrical floor) elsewhere.  This gives exact control
of the quantity the analysis chain measures.

Spectra are one-sided periodograms normalised so white noise of unit
variance gives mean bin power 1; a tone of amplitude A then carries bin
power ``A^2 L / 4`` for a rectangular window of length L.  Beat
frequencies are expected to be bin-aligned (integer number of beat
periods per segment); off-grid tones are rejected at extraction time.

The default window is rectangular, which keeps tones leakage-free on the
bin grid; a Hann option exists for general inspection.

Binary interferogram format (little endian): magic ``EDCSIFG1`` (8 bytes),
u32 version, f64 sample rate, f64 duration, i64 seed, u64 sample count,
then the samples as f64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .detection import BeatnoteRecord, DetectionImperfections
from .errors import NumericError

__all__ = [
    "Interferogram",
    "Spectrum",
    "PhaseNoiseModel",
    "BeatnoteEstimate",
    "ComplexBeatnote",
    "TransmittanceEstimate",
    "synthesize",
    "segment_and_fft",
    "average_spectra",
    "averaged_periodogram",
    "extract_beatnotes",
    "coherent_beatnote_amplitudes",
    "estimates_from_records",
    "estimate_transmittance",
    "write_interferogram",
    "read_interferogram",
]

MAGIC = b"EDCSIFG1"
VERSION = 1
_HEADER = struct.Struct("<8sIddqQ")

WINDOWS = ("rect", "hann")


def _window(name: str, length: int) -> np.ndarray:
    if name == "rect":
        return np.ones(length)
    if name == "hann":
        return np.hanning(length)
    raise ValueError(f"unknown window {name!r} (choose from {WINDOWS})")


@dataclass(frozen=True)
class Interferogram:
    """Sampled balanced-detector time series plus synthesis metadata."""

    sample_rate: float
    duration: float
    samples: np.ndarray
    seed: int
    config_hash: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float, copy=True)
        n = int(round(self.sample_rate * self.duration))
        if samples.ndim != 1 or len(samples) != n:
            raise ValueError(
                f"sample count {samples.shape} inconsistent with "
                f"sample_rate * duration = {n}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("interferogram samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectrum; bin power 1 = shot-noise level."""

    rbw: float
    freqs: np.ndarray
    power: np.ndarray
    n_averaged: int
    window: str = "rect"

    def __post_init__(self):
        freqs = np.array(self.freqs, dtype=float, copy=True)
        power = np.array(self.power, dtype=float, copy=True)
        if freqs.shape != power.shape or freqs.ndim != 1:
            raise ValueError("freqs and power must be equal-length 1-d arrays")
        df = np.diff(freqs)
        if len(df) and not np.allclose(df, self.rbw, rtol=1e-9, atol=1e-6):
            raise ValueError("spectrum bins must be uniform with spacing rbw")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")
        freqs.flags.writeable = False
        power.flags.writeable = False
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "n_averaged", int(self.n_averaged))

    @property
    def segment_length(self) -> int:
        return 2 * (len(self.freqs) - 1)


@dataclass(frozen=True)
class PhaseNoiseModel:
    """Multiplied synthesizer phase noise, applied as per-segment jitter.

    Per-beatnote jitter is Gaussian with standard deviation
    ``n * sqrt(2 * 10**(level/10) * bandwidth)``: single-sideband level
    ``level_dbc_hz`` integrated over an effective ``bandwidth_hz`` and
    scaled by the harmonic index (multiplied phase noise).  Off by
    default; a deliberately simple, qualitative model.
    """

    level_dbc_hz: float = -75.0
    bandwidth_hz: float = 1.0e4
    segment_s: float = 1.0e-5

    def sigma_for(self, index: int) -> float:
        return index * np.sqrt(2.0 * 10.0 ** (self.level_dbc_hz / 10.0) * self.bandwidth_hz)


def synthesize(
    records: list[BeatnoteRecord],
    fs: float,
    duration: float,
    imp: DetectionImperfections | None = None,
    phase_noise: PhaseNoiseModel | None = None,
    seed: int = 0,
    noise_kernel_hz: float | None = None,
    include_noise: bool = True,
    config_hash: str = "",
) -> Interferogram:
    """Frequency-domain synthesis of the balanced-detector time series.

    Each record contributes a deterministic tone ``Re(m) cos + Im(m) sin``
    at its RF frequency and shapes the noise floor to ``noise_var`` within
    ``noise_kernel_hz`` of the tone.  Elsewhere the floor is the
    shot-noise level plus the electrical floor.

    Parameters
    ----------
    records : list of BeatnoteRecord
        Tones and noise levels to synthesize; beat frequencies must lie
        below Nyquist.
    fs, duration : float
        Sample rate (Hz) and record length (s); their product must be an
        integer sample count.
    imp : DetectionImperfections, optional
        Supplies the electrical floor away from the tones.
    phase_noise : PhaseNoiseModel, optional
        Per-segment multiplied phase jitter; off by default.
    seed : int
        Random source; a fixed seed reproduces the record bit for bit.
    noise_kernel_hz : float, optional
        Half-width of the shaped region around each tone.  Default is
        0.45 times the closest tone spacing, wide enough that the
        floor-estimation bins sit far from the shaping step.
    include_noise : bool
        ``False`` yields the bare tones (exact amplitudes).
    """
    fs = float(fs)
    duration = float(duration)
    if fs <= 0 or duration <= 0:
        raise ValueError("sample rate and duration must be > 0")
    n_samples_f = fs * duration
    n_samples = int(round(n_samples_f))
    if abs(n_samples_f - n_samples) > 1e-6:
        raise ValueError(
            f"sample_rate * duration must be an integer, got {n_samples_f}"
        )
    rfs = np.array([rec.rf_freq for rec in records])
    if np.any(rfs >= fs / 2):
        raise NumericError(
            f"aliasing: beat frequency {rfs.max():.6g} Hz >= Nyquist {fs / 2:.6g} Hz"
        )
    if noise_kernel_hz is None:
        if len(rfs) > 1:
            noise_kernel_hz = 0.45 * float(np.min(np.diff(np.sort(rfs))))
        elif len(rfs) == 1:
            noise_kernel_hz = 0.45 * float(rfs[0])
        else:
            noise_kernel_hz = 0.0

    rng = np.random.default_rng(seed)
    if include_noise:
        floor = 1.0 + (imp.electrical_variance if imp is not None else 0.0)
        freqs = np.fft.rfftfreq(n_samples, 1.0 / fs)
        sigma2 = np.full(len(freqs), floor)
        for rec in records:
            sigma2[np.abs(freqs - rec.rf_freq) <= noise_kernel_hz] = rec.noise_var
        g_re = rng.standard_normal(len(freqs))
        g_im = rng.standard_normal(len(freqs))
        amp = np.sqrt(n_samples * sigma2 / 2.0)
        spectrum = amp * (g_re + 1j * g_im)
        spectrum[0] = g_re[0] * np.sqrt(n_samples * sigma2[0])
        if n_samples % 2 == 0:
            spectrum[-1] = g_re[-1] * np.sqrt(n_samples * sigma2[-1])
        x = np.fft.irfft(spectrum, n=n_samples)
    else:
        x = np.zeros(n_samples)

    ordered = sorted(records, key=lambda r: r.index)
    if phase_noise is None:
        t = np.arange(n_samples) / fs
        for rec in ordered:
            ph = 2 * np.pi * rec.rf_freq * t
            x += rec.mean_amp.real * np.cos(ph) + rec.mean_amp.imag * np.sin(ph)
    else:
        seg_len_f = phase_noise.segment_s * fs
        seg_len = int(round(seg_len_f))
        if abs(seg_len_f - seg_len) > 1e-6 or seg_len < 1 or n_samples % seg_len:
            raise ValueError(
                "phase-noise segment duration must divide the record into "
                "an integer number of samples"
            )
        n_seg = n_samples // seg_len
        t = np.arange(n_samples) / fs
        for rec in ordered:
            jitter = rng.normal(0.0, phase_noise.sigma_for(rec.index), n_seg)
            rotated = rec.mean_amp * np.exp(-1j * np.repeat(jitter, seg_len))
            ph = 2 * np.pi * rec.rf_freq * t
            x += rotated.real * np.cos(ph) + rotated.imag * np.sin(ph)

    return Interferogram(fs, duration, x, seed, config_hash)


def segment_and_fft(ifg: Interferogram, rbw: float, window: str = "rect") -> list[Spectrum]:
    """Non-overlapping segment periodograms at resolution bandwidth ``rbw``.

    The segment length is ``fs / rbw`` and must be an integer, as must the
    segment count; normalisation makes unit-variance white noise average
    to bin power 1 for any window.
    """
    fs = ifg.sample_rate
    seg_len_f = fs / float(rbw)
    seg_len = int(round(seg_len_f))
    if abs(seg_len_f - seg_len) > 1e-6 or seg_len < 2:
        raise ValueError(f"fs / rbw must be an integer segment length, got {seg_len_f}")
    n_seg = len(ifg.samples) // seg_len
    if n_seg < 1:
        raise ValueError(
            f"segment of {seg_len} samples is longer than the record "
            f"({len(ifg.samples)} samples)"
        )
    if len(ifg.samples) % seg_len:
        raise ValueError("rbw must divide the record into whole segments")
    w = _window(window, seg_len)
    wnorm = float(np.sum(w**2))
    segments = ifg.samples[: n_seg * seg_len].reshape(n_seg, seg_len) * w
    power = np.abs(np.fft.rfft(segments, axis=1)) ** 2 / wnorm
    freqs = np.fft.rfftfreq(seg_len, 1.0 / fs)
    return [
        Spectrum(float(rbw), freqs, power[i], 1, window) for i in range(n_seg)
    ]


def average_spectra(spectra: list[Spectrum]) -> Spectrum:
    """Bin-wise power average; noise floors scale as 1/sqrt(M)."""
    if not spectra:
        raise ValueError("no spectra to average")
    first = spectra[0]
    total = np.zeros_like(first.power)
    n = 0
    for spec in spectra:
        if (
            spec.window != first.window
            or spec.rbw != first.rbw
            or not np.array_equal(spec.freqs, first.freqs)
        ):
            raise ValueError("spectra must share bin grid, rbw and window")
        total += spec.n_averaged * spec.power
        n += spec.n_averaged
    return Spectrum(first.rbw, first.freqs, total / n, n, first.window)


def averaged_periodogram(
    ifg: Interferogram,
    rbw: float,
    window: str = "rect",
    segment_limit: int | None = None,
    chunk: int = 256,
) -> Spectrum:
    """Memory-lean equivalent of averaging all ``segment_and_fft`` output."""
    fs = ifg.sample_rate
    seg_len_f = fs / float(rbw)
    seg_len = int(round(seg_len_f))
    if abs(seg_len_f - seg_len) > 1e-6 or seg_len < 2:
        raise ValueError(f"fs / rbw must be an integer segment length, got {seg_len_f}")
    n_seg = len(ifg.samples) // seg_len
    if segment_limit is not None:
        n_seg = min(n_seg, int(segment_limit))
    if n_seg < 1:
        raise ValueError("record too short for one segment")
    w = _window(window, seg_len)
    wnorm = float(np.sum(w**2))
    freqs = np.fft.rfftfreq(seg_len, 1.0 / fs)
    acc = np.zeros(len(freqs))
    done = 0
    while done < n_seg:
        m = min(chunk, n_seg - done)
        block = ifg.samples[done * seg_len : (done + m) * seg_len].reshape(m, seg_len)
        acc += np.sum(np.abs(np.fft.rfft(block * w, axis=1)) ** 2, axis=0) / wnorm
        done += m
    return Spectrum(float(rbw), freqs, acc / n_seg, n_seg, window)


@dataclass(frozen=True)
class BeatnoteEstimate:
    """Amplitude and local noise floor extracted around one beat bin."""

    index: int
    rf_freq: float
    amplitude: float
    noise_floor: float
    amplitude_var: float = 0.0


def extract_beatnotes(
    spec: Spectrum,
    delta_f: float,
    n_max: int,
    n_exclude: int = 2,
    n_neighbors: int = 8,
) -> list[BeatnoteEstimate]:
    """Tone amplitudes and local floors at ``n * delta_f`` for n = 1..n_max.

    The local floor is the median of ``n_neighbors`` bins on each side,
    skipping ``n_exclude`` signal-adjacent bins; the floor is subtracted
    from the signal-bin power before converting to amplitude.  Beat
    frequencies must be bin-aligned.
    """
    rbw = spec.rbw
    seg_len = spec.segment_length
    w = _window(spec.window, seg_len)
    wsum, wnorm = float(np.sum(w)), float(np.sum(w**2))
    out = []
    for n in range(1, int(n_max) + 1):
        f = n * float(delta_f)
        b_float = f / rbw
        b = int(round(b_float))
        if abs(b_float - b) > 1e-6:
            raise NumericError(
                f"beat frequency {f:.6g} Hz is off the bin grid (rbw {rbw:.6g} Hz); "
                "use segments holding an integer number of beat periods"
            )
        lo_idx = b - n_exclude - n_neighbors
        hi_idx = b + n_exclude + n_neighbors
        if lo_idx < 0 or hi_idx >= len(spec.power):
            raise ValueError(
                f"beat bin {b} too close to the spectrum edge for "
                f"{n_neighbors} neighbour bins"
            )
        neighbors = np.concatenate(
            [
                spec.power[lo_idx : b - n_exclude],
                spec.power[b + n_exclude + 1 : hi_idx + 1],
            ]
        )
        floor = float(np.median(neighbors))
        tone_power = max(float(spec.power[b]) - floor, 0.0)
        amplitude = 2.0 * np.sqrt(tone_power * wnorm) / wsum
        amp_var = 2.0 * (wnorm / wsum**2) * floor / max(spec.n_averaged, 1)
        out.append(BeatnoteEstimate(n, f, float(amplitude), floor, float(amp_var)))
    return out


def estimates_from_records(records: list[BeatnoteRecord]) -> list[BeatnoteEstimate]:
    """Noise-free reference amplitudes taken directly from beatnote records."""
    return [
        BeatnoteEstimate(r.index, r.rf_freq, abs(r.mean_amp), r.noise_var, 0.0)
        for r in sorted(records, key=lambda r: r.index)
    ]


@dataclass(frozen=True)
class ComplexBeatnote:
    """Coherently averaged complex beatnote amplitude with its local floor."""

    index: int
    rf_freq: float
    mean_amp: complex
    noise_floor: float
    amplitude_var: float


def coherent_beatnote_amplitudes(
    ifg: Interferogram,
    rbw: float,
    delta_f: float,
    n_max: int,
    window: str = "rect",
    n_exclude: int = 2,
    n_neighbors: int = 8,
) -> list[ComplexBeatnote]:
    """Complex beatnote amplitudes by coherent averaging over segments.

    Because segments hold integer numbers of beat periods the tone phase
    repeats segment to segment, so complex bin values average coherently;
    the recovered amplitude keeps the sign/phase information the two-shot
    aliasing protocol needs.  ``amplitude_var`` is the per-quadrature
    variance of the recovered amplitude.
    """
    fs = ifg.sample_rate
    seg_len_f = fs / float(rbw)
    seg_len = int(round(seg_len_f))
    if abs(seg_len_f - seg_len) > 1e-6 or seg_len < 2:
        raise ValueError(f"fs / rbw must be an integer segment length, got {seg_len_f}")
    n_seg = len(ifg.samples) // seg_len
    if n_seg < 1 or len(ifg.samples) % seg_len:
        raise ValueError("rbw must divide the record into whole segments")
    w = _window(window, seg_len)
    wsum, wnorm = float(np.sum(w)), float(np.sum(w**2))
    segments = ifg.samples.reshape(n_seg, seg_len) * w
    bins = np.fft.rfft(segments, axis=1)
    mean_bins = bins.mean(axis=0)
    power = np.mean(np.abs(bins) ** 2, axis=0) / wnorm
    out = []
    for n in range(1, int(n_max) + 1):
        f = n * float(delta_f)
        b_float = f / rbw
        b = int(round(b_float))
        if abs(b_float - b) > 1e-6:
            raise NumericError(
                f"beat frequency {f:.6g} Hz is off the bin grid (rbw {rbw:.6g} Hz); "
                "use segments holding an integer number of beat periods"
            )
        neighbors = np.concatenate(
            [
                power[b - n_exclude - n_neighbors : b - n_exclude],
                power[b + n_exclude + 1 : b + n_exclude + n_neighbors + 1],
            ]
        )
        floor = float(np.median(neighbors))
        # a tone a*cos + b*sin has rfft bin (sum w / 2)(a - i b)
        mean_amp = 2.0 * np.conj(mean_bins[b]) / wsum
        amp_var = 2.0 * (wnorm / wsum**2) * floor / n_seg
        out.append(ComplexBeatnote(n, f, complex(mean_amp), floor, float(amp_var)))
    return out


@dataclass(frozen=True)
class TransmittanceEstimate:
    index: int
    rf_freq: float
    eta: float
    sigma: float


def estimate_transmittance(
    sample: list[BeatnoteEstimate], reference: list[BeatnoteEstimate]
) -> list[TransmittanceEstimate]:
    """Per-line power transmittance (A_sample / A_reference)^2 with uncertainty."""
    ref_by_index = {r.index: r for r in reference}
    out = []
    for s in sample:
        if s.index not in ref_by_index:
            raise ValueError(f"no reference amplitude for beatnote {s.index}")
        r = ref_by_index[s.index]
        if r.amplitude == 0.0:
            raise ValueError(f"reference amplitude for beatnote {s.index} is zero")
        eta = (s.amplitude / r.amplitude) ** 2
        rel = np.sqrt(
            4.0 * s.amplitude_var / max(s.amplitude, 1e-300) ** 2
            + 4.0 * r.amplitude_var / r.amplitude**2
        )
        out.append(TransmittanceEstimate(s.index, s.rf_freq, float(eta), float(eta * rel)))
    return out


def write_interferogram(path, ifg: Interferogram) -> None:
    """Persist in the documented little-endian binary format."""
    header = _HEADER.pack(
        MAGIC, VERSION, ifg.sample_rate, ifg.duration, ifg.seed, len(ifg.samples)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ifg.samples.astype("<f8").tobytes())


def read_interferogram(path) -> Interferogram:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated interferogram header")
        magic, version, fs, duration, seed, count = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        body = fh.read(8 * count)
        if len(body) != 8 * count:
            raise ValueError(f"{path}: truncated sample body")
        samples = np.frombuffer(body, dtype="<f8")
    return Interferogram(fs, duration, samples, seed)
