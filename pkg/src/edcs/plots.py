"""Figure rendering for the CLI report paths.

Each command writes its figures next to the delimited output.  Figures
use the Agg backend so runs work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_squeeze_report_figure",
    "save_rf_spectrum_figure",
    "save_transmittance_figure",
    "save_fit_figure",
    "save_precision_figure",
    "save_uar_figure",
]

_DPI = 150


def save_squeeze_report_figure(rows: list[dict], path) -> None:
    """Stem plot of per-pair squeezing and anti-squeezing levels in dB."""
    idx = [r["pair"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.stem(idx, [-r["squeeze_out_db"] for r in rows], linefmt="C0-", markerfmt="C0o",
            basefmt="k-", label="squeezed quadrature")
    ax.stem(idx, [r["antisqueeze_out_db"] for r in rows], linefmt="C3-", markerfmt="C3s",
            basefmt="k-", label="anti-squeezed quadrature")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("pair index")
    ax.set_ylabel("variance relative to vacuum (dB)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_rf_spectrum_figure(spectrum, beatnotes, path) -> None:
    """Averaged RF power spectrum with extracted beatnote markers."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(spectrum.freqs / 1e6, np.maximum(spectrum.power, 1e-12), lw=0.6,
                label=f"RBW {spectrum.rbw:g} Hz, M = {spectrum.n_averaged}")
    if beatnotes:
        ax.plot(
            [b.rf_freq / 1e6 for b in beatnotes],
            [max(b.noise_floor, 1e-12) for b in beatnotes],
            "C3v",
            label="local noise floor",
        )
    ax.axhline(1.0, color="k", lw=0.8, ls="--", label="shot-noise level")
    ax.set_xlabel("RF frequency (MHz)")
    ax.set_ylabel("power (shot-noise units)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_transmittance_figure(rows: list[dict], path) -> None:
    """Estimated per-line transmittance vs optical frequency."""
    freqs = np.array([r["optical_freq_hz"] for r in rows]) / 1e12
    etas = np.array([r["eta"] for r in rows])
    sig = np.array([r["sigma"] for r in rows])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(freqs, etas, yerr=sig, fmt=".", ms=3, lw=0.8)
    ax.set_xlabel("optical frequency (THz)")
    ax.set_ylabel("transmittance")
    ax.set_ylim(0, 1.1)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_fit_figure(freqs_hz, measured, model, residuals, path) -> None:
    """Measured spectrum, fitted model and weighted residuals."""
    freqs = np.asarray(freqs_hz) / 1e12
    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(7, 5), sharex=True, height_ratios=[3, 1]
    )
    ax1.plot(freqs, measured, ".", ms=3, label="measured")
    order = np.argsort(freqs)
    ax1.plot(freqs[order], np.asarray(model)[order], "C3-", lw=1, label="fit")
    ax1.set_ylabel("transmittance")
    ax1.legend(loc="best", fontsize=8)
    ax2.plot(freqs, residuals, ".", ms=3)
    ax2.axhline(0.0, color="k", lw=0.8)
    ax2.set_xlabel("optical frequency (THz)")
    ax2.set_ylabel("resid / sigma")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_precision_figure(result, path) -> None:
    """Precision vs averaged interferograms, both arms, with the target line."""
    fig, ax = plt.subplots(figsize=(6, 4))
    m = np.array(result.m_list, dtype=float)
    ax.loglog(m, result.precision_dcs, "C0o-", label="classical")
    ax.loglog(m, result.precision_edcs, "C3s-", label="entangled")
    ax.axhline(result.target_precision, color="k", lw=0.8, ls="--", label="target")
    ax.set_xlabel("averaged interferograms M")
    ax.set_ylabel("transmittance precision")
    ax.set_title(f"speedup {result.speedup:.2f} (analytic {result.speedup_analytic:.2f})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_uar_figure(result, path) -> None:
    """Advantage vs line-attenuation ratio, one curve pair per depth."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    uar = np.array(result.uar_values)
    for j, depth in enumerate(result.depth_values_db):
        color = f"C{j}"
        ax.semilogx(uar, result.advantage_balanced_db[:, j], color + "o--",
                    label=f"{depth:g} dB, balanced LO")
        ax.semilogx(uar, result.advantage_adaptive_db[:, j], color + "s-",
                    label=f"{depth:g} dB, adaptive LO")
    ax.set_xlabel("unattenuated-to-attenuated line ratio")
    ax.set_ylabel("SNR advantage (dB)")
    ax.legend(loc="best", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
