"""Line-by-line molecular absorption: line lists, Voigt profiles, cell fitting.

Transmittance follows the Beer-Lambert law,

    T(nu) = exp(-sum_i S_i(T) * phi_V(nu - nu_i) * n * L),

with Voigt line shapes (pressure Lorentzian convolved with the Doppler
Gaussian).  Line strengths use HITRAN-style units of
cm^-1/(molecule cm^-2); profiles are evaluated per Hz and converted via
the speed of light.  Temperature scaling of strengths is deliberately
simple (linear-molecule partition ratio plus the lower-state Boltzmann
factor) since the target experiments run at a single temperature.

The line-list CSV schema has a header row with columns::

    center_hz, strength, gamma_air_cm_atm, gamma_self_cm_atm,
    molar_mass_g_mol, lower_state_energy_cm

``lower_state_energy_cm`` may be empty (no temperature scaling for that
line).  A small hydrogen-cyanide overtone-band fixture built from
approximate public band constants ships with the package; see the README
for provenance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares
from scipy.special import voigt_profile as _scipy_voigt

from . import units
from .errors import ConfigError, FitConvergenceError, FitDegenerateError

__all__ = [
    "SpectralLine",
    "GasCell",
    "ingest_line_list",
    "save_line_list",
    "bundled_line_list_path",
    "voigt_profile",
    "lorentz_hwhm_hz",
    "doppler_sigma_hz",
    "absorbance",
    "transmittance",
    "calibrate_strength_scale",
    "FitResult",
    "fit_cell_params",
]


@dataclass(frozen=True)
class SpectralLine:
    """One molecular transition.

    ``strength`` in cm^-1/(molecule cm^-2) at the 296 K reference,
    broadening coefficients in cm^-1/atm (HWHM), ``molar_mass_g_mol`` for
    the Doppler width, optional lower-state energy in cm^-1.
    """

    center_hz: float
    strength: float
    gamma_air_cm_atm: float
    gamma_self_cm_atm: float
    molar_mass_g_mol: float
    lower_state_energy_cm: float | None = None

    def __post_init__(self):
        if not self.center_hz > 0:
            raise ValueError(f"line center must be > 0, got {self.center_hz}")
        if self.strength < 0:
            raise ValueError(f"line strength must be >= 0, got {self.strength}")
        if self.gamma_air_cm_atm <= 0 or self.gamma_self_cm_atm <= 0:
            raise ValueError("broadening coefficients must be > 0")
        if not self.molar_mass_g_mol > 0:
            raise ValueError("molar mass must be > 0")


@dataclass(frozen=True)
class GasCell:
    """Absorption-cell operating point."""

    path_length_cm: float
    pressure_torr: float
    temperature_k: float
    mole_fraction: float

    def __post_init__(self):
        if not (self.path_length_cm > 0 and self.pressure_torr > 0
                and self.temperature_k > 0):
            raise ValueError("cell path length, pressure and temperature must be > 0")
        if not (0.0 <= self.mole_fraction <= 1.0):
            raise ValueError(
                f"mole fraction must lie in [0, 1], got {self.mole_fraction}"
            )


_CSV_COLUMNS = [
    "center_hz",
    "strength",
    "gamma_air_cm_atm",
    "gamma_self_cm_atm",
    "molar_mass_g_mol",
    "lower_state_energy_cm",
]


def bundled_line_list_path() -> Path:
    """Path of the bundled hydrogen-cyanide overtone-band fixture."""
    return Path(resources.files("edcs.data") / "hcn_2nu3_lines.csv")


def save_line_list(lines: list[SpectralLine], path) -> None:
    """Write lines back out in the documented CSV schema."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for ln in lines:
            writer.writerow(
                [
                    repr(float(ln.center_hz)),
                    repr(float(ln.strength)),
                    repr(float(ln.gamma_air_cm_atm)),
                    repr(float(ln.gamma_self_cm_atm)),
                    repr(float(ln.molar_mass_g_mol)),
                    ""
                    if ln.lower_state_energy_cm is None
                    else repr(float(ln.lower_state_energy_cm)),
                ]
            )


def ingest_line_list(path) -> list[SpectralLine]:
    """Parse and validate a line-list CSV, sorted by center frequency."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != _CSV_COLUMNS:
            raise ConfigError(
                f"{path}: line list header must be exactly {','.join(_CSV_COLUMNS)}"
            )
        lines: list[SpectralLine] = []
        for row_no, row in enumerate(reader, start=2):
            try:
                e_raw = (row["lower_state_energy_cm"] or "").strip()
                lines.append(
                    SpectralLine(
                        center_hz=float(row["center_hz"]),
                        strength=float(row["strength"]),
                        gamma_air_cm_atm=float(row["gamma_air_cm_atm"]),
                        gamma_self_cm_atm=float(row["gamma_self_cm_atm"]),
                        molar_mass_g_mol=float(row["molar_mass_g_mol"]),
                        lower_state_energy_cm=float(e_raw) if e_raw else None,
                    )
                )
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigError(f"{path}: malformed line at row {row_no}: {exc}") from exc
    if not lines:
        raise ConfigError(f"{path}: no spectral lines")
    return sorted(lines, key=lambda ln: ln.center_hz)


def voigt_profile(detuning_hz, lorentz_hwhm_hz: float, gauss_sigma_hz: float):
    """Area-normalised Voigt profile in 1/Hz.

    Evaluated through the Faddeeva function (scipy's ``voigt_profile``),
    accurate to well below 1e-6 relative error.  Reduces to a Lorentzian
    as the Gaussian width vanishes and vice versa; both widths must be
    strictly positive.
    """
    gamma, sigma = float(lorentz_hwhm_hz), float(gauss_sigma_hz)
    if not (gamma > 0 and sigma > 0):
        raise ValueError(
            f"profile widths must be > 0, got lorentz={lorentz_hwhm_hz}, "
            f"gauss={gauss_sigma_hz}"
        )
    return _scipy_voigt(np.asarray(detuning_hz, dtype=float), sigma, gamma)


def lorentz_hwhm_hz(line: SpectralLine, cell: GasCell) -> float:
    """Pressure-broadened Lorentzian half width at half maximum in Hz."""
    p_atm = units.torr_to_atm(cell.pressure_torr)
    gamma_cm = (
        line.gamma_air_cm_atm * (1.0 - cell.mole_fraction)
        + line.gamma_self_cm_atm * cell.mole_fraction
    ) * p_atm
    return units.inv_cm_to_hz(gamma_cm)


def doppler_sigma_hz(line: SpectralLine, cell: GasCell) -> float:
    """Gaussian standard deviation of the Doppler profile in Hz."""
    mass_kg = line.molar_mass_g_mol * units.AMU_KG
    return (
        line.center_hz
        * np.sqrt(units.BOLTZMANN_J_PER_K * cell.temperature_k / mass_kg)
        / units.SPEED_OF_LIGHT_M_S
    )


def _strength_at_temperature(line: SpectralLine, temperature_k: float) -> float:
    # simplified scaling: linear-molecule partition ratio (T_ref / T) plus
    # the lower-state Boltzmann factor when the energy is known
    scale = units.REFERENCE_TEMPERATURE_K / temperature_k
    if line.lower_state_energy_cm is not None:
        c2e = units.SECOND_RADIATION_CM_K * line.lower_state_energy_cm
        scale *= np.exp(
            -c2e / temperature_k + c2e / units.REFERENCE_TEMPERATURE_K
        )
    return line.strength * scale


def absorbance(freq_hz, cell: GasCell, lines: list[SpectralLine]):
    """Optical depth sum over lines; accepts scalar or array frequencies."""
    freq = np.asarray(freq_hz, dtype=float)
    n_density = cell.mole_fraction * units.number_density_cm3(
        cell.pressure_torr, cell.temperature_k
    )
    tau = np.zeros_like(freq, dtype=float)
    if n_density == 0.0:
        return tau if freq.ndim else float(tau)
    for line in lines:
        s = _strength_at_temperature(line, cell.temperature_k)
        if s == 0.0:
            continue
        profile = voigt_profile(
            freq - line.center_hz,
            lorentz_hwhm_hz(line, cell),
            doppler_sigma_hz(line, cell),
        )
        # strength (cm^-1 / (molec cm^-2)) * profile-per-cm^-1 * n * L
        tau += s * profile * units.HZ_PER_INV_CM * n_density * cell.path_length_cm
    return tau if freq.ndim else float(tau)


def transmittance(freq_hz, cell: GasCell, lines: list[SpectralLine]):
    """Beer-Lambert transmittance in (0, 1]."""
    return np.exp(-absorbance(freq_hz, cell, lines))


def calibrate_strength_scale(
    lines: list[SpectralLine], cell: GasCell, target_depth_db: float
) -> tuple[list[SpectralLine], float]:
    """Rescale all strengths so the strongest line center reaches a target depth.

    Absorbance is linear in the common strength scale, so the scale factor
    is the ratio of target to current depth (in dB) at the deepest line
    center.  Returns the rescaled lines and the scale factor.
    """
    if target_depth_db <= 0:
        raise ValueError(f"target depth must be > 0 dB, got {target_depth_db}")
    centers = np.array([ln.center_hz for ln in lines])
    depths_db = 10.0 * absorbance(centers, cell, lines) / np.log(10.0)
    peak = float(np.max(depths_db))
    if peak == 0.0:
        raise ValueError("cannot calibrate: zero absorbance at every line center")
    scale = float(target_depth_db) / peak
    return [replace(ln, strength=ln.strength * scale) for ln in lines], scale


@dataclass(frozen=True)
class FitResult:
    """Weighted nonlinear least-squares fit output."""

    cell: GasCell
    free_names: tuple[str, ...]
    values: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray          # weighted: (model - measured) / sigma
    cost: float
    nfev: int
    reduced_chi2: float


_FREE_BOUNDS = {"mole_fraction": (0.0, 1.0), "pressure_torr": (1e-12, np.inf)}


def fit_cell_params(
    freqs_hz,
    measured_transmittance,
    sigmas,
    lines: list[SpectralLine],
    cell0: GasCell,
    free: tuple[str, ...] = ("mole_fraction",),
    max_nfev: int = 200,
) -> FitResult:
    """Fit gas-cell parameters to a measured transmittance spectrum.

    Parameters
    ----------
    freqs_hz, measured_transmittance, sigmas : array_like
        Equal-length measurement vectors; residuals are weighted by the
        per-point sigmas.
    lines : list of SpectralLine
        Line list defining the forward model.
    cell0 : GasCell
        Fixed parameters plus initial values of the free ones.
    free : tuple of str, optional
        Any subset of ``mole_fraction`` and ``pressure_torr``; path length
        and temperature always stay fixed.  Default fits the mole fraction
        only.
    max_nfev : int, optional
        Function-evaluation budget for the solver.

    Returns
    -------
    FitResult
        Estimates, 1-sigma uncertainties from the Jacobian, covariance and
        weighted residuals.

    Raises
    ------
    FitConvergenceError
        Budget exhausted before the 1e-12 gradient/step/cost tolerances;
        carries the best parameters seen so far.
    FitDegenerateError
        Singular Jacobian (parameters not identifiable from the data).
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    meas = np.asarray(measured_transmittance, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    if not (freqs.shape == meas.shape == sig.shape) or freqs.ndim != 1:
        raise ValueError("freqs, measurements and sigmas must be equal-length 1-d")
    if np.any(sig <= 0):
        raise ValueError("sigmas must be > 0")
    for name in free:
        if name not in _FREE_BOUNDS:
            raise ValueError(f"unknown free parameter {name!r}")
    if len(freqs) < len(free):
        raise ValueError(
            f"need at least {len(free)} data points for {len(free)} free parameters"
        )

    def with_params(x) -> GasCell:
        kw = dict(zip(free, x))
        return replace(cell0, **kw)

    def residual(x):
        return (transmittance(freqs, with_params(x), lines) - meas) / sig

    x0 = np.array([getattr(cell0, name) for name in free], dtype=float)
    lo = np.array([_FREE_BOUNDS[n][0] for n in free])
    hi = np.array([_FREE_BOUNDS[n][1] for n in free])
    res = least_squares(
        residual,
        x0,
        bounds=(lo, hi),
        method="trf",
        xtol=1e-12,
        ftol=1e-12,
        gtol=1e-12,
        max_nfev=max_nfev,
    )
    if res.status == 0:
        raise FitConvergenceError(
            f"fit did not converge within {max_nfev} function evaluations "
            f"(cost {res.cost:.6g}); best parameters so far: "
            + ", ".join(f"{n}={v:.6g}" for n, v in zip(free, res.x)),
            best_params=dict(zip(free, res.x)),
            cost=float(res.cost),
        )
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise FitDegenerateError(
            f"degenerate Jacobian for free parameters {free}"
        ) from exc
    if not np.all(np.isfinite(cov)) or np.any(np.diag(cov) <= 0):
        raise FitDegenerateError(f"degenerate Jacobian for free parameters {free}")
    dof = max(len(freqs) - len(free), 1)
    return FitResult(
        cell=with_params(res.x),
        free_names=tuple(free),
        values=res.x.copy(),
        stderr=np.sqrt(np.diag(cov)),
        covariance=cov,
        residuals=res.fun.copy(),
        cost=float(res.cost),
        nfev=int(res.nfev),
        reduced_chi2=float(2.0 * res.cost / dof),
    )
