"""Unit constants and conversions used by the absorption model.

Every Torr/atm/cm^-1/Hz conversion in the package goes through this table
so the factors exist in exactly one place.
"""

from __future__ import annotations

TORR_PER_ATM = 760.0
PA_PER_TORR = 101325.0 / 760.0          # 133.3224 Pa per Torr
BOLTZMANN_J_PER_K = 1.380649e-23
SPEED_OF_LIGHT_M_S = 299792458.0
SPEED_OF_LIGHT_CM_S = 29979245800.0
AMU_KG = 1.66053906660e-27
SECOND_RADIATION_CM_K = 1.4387768775    # h c / k_B in cm K
HZ_PER_INV_CM = SPEED_OF_LIGHT_CM_S
REFERENCE_TEMPERATURE_K = 296.0


def torr_to_atm(pressure_torr: float) -> float:
    return pressure_torr / TORR_PER_ATM


def torr_to_pa(pressure_torr: float) -> float:
    return pressure_torr * PA_PER_TORR


def inv_cm_to_hz(wavenumber: float) -> float:
    return wavenumber * HZ_PER_INV_CM


def hz_to_inv_cm(frequency: float) -> float:
    return frequency / HZ_PER_INV_CM


def number_density_cm3(pressure_torr: float, temperature_k: float) -> float:
    """Ideal-gas number density in molecules per cm^3."""
    return torr_to_pa(pressure_torr) / (BOLTZMANN_J_PER_K * temperature_k) / 1e6
