"""Unit conventions shared by all solvers.

Energies are kept in wavenumbers (cm^-1), time in femtoseconds, temperature
in kelvin. Propagators work with hbar = 1: an energy of E cm^-1 advances the
phase by E * ANGFREQ_RAD_FS * t over t femtoseconds. Rates (trapping,
radiative decay, bath correlation) are plain fs^-1 and enter the generators
without further conversion.
"""

import math

# speed of light in cm/fs
C_CM_PER_FS = 2.99792458e-5

# angular frequency per wavenumber, 2*pi*c = 1.88365e-4 rad/fs per cm^-1
ANGFREQ_RAD_FS = 2.0 * math.pi * C_CM_PER_FS

# Boltzmann constant in cm^-1 per kelvin (k_B * 300 K = 208.51 cm^-1)
KB_CM1_PER_K = 0.695035


def wavenumber_to_rate(energy_cm1: float) -> float:
    """Angular rate in rad/fs equivalent to an energy in cm^-1."""
    return energy_cm1 * ANGFREQ_RAD_FS


def rate_to_wavenumber(rate_fs1: float) -> float:
    """Energy in cm^-1 equivalent to a rate in fs^-1."""
    return rate_fs1 / ANGFREQ_RAD_FS


def thermal_energy_cm1(temperature_k: float) -> float:
    """k_B * T in cm^-1."""
    return KB_CM1_PER_K * temperature_k
