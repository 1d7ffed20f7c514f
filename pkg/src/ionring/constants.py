"""Physical constants, unit helpers and the ion-species registry.

Everything in the package is SI internally. Angular frequencies are in rad/s;
the config layer converts user-facing MHz (cycles per second) on the way in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import scipy.constants as sc


@dataclass(frozen=True)
class PhysicalConstants:
    elementary_charge: float
    vacuum_permittivity: float
    boltzmann: float
    reduced_planck: float
    speed_of_light: float
    atomic_mass_unit: float
    bohr_radius: float

    @property
    def planck(self) -> float:
        return 2.0 * math.pi * self.reduced_planck

    @property
    def coulomb_constant(self) -> float:
        """1 / (4 pi eps0) in N m^2 / C^2."""
        return 1.0 / (4.0 * math.pi * self.vacuum_permittivity)


CONSTANTS = PhysicalConstants(
    elementary_charge=sc.e,
    vacuum_permittivity=sc.epsilon_0,
    boltzmann=sc.k,
    reduced_planck=sc.hbar,
    speed_of_light=sc.c,
    atomic_mass_unit=sc.atomic_mass,
    bohr_radius=sc.physical_constants["Bohr radius"][0],
)

CODATA_RELEASE = "scipy.constants (CODATA 2018)"


def constants() -> PhysicalConstants:
    return CONSTANTS


# -- unit helpers -------------------------------------------------------------

MICRON = 1e-6
GAUSS = 1e-4  # tesla


def um_to_m(x):
    return x * MICRON


def m_to_um(x):
    return x / MICRON


def mhz_to_rad_s(f):
    """Frequency in MHz (cycles/s) to angular frequency in rad/s."""
    return f * (2.0 * math.pi * 1e6)


def rad_s_to_mhz(w):
    return w / (2.0 * math.pi * 1e6)


def gauss_to_tesla(b):
    return b * GAUSS


def tesla_to_gauss(b):
    return b / GAUSS


# -- species ------------------------------------------------------------------

@dataclass(frozen=True)
class IonSpecies:
    """A singly or multiply charged ion with a cooling and a clock transition.

    Polarizabilities are differential (upper minus lower clock level) and
    expressed as Hz per (V/m)^2, so that a static field E shifts the clock
    line by ``-0.5 * alpha * E**2``.
    """

    name: str
    mass: float
    charge: float
    cooling_linewidth_gamma: float
    cooling_wavelength: float
    clock_wavelength: float
    scalar_diff_polarizability: float
    tensor_diff_polarizability: float
    d52_quadrupole_moment: float  # units of e * a0^2

    def __post_init__(self):
        for field in ("mass", "charge", "cooling_linewidth_gamma",
                      "cooling_wavelength", "clock_wavelength"):
            value = getattr(self, field)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"IonSpecies.{field} must be positive, got {value!r}")

    def clock_frequency(self) -> float:
        return CONSTANTS.speed_of_light / self.clock_wavelength

    @property
    def cooling_wavenumber(self) -> float:
        return 2.0 * math.pi / self.cooling_wavelength

    @property
    def clock_wavenumber(self) -> float:
        return 2.0 * math.pi / self.clock_wavelength


def builtin_ca40() -> IonSpecies:
    return IonSpecies(
        name="ca40",
        mass=40.0 * CONSTANTS.atomic_mass_unit,
        charge=CONSTANTS.elementary_charge,
        cooling_linewidth_gamma=1.0 / 7e-9,
        cooling_wavelength=397e-9,
        clock_wavelength=729e-9,
        scalar_diff_polarizability=-1.1e-6,
        tensor_diff_polarizability=-6.1e-7,
        d52_quadrupole_moment=1.83,
    )


SPECIES_REGISTRY = {"ca40": builtin_ca40}


def species_by_name(name: str) -> IonSpecies:
    try:
        return SPECIES_REGISTRY[name.lower()]()
    except KeyError:
        raise KeyError(f"unknown species {name!r}; known: {sorted(SPECIES_REGISTRY)}") from None


def doppler_limit_temperature(species: IonSpecies) -> float:
    """Doppler cooling limit hbar*gamma / (2 k_B), in kelvin."""
    return CONSTANTS.reduced_planck * species.cooling_linewidth_gamma / (2.0 * CONSTANTS.boltzmann)


# -- Zeeman -------------------------------------------------------------------

# Lande g factors of the S1/2 and D5/2 levels of Ca+.
G_S12 = 2.0
G_D52 = 6.0 / 5.0
ZEEMAN_SUMMED_HALF = "S1/2(+-1/2)->D5/2(-+1/2) summed"

_ZEEMAN_CHOICES = {ZEEMAN_SUMMED_HALF: 2.2e6}


def zeeman_sensitivity(transition: str = ZEEMAN_SUMMED_HALF) -> float:
    """First-order Zeeman sensitivity of a clock component, in Hz/G.

    Only the summed (+-1/2 -> -+1/2) interrogation scheme is supported: its
    first-order shift cancels in the sum and the field fluctuation of each
    component enters at 2.2 MHz/G.
    """
    try:
        return _ZEEMAN_CHOICES[transition]
    except KeyError:
        raise ValueError(f"unsupported Zeeman transition {transition!r}") from None


def zeeman_line_coefficient(m_lower: float, m_upper: float) -> float:
    """Linear Zeeman coefficient of S1/2(m_lower)->D5/2(m_upper), in Hz/G."""
    if abs(m_lower) != 0.5 or abs(m_upper) > 2.5 or (2 * m_upper) % 2 != 1:
        raise ValueError(f"no S1/2({m_lower}) -> D5/2({m_upper}) component")
    mu_b_hz_per_gauss = sc.physical_constants["Bohr magneton in Hz/T"][0] * GAUSS
    return (G_D52 * m_upper - G_S12 * m_lower) * mu_b_hz_per_gauss
