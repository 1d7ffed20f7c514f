"""Ideal linear 2k-pole rf trap: pseudopotential, axial well and the rf field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import IonSpecies


class QuadrupoleError(ValueError):
    """Raised by ring-specific quantities that need k >= 3."""


@dataclass(frozen=True)
class TrapConfig:
    pole_count_2k: int
    rf_amplitude_V0: float
    rf_omega: float
    inner_radius_r0: float
    axial_omega_z: float

    def __post_init__(self):
        if self.pole_count_2k % 2 or self.pole_count_2k < 4:
            raise ValueError(f"pole count must be even and >= 4, got {self.pole_count_2k}")
        for name in ("rf_amplitude_V0", "rf_omega", "inner_radius_r0", "axial_omega_z"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"TrapConfig.{name} must be positive, got {v!r}")

    @property
    def k(self) -> int:
        return self.pole_count_2k // 2

    @property
    def rf_period(self) -> float:
        return 2.0 * math.pi / self.rf_omega


def _require_multipole(cfg: TrapConfig):
    if cfg.k < 3:
        raise QuadrupoleError("quadrupole has no off-axis minimum")


def pseudopotential_prefactor(cfg: TrapConfig, species: IonSpecies) -> float:
    """C such that V*(r) = C * r**(2k-2)."""
    k, q = cfg.k, species.charge
    return (k * k * q * q * cfg.rf_amplitude_V0 ** 2
            / (16.0 * species.mass * cfg.rf_omega ** 2 * cfg.inner_radius_r0 ** (2 * k)))


def pseudopotential(cfg: TrapConfig, species: IonSpecies, r):
    """Time-averaged rf potential energy at distance r from the axis (J)."""
    return pseudopotential_prefactor(cfg, species) * np.asarray(r, dtype=float) ** (2 * cfg.k - 2)


def static_potential(cfg: TrapConfig, species: IonSpecies, r, z):
    """Axial dc well, with its radial deconfinement, in J."""
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    return 0.5 * species.mass * cfg.axial_omega_z ** 2 * (z * z - 0.5 * r * r)


def radial_potential(cfg: TrapConfig, species: IonSpecies, r):
    """Pseudopotential plus static potential in the z = 0 plane."""
    return pseudopotential(cfg, species, r) + static_potential(cfg, species, r, 0.0)


def effective_potential_minimum_rmin(cfg: TrapConfig, species: IonSpecies) -> float:
    _require_multipole(cfg)
    k, q, m = cfg.k, species.charge, species.mass
    rhs = (2.0 * m * cfg.rf_omega * cfg.axial_omega_z * cfg.inner_radius_r0 ** k
           / (k * q * cfg.rf_amplitude_V0)) ** 2 / (k - 1)
    return rhs ** (1.0 / (2 * k - 4))


def effective_radial_frequency(cfg: TrapConfig) -> float:
    _require_multipole(cfg)
    return math.sqrt(cfg.k - 2) * cfg.axial_omega_z


def harmonic_radial_potential(cfg: TrapConfig, species: IonSpecies, r):
    """Quadratic model of radial_potential around r_min, offset included."""
    r_min = effective_potential_minimum_rmin(cfg, species)
    w = effective_radial_frequency(cfg)
    r = np.asarray(r, dtype=float)
    return radial_potential(cfg, species, r_min) + 0.5 * species.mass * w * w * (r - r_min) ** 2


def adiabaticity_local(cfg: TrapConfig, species: IonSpecies, r):
    k = cfg.k
    r = np.asarray(r, dtype=float)
    return (k * (k - 1) * species.charge * cfg.rf_amplitude_V0
            / (species.mass * cfg.rf_omega ** 2 * cfg.inner_radius_r0 ** 2)
            * (r / cfg.inner_radius_r0) ** (k - 2))


def adiabaticity_at_ring(cfg: TrapConfig) -> float:
    """eta at r_min; independent of V0, r0 and the ion number."""
    _require_multipole(cfg)
    return 2.0 * math.sqrt(cfg.k - 1) * cfg.axial_omega_z / cfg.rf_omega


def micromotion_amplitude(cfg: TrapConfig, R):
    _require_multipole(cfg)
    if np.any(np.asarray(R) < 0):
        raise ValueError("ring radius must be >= 0")
    return R * adiabaticity_at_ring(cfg) / (2.0 * (cfg.k - 1))


def rf_field_amplitude(cfg: TrapConfig, r):
    """Magnitude of the rf electric field amplitude at radius r (V/m)."""
    k = cfg.k
    return 0.5 * cfg.rf_amplitude_V0 * k * np.asarray(r, dtype=float) ** (k - 1) / cfg.inner_radius_r0 ** k


# -- full time-dependent field ------------------------------------------------

def rf_potential_full(cfg: TrapConfig, x, y, t):
    """Electric potential (V) of the ideal multipole at time t.

    Uses r^k cos(k alpha) = Re[(x + i y)^k].
    """
    w = (np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)) / cfg.inner_radius_r0
    return 0.5 * cfg.rf_amplitude_V0 * np.cos(cfg.rf_omega * t) * np.real(w ** cfg.k)


def rf_field_full(cfg: TrapConfig, x, y, t):
    """Electric field (Ex, Ey) in V/m; -grad of rf_potential_full."""
    k, r0 = cfg.k, cfg.inner_radius_r0
    w = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
    g = (0.5 * cfg.rf_amplitude_V0 * k / r0 ** k) * np.cos(cfg.rf_omega * t) * w ** (k - 1)
    # d/dx Re[w^k] = Re[k w^(k-1)], d/dy Re[w^k] = -Im[k w^(k-1)]
    return -np.real(g), np.imag(g)


def rf_force_full(cfg: TrapConfig, species: IonSpecies, x, y, t):
    ex, ey = rf_field_full(cfg, x, y, t)
    return np.stack([species.charge * ex, species.charge * ey], axis=-1)
