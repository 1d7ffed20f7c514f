"""Equilibrium structure of a ring of ions in a multipole trap.

Closed forms for the ring Coulomb energy, the Coulomb-induced radius shift and
the single/double ring stability limit, plus a direct minimization of the 3N
dimensional pseudopotential energy and a classifier for the relaxed state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .constants import CONSTANTS, IonSpecies
from .trap import (
    TrapConfig,
    effective_potential_minimum_rmin,
    pseudopotential_prefactor,
    _require_multipole,
)

Z_TOL = 10e-9
FORCE_TOL = 1e-19


class ConvergenceError(RuntimeError):
    def __init__(self, message, positions=None, max_force=None):
        super().__init__(message)
        self.positions = positions
        self.max_force = max_force


def ring_sum_s1(n: int) -> float:
    if n < 2:
        raise ValueError("ring needs at least 2 ions")
    j = np.arange(1, n)
    return float(np.sum(1.0 / np.sin(np.pi * j / n)))


def coulomb_ring_energy(n: int, R: float, species: IonSpecies | None = None) -> float:
    if R <= 0:
        raise ValueError("ring radius must be positive")
    q = species.charge if species is not None else CONSTANTS.elementary_charge
    return CONSTANTS.coulomb_constant * q * q * 0.5 * n * ring_sum_s1(n) / (2.0 * R)


def coulomb_radius_shift_epsilon(cfg: TrapConfig, species: IonSpecies, n: int,
                                 R: float | None = None) -> float:
    """First-order outward shift of the ring radius due to Coulomb repulsion.

    R defaults to r_min; pass an explicit radius when the ring is held at a
    radius set by other means.
    """
    _require_multipole(cfg)
    if R is None:
        R = effective_potential_minimum_rmin(cfg, species)
    q = species.charge
    return (CONSTANTS.coulomb_constant * q * q * ring_sum_s1(n)
            / (4.0 * (cfg.k - 2) * R * R * species.mass * cfg.axial_omega_z ** 2))


def _double_ring_sum(n: int) -> float:
    j = np.arange(1, n // 2 + 1)
    return float(np.sum(1.0 / np.sin((2 * j - 1) * np.pi / n) ** 3))


def double_ring_limit_Rl(species: IonSpecies, omega_z: float, n: int) -> float:
    """Smallest radius at which an even-N single ring is stable along z."""
    if n % 2 or n < 4:
        raise ValueError("the zig-zag limit is defined for an even number of ions >= 4")
    q = species.charge
    pref = CONSTANTS.coulomb_constant * q * q / (4.0 * species.mass * omega_z ** 2)
    return (pref * _double_ring_sum(n)) ** (1.0 / 3.0)


def double_ring_limit_approx(species: IonSpecies, omega_z: float, n: int) -> float:
    q = species.charge
    pref = CONSTANTS.coulomb_constant * q * q / (2.0 * species.mass * omega_z ** 2)
    return pref ** (1.0 / 3.0) * n / math.pi


def thermal_radial_amplitude(cfg: TrapConfig, species: IonSpecies, T_r: float) -> float:
    _require_multipole(cfg)
    if T_r < 0:
        raise ValueError("temperature must be >= 0")
    return math.sqrt(2.0 * CONSTANTS.boltzmann * T_r
                     / (species.mass * (cfg.k - 2) * cfg.axial_omega_z ** 2))


def axial_velocity_amplitude(species: IonSpecies, T_z: float) -> float:
    return math.sqrt(2.0 * CONSTANTS.boltzmann * T_z / species.mass)


def axial_modulation_index(species: IonSpecies, omega_z: float, T_z: float) -> float:
    """k_L Z with Z = V_Z / omega_z the axial oscillation amplitude."""
    if T_z <= 0:
        raise ValueError("T_z must be positive")
    return species.clock_wavenumber * axial_velocity_amplitude(species, T_z) / omega_z


def doppler_limit_modulation_index(species: IonSpecies, omega_z: float) -> float:
    """Modulation index with V_Z = sqrt(hbar gamma / m)."""
    vz = math.sqrt(CONSTANTS.reduced_planck * species.cooling_linewidth_gamma / species.mass)
    return species.clock_wavenumber * vz / omega_z


def in_lamb_dicke_regime(modulation_index: float) -> bool:
    return modulation_index < 1.0


# -- energy of an arbitrary configuration -------------------------------------

class StructureTag(str, enum.Enum):
    SINGLE_RING = "SingleRing"
    DOUBLE_RING_ZIGZAG = "DoubleRingZigzag"
    OTHER = "Other"


@dataclass(frozen=True)
class StructureClass:
    tag: StructureTag
    plane_separation: float
    mean_radius: float
    axial_spread: float

    def __post_init__(self):
        if self.plane_separation > 0 and self.tag is not StructureTag.DOUBLE_RING_ZIGZAG:
            raise ValueError("plane separation only applies to a double ring")


@dataclass
class RingGeometry:
    n_ions: int
    radius_R: float
    axial_offsets: np.ndarray
    angular_positions: np.ndarray

    @classmethod
    def from_positions(cls, positions) -> "RingGeometry":
        p = np.asarray(positions, dtype=float)
        r = np.hypot(p[:, 0], p[:, 1])
        return cls(len(p), float(r.mean()), p[:, 2].copy(),
                   np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi))

    def is_single_ring(self, z_tol: float = Z_TOL, angle_tol: float = 1e-3) -> bool:
        if np.ptp(self.axial_offsets) >= z_tol:
            return False
        gaps = np.diff(np.sort(self.angular_positions), append=np.min(self.angular_positions) + 2 * np.pi)
        return bool(np.all(np.abs(gaps - 2 * np.pi / self.n_ions) < angle_tol))


def ideal_ring(n: int, R: float, phase: float = 0.0) -> np.ndarray:
    a = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([R * np.cos(a), R * np.sin(a), np.zeros(n)])


def _pair_terms(p):
    d = p[:, None, :] - p[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, np.inf)
    return d, np.sqrt(r2)


def total_energy(cfg: TrapConfig, species: IonSpecies, positions) -> float:
    """Pseudopotential + static + Coulomb energy of a configuration (J)."""
    p = np.asarray(positions, dtype=float)
    m, w2 = species.mass, cfg.axial_omega_z ** 2
    rho2 = p[:, 0] ** 2 + p[:, 1] ** 2
    e_trap = (pseudopotential_prefactor(cfg, species) * np.sum(rho2 ** (cfg.k - 1))
              + 0.5 * m * w2 * np.sum(p[:, 2] ** 2 - 0.5 * rho2))
    _, r = _pair_terms(p)
    iu = np.triu_indices(len(p), 1)
    e_c = CONSTANTS.coulomb_constant * species.charge ** 2 * np.sum(1.0 / r[iu])
    return float(e_trap + e_c)


def total_forces(cfg: TrapConfig, species: IonSpecies, positions) -> np.ndarray:
    """-grad of total_energy, shape (N, 3)."""
    p = np.asarray(positions, dtype=float)
    m, w2, k = species.mass, cfg.axial_omega_z ** 2, cfg.k
    rho2 = p[:, 0] ** 2 + p[:, 1] ** 2
    f = np.empty_like(p)
    radial = -(2 * k - 2) * pseudopotential_prefactor(cfg, species) * rho2 ** (k - 2) + 0.5 * m * w2
    f[:, 0] = radial * p[:, 0]
    f[:, 1] = radial * p[:, 1]
    f[:, 2] = -m * w2 * p[:, 2]
    d, r = _pair_terms(p)
    kc = CONSTANTS.coulomb_constant * species.charge ** 2
    f += kc * np.sum(d / r[:, :, None] ** 3, axis=1)
    return f


def minimize_energy(cfg: TrapConfig, species: IonSpecies, n: int, seed: int,
                    force_tol: float = FORCE_TOL, perturbation: float = 0.1e-6,
                    max_iter: int = 20000) -> np.ndarray:
    """Relax n ions from randomly perturbed rings at r_min.

    Two starts are tried: a purely random perturbation and, for even n, the
    same perturbation plus an alternating axial offset. Descent from a random
    start alone tends to stall in zig-zag states carrying kink pairs; the
    lower-energy result is returned. Returns an (n, 3) array in metres.
    """
    if n < 2:
        raise ValueError("need at least 2 ions")
    _require_multipole(cfg)
    rng = np.random.default_rng(seed)
    r_start = effective_potential_minimum_rmin(cfg, species)
    base = ideal_ring(n, r_start, phase=rng.uniform(0, 2 * np.pi))
    starts = [base + rng.normal(scale=perturbation, size=base.shape)]
    if n % 2 == 0:
        s = starts[0].copy()
        s[:, 2] += perturbation * (-1.0) ** np.arange(n)
        starts.append(s)

    best = None
    for start in starts:
        p, fmax = _relax(cfg, species, start, force_tol, max_iter)
        if fmax < force_tol:
            e = total_energy(cfg, species, p)
            if best is None or e < best[0]:
                best = (e, p)
    if best is None:
        raise ConvergenceError(f"energy minimization did not converge (max |F| = {fmax:.3g} N)",
                               positions=p, max_force=fmax)
    return best[1]


def _relax(cfg, species, start, force_tol, max_iter):
    """L-BFGS in units of 1 um and m*omega_z^2*(1 um)^2."""
    n = len(start)
    length = 1e-6
    e_unit = species.mass * cfg.axial_omega_z ** 2 * length ** 2
    f_unit = e_unit / length

    def fun(x):
        p = x.reshape(n, 3) * length
        return total_energy(cfg, species, p) / e_unit, -total_forces(cfg, species, p).ravel() / f_unit

    x = start.ravel() / length
    # L-BFGS stops on relative criteria; restart until the absolute force test holds
    for _ in range(8):
        res = minimize(fun, x, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-16, "maxcor": 30})
        x = res.x
        p = x.reshape(n, 3) * length
        fmax = max_residual_force(cfg, species, p)
        if fmax < force_tol * 1e-3:
            break
    return p, fmax


def max_residual_force(cfg: TrapConfig, species: IonSpecies, positions) -> float:
    return float(np.max(np.linalg.norm(total_forces(cfg, species, positions), axis=1)))


def _two_means_1d(z):
    """Split z values into two clusters (exact for 1-D: best split of the sorted list)."""
    order = np.argsort(z)
    zs = z[order]
    best_cost, best_i = np.inf, 1
    for i in range(1, len(zs)):
        a, b = zs[:i], zs[i:]
        cost = np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)
        if cost < best_cost:
            best_cost, best_i = cost, i
    labels = np.empty(len(z), dtype=int)
    labels[order[:best_i]] = 0
    labels[order[best_i:]] = 1
    return labels


def classify_structure(positions, cfg: TrapConfig | None = None, species: IonSpecies | None = None,
                       z_tol: float = Z_TOL, force_tol: float = FORCE_TOL) -> StructureClass:
    """Single ring / zig-zag double ring / other, for a relaxed configuration.

    When cfg and species are given the residual force is checked first.
    """
    p = np.asarray(positions, dtype=float)
    if cfg is not None and species is not None:
        fmax = max_residual_force(cfg, species, p)
        if not fmax < force_tol:
            raise ConvergenceError(f"configuration is not relaxed (max |F| = {fmax:.3g} N)",
                                   positions=p, max_force=fmax)
    z = p[:, 2]
    rho = np.hypot(p[:, 0], p[:, 1])
    mean_r = float(rho.mean())
    spread = float(np.ptp(z))
    if spread < z_tol:
        return StructureClass(StructureTag.SINGLE_RING, 0.0, mean_r, spread)

    labels = _two_means_1d(z)
    n = len(z)
    if n % 2 == 0 and np.sum(labels) == n // 2:
        around = labels[np.argsort(np.arctan2(p[:, 1], p[:, 0]))]
        alternating = np.all(around != np.roll(around, 1))
        within = max(np.ptp(z[labels == 0]), np.ptp(z[labels == 1]))
        sep = float(abs(z[labels == 1].mean() - z[labels == 0].mean()))
        if alternating and within < z_tol and sep > z_tol:
            return StructureClass(StructureTag.DOUBLE_RING_ZIGZAG, sep, mean_r, spread)
    return StructureClass(StructureTag.OTHER, 0.0, mean_r, spread)

