"""Systematic shifts, broadenings and long-term instabilities of the clock line.

Every entry is computed for a ``ClockScenario`` (one ring in one trap) and
collected by ``assemble_budget`` into a table laid out like a conventional
clock uncertainty budget.

Sign conventions: ``ShiftEntry.shift`` is the physical, signed frequency
shift. The tabulated budget lists correction magnitudes, available as
``ShiftEntry.tabulated_shift``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS, IonSpecies, ZEEMAN_SUMMED_HALF, zeeman_sensitivity
from .ring import coulomb_radius_shift_epsilon, thermal_radial_amplitude
from .trap import TrapConfig, _require_multipole, effective_potential_minimum_rmin

TENSOR_F = {0.5: -4.0 / 5.0, 1.5: -1.0 / 5.0, 2.5: 1.0}

BBR_SHIFT_300K = 0.38  # Hz
BBR_MODEL_FRACTION = 0.03


class ScenarioError(ValueError):
    pass


def tensor_factor(m_j: float) -> float:
    try:
        return TENSOR_F[abs(float(m_j))]
    except KeyError:
        raise ScenarioError(f"M_J must be one of +-1/2, +-3/2, +-5/2, got {m_j}") from None


@dataclass(frozen=True)
class ClockScenario:
    trap: TrapConfig
    species: IonSpecies
    n_ions: int
    ring_radius_R: float
    T_axial: float = 0.54e-3
    T_radial: float = 10e-3
    zeeman_sublevel_MJ: float = 0.5
    magnetic_field: float = 0.05  # G
    magnetic_field_fluctuation: float = 6e-7  # G
    bbr_temperature: float = 300.0
    bbr_temperature_uncertainty: float = 10.0
    laser_waist: float = 40e-6
    misalignment: float = 0.0
    extra_dc_quadrupole_uncertainty: float = 0.04  # Hz
    axial_voltage_stability: float = 1e-4  # fractional
    radius_override: bool = False

    def __post_init__(self):
        tensor_factor(self.zeeman_sublevel_MJ)
        if self.n_ions < 2:
            raise ScenarioError("a ring needs at least 2 ions")
        if self.ring_radius_R < 0:
            raise ScenarioError("ring radius must be >= 0")
        if self.magnetic_field_fluctuation < 0:
            raise ScenarioError("field fluctuation must be >= 0")

    @property
    def f0(self) -> float:
        return self.species.clock_frequency()

    def epsilon(self, n: int) -> float:
        return coulomb_radius_shift_epsilon(self.trap, self.species, n, R=self.ring_radius_R)

    def delta_epsilon(self) -> float:
        """Radius change on losing one ion, epsilon(N) - epsilon(N-1)."""
        if self.n_ions < 3:
            return self.epsilon(self.n_ions)
        return self.epsilon(self.n_ions) - self.epsilon(self.n_ions - 1)

    def radius_consistent(self) -> bool:
        """R within 2*epsilon of the Coulomb-shifted trap minimum r_min + epsilon."""
        r_min = effective_potential_minimum_rmin(self.trap, self.species)
        eps = coulomb_radius_shift_epsilon(self.trap, self.species, self.n_ions, R=r_min)
        return abs(self.ring_radius_R - (r_min + eps)) <= 2.0 * eps

    def conditions(self) -> str:
        return f"R={self.ring_radius_R * 1e6:g} um"


@dataclass(frozen=True)
class ShiftEntry:
    effect_name: str
    shift: float
    broadening_halfwidth: float
    long_term_fractional: float
    notes: str = ""
    conditions: str = ""
    uncertainty: float = 0.0
    in_broadening_total: bool = True

    def __post_init__(self):
        if self.broadening_halfwidth < 0 or self.long_term_fractional < 0:
            raise ValueError("broadening and long-term instability must be >= 0")

    @property
    def tabulated_shift(self) -> float:
        return abs(self.shift)


def _position_spread_terms(scn: ClockScenario, shift: float):
    """Broadening from radial thermal motion and long-term term from ion loss."""
    R = scn.ring_radius_R
    if R == 0 or shift == 0:
        return 0.0, 0.0
    dR = thermal_radial_amplitude(scn.trap, scn.species, scn.T_radial)
    broadening = abs(shift) * 2.0 * dR / R
    long_term = abs(shift / scn.f0) * 2.0 * abs(scn.delta_epsilon()) / R
    return broadening, long_term


# -- rf-induced shifts --------------------------------------------------------

def doppler2_shift(scn: ClockScenario) -> ShiftEntry:
    """Second-order Doppler shift of the micromotion."""
    _require_multipole(scn.trap)
    c = CONSTANTS.speed_of_light
    k = scn.trap.k
    shift = -scn.f0 * scn.trap.axial_omega_z ** 2 * scn.ring_radius_R ** 2 / (4.0 * (k - 1) * c * c)
    b, lt = _position_spread_terms(scn, shift)
    return ShiftEntry("Doppler(2e)", shift, b, lt, conditions=scn.conditions(),
                      notes="physical shift is negative")


def doppler2_large_cloud(species: IonSpecies, n_per_length: float, k: int) -> float:
    """Fractional second-order Doppler shift of a dense cloud, N_L ions per metre."""
    if k < 2:
        raise ValueError("k must be >= 2")
    q, c = species.charge, CONSTANTS.speed_of_light
    return -q * q * n_per_length / (8.0 * math.pi * CONSTANTS.vacuum_permittivity
                                     * species.mass * (k - 1) * c * c)


def rf_field_at_ring(scn: ClockScenario) -> float:
    """rf field amplitude at a ring sitting at the pseudopotential minimum (V/m)."""
    t = scn.trap
    return (scn.species.mass * t.axial_omega_z * t.rf_omega * scn.ring_radius_R
            / (scn.species.charge * math.sqrt(t.k - 1)))


def stark_scalar_rf(scn: ClockScenario) -> ShiftEntry:
    _require_multipole(scn.trap)
    e2 = rf_field_at_ring(scn) ** 2
    shift = -0.5 * scn.species.scalar_diff_polarizability * e2 / 2.0
    b, lt = _position_spread_terms(scn, shift)
    return ShiftEntry("Stark", shift, b, lt, conditions=scn.conditions(),
                      notes="scalar, rf field; dc part negligible")


def stark_scalar_dc_ratio(cfg: TrapConfig) -> float:
    _require_multipole(cfg)
    return (cfg.k - 1) * cfg.axial_omega_z ** 2 / (2.0 * cfg.rf_omega ** 2)


def _tensor_shift(scn: ClockScenario, cos_theta):
    e2 = rf_field_at_ring(scn) ** 2
    f = tensor_factor(scn.zeeman_sublevel_MJ)
    return (-0.5 * scn.species.tensor_diff_polarizability * f
            * (3.0 * np.asarray(cos_theta) ** 2 - 1.0) / 2.0 * e2 / 2.0)


def stark_tensor_rf(scn: ClockScenario, theta: float = math.pi / 2) -> ShiftEntry:
    """Tensor Stark shift for a field-to-B angle theta common to all ions."""
    shift = float(_tensor_shift(scn, math.cos(theta)))
    b, lt = _position_spread_terms(scn, shift)
    return ShiftEntry("Stark tensor", shift, b, lt, conditions=scn.conditions(),
                      notes=f"theta={theta:.6g} rad, f(M_J)={tensor_factor(scn.zeeman_sublevel_MJ):g}")


def ring_field_directions(k: int, n: int, phase: float = 0.0) -> np.ndarray:
    """Unit rf field directions at n ions spaced evenly around the ring."""
    a = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos((k - 1) * a), -np.sin((k - 1) * a), np.zeros(n)])


def stark_tensor_dispersion(scn: ClockScenario, b_field_direction,
                            statistic: str = "rms") -> float:
    """Ion-to-ion spread of the tensor Stark shift for a given B direction (Hz).

    ``statistic`` is "rms" (standard deviation over the ring) or "range"
    (max - min).
    """
    b = np.asarray(b_field_direction, dtype=float)
    b = b / np.linalg.norm(b)
    e_dir = ring_field_directions(scn.trap.k, scn.n_ions)
    shifts = _tensor_shift(scn, e_dir @ b)
    if statistic == "rms":
        return float(np.std(shifts))
    if statistic == "range":
        return float(np.ptp(shifts))
    raise ValueError(f"unknown statistic {statistic!r}")


# -- other shifts -------------------------------------------------------------

def zeeman_entry(scn: ClockScenario) -> ShiftEntry:
    """Summed +-1/2 -> -+1/2 components: first order cancels, fluctuations remain.

    The field fluctuation is slow compared with an interrogation cycle, so it
    enters the long-term column; the budget's broadening total is the
    rf-position part and leaves this row out.
    """
    fluct = zeeman_sensitivity(ZEEMAN_SUMMED_HALF) * scn.magnetic_field_fluctuation
    return ShiftEntry("Zeeman", 0.0, fluct, fluct / scn.f0,
                      conditions=f"dB<={scn.magnetic_field_fluctuation:g} G",
                      notes="first order cancelled by summing components",
                      in_broadening_total=False)


@dataclass(frozen=True)
class ZeemanRegimes:
    relative_fluctuation_hz: float
    relative_fractional: float
    absolute_fluctuation_hz: float
    absolute_fractional: float


def zeeman_regimes(species: IonSpecies, reference_fluctuation: float = 6e-7,
                   reference_field: float = 0.05, operating_field: float = 6e-4) -> ZeemanRegimes:
    """Zeeman fluctuation for a transferred relative or absolute field stability.

    Fields in gauss. The relative case scales the reference fluctuation to the
    operating field; the absolute case keeps it as is.
    """
    s = zeeman_sensitivity(ZEEMAN_SUMMED_HALF)
    f0 = species.clock_frequency()
    rel = s * reference_fluctuation * operating_field / reference_field
    ab = s * reference_fluctuation
    return ZeemanRegimes(rel, rel / f0, ab, ab / f0)


def bbr_entry(scn: ClockScenario) -> ShiftEntry:
    T = scn.bbr_temperature
    if T < 0:
        raise ScenarioError("temperature must be >= 0")
    shift = BBR_SHIFT_300K * (T / 300.0) ** 4
    temp_unc = 4.0 * scn.bbr_temperature_uncertainty / T * shift if T > 0 else 0.0
    return ShiftEntry("BBR", shift, 0.0, temp_unc / scn.f0,
                      conditions=f"T={T:g}+-{scn.bbr_temperature_uncertainty:g} K",
                      uncertainty=temp_unc,
                      notes=f"model uncertainty {BBR_MODEL_FRACTION * shift:.2g} Hz")


def quadrupole_coefficient(trap: TrapConfig, species: IonSpecies) -> float:
    """C in delta f_Q = C (3 M_J^2 - 35/4), B along the trap axis (Hz).

    dc gradient 2A = -m omega_z^2 / (2q) coupled to the D5/2 quadrupole moment.
    """
    a0 = CONSTANTS.bohr_radius
    e = CONSTANTS.elementary_charge
    theta = species.d52_quadrupole_moment * e * a0 * a0
    a_coef = species.mass * trap.axial_omega_z ** 2 / (4.0 * species.charge)
    # angular factor for J=5/2 with B along z: 2 / (J(2J-1)) = 1/5
    return a_coef * theta / 5.0 / CONSTANTS.planck


def quadrupole_entry(scn: ClockScenario) -> ShiftEntry:
    m_j = float(scn.zeeman_sublevel_MJ)
    shift = quadrupole_coefficient(scn.trap, scn.species) * (3.0 * m_j * m_j - 35.0 / 4.0)
    drift = abs(shift) * scn.axial_voltage_stability
    return ShiftEntry("quadrupole", shift, drift, drift / scn.f0,
                      conditions="trapping field",
                      notes=f"M_J={m_j:g}; position independent")


def quadrupole_extra_dc_entry(scn: ClockScenario) -> ShiftEntry:
    u = scn.extra_dc_quadrupole_uncertainty
    return ShiftEntry("quadrupole", 0.0, u, u / scn.f0, conditions="extra dc",
                      notes="stray dc gradients, bound supplied by user",
                      in_broadening_total=False)


@dataclass(frozen=True)
class MisalignmentResult:
    excitation_dispersion: float
    projection_noise: float
    below_threshold: bool
    negligible: bool


def misalignment_noise(scn: ClockScenario, threshold: float = 0.1) -> MisalignmentResult:
    if scn.laser_waist <= 0:
        raise ScenarioError("laser waist must be positive")
    dp = 0.36 * 4.0 * scn.ring_radius_R * scn.misalignment / scn.laser_waist ** 2
    qpn = 1.0 / (2.0 * math.sqrt(scn.n_ions))
    return MisalignmentResult(dp, qpn, dp < threshold, dp < threshold and dp < qpn)


def allan_deviation(Q: float, snr: float, cycle_time: float, tau: float) -> float:
    if min(Q, snr, cycle_time, tau) <= 0:
        raise ValueError("all arguments must be positive")
    return math.sqrt(cycle_time / tau) / (math.pi * Q * snr)


def projection_noise_snr(n_ions: int) -> float:
    return math.sqrt(n_ions)


# -- assembly -----------------------------------------------------------------

@dataclass
class Budget:
    scenario: ClockScenario
    entries: list[ShiftEntry]
    broadening_mode: str = "linear"
    supplementary: list[ShiftEntry] = field(default_factory=list)

    @property
    def total_shift(self) -> float:
        """Sum of tabulated (magnitude) shifts."""
        return sum(e.tabulated_shift for e in self.entries)

    @property
    def total_physical_shift(self) -> float:
        return sum(e.shift for e in self.entries)

    @property
    def total_broadening(self) -> float:
        parts = [e.broadening_halfwidth for e in self.entries if e.in_broadening_total]
        if self.broadening_mode == "linear":
            return sum(parts)
        if self.broadening_mode == "quadrature":
            return math.sqrt(sum(p * p for p in parts))
        raise ValueError(f"unknown broadening mode {self.broadening_mode!r}")

    @property
    def total_long_term(self) -> float:
        return max(e.long_term_fractional for e in self.entries)


def assemble_budget(scn: ClockScenario, broadening_mode: str = "linear") -> Budget:
    if not scn.radius_override and scn.ring_radius_R > 0 and not scn.radius_consistent():
        raise ScenarioError(
            f"ring radius {scn.ring_radius_R:g} m is inconsistent with the trap minimum; "
            "set radius_override to use it anyway")
    entries = [
        doppler2_shift(scn),
        stark_scalar_rf(scn),
        zeeman_entry(scn),
        bbr_entry(scn),
        quadrupole_entry(scn),
        quadrupole_extra_dc_entry(scn),
    ]
    supplementary = [stark_tensor_rf(scn)]
    return Budget(scn, entries, broadening_mode, supplementary)
