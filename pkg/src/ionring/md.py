"""Molecular dynamics of ions in the multipole trap with stochastic Doppler cooling.

The integrator is a drift-kick-drift (position Verlet) scheme with the
time-dependent force evaluated at the middle of each step. Laser cooling is a
Monte Carlo photon-scattering process: per step and per beam an ion scatters
with probability rate*dt, receives one photon momentum along the beam and one
in a random isotropic direction.

Random numbers come from numpy's PCG64 generator seeded by
``IntegratorConfig.seed``; a run is bit-reproducible for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel
from .constants import CONSTANTS, IonSpecies, doppler_limit_temperature
from .ring import total_energy
from .trap import TrapConfig, pseudopotential_prefactor

RNG_ALGORITHM = "numpy.random.PCG64"

AXES6 = ((1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
         (0.0, -1.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, -1.0))
AXIAL2 = ((0.0, 0.0, 1.0), (0.0, 0.0, -1.0))
BEAM_SETS = {"xyz": AXES6, "z": AXIAL2}

FIELD_MODES = {"off": _kernel.FIELD_OFF, "pseudo": _kernel.FIELD_PSEUDO, "full": _kernel.FIELD_FULL}


class IntegrationError(RuntimeError):
    """Raised when a run has to stop; ``ensemble`` holds the last good state."""

    def __init__(self, message, ensemble=None):
        super().__init__(message)
        self.ensemble = ensemble


@dataclass
class IonEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    time: float
    species: IonSpecies

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float, order="C")
        self.velocities = np.array(self.velocities, dtype=float, order="C")
        if self.positions.shape != self.velocities.shape or self.positions.shape[1:] != (3,):
            raise ValueError("positions and velocities must both be (N, 3)")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("non-finite coordinates")

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    def copy(self) -> "IonEnsemble":
        return IonEnsemble(self.positions.copy(), self.velocities.copy(), self.time, self.species)


def thermal_ensemble(positions, species: IonSpecies, temperature: float, rng) -> IonEnsemble:
    """Ions at the given positions with Maxwell-Boltzmann velocities."""
    p = np.asarray(positions, dtype=float)
    sigma = math.sqrt(CONSTANTS.boltzmann * temperature / species.mass)
    return IonEnsemble(p, rng.normal(scale=sigma, size=p.shape), 0.0, species)


def with_micromotion_phase(ens: IonEnsemble, trap: TrapConfig) -> IonEnsemble:
    """Shift ions onto the driven orbit at the current rf phase.

    An ion released at its secular position with no micromotion picks up a
    secular oscillation of amplitude ~dR_mu; displacing it by -F(t)/(m Omega^2)
    and giving it the matching micromotion velocity avoids that.
    """
    out = ens.copy()
    sp = ens.species
    # rf force amplitude F0 (field at cos = 1); driven response x = -F0 cos(Omega t) / (m Omega^2)
    f0 = trap_forces(out.positions, trap, sp, 0.0, "full", static_field=False)[:, :2]
    ph = trap.rf_omega * ens.time
    out.positions[:, :2] -= f0 * math.cos(ph) / (sp.mass * trap.rf_omega ** 2)
    out.velocities[:, :2] += f0 * math.sin(ph) / (sp.mass * trap.rf_omega)
    return out


@dataclass(frozen=True)
class CoolingConfig:
    """Cooling lasers. Detuning and Rabi frequency in rad/s.

    The Rabi frequency sets the total saturation s = 2 Omega_R^2 / gamma^2,
    shared evenly between the beams.
    """

    detuning: float
    rabi_frequency: float
    beam_directions: tuple = AXES6
    on_intervals: tuple = ()

    def __post_init__(self):
        iv = tuple(tuple(map(float, p)) for p in self.on_intervals)
        for (a, b) in iv:
            if b < a:
                raise ValueError(f"cooling interval ({a}, {b}) ends before it starts")
        for (_, b), (c, _) in zip(iv, iv[1:]):
            if c < b:
                raise ValueError("cooling intervals must be sorted and non-overlapping")
        object.__setattr__(self, "on_intervals", iv)
        dirs = np.asarray(self.beam_directions, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms == 0):
            raise ValueError("beam directions must be non-zero")
        object.__setattr__(self, "beam_directions", tuple(map(tuple, dirs / norms[:, None])))

    @classmethod
    def default(cls, species: IonSpecies, beams: str = "xyz", on_intervals=()) -> "CoolingConfig":
        g = species.cooling_linewidth_gamma
        return cls(-0.5 * g, 0.5 * g, BEAM_SETS[beams], on_intervals)

    def saturation(self, species: IonSpecies) -> float:
        return 2.0 * self.rabi_frequency ** 2 / species.cooling_linewidth_gamma ** 2

    def saturation_per_beam(self, species: IonSpecies) -> float:
        return self.saturation(species) / len(self.beam_directions)

    def is_on(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.on_intervals)

    def parameters(self, species: IonSpecies) -> np.ndarray:
        k = species.cooling_wavenumber
        return np.array([self.detuning, species.cooling_linewidth_gamma,
                         self.saturation_per_beam(species), k,
                         CONSTANTS.reduced_planck * k / species.mass])


def scattering_rate(species: IonSpecies, detuning: float, saturation: float, k_dot_v: float = 0.0) -> float:
    g = species.cooling_linewidth_gamma
    x = 2.0 * (detuning - k_dot_v) / g
    return 0.5 * g * saturation / (1.0 + saturation + x * x)


@dataclass(frozen=True)
class IntegratorConfig:
    steps_per_rf_period: int = 100
    seed: int = 0
    field_mode: str = "full"
    static_field: bool = True

    def __post_init__(self):
        if self.steps_per_rf_period < 50:
            raise ValueError("need at least 50 steps per rf period")
        if self.field_mode not in FIELD_MODES:
            raise ValueError(f"field_mode must be one of {sorted(FIELD_MODES)}")

    def timestep(self, trap: TrapConfig) -> float:
        return trap.rf_period / self.steps_per_rf_period


@dataclass(frozen=True)
class TemperatureRecord:
    t: float
    T_axial: float
    T_radial: float
    T_angular: float


# -- forces -------------------------------------------------------------------

def _trap_params(trap: TrapConfig, species: IonSpecies) -> np.ndarray:
    return np.array([trap.k, trap.rf_amplitude_V0, trap.rf_omega, trap.inner_radius_r0,
                     trap.axial_omega_z, species.charge / species.mass,
                     pseudopotential_prefactor(trap, species) / species.mass])


def _coulomb_over_m(species: IonSpecies) -> float:
    return CONSTANTS.coulomb_constant * species.charge ** 2 / species.mass


def coulomb_forces(positions, species: IonSpecies) -> np.ndarray:
    """Pairwise Coulomb forces (N), O(N^2)."""
    p = np.ascontiguousarray(positions, dtype=float)
    acc = np.empty_like(p)
    status = _kernel.accelerations(p, 0.0, acc, np.zeros(7), _kernel.FIELD_OFF, False,
                                   _coulomb_over_m(species))
    if status == _kernel.COINCIDENT:
        raise IntegrationError("coincident ions")
    return acc * species.mass


def trap_forces(positions, trap: TrapConfig, species: IonSpecies, t: float,
                field_mode: str = "full", static_field: bool = True) -> np.ndarray:
    """Single-particle forces (N): rf or pseudopotential plus the axial dc well."""
    p = np.ascontiguousarray(positions, dtype=float)
    acc = np.empty_like(p)
    _kernel.accelerations(p, t, acc, _trap_params(trap, species),
                          FIELD_MODES[field_mode], static_field, 0.0)
    return acc * species.mass


def cooling_kick(velocities, species: IonSpecies, cooling: CoolingConfig, rng, dt: float,
                 t: float | None = None) -> np.ndarray:
    """One step of photon scattering applied to a copy of ``velocities``.

    If ``t`` is given and cooling is scheduled off at t, the velocities are
    returned unchanged.
    """
    v = np.array(velocities, dtype=float, order="C")
    if t is not None and not cooling.is_on(t):
        return v
    beams = np.asarray(cooling.beam_directions)
    rnd = rng.random((len(v), len(beams), 3))
    params = cooling.parameters(species)
    for i in range(len(v)):
        if _kernel.scatter(v, i, beams, params, rnd[i], dt) == _kernel.COARSE_STEP:
            raise IntegrationError("scattering probability per step above 0.1; reduce the timestep")
    return v


def kinetic_energy(ens: IonEnsemble) -> float:
    return 0.5 * ens.species.mass * float(np.sum(ens.velocities ** 2))


def pseudo_total_energy(ens: IonEnsemble, trap: TrapConfig) -> float:
    """Conserved energy in pseudopotential mode (kinetic + trap + Coulomb)."""
    return kinetic_energy(ens) + total_energy(trap, ens.species, ens.positions)


# -- integration --------------------------------------------------------------

@dataclass
class Segment:
    """Output of ``integrate``: block means per rf period and optional raw samples."""

    block_t: np.ndarray
    block_pos: np.ndarray
    block_vel: np.ndarray
    block_v2: np.ndarray
    raw_t: np.ndarray
    raw_pos: np.ndarray
    raw_vel: np.ndarray


_STATUS_TEXT = {
    _kernel.NONFINITE: "non-finite position or velocity",
    _kernel.COINCIDENT: "coincident ions",
    _kernel.COARSE_STEP: "scattering probability per step above 0.1; reduce the timestep",
}

_CHUNK_PERIODS = 20


class Integrator:
    """Owns the RNG stream of one run; ``run`` advances an ensemble in place."""

    def __init__(self, trap: TrapConfig, species: IonSpecies, integ: IntegratorConfig,
                 cooling: CoolingConfig | None = None):
        self.trap = trap
        self.species = species
        self.integ = integ
        self.cooling = cooling or CoolingConfig.default(species)
        self.rng = np.random.Generator(np.random.PCG64(integ.seed))
        self.dt = integ.timestep(trap)
        self._trap = _trap_params(trap, species)
        self._kc = _coulomb_over_m(species)
        self._beams = np.ascontiguousarray(self.cooling.beam_directions, dtype=float)
        self._cool = self.cooling.parameters(species)

    def _call(self, ens, n_steps, cooling_on, block, raw_stride, dt):
        n = ens.n_ions
        nb = n_steps // block if block else 0
        nr = n_steps // raw_stride if raw_stride else 0
        if cooling_on:
            rnd = self.rng.random((n_steps, n, len(self._beams), 3))
        else:
            rnd = np.zeros((1, n, len(self._beams), 3))
        out = (np.empty(nb), np.empty((nb, n, 3)), np.empty((nb, n, 3)), np.empty((nb, n, 3)),
               np.empty(nr), np.empty((nr, n, 3)), np.empty((nr, n, 3)))
        before = ens.copy()
        status, done, t = _kernel.advance(
            ens.positions, ens.velocities, ens.time, dt, n_steps, self._trap,
            FIELD_MODES[self.integ.field_mode], self.integ.static_field, self._kc,
            cooling_on, self._beams, self._cool, rnd,
            block, out[1], out[2], out[3], out[0],
            raw_stride, out[5], out[6], out[4])
        if status != _kernel.OK:
            raise IntegrationError(f"integration aborted at t={t:.9g} s: {_STATUS_TEXT[status]}",
                                   ensemble=before)
        ens.time = t
        return out

    def run(self, ens: IonEnsemble, n_steps: int, cooling_on: bool = False,
            raw_stride: int = 0, dt: float | None = None) -> Segment:
        """Advance ``ens`` by n_steps, in place.

        Block means are recorded per rf period when n_steps is a whole number
        of rf periods; raw samples every ``raw_stride`` steps.
        """
        spp = self.integ.steps_per_rf_period
        dt = self.dt if dt is None else dt
        block = spp if n_steps % spp == 0 else 0
        chunk = _CHUNK_PERIODS * spp
        if raw_stride:
            chunk = math.lcm(chunk, raw_stride)
        parts = []
        done = 0
        while done < n_steps:
            m = min(chunk, n_steps - done)
            parts.append(self._call(ens, m, cooling_on, block, raw_stride, dt))
            done += m
        if not parts:
            parts.append(self._call(ens, 0, False, 0, 0, dt))
        cat = [np.concatenate([p[j] for p in parts]) for j in range(7)]
        return Segment(*cat)


def step(ens: IonEnsemble, trap: TrapConfig, cooling: CoolingConfig, integ: IntegratorConfig,
         integrator: Integrator | None = None) -> IonEnsemble:
    """Advance a copy of ``ens`` by one timestep; cooling applies if scheduled on."""
    integrator = integrator or Integrator(trap, ens.species, integ, cooling)
    out = ens.copy()
    integrator.run(out, 1, cooling_on=cooling.is_on(ens.time))
    return out


# -- thermometry --------------------------------------------------------------

def _temperatures(mass, sec_pos, sec_vel, v2_axial):
    kb = CONSTANTS.boltzmann
    rho = np.hypot(sec_pos[..., 0], sec_pos[..., 1])
    rho = np.where(rho > 0, rho, np.inf)
    ux, uy = sec_pos[..., 0] / rho, sec_pos[..., 1] / rho
    v_r = sec_vel[..., 0] * ux + sec_vel[..., 1] * uy
    v_a = -sec_vel[..., 0] * uy + sec_vel[..., 1] * ux
    return (mass * float(np.mean(v2_axial)) / kb,
            mass * float(np.mean(v_r ** 2)) / kb,
            mass * float(np.mean(v_a ** 2)) / kb)


def measure_temperatures(times, positions, velocities, species: IonSpecies,
                         rf_period: float) -> TemperatureRecord:
    """Per-axis temperatures from raw samples (times (S,), positions/velocities (S, N, 3)).

    Axial temperature from the raw v_z^2. Radial and angular temperatures use
    secular velocities: a sliding mean over one rf period removes micromotion.
    """
    times = np.asarray(times, dtype=float)
    pos = np.asarray(positions, dtype=float)
    vel = np.asarray(velocities, dtype=float)
    if len(times) < 2 or times[-1] - times[0] < rf_period * (1 - 1e-9):
        raise ValueError("temperature window is shorter than one rf period")
    dt = float(np.median(np.diff(times)))
    w = max(1, int(round(rf_period / dt)))
    if w > 1:
        kern = np.ones(w) / w
        sec_pos = np.apply_along_axis(lambda s: np.convolve(s, kern, "valid"), 0, pos)
        sec_vel = np.apply_along_axis(lambda s: np.convolve(s, kern, "valid"), 0, vel)
    else:
        sec_pos, sec_vel = pos, vel
    tz, tr, ta = _temperatures(species.mass, sec_pos, sec_vel, vel[..., 2] ** 2)
    return TemperatureRecord(float(times.mean()), tz, tr, ta)


def temperatures_from_blocks(seg: Segment, species: IonSpecies, periods_per_record: int,
                             ) -> list[TemperatureRecord]:
    """Temperature records from rf-period block means, one per group of periods."""
    out = []
    for a in range(0, len(seg.block_t) - periods_per_record + 1, periods_per_record):
        sl = slice(a, a + periods_per_record)
        tz, tr, ta = _temperatures(species.mass, seg.block_pos[sl], seg.block_vel[sl],
                                   seg.block_v2[sl, :, 2])
        out.append(TemperatureRecord(float(seg.block_t[sl].mean()), tz, tr, ta))
    return out


# -- cool/dark sequences ------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Initial cooling, then ``cycles`` repetitions of (dark, cool). Durations in s."""

    initial_cooling: float
    dark_time: float
    cool_time: float
    cycles: int

    def intervals(self):
        """(start, stop, cooling_on) phases, zero-length phases dropped."""
        phases = [(self.initial_cooling, True)]
        for _ in range(self.cycles):
            phases += [(self.dark_time, False), (self.cool_time, True)]
        t = 0.0
        out = []
        for d, on in phases:
            if d > 0:
                out.append((t, t + d, on))
                t += d
        return out

    def cooling_config(self, base: CoolingConfig) -> CoolingConfig:
        on = [(a, b) for a, b, c in self.intervals() if c]
        merged = []
        for a, b in on:
            if merged and abs(merged[-1][1] - a) < 1e-15:
                merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        return replace(base, on_intervals=tuple(merged))


@dataclass
class SequenceResult:
    records: list
    dark: list
    final: IonEnsemble
    metadata: dict = field(default_factory=dict)

    def dark_axial(self) -> np.ndarray:
        return np.array([r.T_axial for r, d in zip(self.records, self.dark) if d])

    def dark_summary(self) -> dict:
        tz = self.dark_axial()
        if len(tz) == 0:
            return {"dark_records": 0, "mean_T_axial": float("nan"), "fwhm_T_axial": float("nan")}
        # FWHM of a Gaussian with the sample standard deviation
        return {"dark_records": int(len(tz)), "mean_T_axial": float(tz.mean()),
                "fwhm_T_axial": float(2.0 * math.sqrt(2.0 * math.log(2.0)) * tz.std())}


def run_sequence(ens: IonEnsemble, trap: TrapConfig, cooling: CoolingConfig, schedule: Schedule,
                 integ: IntegratorConfig, periods_per_record: int = 200,
                 on_phase=None) -> SequenceResult:
    """Run the cool/dark schedule, recording temperatures throughout.

    Every phase is rounded to a whole number of rf periods. ``on_phase`` is
    called as on_phase(index, ensemble) after each phase (used for snapshots).
    """
    integrator = Integrator(trap, ens.species, integ, cooling)
    spp = integ.steps_per_rf_period
    records, dark = [], []
    for idx, (a, b, on) in enumerate(schedule.intervals()):
        periods = int(round((b - a) / trap.rf_period))
        seg = integrator.run(ens, periods * spp, cooling_on=on)
        recs = temperatures_from_blocks(seg, ens.species, periods_per_record)
        records += recs
        dark += [not on] * len(recs)
        if on_phase is not None:
            on_phase(idx, ens)
    meta = {"rng": RNG_ALGORITHM, "seed": integ.seed, "timestep": integrator.dt,
            "doppler_limit": doppler_limit_temperature(ens.species)}
    return SequenceResult(records, dark, ens, meta)
