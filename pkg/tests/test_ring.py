import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from ionring import ring, trap as T
from ionring.constants import CONSTANTS, doppler_limit_temperature
from ionring.ring import StructureTag

from conftest import OMEGA_Z, octupole


def brute_force_energy(positions, q):
    e = 0.0
    for a, b in itertools.combinations(positions, 2):
        e += CONSTANTS.coulomb_constant * q * q / np.linalg.norm(a - b)
    return e


def ring_radius_1d(cfg, sp, n):
    """Radius minimizing trap + Coulomb energy of an ideal n-ion ring."""
    r_min = T.effective_potential_minimum_rmin(cfg, sp)
    scale = sp.mass * OMEGA_Z ** 2 * r_min ** 2

    def energy(u):
        R = u * r_min
        return (n * T.radial_potential(cfg, sp, R) + ring.coulomb_ring_energy(n, R, sp)) / scale

    return minimize_scalar(energy, bounds=(0.9, 1.2), method="bounded",
                           options={"xatol": 1e-12}).x * r_min


def test_s1_values():
    assert ring.ring_sum_s1(2) == pytest.approx(1.0)
    assert ring.ring_sum_s1(3) == pytest.approx(2 / math.sin(math.pi / 3))
    for n in (10, 20):
        direct = 0.0
        for j in range(1, n):
            direct += 1.0 / math.sin(math.pi * j / n)
        assert ring.ring_sum_s1(n) == pytest.approx(direct, rel=1e-14)
    with pytest.raises(ValueError):
        ring.ring_sum_s1(1)


@pytest.mark.parametrize("n", list(range(2, 51)))
def test_ring_energy_vs_brute_force(ca, n):
    R = 20e-6
    pos = ring.ideal_ring(n, R, phase=0.123)
    want = brute_force_energy(pos, ca.charge)
    assert ring.coulomb_ring_energy(n, R, ca) == pytest.approx(want, rel=1e-12)


def test_ring_energy_simple_cases(ca):
    R = 10e-6
    assert ring.coulomb_ring_energy(2, R, ca) == pytest.approx(
        CONSTANTS.coulomb_constant * ca.charge ** 2 / (2 * R))
    assert ring.coulomb_ring_energy(7, 2 * R, ca) == pytest.approx(0.5 * ring.coulomb_ring_energy(7, R, ca))
    with pytest.raises(ValueError):
        ring.coulomb_ring_energy(5, 0.0)


def test_epsilon_bound(ca, trap20, trap40):
    r20 = T.effective_potential_minimum_rmin(trap20, ca)
    r40 = T.effective_potential_minimum_rmin(trap40, ca)
    assert ring.coulomb_radius_shift_epsilon(trap40, ca, 20) / r40 < 0.02
    assert ring.coulomb_radius_shift_epsilon(trap20, ca, 10) / r20 < 0.02


@pytest.mark.parametrize("which,n", [("trap20", 10), ("trap40", 20)])
def test_epsilon_vs_constrained_minimizer(ca, request, which, n):
    cfg = request.getfixturevalue(which)
    eps = ring.coulomb_radius_shift_epsilon(cfg, ca, n)
    shift = ring_radius_1d(cfg, ca, n) - T.effective_potential_minimum_rmin(cfg, ca)
    assert shift == pytest.approx(eps, rel=0.2)


@pytest.mark.parametrize("which,n", [("trap20", 10), ("trap40", 20)])
def test_epsilon_vs_full_minimizer(ca, request, which, n):
    cfg = request.getfixturevalue(which)
    pos = ring.minimize_energy(cfg, ca, n, seed=0)
    r_min = T.effective_potential_minimum_rmin(cfg, ca)
    shift = np.hypot(pos[:, 0], pos[:, 1]).mean() - r_min
    eps = ring.coulomb_radius_shift_epsilon(cfg, ca, n)
    assert shift == pytest.approx(eps, rel=0.2)
    assert r_min <= shift + r_min <= r_min + 2 * eps


def test_quadrupole_epsilon_rejected(ca):
    from ionring.trap import QuadrupoleError, TrapConfig
    with pytest.raises(QuadrupoleError):
        ring.coulomb_radius_shift_epsilon(TrapConfig(4, 1.0, 1.0, 1.0, 1.0), ca, 5)


def test_double_ring_limit(ca):
    rl = ring.double_ring_limit_Rl(ca, OMEGA_Z, 20)
    assert rl == pytest.approx(23e-6, rel=0.05)
    assert ring.double_ring_limit_approx(ca, OMEGA_Z, 20) == pytest.approx(rl, rel=0.1)
    assert ring.double_ring_limit_Rl(ca, 2 * OMEGA_Z, 20) == pytest.approx(rl * 2 ** (-2 / 3))
    for bad in (7, 2):
        with pytest.raises(ValueError):
            ring.double_ring_limit_Rl(ca, OMEGA_Z, bad)


def test_thermal_amplitude(ca, trap20):
    assert ring.thermal_radial_amplitude(trap20, ca, 10e-3) == pytest.approx(0.23e-6, rel=0.03)
    assert ring.thermal_radial_amplitude(trap20, ca, 0.0) == 0.0
    assert ring.thermal_radial_amplitude(trap20, ca, 40e-3) == pytest.approx(
        2 * ring.thermal_radial_amplitude(trap20, ca, 10e-3))


def test_modulation_index(ca):
    # value 2 pi x 6.3e5 / omega_z
    m = ring.doppler_limit_modulation_index(ca, OMEGA_Z)
    assert m == pytest.approx(2 * math.pi * 6.3e5 / OMEGA_Z, rel=0.03)


def test_modulation_index_properties(ca):
    m = ring.doppler_limit_modulation_index(ca, OMEGA_Z)
    assert ring.in_lamb_dicke_regime(m)
    assert not ring.in_lamb_dicke_regime(1.2)
    assert ring.doppler_limit_modulation_index(ca, 2 * OMEGA_Z) == pytest.approx(m / 2)
    # both forms coincide at T_D by construction: kB T_D = hbar gamma / 2
    t_d = doppler_limit_temperature(ca)
    assert ring.axial_modulation_index(ca, OMEGA_Z, t_d) == pytest.approx(m, rel=1e-12)
    with pytest.raises(ValueError):
        ring.axial_modulation_index(ca, OMEGA_Z, 0.0)


# -- minimization and structures ----------------------------------------------

def test_n20_single_ring_3142V(ca):
    cfg = octupole(3142.0, 400e-6)
    pos = ring.minimize_energy(cfg, ca, 20, seed=1)
    cls = ring.classify_structure(pos, cfg, ca)
    assert cls.tag is StructureTag.SINGLE_RING
    assert cls.mean_radius == pytest.approx(28e-6, rel=0.05)
    assert cls.plane_separation == 0.0
    assert ring.RingGeometry.from_positions(pos).is_single_ring()


def test_n20_zigzag_5771V(ca):
    cfg = octupole(5771.0, 400e-6)
    pos = ring.minimize_energy(cfg, ca, 20, seed=1)
    cls = ring.classify_structure(pos, cfg, ca)
    assert cls.tag is StructureTag.DOUBLE_RING_ZIGZAG
    assert cls.plane_separation == pytest.approx(3e-6, rel=0.5)
    assert cls.mean_radius == pytest.approx(21e-6, rel=0.1)
    assert not ring.RingGeometry.from_positions(pos).is_single_ring()


def test_minimizer_converged(ca, trap20):
    pos = ring.minimize_energy(trap20, ca, 10, seed=5)
    assert ring.max_residual_force(trap20, ca, pos) < ring.FORCE_TOL
    cls = ring.classify_structure(pos, trap20, ca)
    assert cls.tag is StructureTag.SINGLE_RING


def test_two_ions(ca, trap20):
    pos = ring.minimize_energy(trap20, ca, 2, seed=0)
    r = np.hypot(pos[:, 0], pos[:, 1])
    assert np.all(r >= T.effective_potential_minimum_rmin(trap20, ca))
    assert np.allclose(pos[0], -pos[1], atol=1e-9)
    assert ring.classify_structure(pos, trap20, ca).tag is StructureTag.SINGLE_RING
    assert ring.classify_structure(ring.ideal_ring(2, 5e-6)).tag is StructureTag.SINGLE_RING


def test_classify_rejects_unrelaxed(ca, trap20):
    pos = ring.ideal_ring(10, 25e-6)
    with pytest.raises(ring.ConvergenceError):
        ring.classify_structure(pos, trap20, ca)


def test_classify_other():
    pos = ring.ideal_ring(8, 20e-6)
    pos[:, 2] = [0, 1, 2, 0, 1, 2, 0, 1]
    pos[:, 2] *= 1e-6
    assert ring.classify_structure(pos).tag is StructureTag.OTHER


def test_structure_tag_invariant():
    with pytest.raises(ValueError):
        ring.StructureClass(StructureTag.SINGLE_RING, 1e-6, 1e-5, 0.0)


def test_structure_boundary(ca):
    """Single ring above R_l, zig-zag below, away from a 5% band around R_l."""
    rl = ring.double_ring_limit_Rl(ca, OMEGA_Z, 20)
    for V0 in (3500.0, 4000.0, 5200.0, 5771.0):
        cfg = octupole(V0, 400e-6)
        pos = ring.minimize_energy(cfg, ca, 20, seed=2)
        r_pred = T.effective_potential_minimum_rmin(cfg, ca)
        tag = ring.classify_structure(pos, cfg, ca).tag
        if r_pred > 1.05 * rl:
            assert tag is StructureTag.SINGLE_RING
        elif r_pred < 0.95 * rl:
            assert tag is StructureTag.DOUBLE_RING_ZIGZAG


def test_minimizer_deterministic(ca, trap20):
    a = ring.minimize_energy(trap20, ca, 10, seed=3)
    b = ring.minimize_energy(trap20, ca, 10, seed=3)
    assert np.array_equal(a, b)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_energy_rotation_invariant(angle):
    from ionring import builtin_ca40
    sp = builtin_ca40()
    cfg = octupole(394.4, 200e-6)
    pos = ring.minimize_energy(cfg, sp, 6, seed=0)
    c, s = math.cos(angle), math.sin(angle)
    rot = pos @ np.array([[c, s, 0], [-s, c, 0], [0, 0, 1]])
    e0 = ring.total_energy(cfg, sp, pos)
    assert ring.total_energy(cfg, sp, rot) == pytest.approx(e0, rel=1e-12)


def test_forces_are_energy_gradient(ca, trap20):
    rng = np.random.default_rng(0)
    pos = ring.ideal_ring(5, 20e-6) + rng.normal(scale=1e-6, size=(5, 3))
    f = ring.total_forces(trap20, ca, pos)
    h = 1e-10
    for i, c in ((0, 0), (2, 1), (4, 2)):
        d = np.zeros_like(pos)
        d[i, c] = h
        num = -(ring.total_energy(trap20, ca, pos + d) - ring.total_energy(trap20, ca, pos - d)) / (2 * h)
        assert num == pytest.approx(f[i, c], rel=1e-5)
