import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionring import budget as B
from ionring import ring, trap as T
from ionring.constants import CONSTANTS
from ionring.trap import TrapConfig

from conftest import OMEGA, OMEGA_Z, matches_printed, octupole, within_factor


@pytest.fixture(scope="module")
def scn10(ca, trap20):
    return B.ClockScenario(trap20, ca, 10, 20e-6)


@pytest.fixture(scope="module")
def scn20(ca, trap40):
    return B.ClockScenario(trap40, ca, 20, 40e-6)


def hand_doppler(scn):
    c = CONSTANTS.speed_of_light
    return -scn.f0 * (OMEGA_Z * scn.ring_radius_R) ** 2 / (4 * (scn.trap.k - 1) * c * c)


def test_scenario_validation(ca, trap20):
    with pytest.raises(B.ScenarioError):
        B.ClockScenario(trap20, ca, 10, 20e-6, zeeman_sublevel_MJ=1.0)
    with pytest.raises(B.ScenarioError):
        B.ClockScenario(trap20, ca, 1, 20e-6)
    with pytest.raises(B.ScenarioError):
        B.ClockScenario(trap20, ca, 10, -1.0)


def test_radius_consistency(ca, trap20):
    assert B.ClockScenario(trap20, ca, 10, 20e-6).radius_consistent()
    bad = B.ClockScenario(trap20, ca, 10, 30e-6)
    assert not bad.radius_consistent()
    with pytest.raises(B.ScenarioError, match="radius_override"):
        B.assemble_budget(bad)
    B.assemble_budget(replace(bad, radius_override=True))


# -- second-order Doppler -----------------------------------------------------

def test_doppler_20um(scn10):
    e = B.doppler2_shift(scn10)
    assert e.shift == pytest.approx(hand_doppler(scn10), rel=1e-12)
    assert e.shift < 0 and e.tabulated_shift == -e.shift
    assert e.shift / scn10.f0 == pytest.approx(-1.46e-14, abs=0.01e-14)
    assert matches_printed(e.tabulated_shift, 6.0, 1)
    assert matches_printed(e.broadening_halfwidth, 0.14, 2)
    assert matches_printed(e.long_term_fractional, 8, 0, -17)


def test_doppler_40um(scn20):
    e = B.doppler2_shift(scn20)
    assert e.shift / scn20.f0 == pytest.approx(-5.85e-14, abs=0.01e-14)
    assert matches_printed(e.tabulated_shift, 24.1, 1)
    assert matches_printed(e.broadening_halfwidth, 0.28, 2)
    assert matches_printed(e.long_term_fractional, 5, 0, -17)


def test_doppler_zero_radius(scn10):
    e = B.doppler2_shift(replace(scn10, ring_radius_R=0.0, radius_override=True))
    assert e.shift == 0.0 and e.broadening_halfwidth == 0.0


def test_doppler_large_cloud(ca):
    assert B.doppler2_large_cloud(ca, 0.0, 4) == 0.0
    assert B.doppler2_large_cloud(ca, 1e6, 8) / B.doppler2_large_cloud(ca, 1e6, 4) == pytest.approx(3 / 7)
    q, c = CONSTANTS.elementary_charge, CONSTANTS.speed_of_light
    hand = -q * q * 1e6 / (8 * math.pi * CONSTANTS.vacuum_permittivity * ca.mass * 3 * c * c)
    assert B.doppler2_large_cloud(ca, 1e6, 4) == pytest.approx(hand, rel=1e-12)


# -- Stark --------------------------------------------------------------------

def test_rf_field_amplitude_consistent(ca, trap20):
    """The field used for Stark shifts equals the multipole field at r_min."""
    r = T.effective_potential_minimum_rmin(trap20, ca)
    scn = B.ClockScenario(trap20, ca, 10, r)
    assert B.rf_field_at_ring(scn) == pytest.approx(T.rf_field_amplitude(trap20, r), rel=1e-12)


def test_stark_20um(scn10):
    e = B.stark_scalar_rf(scn10)
    assert matches_printed(e.tabulated_shift, 4.1, 1)
    assert matches_printed(e.broadening_halfwidth, 0.09, 2)
    assert matches_printed(e.long_term_fractional, 6, 0, -17)


def test_stark_40um(scn20):
    e = B.stark_scalar_rf(scn20)
    assert matches_printed(e.tabulated_shift, 16.5, 1)
    assert matches_printed(e.broadening_halfwidth, 0.19, 2)
    assert matches_printed(e.long_term_fractional, 3, 0, -17)


def test_stark_formula(scn10):
    m, q = scn10.species.mass, scn10.species.charge
    t = scn10.trap
    hand = (-0.5 * scn10.species.scalar_diff_polarizability * m * m * t.axial_omega_z ** 2
            * t.rf_omega ** 2 * scn10.ring_radius_R ** 2 / (2 * (t.k - 1) * q * q))
    assert B.stark_scalar_rf(scn10).shift == pytest.approx(hand, rel=1e-12)
    no_pol = replace(scn10, species=replace(scn10.species, scalar_diff_polarizability=0.0))
    assert B.stark_scalar_rf(no_pol).shift == 0.0


def test_stark_dc_ratio(trap20):
    eta = T.adiabaticity_at_ring(trap20)
    r = B.stark_scalar_dc_ratio(trap20)
    assert r == pytest.approx(eta ** 2 / 8, rel=1e-12)
    assert r == pytest.approx(3.75e-3, rel=0.01)
    cfg = TrapConfig(8, 1.0, 2 * math.pi * 1e6 * 2 * math.sqrt(3) / 0.2, 1.0, OMEGA_Z)
    assert B.stark_scalar_dc_ratio(cfg) == pytest.approx(0.005)


def test_tensor_values(scn10, scn20):
    for scn, want, bro in ((scn10, -1.1, 0.02), (scn20, -4.6, 0.05)):
        e = B.stark_tensor_rf(scn, math.pi / 2)
        f = B.tensor_factor(scn.zeeman_sublevel_MJ)
        assert within_factor(e.shift / f, want, 1.5)
        assert within_factor(e.broadening_halfwidth, abs(f) * bro, 1.5)
    lt = B.stark_tensor_rf(scn10).long_term_fractional / abs(B.tensor_factor(0.5))
    assert within_factor(lt, 1.4e-17, 1.5)


def test_tensor_magic_angle(scn10):
    assert abs(B.stark_tensor_rf(scn10, math.acos(1 / math.sqrt(3))).shift) < 1e-12


def test_tensor_shares_field_with_scalar(scn10):
    scalar = B.stark_scalar_rf(scn10).shift
    tensor = B.stark_tensor_rf(scn10, 0.0).shift
    e2 = B.rf_field_at_ring(scn10) ** 2
    sp = scn10.species
    assert scalar == pytest.approx(-0.5 * sp.scalar_diff_polarizability * e2 / 2, rel=1e-15)
    assert tensor == pytest.approx(-0.5 * sp.tensor_diff_polarizability * B.tensor_factor(0.5) * e2 / 2,
                                   rel=1e-15)


def test_tensor_dispersion(scn10, scn20):
    assert B.stark_tensor_dispersion(scn10, (0, 0, 1)) < 1e-15
    assert B.stark_tensor_dispersion(scn10, (0, 0, 1), "range") < 1e-15
    for scn, order in ((scn10, 1.0), (scn20, 4.0)):
        assert within_factor(B.stark_tensor_dispersion(scn, (1, 0, 0)), order, 1.5)
    with pytest.raises(ValueError):
        B.stark_tensor_dispersion(scn10, (1, 0, 0), "mad")


def test_ring_field_directions_unit():
    d = B.ring_field_directions(4, 10)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)


# -- Zeeman, BBR, quadrupole --------------------------------------------------

def test_zeeman_entry(scn10):
    e = B.zeeman_entry(scn10)
    assert e.shift == 0.0
    assert e.broadening_halfwidth == pytest.approx(1.32)
    assert B.zeeman_entry(replace(scn10, magnetic_field_fluctuation=0.0)).broadening_halfwidth == 0.0


def test_zeeman_regimes(ca):
    z = B.zeeman_regimes(ca)
    # "of the order of" figures
    assert within_factor(z.relative_fluctuation_hz, 0.013, 1.5)
    assert within_factor(z.relative_fractional, 3e-17, 1.5)
    assert z.absolute_fluctuation_hz == pytest.approx(1.0, abs=0.05)
    assert z.absolute_fractional == pytest.approx(2.5e-15, abs=0.1e-15)


def test_bbr(scn10):
    e = B.bbr_entry(scn10)
    assert e.shift == pytest.approx(0.38)
    assert matches_printed(e.shift, 0.38, 2)
    assert matches_printed(B.BBR_MODEL_FRACTION * e.shift, 0.01, 2)
    assert matches_printed(e.uncertainty, 0.05, 2)
    assert B.bbr_entry(replace(scn10, bbr_temperature=0.0)).shift == 0.0
    assert B.bbr_entry(replace(scn10, bbr_temperature=600.0)).shift == pytest.approx(16 * 0.38)


def test_quadrupole(ca, scn10):
    e = B.quadrupole_entry(scn10)
    assert matches_printed(abs(e.shift), 8.0, 1)
    assert B.quadrupole_coefficient(scn10.trap, ca) == pytest.approx(1.0, rel=0.02)
    fast = TrapConfig(8, 394.4, OMEGA, 200e-6, 2 * OMEGA_Z)
    assert abs(B.quadrupole_entry(replace(scn10, trap=fast, radius_override=True)).shift) == \
        pytest.approx(32.0, rel=0.02)
    # polynomial node at M_J^2 = 35/12
    assert 3 * (35 / 12) - 35 / 4 == pytest.approx(0.0)


def test_quadrupole_extra_dc(scn10):
    e = B.quadrupole_extra_dc_entry(scn10)
    assert e.broadening_halfwidth == 0.04 and e.shift == 0.0


# -- misalignment, stability --------------------------------------------------

def test_misalignment(scn10):
    R = scn10.ring_radius_R
    res = B.misalignment_noise(replace(scn10, laser_waist=2 * R, misalignment=0.27 * R))
    assert res.excitation_dispersion == pytest.approx(0.097, abs=0.001)
    assert res.below_threshold
    assert res.projection_noise == pytest.approx(0.158, abs=0.001)
    assert res.negligible
    assert B.misalignment_noise(scn10).excitation_dispersion == 0.0
    with pytest.raises(B.ScenarioError):
        B.misalignment_noise(replace(scn10, laser_waist=0.0))


def test_allan_deviation():
    s1 = B.allan_deviation(4e14, B.projection_noise_snr(10), 4e-3, 1.0)
    assert s1 == pytest.approx(math.sqrt(4e-3) / (math.pi * 4e14 * math.sqrt(10)), rel=1e-12)
    assert B.allan_deviation(4e14, B.projection_noise_snr(40), 4e-3, 1.0) == pytest.approx(s1 / 2)
    # averaging time to a fixed sigma scales as 1/N
    tau1 = (math.sqrt(4e-3) / (math.pi * 4e14 * 1.0 * s1)) ** 2
    assert tau1 == pytest.approx(10.0)
    with pytest.raises(ValueError):
        B.allan_deviation(0.0, 1.0, 1.0, 1.0)


# -- assembly -----------------------------------------------------------------

def test_budget_closure(scn10):
    b = B.assemble_budget(scn10)
    assert b.total_shift == sum(e.tabulated_shift for e in b.entries)
    assert b.total_broadening == sum(e.broadening_halfwidth for e in b.entries if e.in_broadening_total)
    assert b.total_long_term == max(e.long_term_fractional for e in b.entries)
    q = B.assemble_budget(scn10, "quadrature")
    assert q.total_broadening < b.total_broadening
    with pytest.raises(ValueError):
        _ = B.assemble_budget(scn10, "cubic").total_broadening


def test_budget_totals_20um(scn10):
    b = B.assemble_budget(scn10)
    assert matches_printed(b.total_shift, 18.5, 1)
    assert matches_printed(b.total_broadening, 0.2, 1)
    assert matches_printed(b.total_long_term, 2.5, 1, -15)


def test_budget_totals_40um(scn20):
    b = B.assemble_budget(scn20)
    assert matches_printed(b.total_shift, 49.0, 1)
    assert matches_printed(b.total_broadening, 0.4, 1)
    assert matches_printed(b.total_long_term, 2.5, 1, -15)


def test_degenerate_scenario(scn10):
    z = replace(scn10, ring_radius_R=0.0, magnetic_field_fluctuation=0.0, bbr_temperature=0.0,
                T_radial=0.0, radius_override=True)
    b = B.assemble_budget(z)
    by_name = {(e.effect_name, e.conditions): e for e in b.entries}
    for e in b.entries:
        if e.effect_name in ("Doppler(2e)", "Stark", "Zeeman", "BBR"):
            assert e.shift == 0.0 and e.broadening_halfwidth == 0.0
    assert abs(by_name[("quadrupole", "trapping field")].shift) > 0


def test_sign_convention(scn10):
    for e in B.assemble_budget(scn10).entries:
        assert e.tabulated_shift == abs(e.shift)


@settings(max_examples=30, deadline=None)
@given(R=st.floats(5e-6, 80e-6), wz=st.floats(0.3, 3.0), k=st.integers(3, 8))
def test_scaling_laws(R, wz, k):
    from ionring import builtin_ca40
    sp = builtin_ca40()
    base = B.ClockScenario(TrapConfig(2 * k, 394.4, OMEGA, 200e-6, OMEGA_Z * wz), sp, 10, R,
                           radius_override=True)
    ref = B.ClockScenario(octupole(394.4, 200e-6), sp, 10, 20e-6)
    scale = wz ** 2 * (R / 20e-6) ** 2 * 3 / (k - 1)
    assert B.doppler2_shift(base).shift == pytest.approx(B.doppler2_shift(ref).shift * scale, rel=1e-12)
    assert B.stark_scalar_rf(base).shift == pytest.approx(B.stark_scalar_rf(ref).shift * scale, rel=1e-12)


def test_broadening_scales_with_omega_z_R(ca):
    a = B.ClockScenario(octupole(394.4, 200e-6), ca, 10, 20e-6)
    b = replace(a, ring_radius_R=40e-6, radius_override=True)
    c = replace(a, trap=TrapConfig(8, 394.4, OMEGA, 200e-6, 2 * OMEGA_Z), radius_override=True)
    ref = B.doppler2_shift(a).broadening_halfwidth
    assert B.doppler2_shift(b).broadening_halfwidth == pytest.approx(2 * ref)
    assert B.doppler2_shift(c).broadening_halfwidth == pytest.approx(2 * ref)


def test_ion_loss_inverse_square_law(ca, trap20):
    """Delta eps * N^2 constant to 5% for N in [10, 40] with R growing like N."""
    vals = []
    for n in range(10, 41):
        R = 2e-6 * n
        d = (ring.coulomb_radius_shift_epsilon(trap20, ca, n, R=R)
             - ring.coulomb_radius_shift_epsilon(trap20, ca, n - 1, R=R))
        vals.append(d * n * n)
    vals = np.array(vals)
    assert vals.max() / vals.min() < 1.05
