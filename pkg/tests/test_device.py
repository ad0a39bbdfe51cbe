import math

import pytest

from freqbs.device import (
    SPEED_OF_LIGHT,
    AcousticDrive,
    AOMGeometry,
    CrystalParams,
    bandwidth_ratio,
    conversion_efficiency,
    coupling_eta,
    interaction_R,
    material,
    materials,
    required_intensity,
)
from freqbs.errors import SingularityError, ValidationError


def test_material_table_loads():
    table = materials()
    assert {"GaP", "TeO2", "LiNbO3", "fused_silica"} <= set(table)
    for crystal in table.values():
        assert crystal.citation


def test_gap_figure_of_merit_matches_tabulated():
    assert material("GaP").figure_of_merit == pytest.approx(44.6e-15, rel=0.01)


def test_unknown_material():
    with pytest.raises(ValidationError):
        material("unobtainium")


def test_parameters_must_be_positive():
    with pytest.raises(ValidationError):
        AOMGeometry(0.0)
    with pytest.raises(ValidationError):
        AcousticDrive(-1.0, 1e9)
    with pytest.raises(ValidationError):
        CrystalParams(2.0, 0.1, -1.0, 1000.0)


def test_eta_closed_form():
    c = CrystalParams(2.0, 0.25, 5000.0, 4000.0)
    drive = AcousticDrive(1e6, 1e9)
    omega = 2e15
    m2 = 2.0**6 * 0.25**2 / (5000.0 * 4000.0**3)
    expected = omega / (2 * math.sqrt(2) * SPEED_OF_LIGHT) * math.sqrt(m2 * 1e6)
    assert coupling_eta(c, drive, omega) == pytest.approx(expected, rel=1e-14)


def test_R_is_eta_l_over_omega():
    c, g, d = material("TeO2"), AOMGeometry(2e-3), AcousticDrive(3e5, 1e9)
    omega = 2 * math.pi * 3e14
    assert interaction_R(c, d, g) == pytest.approx(coupling_eta(c, d, omega) * 2e-3 / omega, rel=1e-12)


def test_required_intensity_round_trip():
    c, g = material("GaP"), AOMGeometry(1e-3)
    omega = 2 * math.pi * 3.26e14
    intensity = required_intensity(math.pi / 4, c, g, omega)
    theta = coupling_eta(c, AcousticDrive(intensity, 1e9), omega) * g.interaction_length
    assert theta == pytest.approx(math.pi / 4, rel=1e-12)
    with pytest.raises(ValidationError):
        required_intensity(2.0, c, g, omega)


def test_conversion_efficiency_values():
    assert conversion_efficiency(0.0) == 0.0
    assert conversion_efficiency(math.pi / 6) == pytest.approx(0.25)


def test_bandwidth_ratio_zero_detuning():
    r = bandwidth_ratio(1.0e15, 0.0, 1e-15)
    assert r.exact == pytest.approx(1.0) and r.first_order == pytest.approx(1.0)


def test_bandwidth_singular_reference():
    with pytest.raises(SingularityError):
        bandwidth_ratio(math.pi * 1e15, 1e9, 1e-15)


def test_bandwidth_error_is_second_order():
    omega, R = 1e15, 1e-15
    errs = [bandwidth_ratio(omega, dr / R, R).error for dr in (1e-3, 5e-4, 2.5e-4)]
    for big, small in zip(errs, errs[1:]):
        assert big / small == pytest.approx(4.0, rel=0.01)


def test_gap_R_scale_depends_on_intensity_reading():
    # R scales as sqrt(I): 1 W/mm^2 gives ~2.5e-16 s, 1e-6 W/m^2 is twelve decades lower in I
    gap, length = material("GaP"), AOMGeometry(1e-3)
    r_high = interaction_R(gap, AcousticDrive(1e6, 1e9), length)
    r_low = interaction_R(gap, AcousticDrive(1e-6, 1e9), length)
    assert 1e-16 < r_high < 1e-15
    assert r_high / r_low == pytest.approx(1e6, rel=1e-9)
