import numpy as np
import pytest

from ppspdc import (
    DomainStructure,
    GratingSpec,
    build_ideal,
    duty_cycle_estimate,
    fourier_coefficient,
    grating_vector,
    perturb,
    structure_from_csv,
    structure_to_csv,
)
from ppspdc.ensemble import child_rng


def square_wave_coefficient(m, duty, period=2.0, samples=None):
    """Independent oracle: exact piecewise integral of the built first period.

    (1/P) int_0^P dtilde(z) e^{-i K_m z} dz with dtilde = +1 on [0, D P) and
    -1 on [D P, P), evaluated in closed form per segment.
    """
    k_m = 2.0 * np.pi * m / period
    edges = [(0.0, duty * period, +1.0), (duty * period, period, -1.0)]
    if m == 0:
        return sum(s * (b - a) for a, b, s in edges) / period
    total = 0.0j
    for a, b, s in edges:
        total += s * (np.exp(-1j * k_m * b) - np.exp(-1j * k_m * a)) / (-1j * k_m)
    return total / period


def test_fourier_coefficient_trivial_values():
    assert fourier_coefficient(0, 0.5) == 0.0
    assert fourier_coefficient(1, 0.5) == pytest.approx(2.0 / np.pi, rel=1e-15)
    assert abs(fourier_coefficient(2, 0.5)) < 1e-15
    assert fourier_coefficient(1, 0.8) == pytest.approx(0.374195713515455613, rel=1e-12)
    assert fourier_coefficient(0, 0.8) == pytest.approx(0.6, rel=1e-15)


@pytest.mark.parametrize("duty", [0.5, 0.6, 0.8, 0.25])
@pytest.mark.parametrize("m", [0, 1, 2, 3, 7])
def test_fourier_coefficient_against_integral(m, duty):
    # the zero-phase coefficient equals the integral's magnitude and alignment
    # phase exp(-i pi m D) of the z=0-aligned profile
    oracle = square_wave_coefficient(m, duty)
    aligned = fourier_coefficient(m, duty) * np.exp(-1j * np.pi * m * duty)
    assert abs(aligned - oracle) < 1e-10


def test_parseval_partial_sum():
    m = np.arange(1, 10001)
    for duty in (0.5, 0.6, 0.8):
        total = fourier_coefficient(0, duty) ** 2 + np.sum(
            2.0 * (2.0 * np.sin(np.pi * m * duty) / (np.pi * m)) ** 2
        )
        assert total == pytest.approx(1.0, abs=1e-4)


def test_grating_vector():
    assert grating_vector(1, 2.132) == pytest.approx(2.94708504089098803, rel=1e-12)
    assert grating_vector(0, 2.132) == 0.0
    assert grating_vector(-1, 2.132) == -grating_vector(1, 2.132)
    with pytest.raises(ValueError):
        grating_vector(1, 0.0)


def test_build_ideal_uniform():
    st = build_ideal(GratingSpec(2.0, 0.5, 10.0))
    assert st.domain_count == 10
    assert np.allclose(st.domain_lengths(), 1.0)
    assert st.signs()[0] == 1 and st.signs()[1] == -1


def test_build_ideal_asymmetric_duty():
    st = build_ideal(GratingSpec(2.0, 0.25, 2.0))
    assert np.allclose(st.boundaries, [0.0, 0.5, 2.0])
    assert np.allclose(st.domain_lengths(), [0.5, 1.5])


def test_build_ideal_truncated_crystal():
    spec = GratingSpec(2.132, 0.5, 11000.0)
    st = build_ideal(spec)
    full = int(11000.0 // 2.132)
    assert full == 5159
    assert st.boundaries[0] == 0.0 and st.boundaries[-1] == 11000.0
    assert st.domain_count == 2 * full + 1
    assert duty_cycle_estimate(st) == pytest.approx(0.5, abs=1.0 / full)


def test_perturb_zero_sigma_identity():
    st = build_ideal(GratingSpec(2.132, 0.5, 100.0))
    out = perturb(st, 0.0, child_rng(0, 0))
    assert out is st


def test_perturb_deterministic():
    st = build_ideal(GratingSpec(2.132, 0.5, 2000.0))
    a = perturb(st, 0.3, child_rng(42, 0))
    b = perturb(st, 0.3, child_rng(42, 0))
    assert np.array_equal(a.boundaries, b.boundaries)


def test_perturb_preserves_length_and_count():
    st = build_ideal(GratingSpec(2.132, 0.6, 5000.0))
    out = perturb(st, 0.4, child_rng(7, 0))
    assert out.boundaries[-1] == st.boundaries[-1]
    assert out.boundaries.size == st.boundaries.size
    assert np.all(np.diff(out.boundaries) > 0)


def test_perturb_displacement_statistics_default_convention():
    # under the domain-length convention the boundary displacements carry
    # sigma/sqrt(2) and the domain-length errors carry sigma itself
    st = build_ideal(GratingSpec(2.132, 0.5, 11000.0))
    out = perturb(st, 0.3, child_rng(2024, 0), convention="domain-length")
    disp = out.boundaries[1:-1] - st.boundaries[1:-1]
    assert disp.size > 10000
    assert 0.29 / np.sqrt(2.0) < disp.std(ddof=1) < 0.31 / np.sqrt(2.0)
    length_err = out.domain_lengths() - st.domain_lengths()
    assert 0.29 < length_err.std(ddof=1) < 0.31


def test_perturb_displacement_statistics_boundary_convention():
    st = build_ideal(GratingSpec(2.132, 0.5, 11000.0))
    out = perturb(st, 0.3, child_rng(2024, 0), convention="boundary")
    disp = out.boundaries[1:-1] - st.boundaries[1:-1]
    assert 0.29 < disp.std(ddof=1) < 0.31


def test_perturb_repair_is_total():
    # sigma comparable to the period forces many collisions; repair must hold
    st = build_ideal(GratingSpec(2.0, 0.5, 400.0))
    out = perturb(st, 2.5, child_rng(3, 0))
    gaps = np.diff(out.boundaries)
    assert np.all(gaps >= 1e-3 - 1e-12)
    assert out.boundaries[-1] == 400.0


def test_duty_cycle_estimate():
    st = build_ideal(GratingSpec(2.0, 0.8, 2000.0))
    assert duty_cycle_estimate(st) == pytest.approx(0.8, abs=1e-3)
    single = DomainStructure(boundaries=np.array([0.0, 123.0]))
    assert duty_cycle_estimate(single) == 1.0


def test_duty_cycle_estimate_perturbed_mean():
    spec = GratingSpec(2.132, 0.5, 11000.0)
    st = build_ideal(spec)
    estimates = [
        duty_cycle_estimate(perturb(st, 0.3, child_rng(9, i))) for i in range(8)
    ]
    assert np.mean(estimates) == pytest.approx(0.5, abs=2e-3)


def test_spec_validation():
    with pytest.raises(ValueError):
        GratingSpec(2.0, 0.0, 10.0)
    with pytest.raises(ValueError):
        GratingSpec(2.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        GratingSpec(2.0, 0.5, 10.0, sigma_um=-0.1)
    with pytest.raises(ValueError):
        GratingSpec(2.0, 0.5, 10.0, sigma_convention="nonsense")


def test_structure_validation():
    with pytest.raises(ValueError):
        DomainStructure(boundaries=np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        DomainStructure(boundaries=np.array([0.5, 1.0]))


def test_structure_csv_roundtrip(tmp_path):
    st = perturb(build_ideal(GratingSpec(2.132, 0.6, 50.0)), 0.1, child_rng(5, 0))
    path = tmp_path / "structure.csv"
    structure_to_csv(st.flipped(), path)
    back = structure_from_csv(path)
    assert back.start_sign == -1
    assert np.allclose(back.boundaries, st.boundaries, rtol=0, atol=1e-9)
