import numpy as np
import pytest

from ppspdc import (
    Axis,
    EnsembleConfig,
    FitOptions,
    GratingSpec,
    NoRootError,
    ProcessConfig,
    RateTable,
    Spectrum,
    Wave,
    anticorrelation,
    build_ideal,
    amplitude_numeric,
    find_nbpm,
    find_qpm,
    fit_disorder,
    gamma_ratios,
    grating_vector,
    peak_ratio_prediction,
    rate_tables_from_csv,
    run_ensemble,
)
from ppspdc.analysis import _golden_section
from ppspdc.cli import nbpm_sweep_window

# Printed pair rates per mW for the three gratings and the single-domain
# region: R_b, R_f, R_b_QPM, R_f_QPM, R_b_NBPM, R_f_NBPM.
RATES = {
    "grating_1": RateTable(8.52, 1840.0, 0.055, 16.5, 0.16, 123.0),
    "grating_2": RateTable(23.0, 4322.0, 0.060, 25.7, 0.40, 426.0),
    "grating_3": RateTable(33.2, 6599.0, 0.035, 13.1, 0.56, 754.0),
    "single_domain": RateTable(118.0, 23481.0, 0.040, 21.1, 3.13, 3608.0),
}


def test_find_nbpm_golden(forward_532):
    sol = find_nbpm(forward_532, (1.00, 1.08))
    assert sol.signal_um == pytest.approx(1.0378123, abs=1e-4)
    assert sol.order == 0
    assert sol.residual < 1e-9
    # residual re-verified by independent evaluation at the root
    assert abs(float(forward_532.delta_k(sol.signal_um))) < 1e-9
    closure = 1.0 / 0.532 - 1.0 / sol.signal_um - 1.0 / sol.idler_um
    assert abs(closure) < 1e-12


def test_find_nbpm_no_root(forward_532):
    with pytest.raises(NoRootError, match="1.06"):
        find_nbpm(forward_532, (1.06, 1.08))


@pytest.mark.parametrize(
    "period,expected_um",
    [(2.112, 1.0735656), (2.132, 1.0638415), (2.152, 1.0544686)],
)
def test_find_qpm_golden(backward_532, period, expected_um):
    sol = find_qpm(period, backward_532, (1.0, 1.1))
    assert sol.signal_um == pytest.approx(expected_um, abs=1e-4)
    # backward harmonic order frozen from an exhaustive order scan
    assert abs(sol.order) == 7
    assert sol.residual < 1e-9
    dk = float(backward_532.delta_k(sol.signal_um))
    assert abs(dk + grating_vector(sol.order, period)) < 1e-9


def test_find_qpm_monotone_in_period(backward_532):
    roots = [find_qpm(p, backward_532, (1.0, 1.1)).signal_um for p in (2.112, 2.132, 2.152)]
    assert roots[0] > roots[1] > roots[2]


def test_find_qpm_window_refinement_invariance(backward_532):
    wide = find_qpm(2.132, backward_532, (1.0, 1.1))
    narrow = find_qpm(2.132, backward_532, (1.05, 1.08))
    assert abs(wide.signal_um - narrow.signal_um) < 1e-6


def test_find_qpm_no_root_lists_orders(backward_532):
    with pytest.raises(NoRootError) as err:
        find_qpm(2.132, backward_532, (1.0, 1.002), max_order=3)
    message = str(err.value)
    assert "m=+1" in message and "m=-3" in message


def test_nbpm_pump_sweep_continuous(model):
    pumps = np.arange(0.42, 0.6001, 0.002)
    signals, idlers = [], []
    for pump in pumps:
        config = ProcessConfig(pump=Wave(float(pump), Axis.Y), epsilon=+1)
        sol = find_nbpm(config, nbpm_sweep_window(float(pump)))
        signals.append(sol.signal_um)
        idlers.append(sol.idler_um)
    signals, idlers = np.asarray(signals), np.asarray(idlers)
    assert np.all(np.diff(signals) > 0)  # signal branch rises with pump
    assert np.all(np.diff(idlers) < 0)  # idler branch falls
    assert np.max(np.diff(signals)) < 0.02  # continuous at 2 nm pump steps


def test_peak_ratio_prediction_forms():
    pred = peak_ratio_prediction(0.5, 1, 1.0, 1.0)
    assert pred.corrected_form == 0.0
    assert pred.printed_form == pytest.approx((np.pi / 2.0) ** 2, rel=1e-12)
    scaled = peak_ratio_prediction(0.8, 1, 1.0, 2.0)
    base = peak_ratio_prediction(0.8, 1, 1.0, 1.0)
    assert scaled.printed_form == pytest.approx(4.0 * base.printed_form, rel=1e-12)
    assert scaled.corrected_form == pytest.approx(4.0 * base.corrected_form, rel=1e-12)


def test_peak_ratio_prediction_against_numeric(forward_uv):
    # corrected form against the two-peak numeric spectrum of an ideal grating
    duty = 0.8
    spec = GratingSpec(8.9, duty, 10000.0)
    st = build_ideal(spec)
    qpm = find_qpm(8.9, forward_uv, (0.70, 0.90)).signal_um
    nbpm = find_nbpm(forward_uv, (0.50, 0.60)).signal_um
    s_qpm = abs(amplitude_numeric(qpm, st, forward_uv)) ** 2
    s_nbpm = abs(amplitude_numeric(nbpm, st, forward_uv)) ** 2
    pred = peak_ratio_prediction(duty, 1, 1.0, 1.0)
    assert s_nbpm / s_qpm == pytest.approx(pred.corrected_form, rel=0.02)


def test_anticorrelation():
    assert anticorrelation(1000.0, 1e5, 1e5, 1e-7) == pytest.approx(1.0)
    assert anticorrelation(2000.0, 1e5, 1e5, 1e-7) == pytest.approx(2.0)
    assert anticorrelation(0.0, 1e5, 1e5, 1e-7) == 0.0
    with pytest.raises(ZeroDivisionError):
        anticorrelation(10.0, 0.0, 1e5, 1e-7)
    with pytest.raises(ValueError):
        anticorrelation(10.0, 1e5, 1e5, 0.0)


def test_gamma_ratios_printed_values():
    g1, g2, g3 = gamma_ratios(RATES["grating_1"], RATES["single_domain"])
    assert g1 == pytest.approx(1.3e-3, abs=1e-4)
    assert g2 == pytest.approx(4.6e-3, abs=1e-4)
    assert g3 == pytest.approx(1.17264, abs=1e-4)  # prints as 1.18 within input rounding
    sd = gamma_ratios(RATES["single_domain"], RATES["single_domain"])
    assert sd[2] == 1.0


def test_gamma_ratios_zero_denominator():
    bad = RateTable(8.52, 1840.0, 0.055, 16.5, 0.0, 123.0)
    with pytest.raises(ZeroDivisionError, match="R_b_NBPM"):
        gamma_ratios(bad, RATES["single_domain"])


def test_rate_table_csv(tmp_path):
    path = tmp_path / "rates.csv"
    path.write_text(
        "name,R_b,R_f,R_b_QPM,R_f_QPM,R_b_NBPM,R_f_NBPM\n"
        "grating_1,8.52,1840,0.055,16.5,0.16,123\n"
        "single_domain,118,23481,0.040,21.1,3.13,3608\n"
    )
    tables = rate_tables_from_csv(path)
    assert tables["grating_1"] == RATES["grating_1"]
    bad = tmp_path / "bad.csv"
    bad.write_text("name,R_b\nrow,1\n")
    with pytest.raises(ValueError, match="missing columns"):
        rate_tables_from_csv(bad)


def test_golden_section_on_parabola():
    x, fx = _golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, 40)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx < 1e-12


def test_fit_disorder_matched_seeds_small(forward_uv):
    # compact matched-seed self-consistency: exact recovery of both parameters
    qpm = find_qpm(8.9, forward_uv, (0.70, 0.90)).signal_um
    nbpm = find_nbpm(forward_uv, (0.50, 0.60)).signal_um
    grid = np.concatenate(
        [np.linspace(nbpm - 0.008, nbpm + 0.008, 81), np.linspace(qpm - 0.008, qpm + 0.008, 81)]
    )
    base = GratingSpec(8.9, 0.55, 2000.0)
    truth = GratingSpec(8.9, 0.6, 2000.0, sigma_um=0.45)
    options = FitOptions(
        duty_bounds=(0.5, 0.7),
        sigma_bounds_um=(0.15, 0.75),
        coarse_points=(5, 5),
        refine_iterations=10,
        refine_passes=2,
        realizations=6,
        seed=404,
    )
    stats = run_ensemble(
        EnsembleConfig(grating=truth, process=forward_uv, grid_um=grid, count=6, master_seed=404)
    )
    measured = Spectrum(grid, stats.mean / np.max(stats.mean))
    fit = fit_disorder(measured, base, forward_uv, options)
    assert fit.duty_cycle == pytest.approx(0.6, abs=2e-3)
    assert fit.sigma_um == pytest.approx(0.45, abs=2e-3)
    assert fit.residual < 1e-12


def test_fit_disorder_deterministic(forward_uv):
    grid = np.linspace(0.79, 0.80, 41)
    base = GratingSpec(8.9, 0.6, 1500.0)
    truth = GratingSpec(8.9, 0.6, 1500.0, sigma_um=0.3)
    stats = run_ensemble(
        EnsembleConfig(grating=truth, process=forward_uv, grid_um=grid, count=4, master_seed=11)
    )
    measured = Spectrum(grid, stats.mean / np.max(stats.mean))
    options = FitOptions(
        duty_bounds=(0.55, 0.65),
        sigma_bounds_um=(0.1, 0.5),
        coarse_points=(3, 3),
        refine_iterations=5,
        refine_passes=1,
        realizations=3,
        seed=5,
    )
    a = fit_disorder(measured, base, forward_uv, options)
    b = fit_disorder(measured, base, forward_uv, options)
    assert (a.duty_cycle, a.sigma_um, a.residual) == (b.duty_cycle, b.sigma_um, b.residual)
