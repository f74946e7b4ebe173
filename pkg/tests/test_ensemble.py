import numpy as np
import pytest

from ppspdc import (
    EnsembleConfig,
    GratingSpec,
    Spectrum,
    child_rng,
    compute_spectrum,
    find_qpm,
    reduction_summary,
    run_ensemble,
    single_realization,
)
from ppspdc.ensemble import _CompensatedAccumulator


@pytest.fixture(scope="module")
def small_config(forward_uv):
    qpm = find_qpm(8.9, forward_uv, (0.70, 0.90)).signal_um
    grid = np.linspace(qpm - 0.002, qpm + 0.002, 101)
    grating = GratingSpec(8.9, 0.6, 2000.0, sigma_um=0.5)
    return EnsembleConfig(
        grating=grating, process=forward_uv, grid_um=grid, count=24, master_seed=99
    )


def test_compensated_accumulator_matches_fsum():
    import math

    rng = np.random.default_rng(0)
    values = rng.lognormal(0.0, 4.0, size=(500, 3))
    acc = _CompensatedAccumulator(3)
    for row in values:
        acc.add(row)
    for j in range(3):
        exact = math.fsum(values[:, j])
        assert acc.result()[j] == pytest.approx(exact, rel=1e-15)


def test_zero_sigma_single_realization_matches_ideal(forward_uv, small_config):
    grating = GratingSpec(8.9, 0.6, 2000.0, sigma_um=0.0)
    config = EnsembleConfig(
        grating=grating,
        process=forward_uv,
        grid_um=small_config.grid_um,
        count=1,
        master_seed=7,
    )
    stats = run_ensemble(config)
    ideal = compute_spectrum(small_config.grid_um, grating, forward_uv, method="numeric")
    assert np.array_equal(stats.mean, ideal.density)
    assert np.all(stats.std == 0.0)


def test_ensemble_deterministic_and_thread_invariant(small_config):
    a = run_ensemble(small_config, threads=1)
    b = run_ensemble(small_config, threads=1)
    c = run_ensemble(small_config, threads=3)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
    assert np.array_equal(a.mean, c.mean) and np.array_equal(a.std, c.std)


def test_single_realization_consistency(small_config):
    stats = run_ensemble(small_config)
    one = single_realization(small_config, 5)
    again = single_realization(small_config, 5)
    assert np.array_equal(one.density, again.density)
    peak = stats.realization_peaks[5]
    assert peak.density == pytest.approx(np.max(one.density), rel=1e-15)
    with pytest.raises(IndexError):
        single_realization(small_config, small_config.count)


def test_child_seeds_recorded(small_config):
    stats = run_ensemble(small_config)
    assert len(stats.child_seeds) == small_config.count
    assert "spawn_key=(5,)" in stats.child_seeds[5]


def test_mean_linearity_over_seed_ranges(forward_uv, small_config):
    # the mean over 24 realizations equals the average of the two half-range
    # means (same children, disjoint index ranges)
    stats = run_ensemble(small_config)
    halves = []
    for index_range in (range(0, 12), range(12, 24)):
        densities = [single_realization(small_config, i).density for i in index_range]
        halves.append(np.mean(densities, axis=0))
    combined = 0.5 * (halves[0] + halves[1])
    assert np.allclose(stats.mean, combined, rtol=1e-13, atol=0)


def test_relative_spread_stabilizes(forward_uv, small_config):
    ratios = []
    for count in (12, 24, 48):
        config = EnsembleConfig(
            grating=small_config.grating,
            process=forward_uv,
            grid_um=small_config.grid_um,
            count=count,
            master_seed=99,
        )
        stats = run_ensemble(config)
        j = int(np.argmax(stats.mean))
        ratios.append(stats.std[j] / stats.mean[j])
    assert max(ratios) < 3.0 * min(ratios)


def test_reduction_summary_identity(forward_uv, small_config):
    grating = GratingSpec(8.9, 0.6, 2000.0, sigma_um=0.0)
    config = EnsembleConfig(
        grating=grating,
        process=forward_uv,
        grid_um=small_config.grid_um,
        count=3,
        master_seed=1,
    )
    stats = run_ensemble(config)
    reference = compute_spectrum(small_config.grid_um, grating, forward_uv)
    summary = reduction_summary(stats, reference)
    assert summary["peak_reduction_factor"] == 1.0
    assert summary["peak_reduction_se"] == 0.0


def test_reduction_summary_grid_mismatch(small_config, forward_uv):
    stats = run_ensemble(small_config)
    other = Spectrum(small_config.grid_um[:-1], np.ones(small_config.grid_um.size - 1))
    with pytest.raises(ValueError):
        reduction_summary(stats, other)


def test_config_validation(forward_uv):
    grid = np.linspace(0.79, 0.80, 11)
    with pytest.raises(ValueError):
        EnsembleConfig(
            grating=GratingSpec(8.9, 0.6, 2000.0),
            process=forward_uv,
            grid_um=grid,
            count=0,
        )
    with pytest.raises(ValueError):
        EnsembleConfig(
            grating=GratingSpec(8.9, 0.6, 2000.0),
            process=forward_uv,
            grid_um=grid[::-1],
            count=2,
        )


def test_child_rng_streams_differ():
    a = child_rng(5, 0).standard_normal(4)
    b = child_rng(5, 1).standard_normal(4)
    c = child_rng(5, 0).standard_normal(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)
