"""Seeded Monte Carlo ensembles over random-boundary gratings.

Every realization i draws its generator from a child seed derived as
SeedSequence(master_seed, spawn_key=(i,)) feeding a Philox counter-based
generator, so any member is reproducible in isolation and results are
identical however the realizations are scheduled.  Reductions accumulate in
index order with Neumaier-compensated sums.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .amplitude import (
    PeakMetrics,
    ProcessConfig,
    Spectrum,
    amplitude_numeric,
    peak_metrics,
    spectral_density,
)
from .grating import GratingSpec, build_ideal, perturb

__all__ = [
    "EnsembleConfig",
    "EnsembleStatistics",
    "child_rng",
    "run_ensemble",
    "single_realization",
    "reduction_summary",
]


def child_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for realization ``index`` of a master seed."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


class _CompensatedAccumulator:
    """Pointwise Neumaier-compensated running sum over arrays."""

    def __init__(self, size: int):
        self.total = np.zeros(size)
        self._comp = np.zeros(size)

    def add(self, values: np.ndarray) -> None:
        t = self.total + values
        swap = np.abs(self.total) >= np.abs(values)
        self._comp += np.where(swap, (self.total - t) + values, (values - t) + self.total)
        self.total = t

    def result(self) -> np.ndarray:
        return self.total + self._comp


@dataclass(frozen=True)
class EnsembleConfig:
    """Base grating, process, wavelength grid, realization count and master seed."""

    grating: GratingSpec
    process: ProcessConfig
    grid_um: np.ndarray
    count: int
    master_seed: int = 0

    def __post_init__(self):
        g = np.ascontiguousarray(self.grid_um, dtype=float)
        if g.ndim != 1 or g.size < 1 or np.any(np.diff(g) <= 0.0):
            raise ValueError("grid must be a strictly increasing 1-d array")
        g.setflags(write=False)
        object.__setattr__(self, "grid_um", g)
        if self.count < 1:
            raise ValueError(f"realization count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class EnsembleStatistics:
    """Pointwise mean/std/sem of S plus per-realization peak metrics and seeds."""

    grid_um: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    sem: np.ndarray
    realization_peaks: tuple
    child_seeds: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.child_seeds)


def _realization_density(config: EnsembleConfig, ideal, index: int) -> np.ndarray:
    structure = ideal
    if config.grating.sigma_um > 0.0:
        structure = perturb(
            ideal,
            config.grating.sigma_um,
            child_rng(config.master_seed, index),
            convention=config.grating.sigma_convention,
        )
    return spectral_density(amplitude_numeric(config.grid_um, structure, config.process))


def run_ensemble(config: EnsembleConfig, threads: int = 1) -> EnsembleStatistics:
    """Build, perturb and evaluate ``count`` realizations, reduced pointwise.

    The reduction runs in realization-index order whatever ``threads`` is, so
    the statistics are bit-identical across worker counts.
    """
    ideal = build_ideal(config.grating)
    n, grid = config.count, config.grid_um

    if config.grating.sigma_um == 0.0:
        # all realizations are the same spectrum; mean is exact, spread is zero
        densities = [_realization_density(config, ideal, 0)] * n
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            densities = list(
                pool.map(lambda i: _realization_density(config, ideal, i), range(n))
            )
    else:
        densities = [_realization_density(config, ideal, i) for i in range(n)]

    acc = _CompensatedAccumulator(grid.size)
    acc_sq = _CompensatedAccumulator(grid.size)
    peaks = []
    for i in range(n):
        s = densities[i]
        acc.add(s)
        acc_sq.add(s * s)
        peaks.append(peak_metrics(Spectrum(grid, s)) if grid.size >= 3 else None)

    if config.grating.sigma_um == 0.0 or n == 1:
        mean = densities[0]
        var = np.zeros(grid.size)
    else:
        total = acc.result()
        mean = total / n
        var = np.maximum(acc_sq.result() - total * total / n, 0.0) / (n - 1)
    std = np.sqrt(var)
    seeds = tuple(f"SeedSequence(entropy={config.master_seed}, spawn_key=({i},))" for i in range(n))
    meta = {
        "count": n,
        "master_seed": config.master_seed,
        "process_digest": config.process.digest(),
        "period_um": config.grating.period_um,
        "duty_cycle": config.grating.duty_cycle,
        "length_um": config.grating.length_um,
        "sigma_um": config.grating.sigma_um,
        "sigma_convention": config.grating.sigma_convention,
    }
    return EnsembleStatistics(
        grid_um=grid,
        mean=mean,
        std=std,
        sem=std / np.sqrt(n),
        realization_peaks=tuple(peaks),
        child_seeds=seeds,
        metadata=meta,
    )


def single_realization(config: EnsembleConfig, index: int) -> Spectrum:
    """Exactly the index-th member of ``run_ensemble`` on the same config."""
    if not 0 <= index < config.count:
        raise IndexError(f"realization index {index} out of range [0, {config.count})")
    ideal = build_ideal(config.grating)
    density = _realization_density(config, ideal, index)
    meta = {
        "method": "numeric",
        "master_seed": config.master_seed,
        "realization_index": index,
        "sigma_um": config.grating.sigma_um,
    }
    return Spectrum(wavelengths_um=config.grid_um, density=density, metadata=meta)


def _window_peak(grid, values, window):
    lo, hi = window
    sel = (grid >= lo) & (grid <= hi)
    if not np.any(sel):
        raise ValueError(f"window [{lo}, {hi}] um contains no grid points")
    idx = np.nonzero(sel)[0]
    j = idx[int(np.argmax(values[idx]))]
    return j


def reduction_summary(
    stats: EnsembleStatistics,
    reference: Spectrum,
    nbpm_window_um: tuple[float, float] | None = None,
    qpm_window_um: tuple[float, float] | None = None,
) -> dict:
    """Peak of the ensemble-mean spectrum against a disorder-free reference.

    Reports the mean-peak / reference-peak reduction factor with its standard
    error, and, when both windows are given, the ratio of the mean spectrum's
    local peaks (birefringent-matched over grating-matched) with propagated
    standard error.
    """
    if reference.wavelengths_um.shape != stats.grid_um.shape or np.any(
        reference.wavelengths_um != stats.grid_um
    ):
        raise ValueError("reference spectrum must share the ensemble grid")

    j_peak = int(np.argmax(stats.mean))
    ref_peak = reference.peak_density()
    reduction = float(stats.mean[j_peak] / ref_peak)
    out = {
        "mean_peak": float(stats.mean[j_peak]),
        "mean_peak_wavelength_um": float(stats.grid_um[j_peak]),
        "reference_peak": ref_peak,
        "peak_reduction_factor": reduction,
        "peak_reduction_se": float(stats.sem[j_peak] / ref_peak),
        "count": stats.count,
    }
    if nbpm_window_um is not None and qpm_window_um is not None:
        j_n = _window_peak(stats.grid_um, stats.mean, nbpm_window_um)
        j_q = _window_peak(stats.grid_um, stats.mean, qpm_window_um)
        ratio = float(stats.mean[j_n] / stats.mean[j_q])
        rel = np.hypot(
            stats.sem[j_n] / stats.mean[j_n], stats.sem[j_q] / stats.mean[j_q]
        )
        out.update(
            nbpm_peak=float(stats.mean[j_n]),
            nbpm_peak_wavelength_um=float(stats.grid_um[j_n]),
            qpm_peak=float(stats.mean[j_q]),
            qpm_peak_wavelength_um=float(stats.grid_um[j_q]),
            nbpm_over_qpm=ratio,
            nbpm_over_qpm_se=float(ratio * rel),
        )
    return out
