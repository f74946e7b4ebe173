"""Phase-matching solvers, rate-ratio diagnostics and disorder-parameter fitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .amplitude import ProcessConfig, Spectrum
from .dispersion import idler_wavelength
from .ensemble import EnsembleConfig, run_ensemble
from .grating import GratingSpec, fourier_coefficient, grating_vector

__all__ = [
    "NoRootError",
    "FitError",
    "PhaseMatchSolution",
    "find_nbpm",
    "find_qpm",
    "PeakRatioPrediction",
    "peak_ratio_prediction",
    "anticorrelation",
    "RateTable",
    "gamma_ratios",
    "rate_tables_from_csv",
    "FitOptions",
    "DisorderFit",
    "fit_disorder",
]

#: Bisection target on |dk + K_m| [rad/um].
RESIDUAL_TOL = 1.0e-9

#: Initial sign-change scan step [um] (0.1 nm).
SCAN_STEP_UM = 1.0e-4


class NoRootError(RuntimeError):
    """No bracketed sign change in the scanned window."""


class FitError(RuntimeError):
    """Disorder fit objective could not be evaluated."""


@dataclass(frozen=True)
class PhaseMatchSolution:
    """Signal/idler wavelengths solving dk + K_m = 0 (m = 0 for birefringent matching)."""

    signal_um: float
    idler_um: float
    order: int
    residual: float


def _bisect(f, lo: float, hi: float, ftol: float) -> float:
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise NoRootError(f"no sign change in [{lo:.6g}, {hi:.6g}] um")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) < ftol or hi - lo < 1e-15:
            return mid
        if f_lo * f_mid <= 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def _scan_grid(window_um: tuple[float, float]) -> np.ndarray:
    lo, hi = window_um
    if not hi > lo:
        raise ValueError(f"invalid window [{lo}, {hi}] um")
    n = max(int(np.ceil((hi - lo) / SCAN_STEP_UM)), 2)
    return np.linspace(lo, hi, n + 1)


def find_nbpm(config: ProcessConfig, window_um: tuple[float, float]) -> PhaseMatchSolution:
    """Root of dk = 0 (birefringent phase matching, forward type-II).

    Scans the window in 0.1 nm steps for a sign change, then bisects to
    |dk| < 1e-9 rad/um.  The first (shortest-wavelength) crossing is returned.
    """
    grid = _scan_grid(window_um)
    vals = np.asarray(config.delta_k(grid))
    change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0.0)[0]
    if change.size == 0:
        raise NoRootError(
            f"dk has no zero crossing in [{window_um[0]:.6g}, {window_um[1]:.6g}] um "
            f"(dk range [{vals.min():.6g}, {vals.max():.6g}] rad/um)"
        )
    j = int(change[0])
    root = _bisect(lambda lam: float(config.delta_k(lam)), grid[j], grid[j + 1], RESIDUAL_TOL)
    return PhaseMatchSolution(
        signal_um=root,
        idler_um=idler_wavelength(config.pump.wavelength_um, root),
        order=0,
        residual=abs(float(config.delta_k(root))),
    )


def find_qpm(
    period_um: float,
    config: ProcessConfig,
    window_um: tuple[float, float],
    max_order: int = 15,
) -> PhaseMatchSolution:
    """Smallest-|m| root of dk + K_m = 0 in the window, scanning m = +/-1 .. +/-max_order.

    The mismatch is evaluated once over the scan grid; each signed harmonic
    only shifts it by the constant K_m.  On failure the error lists the
    per-order extrema of dk + K_m so the caller can see how far off each
    harmonic is.
    """
    grid = _scan_grid(window_um)
    dk = np.asarray(config.delta_k(grid))
    extrema = []
    for n in range(1, max_order + 1):
        for m in (n, -n):
            k_m = grating_vector(m, period_um)
            vals = dk + k_m
            change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0.0)[0]
            if change.size == 0:
                extrema.append((m, float(vals.min()), float(vals.max())))
                continue
            j = int(change[0])
            root = _bisect(
                lambda lam: float(config.delta_k(lam)) + k_m, grid[j], grid[j + 1], RESIDUAL_TOL
            )
            return PhaseMatchSolution(
                signal_um=root,
                idler_um=idler_wavelength(config.pump.wavelength_um, root),
                order=m,
                residual=abs(float(config.delta_k(root)) + k_m),
            )
    table = "; ".join(f"m={m:+d}: [{lo:.4g}, {hi:.4g}]" for m, lo, hi in extrema)
    raise NoRootError(
        f"no order |m| <= {max_order} admits a root of dk + K_m in "
        f"[{window_um[0]:.6g}, {window_um[1]:.6g}] um; per-order extrema (rad/um): {table}"
    )


@dataclass(frozen=True)
class PeakRatioPrediction:
    """Predicted birefringent-peak to grating-peak density ratio, both conventions.

    ``printed_form`` uses the DC coefficient 2D of the plain series term,
    kappa1^2 / (kappa0^2 sinc^2(pi n D)).  ``corrected_form`` uses the exact
    DC component 2D - 1 of a +/-1 profile:
    kappa1^2 (2D-1)^2 / (kappa0^2 [2 sin(pi n D)/(pi n)]^2).
    The corrected form matches the numeric spectra; both are reported for
    transparency.
    """

    printed_form: float
    corrected_form: float


def peak_ratio_prediction(
    duty_cycle: float, order: int, kappa0: float, kappa1: float
) -> PeakRatioPrediction:
    if not 0.0 < duty_cycle < 1.0:
        raise ValueError(f"duty cycle must be in (0, 1), got {duty_cycle}")
    if order < 1:
        raise ValueError(f"harmonic order must be >= 1, got {order}")
    x = np.pi * order * duty_cycle
    sinc = np.sin(x) / x
    printed = (kappa1 / kappa0) ** 2 / sinc**2
    c_n = fourier_coefficient(order, duty_cycle)
    c_0 = fourier_coefficient(0, duty_cycle)
    corrected = (kappa1 / kappa0) ** 2 * c_0**2 / c_n**2
    return PeakRatioPrediction(printed_form=float(printed), corrected_form=float(corrected))


def anticorrelation(r_coincidence: float, r_signal: float, r_idler: float, tau_s: float) -> float:
    """alpha = R_c / (tau R_s R_i); equals 1 for a classical (random) source."""
    if min(r_coincidence, r_signal, r_idler) < 0.0:
        raise ValueError("rates must be nonnegative")
    if tau_s <= 0.0:
        raise ValueError(f"coincidence window must be positive, got {tau_s}")
    denom = tau_s * r_signal * r_idler
    if denom == 0.0:
        raise ZeroDivisionError("anticorrelation undefined: tau * R_s * R_i is zero")
    return r_coincidence / denom


@dataclass(frozen=True)
class RateTable:
    """Pair rates per mW of pump: broadband, grating-filtered and 1-nm-filtered,
    for counter- (b) and co-propagating (f) collection."""

    R_b: float
    R_f: float
    R_b_QPM: float
    R_f_QPM: float
    R_b_NBPM: float
    R_f_NBPM: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0.0:
        raise ZeroDivisionError(f"{what} undefined: denominator is zero")
    return num / den


def gamma_ratios(grating: RateTable, single_domain: RateTable) -> tuple[float, float, float]:
    """(gamma1, gamma2, gamma3) back-reflection diagnostics.

    gamma1 = R_b_NBPM / R_f_NBPM and gamma2 = R_b / R_f measure the
    back-reflected fraction of co-propagating pairs; gamma3 compares the
    QPM/NBPM proportions between the two collection directions, normalized to
    the same quantity in the single-domain region.
    """
    g1 = _ratio(grating.R_b_NBPM, grating.R_f_NBPM, "gamma1 (R_f_NBPM)")
    g2 = _ratio(grating.R_b, grating.R_f, "gamma2 (R_f)")

    def proportion(t: RateTable) -> float:
        num = _ratio(t.R_b_QPM, t.R_b_NBPM, "gamma3 (R_b_NBPM)")
        den = _ratio(t.R_f_QPM, t.R_f_NBPM, "gamma3 (R_f_NBPM)")
        return _ratio(num, den, "gamma3 (R_f_QPM/R_f_NBPM)")

    g3 = _ratio(proportion(grating), proportion(single_domain), "gamma3 (single-domain value)")
    return g1, g2, g3


def rate_tables_from_csv(path) -> dict[str, RateTable]:
    """Load named rate rows; header must carry the six RateTable field names."""
    fields = list(RateTable.__dataclass_fields__)
    out: dict[str, RateTable] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = [f for f in fields if f not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"rate CSV missing columns: {', '.join(missing)}")
        for row in reader:
            name = row.get("name") or f"row{len(out)}"
            out[name] = RateTable(**{f: float(row[f]) for f in fields})
    return out


def _golden_section(f, lo: float, hi: float, iterations: int) -> tuple[float, float]:
    """Deterministic golden-section minimum of a unimodal-ish objective."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


@dataclass(frozen=True)
class FitOptions:
    """Search bounds and budget for the (duty, sigma) disorder fit."""

    duty_bounds: tuple[float, float] = (0.4, 0.95)
    sigma_bounds_um: tuple[float, float] = (0.0, 1.5)
    coarse_points: tuple[int, int] = (7, 7)
    refine_iterations: int = 12
    refine_passes: int = 2
    realizations: int = 16
    seed: int = 20_000


@dataclass(frozen=True)
class DisorderFit:
    """Arg-min of the seeded ensemble-mean objective over (duty, sigma)."""

    duty_cycle: float
    sigma_um: float
    residual: float
    evaluations: int
    metadata: dict = field(default_factory=dict)


def fit_disorder(
    measured: Spectrum,
    base: GratingSpec,
    config: ProcessConfig,
    options: FitOptions = FitOptions(),
) -> DisorderFit:
    """Least-squares match of a unit-peak spectrum by a simulated ensemble mean.

    The objective at (D, sigma) is the squared distance between the measured
    spectrum and the ensemble-mean spectrum over the same grid, both
    normalized to unit peak.  Every evaluation reuses the same child-seed set
    (derived from options.seed), so the objective is deterministic and smooth
    in sigma.  Search: coarse grid, then golden-section refinement on each
    axis in turn.

    Normalized spectra are exactly invariant under D -> 1 - D (a duty-mirrored
    profile is a shifted sign flip), so duty is only identifiable up to that
    mirror; restrict duty_bounds to one side of 0.5 to pick a branch.
    """
    peak = measured.peak_density()
    if not np.isfinite(peak) or peak <= 0.0:
        raise FitError("measured spectrum has no positive peak to normalize by")
    target = measured.density / peak
    grid = measured.wavelengths_um

    cache: dict[tuple[float, float], float] = {}

    def objective(duty: float, sigma: float) -> float:
        key = (round(duty, 12), round(sigma, 12))
        if key in cache:
            return cache[key]
        spec = replace(base, duty_cycle=duty, sigma_um=sigma)
        stats = run_ensemble(
            EnsembleConfig(
                grating=spec,
                process=config,
                grid_um=grid,
                count=options.realizations,
                master_seed=options.seed,
            )
        )
        top = float(np.max(stats.mean))
        if not np.isfinite(top) or top <= 0.0:
            raise FitError(f"degenerate simulated spectrum at duty={duty}, sigma={sigma}")
        value = float(np.sum((stats.mean / top - target) ** 2))
        cache[key] = value
        return value

    d_lo, d_hi = options.duty_bounds
    s_lo, s_hi = options.sigma_bounds_um
    duties = np.linspace(d_lo, d_hi, options.coarse_points[0])
    sigmas = np.linspace(s_lo, s_hi, options.coarse_points[1])
    best = None
    for d in duties:
        for s in sigmas:
            value = objective(float(d), float(s))
            if best is None or value < best[2]:
                best = (float(d), float(s), value)

    duty, sigma, value = best
    d_step = (d_hi - d_lo) / max(options.coarse_points[0] - 1, 1)
    s_step = (s_hi - s_lo) / max(options.coarse_points[1] - 1, 1)
    for _ in range(options.refine_passes):
        duty, value = _golden_section(
            lambda d: objective(d, sigma),
            max(d_lo, duty - d_step),
            min(d_hi, duty + d_step),
            options.refine_iterations,
        )
        sigma, value = _golden_section(
            lambda s: objective(duty, s),
            max(s_lo, sigma - s_step),
            min(s_hi, sigma + s_step),
            options.refine_iterations,
        )

    return DisorderFit(
        duty_cycle=duty,
        sigma_um=sigma,
        residual=value,
        evaluations=len(cache),
        metadata={
            "realizations_per_eval": options.realizations,
            "seed_policy": f"SeedSequence(entropy={options.seed}, spawn_key=(i,)) for i < {options.realizations}",
            "duty_bounds": list(options.duty_bounds),
            "sigma_bounds_um": list(options.sigma_bounds_um),
            "grid_points": int(grid.size),
        },
    )
