"""Low-gain biphoton amplitude B(omega) and spectral power density S = |B|^2 / 2 pi.

Two independent routes compute B over a signal-wavelength grid:

* ``amplitude_numeric``: the exact first-order integral of dtilde(z) e^{i dk z}
  over an arbitrary signed domain structure (sum of closed-form per-domain
  integrals).  Works for ideal and disordered gratings alike.
* ``amplitude_analytic``: the truncated Fourier-series sum over grating
  harmonics for the ideal periodic profile.  Each harmonic m contributes
  i kappa L c_m sinc(u_m) e^{i u_m} with u_m = (dk + K_m) L / 2; the e^{i u_m}
  factor is the exact phase of the finite-crystal integral and is kept so the
  two routes agree at the amplitude level, not just in magnitude.

Both carry the common prefactor exp{i [dk/2 + k_s + k_i] L}; it drops out of
S(omega) but keeps the Bogoliubov phase relations exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dispersion import (
    Axis,
    PhaseMismatchSpec,
    SellmeierModel,
    Wave,
    default_model,
    idler_wavelength,
    phase_mismatch,
    wavevector,
)
from .grating import DomainStructure, GratingSpec, build_ideal, fourier_coefficient, perturb

__all__ = [
    "ProcessConfig",
    "BogoliubovCoefficients",
    "Spectrum",
    "PeakMetrics",
    "amplitude_numeric",
    "amplitude_analytic",
    "bogoliubov",
    "spectral_density",
    "compute_spectrum",
    "convolve_resolution",
    "peak_metrics",
]

#: Below this |dk| * L the per-domain integral switches to its midpoint-sinc
#: form; the telescoped sum divides by dk and loses precision as dk -> 0.
_SMALL_PHASE = 1.0e-3

#: Wavelength chunk size for the grid x boundary outer products (memory control).
_CHUNK = 256


@dataclass(frozen=True)
class ProcessConfig:
    """Pump wave, propagation sense, signal/idler axes, couplings and dispersion.

    kappa is the coupling constant of the process under study (amplitudes are
    reported in units of kappa * um, i.e. relative spectra for kappa = 1).
    kappa_alt optionally carries the coupling of a second process for
    cross-process peak-ratio predictions.
    """

    pump: Wave
    epsilon: int = +1
    signal_axis: Axis = Axis.Z
    idler_axis: Axis = Axis.Y
    kappa: float = 1.0
    kappa_alt: float | None = None
    sellmeier: SellmeierModel = field(default_factory=default_model)

    def __post_init__(self):
        object.__setattr__(self, "signal_axis", Axis(self.signal_axis))
        object.__setattr__(self, "idler_axis", Axis(self.idler_axis))
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.kappa_alt is not None and self.kappa_alt <= 0.0:
            raise ValueError(f"kappa_alt must be positive, got {self.kappa_alt}")
        # delegate epsilon/axis validation
        self.mismatch_spec()

    def mismatch_spec(self) -> PhaseMismatchSpec:
        return PhaseMismatchSpec(
            pump=self.pump,
            signal_axis=self.signal_axis,
            idler_axis=self.idler_axis,
            epsilon=self.epsilon,
        )

    def delta_k(self, signal_um):
        return phase_mismatch(self.sellmeier, self.mismatch_spec(), signal_um)

    def digest(self) -> str:
        blob = json.dumps(
            {
                "pump_um": self.pump.wavelength_um,
                "pump_axis": self.pump.axis.value,
                "epsilon": self.epsilon,
                "signal_axis": self.signal_axis.value,
                "idler_axis": self.idler_axis.value,
                "kappa": self.kappa,
                "kappa_alt": self.kappa_alt,
                "sellmeier": self.sellmeier.name,
            },
            sort_keys=True,
        )
        import hashlib

        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _overall_phase(config: ProcessConfig, signal_um, dk, length_um):
    """exp{i [dk/2 + k_s + k_i] L} common to every amplitude at this signal wavelength."""
    model = config.sellmeier
    k_s = wavevector(model, config.signal_axis, signal_um)
    k_i = wavevector(
        model, config.idler_axis, idler_wavelength(config.pump.wavelength_um, signal_um)
    )
    return np.exp(1j * (0.5 * dk + k_s + k_i) * length_um)


def _domain_integral(dk, structure: DomainStructure):
    """integral_0^L dtilde(z) e^{i dk z} dz for an array of dk values.

    For |dk| L above the switchover this uses the telescoped boundary sum
    (1/(i dk)) [s_last e^{i dk L} - s_0 + sum_k (s_{k-1}-s_k) e^{i dk z_k}];
    below it, the per-domain midpoint form l_j e^{i dk (z_j+z_{j+1})/2}
    sinc(dk l_j / 2), which is exact and stable as dk -> 0.  Both are closed
    forms of the same integral, so the switch is continuous to roundoff.
    """
    dk = np.atleast_1d(np.asarray(dk, dtype=float))
    bounds = structure.boundaries
    length = structure.length_um
    s0 = float(structure.start_sign)
    n_dom = structure.domain_count
    s_last = s0 if n_dom % 2 == 1 else -s0

    out = np.empty(dk.shape, dtype=complex)
    small = np.abs(dk) * length < _SMALL_PHASE
    if np.any(small):
        lengths = structure.domain_lengths()
        mids = 0.5 * (bounds[:-1] + bounds[1:])
        signed = structure.signs() * lengths
        dks = dk[small][:, None]
        out[small] = (
            np.exp(1j * dks * mids[None, :]) * np.sinc(dks * lengths[None, :] / (2.0 * np.pi))
        ) @ signed
    if np.any(~small):
        # interior boundary k separates domains k-1 and k: s_{k-1} - s_k = 2 s0 (-1)^{k-1}
        interior = bounds[1:-1]
        jumps = 2.0 * s0 * (-1.0) ** np.arange(interior.size)
        idx = np.nonzero(~small)[0]
        for lo in range(0, idx.size, _CHUNK):
            sel = idx[lo : lo + _CHUNK]
            dks = dk[sel][:, None]
            acc = np.exp(1j * dks * interior[None, :]) @ jumps
            acc += s_last * np.exp(1j * dk[sel] * length) - s0
            out[sel] = acc / (1j * dk[sel])
    return out


def amplitude_numeric(signal_um, structure: DomainStructure, config: ProcessConfig):
    """B(omega) from the exact piecewise integral over the domain structure."""
    signal = np.asarray(signal_um, dtype=float)
    dk = config.delta_k(signal)
    integral = _domain_integral(dk, structure)
    pref = 1j * config.kappa * _overall_phase(config, signal, dk, structure.length_um)
    out = pref * integral.reshape(np.shape(dk))
    return out if out.shape else complex(out)


def amplitude_analytic(
    signal_um, grating: GratingSpec, config: ProcessConfig, truncation_order: int = 50
):
    """B(omega) from the harmonic sum over m = -M..M of the ideal periodic grating.

    Requires sigma = 0; the series models the unperturbed profile.  The m = 0
    term carries the exact DC coefficient 2D - 1.  Harmonic coefficients pick
    up the alignment phase e^{-i pi m D} of a grating whose first positive
    domain starts at z = 0, matching ``build_ideal``.
    """
    if grating.sigma_um != 0.0:
        raise ValueError("analytic amplitude models the unperturbed grating; sigma must be 0")
    if truncation_order < 1:
        raise ValueError(f"truncation order must be >= 1, got {truncation_order}")

    duty, period, length = grating.duty_cycle, grating.period_um, grating.length_um
    m = np.arange(-truncation_order, truncation_order + 1)
    c = np.where(
        m == 0,
        2.0 * duty - 1.0,
        # sign-safe: sin(pi m D)/(pi m) with the m=0 slot overwritten above
        2.0 * np.sin(np.pi * m * duty) / np.where(m == 0, 1.0, np.pi * m),
    ) * np.exp(-1j * np.pi * m * duty)

    signal = np.asarray(signal_um, dtype=float)
    dk = config.delta_k(signal)
    dk1 = np.atleast_1d(dk)
    k_m = 2.0 * np.pi * m / period
    u = 0.5 * (dk1[:, None] + k_m[None, :]) * length
    series = (np.exp(1j * u) * np.sinc(u / np.pi)) @ c
    pref = 1j * config.kappa * length * _overall_phase(config, signal, dk, length)
    out = pref * series.reshape(np.shape(dk))
    return out if out.shape else complex(out)


@dataclass(frozen=True)
class BogoliubovCoefficients:
    """Input-output coefficients of the low-gain solution at one signal wavelength.

    a and d_out are pure phases, |c| = |b|, and c = conj(b) e^{i [k_s + (eps-1) k_i] L}.
    d_out is named to avoid colliding with the duty cycle D.
    """

    a: complex
    b: complex
    c: complex
    d_out: complex


def bogoliubov(signal_um: float, structure: DomainStructure, config: ProcessConfig):
    model = config.sellmeier
    length = structure.length_um
    k_s = wavevector(model, config.signal_axis, signal_um)
    k_i = wavevector(
        model, config.idler_axis, idler_wavelength(config.pump.wavelength_um, signal_um)
    )
    b = amplitude_numeric(signal_um, structure, config)
    a = np.exp(1j * k_s * length)
    d_out = np.exp(-1j * config.epsilon * k_i * length)
    c = np.conj(b) * np.exp(1j * (k_s + (config.epsilon - 1) * k_i) * length)
    return BogoliubovCoefficients(a=complex(a), b=complex(b), c=complex(c), d_out=complex(d_out))


def spectral_density(amplitude):
    """S = |B|^2 / (2 pi), nonnegative by construction."""
    return np.abs(amplitude) ** 2 / (2.0 * np.pi)


@dataclass(frozen=True)
class Spectrum:
    """Spectral power density samples over a strictly increasing wavelength grid."""

    wavelengths_um: np.ndarray
    density: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.ascontiguousarray(self.wavelengths_um, dtype=float)
        s = np.ascontiguousarray(self.density, dtype=float)
        if w.ndim != 1 or w.size < 1 or s.shape != w.shape:
            raise ValueError("grid and density must be matching 1-d arrays")
        if np.any(np.diff(w) <= 0.0):
            raise ValueError("wavelength grid must be strictly increasing")
        if np.any(s < 0.0) or not np.all(np.isfinite(s)):
            raise ValueError("spectral density must be finite and nonnegative")
        w.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "wavelengths_um", w)
        object.__setattr__(self, "density", s)

    def peak_density(self) -> float:
        return float(np.max(self.density))

    def to_csv(self, path) -> None:
        from .cli import spectrum_to_csv  # formatting shared with the CLI outputs

        spectrum_to_csv(self, path)


def compute_spectrum(
    grid_um,
    grating,
    config: ProcessConfig,
    method: str = "numeric",
    truncation_order: int = 50,
) -> Spectrum:
    """Evaluate S over a grid using either amplitude route.

    ``grating`` may be a DomainStructure (numeric only) or a GratingSpec.  A
    spec with sigma > 0 under the numeric method is realized once,
    deterministically, from its seed (child index 0, as in an ensemble).
    """
    grid = np.asarray(grid_um, dtype=float)
    meta = {"method": method, "process_digest": config.digest()}
    if method == "analytic":
        if not isinstance(grating, GratingSpec):
            raise TypeError("analytic method requires a GratingSpec")
        amp = amplitude_analytic(grid, grating, config, truncation_order)
        meta.update(_spec_meta(grating), truncation_order=truncation_order)
    elif method == "numeric":
        if isinstance(grating, GratingSpec):
            structure = build_ideal(grating)
            if grating.sigma_um > 0.0:
                from .ensemble import child_rng  # deterministic child-seed scheme

                structure = perturb(
                    structure,
                    grating.sigma_um,
                    child_rng(grating.seed, 0),
                    convention=grating.sigma_convention,
                )
                meta["seed"] = grating.seed
            meta.update(_spec_meta(grating))
        else:
            structure = grating
            meta["boundary_count"] = structure.boundaries.size
        amp = amplitude_numeric(grid, structure, config)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Spectrum(wavelengths_um=grid, density=spectral_density(amp), metadata=meta)


def _spec_meta(spec: GratingSpec) -> dict:
    return {
        "period_um": spec.period_um,
        "duty_cycle": spec.duty_cycle,
        "length_um": spec.length_um,
        "sigma_um": spec.sigma_um,
        "sigma_convention": spec.sigma_convention,
    }


def convolve_resolution(spectrum: Spectrum, bandwidth_nm: float, kernel: str = "tophat") -> Spectrum:
    """Convolve S with a unit-area spectral-response kernel of the given FWHM.

    The default kernel is a top hat, modeling a bandpass filter; ``gaussian``
    is available as an alternative.  The grid must be uniform with spacing
    below bandwidth/4, and is unchanged by the convolution.
    """
    if bandwidth_nm < 0.0:
        raise ValueError(f"bandwidth must be nonnegative, got {bandwidth_nm}")
    if bandwidth_nm == 0.0:
        return spectrum
    w = spectrum.wavelengths_um
    if w.size < 2:
        raise ValueError("cannot convolve a single-point spectrum")
    steps = np.diff(w)
    dlam_nm = float(np.mean(steps)) * 1.0e3
    if np.max(np.abs(steps * 1e3 - dlam_nm)) > 1e-9 * max(dlam_nm, 1.0):
        raise ValueError("resolution convolution requires a uniform wavelength grid")
    if dlam_nm >= bandwidth_nm / 4.0:
        raise ValueError(
            f"grid spacing {dlam_nm:.6g} nm too coarse for {bandwidth_nm:.6g} nm resolution; "
            "need spacing < bandwidth/4"
        )

    half = 0.5 * bandwidth_nm
    if kernel == "tophat":
        n_tap = int(np.ceil(half / dlam_nm - 0.5)) + 1
        offsets = np.arange(-n_tap, n_tap + 1) * dlam_nm
        # each tap covers a dlam-wide cell; weight by its overlap with [-half, half]
        overlap = np.clip(
            np.minimum(offsets + 0.5 * dlam_nm, half) - np.maximum(offsets - 0.5 * dlam_nm, -half),
            0.0,
            None,
        )
        weights = overlap / np.sum(overlap)
    elif kernel == "gaussian":
        sigma = bandwidth_nm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        n_tap = int(np.ceil(5.0 * sigma / dlam_nm))
        offsets = np.arange(-n_tap, n_tap + 1) * dlam_nm
        weights = np.exp(-0.5 * (offsets / sigma) ** 2)
        weights /= np.sum(weights)
    else:
        raise ValueError(f"unknown resolution kernel {kernel!r}")

    blurred = np.convolve(spectrum.density, weights, mode="same")
    meta = dict(spectrum.metadata, resolution_nm=bandwidth_nm, resolution_kernel=kernel)
    return Spectrum(wavelengths_um=w, density=np.maximum(blurred, 0.0), metadata=meta)


@dataclass(frozen=True)
class PeakMetrics:
    """Location, height, interpolated FWHM and side peaks of a sampled spectrum."""

    wavelength_um: float
    density: float
    fwhm_nm: float
    side_peaks: tuple[tuple[float, float], ...] = ()


def peak_metrics(spectrum: Spectrum, side_floor: float = 1.0e-3):
    """Grid-scan peak finder; returns None for a flat spectrum.

    The FWHM comes from linear interpolation of the half-maximum crossings
    bracketing the global peak (NaN if a crossing lies outside the grid).
    Side peaks are interior local maxima above side_floor times the peak.
    """
    w, s = spectrum.wavelengths_um, spectrum.density
    if w.size < 3:
        raise ValueError("peak metrics need at least 3 grid points")
    if np.max(s) == np.min(s):
        return None
    i = int(np.argmax(s))
    peak_w, peak_s = float(w[i]), float(s[i])
    half = 0.5 * peak_s

    def cross(idx_range):
        prev = i
        for j in idx_range:
            if s[j] <= half:
                frac = (half - s[j]) / (s[prev] - s[j])
                return float(w[j] + frac * (w[prev] - w[j]))
            prev = j
        return np.nan

    left = cross(range(i - 1, -1, -1))
    right = cross(range(i + 1, w.size))
    fwhm_nm = (right - left) * 1.0e3

    floor = side_floor * peak_s
    interior = (
        (s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:]) & (s[1:-1] >= floor)
    )
    side = [
        (float(w[j + 1]), float(s[j + 1]))
        for j in np.nonzero(interior)[0]
        if j + 1 != i and s[j + 1] < peak_s
    ]
    side.sort(key=lambda p: -p[1])
    return PeakMetrics(
        wavelength_um=peak_w, density=peak_s, fwhm_nm=float(fwhm_nm), side_peaks=tuple(side)
    )
