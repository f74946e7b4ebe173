"""Refractive indices, wavevectors and phase mismatch for type-II interactions in KTP.

All lengths are vacuum micrometres, wavevectors rad/um.  Dispersion comes from
published Sellmeier fits of the generic form

    n^2(lam) = A + sum_j B_j / (1 - C_j / lam^2) - D * lam^2

with lam in um.  Several named coefficient sets are bundled; custom sets can be
supplied through the CLI config.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Axis",
    "SellmeierCoefficients",
    "SellmeierModel",
    "Wave",
    "PhaseMismatchSpec",
    "WavelengthRangeError",
    "InvalidPairError",
    "SELLMEIER_MODELS",
    "DEFAULT_SELLMEIER",
    "default_model",
    "refractive_index",
    "wavevector",
    "idler_wavelength",
    "phase_mismatch",
]


class Axis(str, Enum):
    """Crystallographic polarization axis. Only y and z are supported."""

    Y = "y"
    Z = "z"


class WavelengthRangeError(ValueError):
    """Wavelength outside a Sellmeier fit's validity window."""


class InvalidPairError(ValueError):
    """Signal/pump pair that cannot conserve energy."""


@dataclass(frozen=True)
class SellmeierCoefficients:
    """One axis of a published Sellmeier fit, with its validity window in um."""

    constant: float
    poles: tuple[tuple[float, float], ...]  # (B_j, C_j [um^2]) resonance terms
    quadratic: float
    window_um: tuple[float, float]
    citation: str

    def index(self, wavelength_um):
        lam2 = np.square(np.asarray(wavelength_um, dtype=float))
        n2 = self.constant - self.quadratic * lam2
        for b, c in self.poles:
            n2 = n2 + b / (1.0 - c / lam2)
        return np.sqrt(n2)


@dataclass(frozen=True)
class SellmeierModel:
    """Named pair of per-axis coefficient sets."""

    name: str
    y: SellmeierCoefficients
    z: SellmeierCoefficients

    def for_axis(self, axis: Axis) -> SellmeierCoefficients:
        return self.y if Axis(axis) is Axis.Y else self.z


# Room-temperature KTP fits.  Window floors extend a few nm below the
# underlying measurements where near-UV pumps need it; only the y axis ever
# carries the pump in the bundled type-II scenarios.
_FAN_Y = SellmeierCoefficients(
    constant=2.19229,
    poles=((0.83547, 0.04970),),
    quadratic=0.01621,
    window_um=(0.39, 3.50),
    citation="Fan et al., Appl. Opt. 26, 2390 (1987), KTP n_y",
)
_FAN_Z = SellmeierCoefficients(
    constant=2.25411,
    poles=((1.06543, 0.05486),),
    quadratic=0.02140,
    window_um=(0.43, 3.50),
    citation="Fan et al., Appl. Opt. 26, 2390 (1987), KTP n_z",
)
_FRADKIN_Z = SellmeierCoefficients(
    constant=2.12725,
    poles=((1.18431, 0.0514852), (0.6603, 100.00507)),
    quadratic=0.00968956,
    window_um=(0.43, 3.50),
    citation="Fradkin et al., Appl. Phys. Lett. 74, 914 (1999), KTP n_z",
)
_KONIG_Y = SellmeierCoefficients(
    constant=2.09930,
    poles=((0.922683, 0.0467695),),
    quadratic=0.0138408,
    window_um=(0.39, 3.50),
    citation="Konig and Wong, Appl. Phys. Lett. 84, 1644 (2004), KTP n_y",
)

SELLMEIER_MODELS: dict[str, SellmeierModel] = {
    "ktp_fan_fradkin": SellmeierModel("ktp_fan_fradkin", y=_FAN_Y, z=_FRADKIN_Z),
    "ktp_konig_fradkin": SellmeierModel("ktp_konig_fradkin", y=_KONIG_Y, z=_FRADKIN_Z),
    "ktp_fan": SellmeierModel("ktp_fan", y=_FAN_Y, z=_FAN_Z),
}

# Fan n_y with Fradkin n_z reproduces the reference phase-matching wavelengths
# (backward QPM near 1074/1064/1054 nm for 2.112/2.132/2.152 um gratings and
# birefringent matching near 1038 nm) to well under 1 nm.
DEFAULT_SELLMEIER = "ktp_fan_fradkin"


def default_model() -> SellmeierModel:
    return SELLMEIER_MODELS[DEFAULT_SELLMEIER]


def _check_window(coeff: SellmeierCoefficients, wavelength_um) -> None:
    lam = np.asarray(wavelength_um, dtype=float)
    lo, hi = coeff.window_um
    if lam.size == 0:
        raise ValueError("empty wavelength input")
    lmin, lmax = float(np.min(lam)), float(np.max(lam))
    if lmin <= 0.0 or lmin < lo or lmax > hi:
        raise WavelengthRangeError(
            f"wavelength {lmin if lmin < lo or lmin <= 0 else lmax:.6g} um outside "
            f"validity window [{lo}, {hi}] um of {coeff.citation}"
        )


def refractive_index(model: SellmeierModel, axis: Axis, wavelength_um):
    """n(lam) on the given axis. Raises WavelengthRangeError outside the fit window."""
    coeff = model.for_axis(axis)
    _check_window(coeff, wavelength_um)
    return coeff.index(wavelength_um)


def wavevector(model: SellmeierModel, axis: Axis, wavelength_um):
    """k = 2 pi n(lam) / lam in rad/um."""
    return 2.0 * np.pi * refractive_index(model, axis, wavelength_um) / np.asarray(
        wavelength_um, dtype=float
    )


def idler_wavelength(pump_um: float, signal_um):
    """Energy-conserving idler wavelength: 1/lam_i = 1/lam_p - 1/lam_s.

    The idler is always derived from pump and signal, never sampled
    independently, so energy conservation is exact by construction.
    """
    signal = np.asarray(signal_um, dtype=float)
    if pump_um <= 0.0:
        raise InvalidPairError(f"pump wavelength must be positive, got {pump_um}")
    if np.any(signal <= pump_um):
        bad = float(np.min(signal))
        raise InvalidPairError(
            f"signal wavelength {bad:.6g} um must exceed the pump ({pump_um:.6g} um)"
        )
    out = 1.0 / (1.0 / pump_um - 1.0 / signal)
    return out if out.shape else float(out)


@dataclass(frozen=True)
class Wave:
    """A vacuum wavelength tied to a polarization axis."""

    wavelength_um: float
    axis: Axis

    def __post_init__(self):
        if self.wavelength_um <= 0.0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength_um}")
        object.__setattr__(self, "axis", Axis(self.axis))


@dataclass(frozen=True)
class PhaseMismatchSpec:
    """Pump wave, signal/idler axes and propagation sense epsilon.

    epsilon = +1 is the co-propagating (forward) interaction, -1 the
    counter-propagating (backward) one, entering the mismatch as

        dk = k_p - k_s - epsilon * k_i
    """

    pump: Wave
    signal_axis: Axis
    idler_axis: Axis
    epsilon: int

    def __post_init__(self):
        object.__setattr__(self, "signal_axis", Axis(self.signal_axis))
        object.__setattr__(self, "idler_axis", Axis(self.idler_axis))
        if self.epsilon not in (+1, -1):
            raise ValueError(f"epsilon must be +1 or -1, got {self.epsilon}")
        if self.signal_axis is self.idler_axis:
            raise ValueError("type-II process requires signal axis != idler axis")


def phase_mismatch(model: SellmeierModel, spec: PhaseMismatchSpec, signal_um):
    """dk(lam_s) = k_p - k_s - epsilon k_i [rad/um], idler slaved to energy conservation."""
    k_p = wavevector(model, spec.pump.axis, spec.pump.wavelength_um)
    k_s = wavevector(model, spec.signal_axis, signal_um)
    k_i = wavevector(model, spec.idler_axis, idler_wavelength(spec.pump.wavelength_um, signal_um))
    return k_p - k_s - spec.epsilon * k_i
