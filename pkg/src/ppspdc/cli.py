"""Config-driven command line front end.

Subcommands: ``dispersion``, ``phasematch``, ``spectrum``, ``ensemble``,
``fit`` and ``reproduce``.  Scenarios come from a JSON config file with one
top-level object per module section; unknown keys are hard errors so typos in
physics parameters cannot pass silently.  Outputs are deterministic given
(config, flags): no timestamps, sorted metadata, 9 significant digits.

Exit codes: 0 success, 1 computation error, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .amplitude import (
    ProcessConfig,
    Spectrum,
    compute_spectrum,
    convolve_resolution,
)
from .analysis import (
    FitError,
    FitOptions,
    NoRootError,
    find_nbpm,
    find_qpm,
    fit_disorder,
)
from .dispersion import (
    Axis,
    InvalidPairError,
    SELLMEIER_MODELS,
    SellmeierCoefficients,
    SellmeierModel,
    Wave,
    WavelengthRangeError,
    refractive_index,
    wavevector,
)
from .ensemble import EnsembleConfig, EnsembleStatistics, reduction_summary, run_ensemble
from .grating import SIGMA_CONVENTIONS, GratingSpec

__all__ = [
    "ConfigError",
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "spectrum_to_csv",
    "spectrum_from_csv",
    "ensemble_to_csv",
    "main",
]


class ConfigError(ValueError):
    """Bad configuration file or flag combination (exit code 2)."""


_COMPUTE_ERRORS = (
    WavelengthRangeError,
    InvalidPairError,
    NoRootError,
    FitError,
    ZeroDivisionError,
)

_SECTIONS = {
    "dispersion": {"set", "custom"},
    "grating": {"period_um", "duty_cycle", "length_um", "sigma_um", "seed", "sigma_convention"},
    "process": {
        "pump_um",
        "pump_axis",
        "signal_axis",
        "idler_axis",
        "propagation",
        "kappa",
        "kappa_alt",
    },
    "grid": {"center_um", "span_nm", "points", "wavelengths_um"},
    "ensemble": {"count", "master_seed"},
    "phasematch": {"mode", "window_um", "max_order"},
    "spectrum": {"method", "truncation_order", "resolution_nm", "resolution_kernel"},
    "fit": {
        "duty_bounds",
        "sigma_bounds_um",
        "coarse_points",
        "refine_iterations",
        "refine_passes",
        "realizations",
        "seed",
    },
}

_GRATING_DEFAULTS = {"sigma_um": 0.0, "seed": 0, "sigma_convention": "domain-length"}
_PROCESS_DEFAULTS = {
    "pump_axis": "y",
    "signal_axis": "z",
    "idler_axis": "y",
    "propagation": "forward",
    "kappa": 1.0,
    "kappa_alt": None,
}
_SPECTRUM_DEFAULTS = {
    "method": "numeric",
    "truncation_order": 50,
    "resolution_nm": 0.0,
    "resolution_kernel": "tophat",
}
_ENSEMBLE_DEFAULTS = {"master_seed": 0}
_PHASEMATCH_DEFAULTS = {"max_order": 15}
_FIT_DEFAULTS = {
    "duty_bounds": [0.4, 0.95],
    "sigma_bounds_um": [0.0, 1.5],
    "coarse_points": [7, 7],
    "refine_iterations": 12,
    "refine_passes": 2,
    "realizations": 16,
    "seed": 20000,
}


def _check_keys(obj: dict, path: str, allowed: set[str]) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {', '.join(sorted(allowed))})")


def _need(obj: dict, path: str, key: str):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: required key missing")
    return obj[key]


@dataclass
class Scenario:
    """A fully resolved configuration plus the constructed model objects."""

    effective: dict
    model: SellmeierModel
    grating: GratingSpec | None = None
    process: ProcessConfig | None = None
    grid_um: np.ndarray | None = None
    ensemble_count: int | None = None
    master_seed: int = 0
    phasematch: dict | None = None
    spectrum_opts: dict = field(default_factory=lambda: dict(_SPECTRUM_DEFAULTS))
    fit_opts: FitOptions = field(default_factory=FitOptions)

    def need_grating(self) -> GratingSpec:
        if self.grating is None:
            raise ConfigError("config.grating: section required for this subcommand")
        return self.grating

    def need_process(self) -> ProcessConfig:
        if self.process is None:
            raise ConfigError("config.process: section required for this subcommand")
        return self.process

    def need_grid(self) -> np.ndarray:
        if self.grid_um is None:
            raise ConfigError("config.grid: section required for this subcommand")
        return self.grid_um


def _coeff_from_dict(obj: dict, path: str) -> SellmeierCoefficients:
    allowed = {"constant", "poles", "quadratic", "window_um", "citation"}
    _check_keys(obj, path, allowed)
    try:
        return SellmeierCoefficients(
            constant=float(_need(obj, path, "constant")),
            poles=tuple((float(b), float(c)) for b, c in _need(obj, path, "poles")),
            quadratic=float(_need(obj, path, "quadratic")),
            window_um=tuple(float(x) for x in _need(obj, path, "window_um")),
            citation=str(obj.get("citation", "custom")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _resolve_dispersion(cfg: dict) -> tuple[SellmeierModel, dict]:
    section = cfg.get("dispersion", {"set": "ktp_fan_fradkin"})
    _check_keys(section, "config.dispersion", _SECTIONS["dispersion"])
    if "custom" in section:
        custom = section["custom"]
        _check_keys(custom, "config.dispersion.custom", {"name", "y", "z"})
        model = SellmeierModel(
            name=str(custom.get("name", "custom")),
            y=_coeff_from_dict(_need(custom, "config.dispersion.custom", "y"), "config.dispersion.custom.y"),
            z=_coeff_from_dict(_need(custom, "config.dispersion.custom", "z"), "config.dispersion.custom.z"),
        )
        return model, {"custom": custom}
    name = section.get("set", "ktp_fan_fradkin")
    if name not in SELLMEIER_MODELS:
        raise ConfigError(
            f"config.dispersion.set: unknown set {name!r} (available: {', '.join(sorted(SELLMEIER_MODELS))})"
        )
    return SELLMEIER_MODELS[name], {"set": name}


def _resolve_grid(section: dict) -> np.ndarray:
    _check_keys(section, "config.grid", _SECTIONS["grid"])
    if "wavelengths_um" in section:
        extra = {"center_um", "span_nm", "points"} & set(section)
        if extra:
            raise ConfigError("config.grid: give either wavelengths_um or center/span/points, not both")
        grid = np.asarray(section["wavelengths_um"], dtype=float)
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
            raise ConfigError("config.grid.wavelengths_um: must be strictly increasing")
        return grid
    center = float(_need(section, "config.grid", "center_um"))
    span_nm = float(_need(section, "config.grid", "span_nm"))
    points = int(_need(section, "config.grid", "points"))
    if span_nm <= 0 or points < 2:
        raise ConfigError("config.grid: span_nm must be > 0 and points >= 2")
    half = 0.5 * span_nm * 1e-3
    return np.linspace(center - half, center + half, points)


def scenario_from_dict(cfg: dict) -> Scenario:
    """Validate and resolve a configuration dictionary into a Scenario."""
    _check_keys(cfg, "config", set(_SECTIONS))
    model, disp_eff = _resolve_dispersion(cfg)
    effective: dict = {"dispersion": disp_eff}
    scenario = Scenario(effective=effective, model=model)

    if "grating" in cfg:
        section = dict(_GRATING_DEFAULTS, **cfg["grating"])
        _check_keys(cfg["grating"], "config.grating", _SECTIONS["grating"])
        if section["sigma_convention"] not in SIGMA_CONVENTIONS:
            raise ConfigError(
                f"config.grating.sigma_convention: must be one of {SIGMA_CONVENTIONS}"
            )
        try:
            scenario.grating = GratingSpec(
                period_um=float(_need(cfg["grating"], "config.grating", "period_um")),
                duty_cycle=float(_need(cfg["grating"], "config.grating", "duty_cycle")),
                length_um=float(_need(cfg["grating"], "config.grating", "length_um")),
                sigma_um=float(section["sigma_um"]),
                seed=int(section["seed"]),
                sigma_convention=str(section["sigma_convention"]),
            )
        except ValueError as exc:
            raise ConfigError(f"config.grating: {exc}") from exc
        effective["grating"] = {
            "period_um": scenario.grating.period_um,
            "duty_cycle": scenario.grating.duty_cycle,
            "length_um": scenario.grating.length_um,
            "sigma_um": scenario.grating.sigma_um,
            "seed": scenario.grating.seed,
            "sigma_convention": scenario.grating.sigma_convention,
        }

    if "process" in cfg:
        _check_keys(cfg["process"], "config.process", _SECTIONS["process"])
        section = dict(_PROCESS_DEFAULTS, **cfg["process"])
        prop = section["propagation"]
        if prop in ("forward", +1, 1):
            epsilon = +1
        elif prop in ("backward", -1):
            epsilon = -1
        else:
            raise ConfigError(
                f"config.process.propagation: must be 'forward' or 'backward', got {prop!r}"
            )
        try:
            scenario.process = ProcessConfig(
                pump=Wave(float(_need(cfg["process"], "config.process", "pump_um")), Axis(section["pump_axis"])),
                epsilon=epsilon,
                signal_axis=Axis(section["signal_axis"]),
                idler_axis=Axis(section["idler_axis"]),
                kappa=float(section["kappa"]),
                kappa_alt=None if section["kappa_alt"] is None else float(section["kappa_alt"]),
                sellmeier=model,
            )
        except ValueError as exc:
            raise ConfigError(f"config.process: {exc}") from exc
        effective["process"] = {
            "pump_um": scenario.process.pump.wavelength_um,
            "pump_axis": scenario.process.pump.axis.value,
            "signal_axis": scenario.process.signal_axis.value,
            "idler_axis": scenario.process.idler_axis.value,
            "propagation": "forward" if epsilon > 0 else "backward",
            "kappa": scenario.process.kappa,
            "kappa_alt": scenario.process.kappa_alt,
        }

    if "grid" in cfg:
        scenario.grid_um = _resolve_grid(cfg["grid"])
        effective["grid"] = {"wavelengths_um": [float(x) for x in scenario.grid_um]} if (
            "wavelengths_um" in cfg["grid"]
        ) else {
            "center_um": float(cfg["grid"]["center_um"]),
            "span_nm": float(cfg["grid"]["span_nm"]),
            "points": int(cfg["grid"]["points"]),
        }

    if "ensemble" in cfg:
        _check_keys(cfg["ensemble"], "config.ensemble", _SECTIONS["ensemble"])
        section = dict(_ENSEMBLE_DEFAULTS, **cfg["ensemble"])
        count = int(_need(cfg["ensemble"], "config.ensemble", "count"))
        if count < 1:
            raise ConfigError("config.ensemble.count: must be >= 1")
        scenario.ensemble_count = count
        scenario.master_seed = int(section["master_seed"])
        effective["ensemble"] = {"count": count, "master_seed": scenario.master_seed}

    if "phasematch" in cfg:
        _check_keys(cfg["phasematch"], "config.phasematch", _SECTIONS["phasematch"])
        section = dict(_PHASEMATCH_DEFAULTS, **cfg["phasematch"])
        mode = _need(cfg["phasematch"], "config.phasematch", "mode")
        if mode not in ("nbpm", "qpm"):
            raise ConfigError(f"config.phasematch.mode: must be 'nbpm' or 'qpm', got {mode!r}")
        window = _need(cfg["phasematch"], "config.phasematch", "window_um")
        if len(window) != 2 or not float(window[0]) < float(window[1]):
            raise ConfigError("config.phasematch.window_um: must be [low, high] with low < high")
        scenario.phasematch = {
            "mode": mode,
            "window_um": (float(window[0]), float(window[1])),
            "max_order": int(section["max_order"]),
        }
        effective["phasematch"] = {
            "mode": mode,
            "window_um": [float(window[0]), float(window[1])],
            "max_order": int(section["max_order"]),
        }

    if "spectrum" in cfg:
        _check_keys(cfg["spectrum"], "config.spectrum", _SECTIONS["spectrum"])
        opts = dict(_SPECTRUM_DEFAULTS, **cfg["spectrum"])
        if opts["method"] not in ("numeric", "analytic"):
            raise ConfigError(
                f"config.spectrum.method: must be 'numeric' or 'analytic', got {opts['method']!r}"
            )
        if opts["resolution_kernel"] not in ("tophat", "gaussian"):
            raise ConfigError("config.spectrum.resolution_kernel: must be 'tophat' or 'gaussian'")
        opts["truncation_order"] = int(opts["truncation_order"])
        opts["resolution_nm"] = float(opts["resolution_nm"])
        scenario.spectrum_opts = opts
    effective["spectrum"] = dict(scenario.spectrum_opts)

    if "fit" in cfg:
        _check_keys(cfg["fit"], "config.fit", _SECTIONS["fit"])
        opts = dict(_FIT_DEFAULTS, **cfg["fit"])
        scenario.fit_opts = FitOptions(
            duty_bounds=tuple(float(x) for x in opts["duty_bounds"]),
            sigma_bounds_um=tuple(float(x) for x in opts["sigma_bounds_um"]),
            coarse_points=tuple(int(x) for x in opts["coarse_points"]),
            refine_iterations=int(opts["refine_iterations"]),
            refine_passes=int(opts["refine_passes"]),
            realizations=int(opts["realizations"]),
            seed=int(opts["seed"]),
        )
        effective["fit"] = {
            "duty_bounds": list(scenario.fit_opts.duty_bounds),
            "sigma_bounds_um": list(scenario.fit_opts.sigma_bounds_um),
            "coarse_points": list(scenario.fit_opts.coarse_points),
            "refine_iterations": scenario.fit_opts.refine_iterations,
            "refine_passes": scenario.fit_opts.refine_passes,
            "realizations": scenario.fit_opts.realizations,
            "seed": scenario.fit_opts.seed,
        }
    return scenario


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return scenario_from_dict(cfg)


# ---------------------------------------------------------------- output formats


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _meta_lines(metadata: dict, effective: dict | None) -> list[str]:
    lines = []
    if effective is not None:
        lines.append("# config=" + json.dumps(effective, sort_keys=True, separators=(",", ":")))
    for key in sorted(metadata):
        lines.append(f"# {key}={metadata[key]}")
    return lines


def spectrum_to_csv(spectrum: Spectrum, path, effective: dict | None = None, footer: list[str] | None = None) -> None:
    rows = [
        *_meta_lines(spectrum.metadata, effective),
        "wavelength_nm,S_relative",
        *(
            f"{_fmt(w * 1e3)},{_fmt(s)}"
            for w, s in zip(spectrum.wavelengths_um, spectrum.density)
        ),
        *(footer or []),
    ]
    Path(path).write_text("\n".join(rows) + "\n")


def spectrum_from_csv(path) -> Spectrum:
    wavelengths, density = [], []
    meta: dict = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value
                continue
            first = line.split(",")[0]
            if first == "wavelength_nm":
                continue
            cells = line.split(",")
            wavelengths.append(float(cells[0]) * 1e-3)
            density.append(float(cells[1]))
    return Spectrum(np.asarray(wavelengths), np.asarray(density), metadata=meta)


def ensemble_to_csv(stats: EnsembleStatistics, path, effective: dict | None = None) -> None:
    rows = [
        *_meta_lines(stats.metadata, effective),
        "wavelength_nm,mean_S,std_S,sem_S",
        *(
            f"{_fmt(w * 1e3)},{_fmt(m)},{_fmt(s)},{_fmt(e)}"
            for w, m, s, e in zip(stats.grid_um, stats.mean, stats.std, stats.sem)
        ),
    ]
    Path(path).write_text("\n".join(rows) + "\n")
    sidecar = {
        "master_seed": stats.metadata.get("master_seed"),
        "count": stats.count,
        "child_seeds": list(stats.child_seeds),
    }
    Path(str(path) + ".seeds.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- subcommands


def _apply_overrides(scenario: Scenario, args) -> None:
    if getattr(args, "seed", None) is not None:
        scenario.master_seed = args.seed
        if "ensemble" in scenario.effective:
            scenario.effective["ensemble"]["master_seed"] = args.seed
        if scenario.grating is not None:
            scenario.grating = GratingSpec(
                period_um=scenario.grating.period_um,
                duty_cycle=scenario.grating.duty_cycle,
                length_um=scenario.grating.length_um,
                sigma_um=scenario.grating.sigma_um,
                seed=args.seed,
                sigma_convention=scenario.grating.sigma_convention,
            )
            scenario.effective["grating"]["seed"] = args.seed
    if getattr(args, "method", None) is not None:
        scenario.spectrum_opts["method"] = args.method
        scenario.effective["spectrum"]["method"] = args.method
    if getattr(args, "resolution_nm", None) is not None:
        scenario.spectrum_opts["resolution_nm"] = args.resolution_nm
        scenario.effective["spectrum"]["resolution_nm"] = args.resolution_nm


def cmd_dispersion(args) -> int:
    scenario = load_scenario(args.config)
    if not args.wavelengths_um:
        raise ConfigError("dispersion: give at least one wavelength in um")
    lams = [float(x) for x in args.wavelengths_um]
    header = "wavelength_nm,n_y,n_z,k_y_rad_per_um,k_z_rad_per_um"
    rows = []
    for lam in lams:
        n_y = float(refractive_index(scenario.model, Axis.Y, lam))
        n_z = float(refractive_index(scenario.model, Axis.Z, lam))
        k_y = float(wavevector(scenario.model, Axis.Y, lam))
        k_z = float(wavevector(scenario.model, Axis.Z, lam))
        rows.append(",".join(_fmt(v) for v in (lam * 1e3, n_y, n_z, k_y, k_z)))
    text = "\n".join(
        _meta_lines({}, scenario.effective) + [header] + rows
    ) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_phasematch(args) -> int:
    scenario = load_scenario(args.config)
    if scenario.phasematch is None:
        raise ConfigError("config.phasematch: section required")
    process = scenario.need_process()
    mode = scenario.phasematch["mode"]
    window = scenario.phasematch["window_um"]
    if mode == "nbpm":
        solution = find_nbpm(process, window)
    else:
        grating = scenario.need_grating()
        solution = find_qpm(
            grating.period_um, process, window, max_order=scenario.phasematch["max_order"]
        )
    report = {
        "mode": mode,
        "signal_nm": solution.signal_um * 1e3,
        "idler_nm": solution.idler_um * 1e3,
        "order": solution.order,
        "residual_rad_per_um": solution.residual,
        "window_um": list(window),
        "config": scenario.effective,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(
        f"{mode}: signal {report['signal_nm']:.3f} nm, idler {report['idler_nm']:.3f} nm, "
        f"order {solution.order}, residual {solution.residual:.3e} rad/um"
    )
    return 0


def _spectrum_for_scenario(scenario: Scenario) -> tuple[Spectrum, list[str]]:
    grating = scenario.need_grating()
    process = scenario.need_process()
    grid = scenario.need_grid()
    opts = scenario.spectrum_opts
    spectrum = compute_spectrum(
        grid, grating, process, method=opts["method"], truncation_order=opts["truncation_order"]
    )
    footer = []
    if grating.sigma_um == 0.0:
        other = "analytic" if opts["method"] == "numeric" else "numeric"
        cross = compute_spectrum(
            grid, grating, process, method=other, truncation_order=opts["truncation_order"]
        )
        scale = max(spectrum.peak_density(), cross.peak_density())
        diff = float(np.max(np.abs(spectrum.density - cross.density)) / scale)
        footer.append(f"# crosscheck_max_rel_diff={diff:.3e} ({opts['method']} vs {other})")
    if opts["resolution_nm"] > 0.0:
        spectrum = convolve_resolution(
            spectrum, opts["resolution_nm"], kernel=opts["resolution_kernel"]
        )
    return spectrum, footer


def cmd_spectrum(args) -> int:
    scenario = load_scenario(args.config)
    _apply_overrides(scenario, args)
    spectrum, footer = _spectrum_for_scenario(scenario)
    spectrum_to_csv(spectrum, args.out, effective=scenario.effective, footer=footer)
    print(f"wrote {args.out}: {spectrum.wavelengths_um.size} points, peak {spectrum.peak_density():.6g}")
    return 0


def cmd_ensemble(args) -> int:
    scenario = load_scenario(args.config)
    _apply_overrides(scenario, args)
    if scenario.ensemble_count is None:
        raise ConfigError("config.ensemble: section required")
    config = EnsembleConfig(
        grating=scenario.need_grating(),
        process=scenario.need_process(),
        grid_um=scenario.need_grid(),
        count=scenario.ensemble_count,
        master_seed=scenario.master_seed,
    )
    stats = run_ensemble(config, threads=args.threads)
    ensemble_to_csv(stats, args.out, effective=scenario.effective)
    print(f"wrote {args.out}: {stats.count} realizations over {stats.grid_um.size} points")
    return 0


def cmd_fit(args) -> int:
    scenario = load_scenario(args.config)
    measured = spectrum_from_csv(args.measured)
    fit = fit_disorder(
        measured, scenario.need_grating(), scenario.need_process(), scenario.fit_opts
    )
    report = {
        "duty_cycle": fit.duty_cycle,
        "sigma_um": fit.sigma_um,
        "residual": fit.residual,
        "evaluations": fit.evaluations,
        "fit_metadata": fit.metadata,
        "measured_file": str(args.measured),
        "config": scenario.effective,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    Path(args.out).write_text(text)
    print(f"fit: duty={fit.duty_cycle:.4f}, sigma={fit.sigma_um:.4f} um, residual={fit.residual:.4e}")
    return 0


# ---------------------------------------------------------------- reproduce recipes

_KTP_CRYSTAL = {"length_um": 11000.0}
_PUMP_532 = {"pump_um": 0.532}
# Forward first-order QPM on an 8.9 um grating is nearly degenerate for a
# 397.5 nm pump with the bundled dispersion; the scenario also has a
# birefringent-matched point near 543 nm, so both peaks fit one run.
_PUMP_8P9 = {"pump_um": 0.3975}


def _recipe_base(grating: dict, process: dict) -> dict:
    return {
        "dispersion": {"set": "ktp_fan_fradkin"},
        "grating": grating,
        "process": process,
    }


def _nbpm_center(scenario_cfg: dict, window=(1.00, 1.09)) -> float:
    scenario = scenario_from_dict(scenario_cfg)
    return find_nbpm(scenario.need_process(), window).signal_um


def _qpm_center(scenario_cfg: dict, window) -> float:
    scenario = scenario_from_dict(scenario_cfg)
    grating = scenario.need_grating()
    return find_qpm(grating.period_um, scenario.need_process(), window).signal_um


def _reproduce_fig1b(outdir: Path, threads: int) -> None:
    """Backward QPM spectra, duty 0.5, boundary noise 0 / 175 / 300 nm."""
    for sigma, seed, tag in ((0.0, 0, "000"), (0.175, 101, "175"), (0.300, 102, "300")):
        cfg = _recipe_base(
            dict(period_um=2.132, duty_cycle=0.5, sigma_um=sigma, seed=seed, **_KTP_CRYSTAL),
            dict(propagation="backward", **_PUMP_532),
        )
        center = _qpm_center(cfg, (1.0, 1.1))
        cfg["grid"] = {"center_um": round(center, 6), "span_nm": 2.0, "points": 2001}
        scenario = scenario_from_dict(cfg)
        spectrum, footer = _spectrum_for_scenario(scenario)
        spectrum_to_csv(spectrum, outdir / f"fig1b_sigma{tag}.csv", scenario.effective, footer)


def nbpm_sweep_window(pump_um: float) -> tuple[float, float]:
    """Signal scan window keeping signal and idler inside the dispersion fits."""
    lo = max(pump_um + 0.04, 1.0 / (1.0 / pump_um - 1.0 / 3.4))
    return lo, 2.2


def _reproduce_fig1c(outdir: Path, threads: int) -> None:
    """Birefringent phase-matching wavelengths against pump wavelength."""
    rows = ["pump_nm,signal_nm,idler_nm"]
    for pump_nm in range(420, 601, 2):
        cfg = _recipe_base(
            dict(period_um=2.132, duty_cycle=0.5, **_KTP_CRYSTAL),
            dict(propagation="forward", pump_um=pump_nm * 1e-3),
        )
        scenario = scenario_from_dict(cfg)
        solution = find_nbpm(scenario.need_process(), nbpm_sweep_window(pump_nm * 1e-3))
        rows.append(
            f"{_fmt(pump_nm)},{_fmt(solution.signal_um * 1e3)},{_fmt(solution.idler_um * 1e3)}"
        )
    (outdir / "fig1c_nbpm_curve.csv").write_text("\n".join(rows) + "\n")


def _reproduce_fig1d(outdir: Path, threads: int) -> None:
    """Ideal birefringent-matched spectra for duty cycles 0.6 to 0.9."""
    for duty in (0.6, 0.7, 0.8, 0.9):
        cfg = _recipe_base(
            dict(period_um=2.132, duty_cycle=duty, **_KTP_CRYSTAL),
            dict(propagation="forward", **_PUMP_532),
        )
        cfg["spectrum"] = {"method": "analytic"}
        center = _nbpm_center(cfg)
        cfg["grid"] = {"center_um": round(center, 6), "span_nm": 6.0, "points": 1201}
        scenario = scenario_from_dict(cfg)
        spectrum, footer = _spectrum_for_scenario(scenario)
        spectrum_to_csv(spectrum, outdir / f"fig1d_duty{duty:.1f}.csv", scenario.effective, footer)


def _reproduce_fig5ab(outdir: Path, name: str, period: float, sigma: float, seed: int) -> None:
    cfg = _recipe_base(
        dict(period_um=period, duty_cycle=0.5, sigma_um=sigma, seed=seed, **_KTP_CRYSTAL),
        dict(propagation="forward", **_PUMP_532),
    )
    center = _nbpm_center(cfg)
    cfg["grid"] = {"center_um": round(center, 6), "span_nm": 20.0, "points": 1001}
    scenario = scenario_from_dict(cfg)
    spectrum, footer = _spectrum_for_scenario(scenario)
    spectrum_to_csv(spectrum, outdir / f"{name}_realization.csv", scenario.effective, footer)


def _reproduce_fig5c(outdir: Path, threads: int) -> None:
    """Ideal birefringent-matched line broadened by a 1 nm top-hat response."""
    cfg = _recipe_base(
        dict(period_um=2.132, duty_cycle=0.6, **_KTP_CRYSTAL),
        dict(propagation="forward", **_PUMP_532),
    )
    cfg["spectrum"] = {"method": "analytic"}
    center = _nbpm_center(cfg)
    cfg["grid"] = {"center_um": round(center, 6), "span_nm": 12.0, "points": 1201}
    scenario = scenario_from_dict(cfg)
    raw, footer = _spectrum_for_scenario(scenario)
    spectrum_to_csv(raw, outdir / "fig5c_ideal.csv", scenario.effective, footer)
    blurred = convolve_resolution(raw, 1.0, kernel="tophat")
    spectrum_to_csv(blurred, outdir / "fig5c_broadened.csv", scenario.effective)


def _reproduce_fig5d(outdir: Path, threads: int) -> None:
    """Forward QPM ensemble with realistic poling errors plus its ideal reference."""
    grating = dict(
        period_um=8.9, duty_cycle=0.6, sigma_um=0.9, seed=0, length_um=10000.0
    )
    process = dict(propagation="forward", **_PUMP_8P9)
    cfg = _recipe_base(dict(grating), process)
    qpm = _qpm_center(cfg, (0.70, 0.90))
    nbpm = _nbpm_center(cfg, (0.50, 0.60))
    half = 1.5e-3
    step = 5e-6
    n = int(round(2 * half / step)) + 1
    window_n = np.linspace(nbpm - half, nbpm + half, n)
    window_q = np.linspace(qpm - half, qpm + half, n)
    grid = np.concatenate([window_n, window_q])
    cfg["grid"] = {"wavelengths_um": [round(float(x), 9) for x in grid]}
    cfg["ensemble"] = {"count": 200, "master_seed": 53}
    scenario = scenario_from_dict(cfg)
    config = EnsembleConfig(
        grating=scenario.need_grating(),
        process=scenario.need_process(),
        grid_um=scenario.need_grid(),
        count=scenario.ensemble_count,
        master_seed=scenario.master_seed,
    )
    stats = run_ensemble(config, threads=threads)
    ensemble_to_csv(stats, outdir / "fig5d_ensemble.csv", scenario.effective)

    ideal_cfg = dict(cfg)
    ideal_cfg["grating"] = dict(grating, sigma_um=0.0)
    ideal_cfg.pop("ensemble")
    ideal_scenario = scenario_from_dict(ideal_cfg)
    ideal, footer = _spectrum_for_scenario(ideal_scenario)
    spectrum_to_csv(ideal, outdir / "fig5d_ideal.csv", ideal_scenario.effective, footer)

    summary = reduction_summary(
        stats,
        ideal,
        nbpm_window_um=(nbpm - half, nbpm + half),
        qpm_window_um=(qpm - half, qpm + half),
    )
    red = summary["peak_reduction_factor"]
    se = summary["peak_reduction_se"]
    ratio = summary["nbpm_over_qpm"]
    rse = summary["nbpm_over_qpm_se"]
    summary_text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    (outdir / "fig5d_summary.json").write_text(summary_text)
    print(
        f"fig5d: QPM-peak reduction factor {red:.4f} (95% CI [{red-1.96*se:.4f}, {red+1.96*se:.4f}]), "
        f"NBPM/QPM peak ratio {ratio:.4f} (95% CI [{ratio-1.96*rse:.4f}, {ratio+1.96*rse:.4f}])"
    )


_RECIPES = {
    "fig1b": _reproduce_fig1b,
    "fig1c": _reproduce_fig1c,
    "fig1d": _reproduce_fig1d,
    "fig5a": lambda outdir, threads: _reproduce_fig5ab(outdir, "fig5a", 2.112, 0.450, 51),
    "fig5b": lambda outdir, threads: _reproduce_fig5ab(outdir, "fig5b", 2.132, 0.600, 52),
    "fig5c": _reproduce_fig5c,
    "fig5d": _reproduce_fig5d,
}


def cmd_reproduce(args) -> int:
    if args.name not in _RECIPES:
        raise ConfigError(
            f"unknown recipe {args.name!r} (available: {', '.join(sorted(_RECIPES))})"
        )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _RECIPES[args.name](outdir, args.threads)
    print(f"recipe {args.name} written to {outdir}")
    return 0


# ---------------------------------------------------------------- entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppspdc",
        description="Biphoton spectra from quasi-phase-matched crystals with poling imperfections",
    )
    parser.add_argument("--version", action="version", version=f"ppspdc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", help="refractive indices and wavevectors per wavelength")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("wavelengths_um", nargs="*", help="vacuum wavelengths in um")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("phasematch", help="solve the QPM or birefringent matching condition")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_phasematch)

    p = sub.add_parser("spectrum", help="spectral power density over a wavelength grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("numeric", "analytic"), default=None)
    p.add_argument("--resolution-nm", type=float, default=None, dest="resolution_nm")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble statistics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("fit", help="fit duty cycle and disorder width to a measured spectrum")
    p.add_argument("--config", required=True)
    p.add_argument("--measured", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reproduce", help="run a bundled scenario recipe")
    p.add_argument("name", help=f"one of: {', '.join(sorted(_RECIPES))}")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _COMPUTE_ERRORS as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
