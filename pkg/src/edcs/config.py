"""Run configuration: versioned YAML schema with strict validation.

Every command takes one config file.  Unknown keys are rejected with the
full dotted path of the offender; values are validated before any
computation.  Parsing materialises defaults, so parse -> serialize ->
parse is the identity.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .ioutil import check_keys, sha256_of

__all__ = [
    "RunConfig",
    "CombSection",
    "SqueezingSection",
    "DetectionSection",
    "SampleSection",
    "DspSection",
    "PhaseNoiseSection",
    "SpeedupSection",
    "UarSection",
    "load_config",
    "parse_config",
    "config_to_dict",
    "save_config",
    "config_hash",
]

SCENARIOS = ("edcs", "classical-dcs")
CONFIG_VERSION = 1


def _as_float(val, path: str) -> float:
    # YAML 1.1 reads unsigned exponents like 1.0e6 as strings; accept them
    if isinstance(val, str):
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"{path}: expected a number, got {val!r}") from None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {val!r}")
    return float(val)


def _as_int(val, path: str) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}: expected an integer, got {val!r}")
    return val


def _as_bool(val, path: str) -> bool:
    if not isinstance(val, bool):
        raise ConfigError(f"{path}: expected true/false, got {val!r}")
    return val


def _as_str(val, path: str, choices=None) -> str:
    if not isinstance(val, str):
        raise ConfigError(f"{path}: expected a string, got {val!r}")
    if choices is not None and val not in choices:
        raise ConfigError(f"{path}: must be one of {choices}, got {val!r}")
    return val


def _float_list(val, path: str) -> list[float]:
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    return [_as_float(v, f"{path}[{i}]") for i, v in enumerate(val)]


@dataclass(frozen=True)
class SqueezingSection:
    profile: str = "measured"            # or "flat_top"
    squeeze_db: tuple[float, ...] = (2.1, 2.275, 2.45, 2.625, 2.8)
    antisqueeze_db: tuple[float, ...] = (9.3, 10.3, 11.3, 12.3, 13.3)
    central_squeeze_db: float = 0.0
    central_antisqueeze_db: float = 0.0


@dataclass(frozen=True)
class CombSection:
    center_freq_hz: float = 193.4e12
    line_spacing_hz: float = 17.565e9
    offset_spacing_hz: float = 4.0e6
    n_pairs: int = 5
    n_sweeps: int = 1
    sweep_step_hz: float | None = None   # default: line_spacing / n_sweeps
    tap_ratio: float = 0.99
    classical_amplitude: float = 4.0
    classical_phase_rad: float = math.pi / 2
    central_amplitude: float = 0.0
    squeezing: SqueezingSection = field(default_factory=SqueezingSection)


@dataclass(frozen=True)
class DetectionSection:
    quantum_efficiency: float = 1.0
    fringe_visibility: float = 1.0
    electrical_noise_db_below_vacuum: float | None = None


@dataclass(frozen=True)
class SampleSection:
    enabled: bool = False
    line_list: str = ""
    path_length_cm: float = 17.5
    pressure_torr: float = 25.0
    temperature_k: float = 296.0
    mole_fraction: float = 0.7
    calibrate_peak_depth_db: float | None = None


@dataclass(frozen=True)
class PhaseNoiseSection:
    level_dbc_hz: float = -75.0
    bandwidth_hz: float = 1.0e4
    segment_s: float = 1.0e-5


@dataclass(frozen=True)
class DspSection:
    sample_rate_hz: float = 100.0e6
    duration_s: float = 0.01
    rbw_hz: float = 1.0e5
    window: str = "rect"
    noise_kernel_hz: float | None = None
    save_interferogram: bool = True
    phase_noise: PhaseNoiseSection | None = None


@dataclass(frozen=True)
class SpeedupSection:
    m_list: tuple[int, ...] = (1, 10, 100, 1000)
    n_seeds: int = 40
    target_precision: float | None = None


@dataclass(frozen=True)
class UarSection:
    squeeze_db: float = 10.0
    antisqueeze_db: float = 15.0
    n_pairs: int = 50
    uar_values: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 30.0, 100.0)
    depth_values_db: tuple[float, ...] = (0.1, 0.25, 3.0)
    displacement: float = 1.0
    ideal_detection: bool = True


@dataclass(frozen=True)
class RunConfig:
    version: int = CONFIG_VERSION
    scenario: str = "edcs"
    seed: int = 0
    output_dir: str = "out"
    comb: CombSection = field(default_factory=CombSection)
    detection: DetectionSection = field(default_factory=DetectionSection)
    sample: SampleSection = field(default_factory=SampleSection)
    dsp: DspSection = field(default_factory=DspSection)
    speedup: SpeedupSection = field(default_factory=SpeedupSection)
    uar: UarSection = field(default_factory=UarSection)
    base_dir: str = "."   # directory of the config file, for relative paths


def _parse_squeezing(data: dict, n_pairs: int) -> SqueezingSection:
    check_keys(
        data,
        {
            "profile",
            "squeeze_db",
            "antisqueeze_db",
            "central_squeeze_db",
            "central_antisqueeze_db",
        },
        "comb.squeezing",
    )
    profile = _as_str(data.get("profile", "measured"), "comb.squeezing.profile",
                      ("measured", "flat_top"))
    s_raw = data.get("squeeze_db", list(SqueezingSection().squeeze_db))
    a_raw = data.get("antisqueeze_db", list(SqueezingSection().antisqueeze_db))
    if profile == "flat_top":
        s = [_as_float(s_raw, "comb.squeezing.squeeze_db")] * n_pairs
        a = [_as_float(a_raw, "comb.squeezing.antisqueeze_db")] * n_pairs
    else:
        s = _float_list(s_raw, "comb.squeezing.squeeze_db")
        a = _float_list(a_raw, "comb.squeezing.antisqueeze_db")
        if len(s) != n_pairs or len(a) != n_pairs:
            raise ConfigError(
                "comb.squeezing: squeeze_db/antisqueeze_db must list one value "
                f"per pair ({n_pairs}), got {len(s)}/{len(a)}"
            )
    for i, (sv, av) in enumerate(zip(s, a)):
        if sv < 0 or av < sv:
            raise ConfigError(
                f"comb.squeezing: pair {i + 1} needs antisqueeze_db >= squeeze_db >= 0"
            )
    return SqueezingSection(
        profile=profile,
        squeeze_db=tuple(s),
        antisqueeze_db=tuple(a),
        central_squeeze_db=_as_float(
            data.get("central_squeeze_db", 0.0), "comb.squeezing.central_squeeze_db"
        ),
        central_antisqueeze_db=_as_float(
            data.get("central_antisqueeze_db", 0.0),
            "comb.squeezing.central_antisqueeze_db",
        ),
    )


def _parse_comb(data: dict) -> CombSection:
    check_keys(
        data,
        {
            "center_freq_hz",
            "line_spacing_hz",
            "offset_spacing_hz",
            "n_pairs",
            "n_sweeps",
            "sweep_step_hz",
            "tap_ratio",
            "classical_amplitude",
            "classical_phase_rad",
            "central_amplitude",
            "squeezing",
        },
        "comb",
    )
    d = CombSection()
    n_pairs = _as_int(data.get("n_pairs", d.n_pairs), "comb.n_pairs")
    if n_pairs < 1:
        raise ConfigError("comb.n_pairs: must be >= 1")
    n_sweeps = _as_int(data.get("n_sweeps", d.n_sweeps), "comb.n_sweeps")
    if n_sweeps < 1:
        raise ConfigError("comb.n_sweeps: must be >= 1")
    line_spacing = _as_float(
        data.get("line_spacing_hz", d.line_spacing_hz), "comb.line_spacing_hz"
    )
    step_raw = data.get("sweep_step_hz", None)
    step = None if step_raw is None else _as_float(step_raw, "comb.sweep_step_hz")
    tap = _as_float(data.get("tap_ratio", d.tap_ratio), "comb.tap_ratio")
    if not (0.0 < tap <= 1.0):
        raise ConfigError("comb.tap_ratio: must lie in (0, 1]")
    return CombSection(
        center_freq_hz=_as_float(
            data.get("center_freq_hz", d.center_freq_hz), "comb.center_freq_hz"
        ),
        line_spacing_hz=line_spacing,
        offset_spacing_hz=_as_float(
            data.get("offset_spacing_hz", d.offset_spacing_hz), "comb.offset_spacing_hz"
        ),
        n_pairs=n_pairs,
        n_sweeps=n_sweeps,
        sweep_step_hz=step,
        tap_ratio=tap,
        classical_amplitude=_as_float(
            data.get("classical_amplitude", d.classical_amplitude),
            "comb.classical_amplitude",
        ),
        classical_phase_rad=_as_float(
            data.get("classical_phase_rad", d.classical_phase_rad),
            "comb.classical_phase_rad",
        ),
        central_amplitude=_as_float(
            data.get("central_amplitude", d.central_amplitude), "comb.central_amplitude"
        ),
        squeezing=_parse_squeezing(data.get("squeezing", {}), n_pairs),
    )


def _parse_detection(data: dict) -> DetectionSection:
    check_keys(
        data,
        {"quantum_efficiency", "fringe_visibility", "electrical_noise_db_below_vacuum"},
        "detection",
    )
    d = DetectionSection()
    qe = _as_float(
        data.get("quantum_efficiency", d.quantum_efficiency), "detection.quantum_efficiency"
    )
    vis = _as_float(
        data.get("fringe_visibility", d.fringe_visibility), "detection.fringe_visibility"
    )
    for name, v in (("quantum_efficiency", qe), ("fringe_visibility", vis)):
        if not (0.0 < v <= 1.0):
            raise ConfigError(f"detection.{name}: must lie in (0, 1]")
    el_raw = data.get("electrical_noise_db_below_vacuum", None)
    el = None if el_raw is None else _as_float(
        el_raw, "detection.electrical_noise_db_below_vacuum"
    )
    return DetectionSection(qe, vis, el)


def _parse_sample(data: dict) -> SampleSection:
    check_keys(
        data,
        {
            "enabled",
            "line_list",
            "path_length_cm",
            "pressure_torr",
            "temperature_k",
            "mole_fraction",
            "calibrate_peak_depth_db",
        },
        "sample",
    )
    d = SampleSection()
    enabled = _as_bool(data.get("enabled", d.enabled), "sample.enabled")
    cal_raw = data.get("calibrate_peak_depth_db", None)
    out = SampleSection(
        enabled=enabled,
        line_list=_as_str(data.get("line_list", d.line_list), "sample.line_list"),
        path_length_cm=_as_float(
            data.get("path_length_cm", d.path_length_cm), "sample.path_length_cm"
        ),
        pressure_torr=_as_float(
            data.get("pressure_torr", d.pressure_torr), "sample.pressure_torr"
        ),
        temperature_k=_as_float(
            data.get("temperature_k", d.temperature_k), "sample.temperature_k"
        ),
        mole_fraction=_as_float(
            data.get("mole_fraction", d.mole_fraction), "sample.mole_fraction"
        ),
        calibrate_peak_depth_db=None
        if cal_raw is None
        else _as_float(cal_raw, "sample.calibrate_peak_depth_db"),
    )
    if enabled and not out.line_list:
        raise ConfigError("sample.line_list: required when sample.enabled is true")
    if not (0.0 <= out.mole_fraction <= 1.0):
        raise ConfigError("sample.mole_fraction: must lie in [0, 1]")
    return out


def _parse_phase_noise(data) -> PhaseNoiseSection | None:
    if data is None:
        return None
    check_keys(data, {"level_dbc_hz", "bandwidth_hz", "segment_s"}, "dsp.phase_noise")
    d = PhaseNoiseSection()
    return PhaseNoiseSection(
        level_dbc_hz=_as_float(
            data.get("level_dbc_hz", d.level_dbc_hz), "dsp.phase_noise.level_dbc_hz"
        ),
        bandwidth_hz=_as_float(
            data.get("bandwidth_hz", d.bandwidth_hz), "dsp.phase_noise.bandwidth_hz"
        ),
        segment_s=_as_float(
            data.get("segment_s", d.segment_s), "dsp.phase_noise.segment_s"
        ),
    )


def _parse_dsp(data: dict) -> DspSection:
    check_keys(
        data,
        {
            "sample_rate_hz",
            "duration_s",
            "rbw_hz",
            "window",
            "noise_kernel_hz",
            "save_interferogram",
            "phase_noise",
        },
        "dsp",
    )
    d = DspSection()
    kern_raw = data.get("noise_kernel_hz", None)
    return DspSection(
        sample_rate_hz=_as_float(
            data.get("sample_rate_hz", d.sample_rate_hz), "dsp.sample_rate_hz"
        ),
        duration_s=_as_float(data.get("duration_s", d.duration_s), "dsp.duration_s"),
        rbw_hz=_as_float(data.get("rbw_hz", d.rbw_hz), "dsp.rbw_hz"),
        window=_as_str(data.get("window", d.window), "dsp.window", ("rect", "hann")),
        noise_kernel_hz=None if kern_raw is None else _as_float(kern_raw, "dsp.noise_kernel_hz"),
        save_interferogram=_as_bool(
            data.get("save_interferogram", d.save_interferogram), "dsp.save_interferogram"
        ),
        phase_noise=_parse_phase_noise(data.get("phase_noise", None)),
    )


def _parse_speedup(data: dict) -> SpeedupSection:
    check_keys(data, {"m_list", "n_seeds", "target_precision"}, "speedup")
    d = SpeedupSection()
    m_list = data.get("m_list", list(d.m_list))
    if not isinstance(m_list, list) or not m_list:
        raise ConfigError("speedup.m_list: expected a non-empty list of integers")
    m = tuple(_as_int(v, f"speedup.m_list[{i}]") for i, v in enumerate(m_list))
    if any(v < 1 for v in m):
        raise ConfigError("speedup.m_list: entries must be >= 1")
    n_seeds = _as_int(data.get("n_seeds", d.n_seeds), "speedup.n_seeds")
    if n_seeds < 10:
        raise ConfigError("speedup.n_seeds: need at least 10 seeds")
    tp_raw = data.get("target_precision", None)
    return SpeedupSection(
        m_list=m,
        n_seeds=n_seeds,
        target_precision=None if tp_raw is None else _as_float(tp_raw, "speedup.target_precision"),
    )


def _parse_uar(data: dict) -> UarSection:
    check_keys(
        data,
        {
            "squeeze_db",
            "antisqueeze_db",
            "n_pairs",
            "uar_values",
            "depth_values_db",
            "displacement",
            "ideal_detection",
        },
        "uar",
    )
    d = UarSection()
    return UarSection(
        squeeze_db=_as_float(data.get("squeeze_db", d.squeeze_db), "uar.squeeze_db"),
        antisqueeze_db=_as_float(
            data.get("antisqueeze_db", d.antisqueeze_db), "uar.antisqueeze_db"
        ),
        n_pairs=_as_int(data.get("n_pairs", d.n_pairs), "uar.n_pairs"),
        uar_values=tuple(
            _float_list(data.get("uar_values", list(d.uar_values)), "uar.uar_values")
        ),
        depth_values_db=tuple(
            _float_list(
                data.get("depth_values_db", list(d.depth_values_db)), "uar.depth_values_db"
            )
        ),
        displacement=_as_float(data.get("displacement", d.displacement), "uar.displacement"),
        ideal_detection=_as_bool(
            data.get("ideal_detection", d.ideal_detection), "uar.ideal_detection"
        ),
    )


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    """Validate a raw mapping and materialise defaults."""
    check_keys(
        data,
        {
            "version",
            "scenario",
            "seed",
            "output_dir",
            "comb",
            "detection",
            "sample",
            "dsp",
            "speedup",
            "uar",
        },
        "config",
    )
    if "version" not in data:
        raise ConfigError("config.version: required")
    version = _as_int(data["version"], "config.version")
    if version != CONFIG_VERSION:
        raise ConfigError(
            f"config.version: unsupported version {version} (expected {CONFIG_VERSION})"
        )
    scenario = _as_str(data.get("scenario", "edcs"), "config.scenario", SCENARIOS)
    return RunConfig(
        version=version,
        scenario=scenario,
        seed=_as_int(data.get("seed", 0), "config.seed"),
        output_dir=_as_str(data.get("output_dir", "out"), "config.output_dir"),
        comb=_parse_comb(data.get("comb", {})),
        detection=_parse_detection(data.get("detection", {})),
        sample=_parse_sample(data.get("sample", {})),
        dsp=_parse_dsp(data.get("dsp", {})),
        speedup=_parse_speedup(data.get("speedup", {})),
        uar=_parse_uar(data.get("uar", {})),
        base_dir=base_dir,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return parse_config(raw, base_dir=str(path.parent))


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical plain-dict form (drops the load-time base_dir)."""
    out = asdict(cfg)
    out.pop("base_dir")
    for section in ("comb", "speedup", "uar"):
        for key, val in list(out[section].items()):
            if isinstance(val, tuple):
                out[section][key] = list(val)
    sq = out["comb"]["squeezing"]
    for key, val in list(sq.items()):
        if isinstance(val, tuple):
            sq[key] = list(val)
    return out


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=True))


def config_hash(cfg: RunConfig) -> str:
    return sha256_of(config_to_dict(cfg))
