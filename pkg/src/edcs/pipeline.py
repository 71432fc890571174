"""Assembly of simulation scenarios from a run configuration.

Bridges the config schema to the physics modules: builds the three combs,
aligns the LO, applies the gas sample per line, and produces beatnote
records for the entangled and classical arms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace
from pathlib import Path

import numpy as np

from .absorption import (
    GasCell,
    SpectralLine,
    calibrate_strength_scale,
    ingest_line_list,
    transmittance,
)
from .combs import (
    CombConfig,
    EntangledCombSpec,
    align_lo_phases,
    build_entangled_comb,
    sweep_centers,
)
from .config import RunConfig
from .detection import BeatnoteRecord, DetectionImperfections, beatnote_model
from .errors import ConfigError
from .gaussian import PairState, SingleModeState

__all__ = ["Scenario", "make_detection", "make_cell", "load_sample_lines", "build_scenario"]


def make_detection(cfg: RunConfig) -> DetectionImperfections:
    det = cfg.detection
    return DetectionImperfections(
        det.quantum_efficiency,
        det.fringe_visibility,
        det.electrical_noise_db_below_vacuum,
    )


def make_cell(cfg: RunConfig) -> GasCell:
    s = cfg.sample
    return GasCell(s.path_length_cm, s.pressure_torr, s.temperature_k, s.mole_fraction)


def load_sample_lines(cfg: RunConfig) -> list[SpectralLine]:
    """Ingest the configured line list (path relative to the config file)."""
    s = cfg.sample
    path = Path(s.line_list)
    if not path.is_absolute():
        path = Path(cfg.base_dir) / path
    if not path.exists():
        raise FileNotFoundError(f"line list not found: {path}")
    lines = ingest_line_list(path)
    if s.calibrate_peak_depth_db is not None:
        lines, _ = calibrate_strength_scale(lines, make_cell(cfg), s.calibrate_peak_depth_db)
    return lines


@dataclass(frozen=True)
class Scenario:
    """One sweep position of a configured experiment, both arms buildable."""

    classical: CombConfig
    lo: CombConfig
    pairs: tuple[PairState, ...]
    central: SingleModeState
    imp: DetectionImperfections
    delta_f: float
    etas_pos: tuple[float, ...]
    etas_neg: tuple[float, ...]

    def records(self) -> list[BeatnoteRecord]:
        return [
            beatnote_model(
                pair,
                self.lo,
                self.etas_pos[pair.pair_index - 1],
                self.etas_neg[pair.pair_index - 1],
                self.imp,
                self.delta_f,
            )
            for pair in self.pairs
        ]

def _comb_set(
    cfg: RunConfig, entangled: bool, flip_positive: bool = False
) -> tuple[EntangledCombSpec, CombConfig, CombConfig]:
    comb = cfg.comb
    sq = comb.squeezing
    if entangled:
        squeeze = np.asarray(sq.squeeze_db)
        antisqueeze = np.asarray(sq.antisqueeze_db)
        central_s, central_a = sq.central_squeeze_db, sq.central_antisqueeze_db
    else:
        squeeze = np.zeros(comb.n_pairs)
        antisqueeze = np.zeros(comb.n_pairs)
        central_s = central_a = 0.0
    try:
        spec = EntangledCombSpec(
            squeeze, antisqueeze, comb.tap_ratio, central_s, central_a
        )
        n = comb.n_pairs
        phase_pos = comb.classical_phase_rad + (np.pi if flip_positive else 0.0)
        classical = CombConfig(
            "classical",
            comb.center_freq_hz,
            comb.line_spacing_hz,
            comb.offset_spacing_hz,
            n,
            np.full(n, comb.classical_amplitude),
            np.full(n, phase_pos),
            np.full(n, comb.classical_amplitude),
            np.full(n, comb.classical_phase_rad),
            comb.central_amplitude,
            comb.classical_phase_rad,
        )
        lo = CombConfig.flat(
            "lo", comb.center_freq_hz, comb.line_spacing_hz, 0.0, comb.n_pairs,
            amplitude=1.0,
        )
    except ValueError as exc:
        raise ConfigError(f"comb: {exc}") from exc
    return spec, classical, lo


def build_scenario(
    cfg: RunConfig,
    scenario: str | None = None,
    lines: list[SpectralLine] | None = None,
    sweep_index: int = 0,
    flip_positive: bool = False,
    with_sample: bool | None = None,
) -> Scenario:
    """Instantiate one arm ("edcs" or "classical-dcs") at one sweep position.

    ``flip_positive`` negates the displacement of the positive-index lines
    (the second shot of the two-shot aliasing protocol);
    ``with_sample=False`` builds the sample-free reference arm.
    """
    which = scenario or cfg.scenario
    if which not in ("edcs", "classical-dcs"):
        raise ConfigError(f"scenario: unknown scenario {which!r}")
    spec, classical, lo = _comb_set(
        cfg, entangled=(which == "edcs"), flip_positive=flip_positive
    )
    comb = cfg.comb
    if comb.n_sweeps > 1:
        step = comb.sweep_step_hz
        if step is None:
            step = comb.line_spacing_hz / comb.n_sweeps
        try:
            classical = sweep_centers(classical, comb.n_sweeps, step)[sweep_index]
            lo = sweep_centers(lo, comb.n_sweeps, step)[sweep_index]
        except ValueError as exc:
            raise ConfigError(f"comb.sweep_step_hz: {exc}") from exc
    pairs, central = build_entangled_comb(spec, classical)
    # The classical baseline keeps the LO of the entangled configuration
    # (same comb set, entangled comb turned off), so both arms share phases
    # and signal means.  With zero squeezing everywhere the alignment is
    # degenerate and the LO phases track the displacement instead.
    if np.any(np.asarray(cfg.comb.squeezing.squeeze_db) > 0):
        align_spec, align_classical, _ = _comb_set(
            cfg, entangled=True, flip_positive=flip_positive
        )
        if comb.n_sweeps > 1:
            align_classical = sweep_centers(align_classical, comb.n_sweeps, step)[sweep_index]
        align_pairs, _ = build_entangled_comb(align_spec, align_classical)
        lo = align_lo_phases(list(align_pairs), lo)
    else:
        n = comb.n_pairs
        phases = np.full(n, comb.classical_phase_rad)
        lo = dc_replace(lo, phase_pos=phases, phase_neg=phases)

    n = comb.n_pairs
    etas_pos = np.ones(n)
    etas_neg = np.ones(n)
    sample_on = cfg.sample.enabled if with_sample is None else with_sample
    if sample_on:
        if lines is None:
            lines = load_sample_lines(cfg)
        cell = make_cell(cfg)
        for k in range(1, n + 1):
            etas_pos[k - 1] = transmittance(classical.line_frequency(k), cell, lines)
            etas_neg[k - 1] = transmittance(classical.line_frequency(-k), cell, lines)
    return Scenario(
        classical=classical,
        lo=lo,
        pairs=tuple(pairs),
        central=central,
        imp=make_detection(cfg),
        delta_f=comb.offset_spacing_hz,
        etas_pos=tuple(float(v) for v in etas_pos),
        etas_neg=tuple(float(v) for v in etas_neg),
    )
