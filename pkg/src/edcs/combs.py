"""Comb descriptions and construction of the entangled signal comb.

Three comb roles exist: ``entangled`` (squeezed pairs from the parametric
source), ``classical`` (the bright comb that displaces the entangled one
on an unbalanced tap coupler) and ``lo`` (the strong local oscillator that
beats with the signal comb at the detector).

Line ``n`` of a comb sits at ``center_freq + n * (line_spacing +
offset_spacing)``; the offset is zero for the entangled and LO combs, and
equal to the beat spacing for the classical comb, so line ``n`` of the
signal beats with LO line ``n`` at ``n * offset_spacing`` in the RF
domain.  Line 0 (the central line) is kept for phase reference only and
never contributes a beatnote.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import yaml
from scipy.optimize import minimize

from .errors import ConfigError
from .gaussian import (
    PairState,
    QuadratureSelector,
    SingleModeState,
    apply_loss,
    apply_loss_single,
    displace,
    displace_single,
    mixed_tmsv_from_measured,
    squeezed_single_mode,
    tmsv_state,
    vacuum_pair,
)
from .ioutil import check_keys

__all__ = [
    "CombConfig",
    "EntangledCombSpec",
    "flat_top_spec",
    "build_entangled_comb",
    "align_lo_phases",
    "sweep_centers",
    "union_line_frequencies",
    "comb_to_dict",
    "comb_from_dict",
    "save_comb",
    "load_comb",
]

ROLES = ("entangled", "classical", "lo")


@dataclass(frozen=True)
class CombConfig:
    """Spectral description of one comb.

    Per-line complex amplitudes are stored as magnitude + phase arrays for
    the positive (+1..+N) and negative (-1..-N) line indices.
    """

    role: str
    center_freq: float
    line_spacing: float
    offset_spacing: float
    n_pairs: int
    amp_pos: np.ndarray
    phase_pos: np.ndarray
    amp_neg: np.ndarray
    phase_neg: np.ndarray
    central_amplitude: float = 0.0
    central_phase: float = 0.0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        n = int(self.n_pairs)
        if n < 1:
            raise ValueError(f"n_pairs must be >= 1, got {self.n_pairs}")
        if not self.line_spacing > 0:
            raise ValueError(f"line_spacing must be > 0, got {self.line_spacing}")
        if abs(self.offset_spacing) >= self.line_spacing / 2:
            raise ValueError(
                "offset_spacing must satisfy |offset| < line_spacing / 2 "
                f"(got {self.offset_spacing} vs {self.line_spacing})"
            )
        object.__setattr__(self, "n_pairs", n)
        for name in ("amp_pos", "phase_pos", "amp_neg", "phase_neg"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            if name.startswith("amp") and np.any(arr < 0):
                raise ValueError(f"{name} must be non-negative")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, CombConfig):
            return NotImplemented
        scalars = (
            "role",
            "center_freq",
            "line_spacing",
            "offset_spacing",
            "n_pairs",
            "central_amplitude",
            "central_phase",
        )
        arrays = ("amp_pos", "phase_pos", "amp_neg", "phase_neg")
        return all(getattr(self, k) == getattr(other, k) for k in scalars) and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in arrays
        )

    def __hash__(self):
        return hash((self.role, self.center_freq, self.line_spacing, self.n_pairs))

    @classmethod
    def flat(
        cls,
        role: str,
        center_freq: float,
        line_spacing: float,
        offset_spacing: float,
        n_pairs: int,
        amplitude: float = 1.0,
        phase: float = 0.0,
        central_amplitude: float = 0.0,
        central_phase: float = 0.0,
    ) -> "CombConfig":
        """Comb with identical amplitude and phase on every line."""
        n = int(n_pairs)
        return cls(
            role,
            center_freq,
            line_spacing,
            offset_spacing,
            n,
            np.full(n, float(amplitude)),
            np.full(n, float(phase)),
            np.full(n, float(amplitude)),
            np.full(n, float(phase)),
            central_amplitude,
            central_phase,
        )

    def _side(self, n: int) -> tuple[np.ndarray, np.ndarray, int]:
        if n == 0 or abs(n) > self.n_pairs:
            raise ValueError(
                f"comb has no line {n} (valid indices: +-1..+-{self.n_pairs})"
            )
        if n > 0:
            return self.amp_pos, self.phase_pos, n - 1
        return self.amp_neg, self.phase_neg, -n - 1

    def amplitude(self, n: int) -> float:
        amp, _, i = self._side(n)
        return float(amp[i])

    def phase(self, n: int) -> float:
        _, ph, i = self._side(n)
        return float(ph[i])

    def complex_amplitude(self, n: int) -> complex:
        amp, ph, i = self._side(n)
        return complex(amp[i] * np.exp(1j * ph[i]))

    def line_frequency(self, n: int) -> float:
        if n != 0:
            self._side(n)  # bounds check
        return self.center_freq + n * (self.line_spacing + self.offset_spacing)

    def scaled(self, factor: float) -> "CombConfig":
        """Copy with every line amplitude multiplied by ``factor``."""
        f = float(factor)
        return replace(
            self,
            amp_pos=self.amp_pos * f,
            amp_neg=self.amp_neg * f,
            central_amplitude=self.central_amplitude * f,
        )


@dataclass(frozen=True)
class EntangledCombSpec:
    """Squeezing profile of the entangled comb plus the tap-coupler ratio.

    ``tap_ratio`` is the power transmissivity of the displacement beam
    splitter (0.99 for a 99/1 tap); ``tap_ratio = 1`` is accepted as the
    degenerate fully-transmissive case with zero displacement.  The
    central line is a phase reference only and is excluded from beatnote
    generation.
    """

    squeeze_db: np.ndarray
    antisqueeze_db: np.ndarray
    tap_ratio: float = 0.99
    central_squeeze_db: float = 0.0
    central_antisqueeze_db: float = 0.0

    def __post_init__(self):
        s = np.array(self.squeeze_db, dtype=float, copy=True)
        a = np.array(self.antisqueeze_db, dtype=float, copy=True)
        if s.ndim != 1 or s.shape != a.shape:
            raise ValueError("squeeze_db and antisqueeze_db must be equal-length 1-d")
        if not (0.0 < self.tap_ratio <= 1.0):
            raise ValueError(f"tap_ratio must lie in (0, 1], got {self.tap_ratio}")
        for sq, anti in zip(s, a):
            mixed_tmsv_from_measured(sq, anti)  # feasibility check
        mixed_tmsv_from_measured(self.central_squeeze_db, self.central_antisqueeze_db)
        s.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "squeeze_db", s)
        object.__setattr__(self, "antisqueeze_db", a)

    @property
    def n_pairs(self) -> int:
        return len(self.squeeze_db)


def flat_top_spec(
    n_pairs: int, squeeze_db: float, antisqueeze_db: float, tap_ratio: float = 0.99
) -> EntangledCombSpec:
    """Flat-top profile: the same squeezing levels on every pair."""
    n = int(n_pairs)
    return EntangledCombSpec(
        np.full(n, float(squeeze_db)), np.full(n, float(antisqueeze_db)), tap_ratio
    )


def build_entangled_comb(
    spec: EntangledCombSpec, classical: CombConfig
) -> tuple[list[PairState], SingleModeState]:
    """Displaced two-mode squeezed pairs from tapping the classical comb.

    Each pair is built from its measured squeezing levels, transmitted
    through the tap (transmissivity ``tap_ratio``) and displaced by
    ``sqrt(1 - tap_ratio)`` times the corresponding classical line
    amplitude.  Returns the N pair states and the central single-mode
    state, which is excluded from beatnote generation.
    """
    if classical.role != "classical":
        raise ValueError(f"displacement comb must have role 'classical', got {classical.role!r}")
    if classical.n_pairs != spec.n_pairs:
        raise ValueError(
            f"pair count mismatch: spec has {spec.n_pairs}, comb has {classical.n_pairs}"
        )
    t = spec.tap_ratio
    refl = np.sqrt(1.0 - t)
    pairs: list[PairState] = []
    for i in range(spec.n_pairs):
        n = i + 1
        r, eta = mixed_tmsv_from_measured(spec.squeeze_db[i], spec.antisqueeze_db[i])
        state = vacuum_pair(n) if r == 0.0 else apply_loss(tmsv_state(r, n), eta, eta)
        state = apply_loss(state, t, t)
        state = displace(
            state,
            refl * classical.complex_amplitude(n),
            refl * classical.complex_amplitude(-n),
        )
        pairs.append(state)
    r0, eta0 = mixed_tmsv_from_measured(
        spec.central_squeeze_db, spec.central_antisqueeze_db
    )
    central = apply_loss_single(squeezed_single_mode(r0), eta0)
    central = apply_loss_single(central, t)
    central = displace_single(
        central,
        refl * classical.central_amplitude * np.exp(1j * classical.central_phase),
    )
    return pairs, central


def _variance_surface(cov: np.ndarray):
    """Balanced-weight quadrature variance as a function of the two LO phases."""
    c = np.asarray(cov, dtype=float)

    def single(block, t):
        return (
            block[0, 0] * np.cos(t) ** 2
            + block[1, 1] * np.sin(t) ** 2
            + 2 * block[0, 1] * np.sin(t) * np.cos(t)
        )

    def cross(t1, t2):
        u1 = np.stack([np.cos(t1), np.sin(t1)], axis=-1)
        u2 = np.stack([np.cos(t2), np.sin(t2)], axis=-1)
        return np.einsum("...i,ij,...j->...", u1, c[:2, 2:], u2)

    def value(t1, t2):
        return 0.5 * (single(c[:2, :2], t1) + single(c[2:, 2:], t2)) + cross(t1, t2)

    return value


def minimum_variance_phases(state: PairState) -> tuple[float, float, float]:
    """Globally minimise the balanced-LO quadrature variance over both phases.

    Returns (theta_n, theta_neg, variance).  A coarse torus grid locates
    the basin and a local polish refines it; when the minimum is a ridge
    in theta_n + theta_neg the symmetric point is returned for
    determinism.
    """
    value = _variance_surface(state.cov)
    grid = np.linspace(0.0, 2 * np.pi, 96, endpoint=False)
    t1g, t2g = np.meshgrid(grid, grid, indexing="ij")
    surface = value(t1g, t2g)
    i, j = np.unravel_index(np.argmin(surface), surface.shape)
    x0 = np.array([grid[i], grid[j]])
    res = minimize(
        lambda th: value(th[0], th[1]),
        x0,
        method="BFGS",
        options={"gtol": 1e-12, "maxiter": 500},
    )
    t1, t2 = res.x
    vmin = float(res.fun)
    # prefer the symmetric representative on the degenerate ridge
    s = np.mod((t1 + t2) / 2.0, 2 * np.pi)
    if value(s, s) <= vmin + 1e-12:
        t1 = t2 = s
        vmin = float(value(s, s))
    t1, t2 = np.mod(t1, 2 * np.pi), np.mod(t2, 2 * np.pi)
    # flipping both phases by pi measures -Q; canonicalise to t1 in [0, pi)
    if t1 >= np.pi:
        t1, t2 = np.mod(t1 - np.pi, 2 * np.pi), np.mod(t2 - np.pi, 2 * np.pi)
    return float(t1), float(t2), vmin


def align_lo_phases(pairs: list[PairState], lo: CombConfig) -> CombConfig:
    """LO configuration measuring the squeezed joint quadrature of every pair.

    Returns a copy of ``lo`` whose per-line phases minimise each pair's
    measured quadrature variance and whose two line amplitudes within a
    pair are balanced.
    """
    if lo.role != "lo":
        raise ValueError(f"expected an LO comb, got role {lo.role!r}")
    if len(pairs) != lo.n_pairs:
        raise ValueError(
            f"pair count mismatch: {len(pairs)} states vs LO with {lo.n_pairs} pairs"
        )
    by_index = {p.pair_index: p for p in pairs}
    if sorted(by_index) != list(range(1, lo.n_pairs + 1)):
        raise ValueError("pair states must carry indices 1..N exactly once")
    amp_pos = np.empty(lo.n_pairs)
    amp_neg = np.empty(lo.n_pairs)
    phase_pos = np.empty(lo.n_pairs)
    phase_neg = np.empty(lo.n_pairs)
    for n in range(1, lo.n_pairs + 1):
        t1, t2, _ = minimum_variance_phases(by_index[n])
        phase_pos[n - 1] = t1
        phase_neg[n - 1] = t2
        balanced = 0.5 * (lo.amplitude(n) + lo.amplitude(-n))
        if balanced <= 0:
            raise ValueError(f"LO pair {n} has zero amplitude; cannot balance")
        amp_pos[n - 1] = balanced
        amp_neg[n - 1] = balanced
    return replace(
        lo,
        amp_pos=amp_pos,
        phase_pos=phase_pos,
        amp_neg=amp_neg,
        phase_neg=phase_neg,
    )


def sweep_centers(base: CombConfig, n_sweeps: int, step_hz: float) -> list[CombConfig]:
    """Copies of ``base`` with the center frequency stepped ``n_sweeps`` times.

    With ``step_hz = line_spacing / n_sweeps`` the union of all line
    frequencies interleaves to an effective spacing of ``step_hz``.
    """
    n = int(n_sweeps)
    if n < 1:
        raise ValueError(f"n_sweeps must be >= 1, got {n_sweeps}")
    if n > 1:
        step = float(step_hz)
        if not (0.0 < step < base.line_spacing):
            raise ValueError(
                f"sweep step must satisfy 0 < step < line_spacing, got {step_hz}"
            )
    return [replace(base, center_freq=base.center_freq + k * float(step_hz)) for k in range(n)]


def union_line_frequencies(configs: list[CombConfig]) -> np.ndarray:
    """Sorted optical frequencies of every (non-central) line of every config."""
    freqs = [
        cfg.line_frequency(n)
        for cfg in configs
        for n in list(range(-cfg.n_pairs, 0)) + list(range(1, cfg.n_pairs + 1))
    ]
    return np.array(sorted(freqs))


# -- serialisation ----------------------------------------------------------

_COMB_KEYS = {
    "role",
    "center_freq_hz",
    "line_spacing_hz",
    "offset_spacing_hz",
    "n_pairs",
    "lines",
    "central",
}
_LINE_KEYS = {"index", "amplitude", "phase_rad"}
_CENTRAL_KEYS = {"amplitude", "phase_rad"}


def comb_to_dict(comb: CombConfig) -> dict:
    """Plain-dict form of a comb (frequencies in Hz, amplitude + phase pairs)."""
    lines = []
    for n in list(range(-comb.n_pairs, 0)) + list(range(1, comb.n_pairs + 1)):
        lines.append(
            {
                "index": n,
                "amplitude": comb.amplitude(n),
                "phase_rad": comb.phase(n),
            }
        )
    return {
        "role": comb.role,
        "center_freq_hz": float(comb.center_freq),
        "line_spacing_hz": float(comb.line_spacing),
        "offset_spacing_hz": float(comb.offset_spacing),
        "n_pairs": comb.n_pairs,
        "lines": lines,
        "central": {
            "amplitude": float(comb.central_amplitude),
            "phase_rad": float(comb.central_phase),
        },
    }


def comb_from_dict(data: dict) -> CombConfig:
    check_keys(data, _COMB_KEYS, "comb")
    try:
        n = int(data["n_pairs"])
        lines = data["lines"]
        if not isinstance(lines, list) or len(lines) != 2 * n:
            raise ConfigError(f"comb.lines: expected {2 * n} entries")
        amp = {}
        ph = {}
        for k, entry in enumerate(lines):
            check_keys(entry, _LINE_KEYS, f"comb.lines[{k}]")
            amp[int(entry["index"])] = float(entry["amplitude"])
            ph[int(entry["index"])] = float(entry["phase_rad"])
        central = data.get("central", {"amplitude": 0.0, "phase_rad": 0.0})
        check_keys(central, _CENTRAL_KEYS, "comb.central")
        return CombConfig(
            data["role"],
            float(data["center_freq_hz"]),
            float(data["line_spacing_hz"]),
            float(data["offset_spacing_hz"]),
            n,
            np.array([amp[i] for i in range(1, n + 1)]),
            np.array([ph[i] for i in range(1, n + 1)]),
            np.array([amp[-i] for i in range(1, n + 1)]),
            np.array([ph[-i] for i in range(1, n + 1)]),
            float(central["amplitude"]),
            float(central["phase_rad"]),
        )
    except KeyError as exc:
        raise ConfigError(f"comb: missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"comb: {exc}") from exc


def save_comb(comb: CombConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(comb_to_dict(comb), fh, sort_keys=True)


def load_comb(path) -> CombConfig:
    with open(path) as fh:
        return comb_from_dict(yaml.safe_load(fh))
