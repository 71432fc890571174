"""Gaussian-state primitives for comb mode pairs, in shot-noise units.

Conventions used throughout the package:

* Quadratures are scaled so the vacuum covariance is the identity
  (variance 1 = standard quantum limit).
* A coherent displacement ``alpha`` shifts the (x, p) mean of a mode by
  ``(sqrt(2) Re alpha, sqrt(2) Im alpha)``.
* For a squeezed pair with parameter ``r`` the joint quadratures
  ``(x_n - x_-n)/sqrt(2)`` and ``(p_n + p_-n)/sqrt(2)`` have variance
  ``exp(-2 r)``; the conjugate combinations have ``exp(+2 r)``.  The
  local-oscillator alignment in :mod:`edcs.combs` relies on this sign
  choice.

Mode pairs are statistically independent of one another, so nothing in
the package ever forms a covariance matrix larger than 4x4.

All state objects are immutable; operations are pure functions and safe
to call concurrently.  Sampling takes an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PairState",
    "SingleModeState",
    "QuadratureSelector",
    "vacuum_pair",
    "tmsv_state",
    "mixed_tmsv_from_measured",
    "displace",
    "apply_loss",
    "quadrature_variance",
    "sample_quadrature",
    "squeezed_single_mode",
    "displace_single",
    "apply_loss_single",
    "single_quadrature_variance",
    "symplectic_eigenvalues",
]

SYMMETRY_ATOL = 1e-12
SYMPLECTIC_ATOL = 1e-9


def _omega(n_modes: int) -> np.ndarray:
    """Standard symplectic form for (x1, p1, x2, p2, ...) ordering."""
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = block
    return out


_OMEGA_1 = _omega(1)
_OMEGA_2 = _omega(2)


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a covariance matrix (all >= 1 for physical states)."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    omega = {1: _OMEGA_1, 2: _OMEGA_2}.get(n) if n in (1, 2) else _omega(n)
    ev = np.linalg.eigvals(1j * (omega @ cov))
    ev = np.sort(ev.real)
    return ev[n:]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


def _validate_gaussian(mean, cov, n_modes: int, label: str):
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = 2 * n_modes
    if mean.shape != (d,):
        raise ValueError(f"{label}: mean must have shape ({d},), got {mean.shape}")
    if cov.shape != (d, d):
        raise ValueError(f"{label}: cov must have shape ({d}, {d}), got {cov.shape}")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise ValueError(f"{label}: non-finite entries")
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_ATOL:
        raise ValueError(f"{label}: covariance not symmetric within {SYMMETRY_ATOL}")
    nu_min = symplectic_eigenvalues(cov).min()
    if nu_min < 1.0 - SYMPLECTIC_ATOL:
        raise ValueError(
            f"{label}: unphysical covariance, min symplectic eigenvalue "
            f"{nu_min:.12g} < 1 - {SYMPLECTIC_ATOL}"
        )
    return _frozen(mean), _frozen(cov)


@dataclass(frozen=True)
class PairState:
    """Gaussian state of one (+n, -n) comb mode pair.

    ``mean`` is the quadrature mean vector (x_n, p_n, x_-n, p_-n) and
    ``cov`` the 4x4 covariance matrix; the vacuum has zero mean and
    identity covariance.
    """

    mean: np.ndarray
    cov: np.ndarray
    pair_index: int = 1

    def __post_init__(self):
        mean, cov = _validate_gaussian(self.mean, self.cov, 2, "PairState")
        if int(self.pair_index) < 1:
            raise ValueError(f"pair_index must be >= 1, got {self.pair_index}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "pair_index", int(self.pair_index))


@dataclass(frozen=True)
class SingleModeState:
    """Gaussian state of a single mode (used for the central comb line)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean, cov = _validate_gaussian(self.mean, self.cov, 1, "SingleModeState")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class QuadratureSelector:
    """LO-defined measured quadrature of a pair.

    ``weights`` are the per-mode amplitudes (w_n, w_-n) and ``phases`` the
    per-mode quadrature angles in radians.  The measured observable is

        Q = sum_i w_i (x_i cos(theta_i) + p_i sin(theta_i)) / ||w||

    normalised so any selector has unit variance on vacuum.
    """

    weights: tuple[float, float]
    phases: tuple[float, float]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        t = tuple(float(v) for v in self.phases)
        if len(w) != 2 or len(t) != 2:
            raise ValueError("weights and phases must each have two entries")
        if not all(np.isfinite(w)) or not all(np.isfinite(t)):
            raise ValueError("selector entries must be finite")
        if w[0] == 0.0 and w[1] == 0.0:
            raise ValueError("selector weights must not all be zero")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "phases", t)

    def vector(self) -> np.ndarray:
        """Unit-norm phase-space direction of the measured quadrature."""
        (w1, w2), (t1, t2) = self.weights, self.phases
        v = np.array(
            [w1 * np.cos(t1), w1 * np.sin(t1), w2 * np.cos(t2), w2 * np.sin(t2)]
        )
        return v / np.hypot(w1, w2)

    def conjugate(self) -> "QuadratureSelector":
        """Selector rotated by 90 degrees on both modes."""
        t1, t2 = self.phases
        return QuadratureSelector(self.weights, (t1 + np.pi / 2, t2 + np.pi / 2))


def vacuum_pair(pair_index: int = 1) -> PairState:
    return PairState(np.zeros(4), np.eye(4), pair_index)


def tmsv_state(r: float, pair_index: int = 1) -> PairState:
    """Two-mode squeezed vacuum with squeezing parameter ``r`` >= 0.

    Diagonal variances are cosh(2r) and the cross-mode correlations are
    +sinh(2r) in x and -sinh(2r) in p, which squeezes the x-difference and
    p-sum joint quadratures.
    """
    r = float(r)
    if not np.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")
    ch, sh = np.cosh(2 * r), np.sinh(2 * r)
    cov = np.array(
        [
            [ch, 0.0, sh, 0.0],
            [0.0, ch, 0.0, -sh],
            [sh, 0.0, ch, 0.0],
            [0.0, -sh, 0.0, ch],
        ]
    )
    return PairState(np.zeros(4), cov, pair_index)


def mixed_tmsv_from_measured(
    squeeze_db: float, antisqueeze_db: float
) -> tuple[float, float]:
    """Infer (r, eta) from measured squeezing/anti-squeezing in dB.

    Solves the pure-squeezer-plus-symmetric-loss model

        eta exp(-2r) + (1 - eta) = 10**(-S/10)
        eta exp(+2r) + (1 - eta) = 10**(+A/10)

    so that ``apply_loss(tmsv_state(r), eta, eta)`` reproduces both
    measured variances.  Requires A >= S >= 0 (S = A is the pure-state
    limit; S = 0 demands A = 0 and returns the vacuum).
    """
    s_db, a_db = float(squeeze_db), float(antisqueeze_db)
    if not (np.isfinite(s_db) and np.isfinite(a_db)):
        raise ValueError("squeezing levels must be finite")
    if s_db < 0 or a_db < s_db:
        raise ValueError(
            "infeasible squeezing pair: need antisqueeze_db >= squeeze_db >= 0, "
            f"got squeeze={s_db} dB, antisqueeze={a_db} dB"
        )
    if s_db == 0.0:
        if a_db != 0.0:
            raise ValueError(
                "zero squeezing with nonzero anti-squeezing has no "
                "pure-squeezer-plus-loss model (would need eta > 1)"
            )
        return 0.0, 1.0
    v_sq = 10.0 ** (-s_db / 10.0)
    v_anti = 10.0 ** (a_db / 10.0)
    u = (1.0 - v_sq) / (v_anti - 1.0)  # = exp(-2 r)
    r = -0.5 * np.log(u)
    eta = (1.0 - v_sq) / (1.0 - u)
    if eta > 1.0 + 1e-12:
        raise ValueError(
            f"measured pair ({s_db} dB, {a_db} dB) implies transmission {eta} > 1"
        )
    return float(r), float(min(eta, 1.0))


def displace(state: PairState, alpha_n: complex, alpha_neg: complex) -> PairState:
    """Coherent displacement of both modes; covariance untouched."""
    a1, a2 = complex(alpha_n), complex(alpha_neg)
    if not (np.isfinite(a1.real) and np.isfinite(a1.imag)
            and np.isfinite(a2.real) and np.isfinite(a2.imag)):
        raise ValueError("displacement amplitudes must be finite")
    shift = np.sqrt(2.0) * np.array([a1.real, a1.imag, a2.real, a2.imag])
    return PairState(state.mean + shift, state.cov, state.pair_index)


def apply_loss(state: PairState, eta_n: float, eta_neg: float) -> PairState:
    """Independent vacuum-admixture loss channels on the two modes.

    Power transmittances eta in [0, 1]; eta = 1 on both modes is an exact
    identity.
    """
    e1, e2 = float(eta_n), float(eta_neg)
    for e in (e1, e2):
        if not np.isfinite(e) or not (0.0 <= e <= 1.0):
            raise ValueError(f"transmittance must lie in [0, 1], got {e}")
    g = np.sqrt(np.array([e1, e1, e2, e2]))
    cov = state.cov * np.outer(g, g)
    cov[np.diag_indices(4)] += 1.0 - g**2
    return PairState(state.mean * g, cov, state.pair_index)


def quadrature_variance(
    state: PairState, sel: QuadratureSelector
) -> tuple[float, float]:
    """Mean and variance of the normalised selector observable."""
    v = sel.vector()
    return float(v @ state.mean), float(v @ state.cov @ v)


def sample_quadrature(
    state: PairState, sel: QuadratureSelector, n_samples: int, seed: int
) -> np.ndarray:
    """i.i.d. Gaussian draws of the selector observable; deterministic per seed."""
    n = int(n_samples)
    if n < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    mean, var = quadrature_variance(state, sel)
    rng = np.random.default_rng(seed)
    return rng.normal(mean, np.sqrt(var), n)


# -- single-mode variants, used for the central comb line ------------------


def squeezed_single_mode(r: float) -> SingleModeState:
    """Single-mode squeezed vacuum; x is the squeezed quadrature."""
    r = float(r)
    if not np.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")
    return SingleModeState(np.zeros(2), np.diag([np.exp(-2 * r), np.exp(2 * r)]))


def displace_single(state: SingleModeState, alpha: complex) -> SingleModeState:
    a = complex(alpha)
    if not (np.isfinite(a.real) and np.isfinite(a.imag)):
        raise ValueError("displacement amplitude must be finite")
    shift = np.sqrt(2.0) * np.array([a.real, a.imag])
    return SingleModeState(state.mean + shift, state.cov)


def apply_loss_single(state: SingleModeState, eta: float) -> SingleModeState:
    e = float(eta)
    if not np.isfinite(e) or not (0.0 <= e <= 1.0):
        raise ValueError(f"transmittance must lie in [0, 1], got {e}")
    cov = e * state.cov + (1.0 - e) * np.eye(2)
    return SingleModeState(np.sqrt(e) * state.mean, cov)


def single_quadrature_variance(
    state: SingleModeState, theta: float
) -> tuple[float, float]:
    v = np.array([np.cos(theta), np.sin(theta)])
    return float(v @ state.mean), float(v @ state.cov @ v)
