"""Analytic baseline pulses, action-grid discretization, and calibration.

The baseline is a baseline-subtracted Gaussian on the x quadrature with an
optional derivative component on the y quadrature. Calibration sweeps the
amplitude (0.001 grid) and the derivative coefficient (0.01 ns grid)
against the simulator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import transmon as tm


@dataclass(frozen=True)
class DragParams:
    """Analytic pulse shape parameters.

    amplitude : dimensionless peak of the unsubtracted Gaussian
    sigma     : Gaussian width, ns
    gamma     : derivative coefficient, ns (0 for a plain Gaussian)
    t_g       : total gate duration, ns
    """

    amplitude: float
    sigma: float
    gamma: float
    t_g: float

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.t_g <= 0:
            raise ValueError(f"t_g must be positive, got {self.t_g}")


def drag_params_to_dict(p: DragParams) -> dict:
    return {
        "amplitude": p.amplitude,
        "sigma_ns": p.sigma,
        "gamma_ns": p.gamma,
        "t_g_ns": p.t_g,
    }


def drag_params_from_dict(payload: dict) -> DragParams:
    try:
        return DragParams(
            amplitude=float(payload["amplitude"]),
            sigma=float(payload["sigma_ns"]),
            gamma=float(payload["gamma_ns"]),
            t_g=float(payload["t_g_ns"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed pulse parameter payload: {exc}") from exc


@dataclass(frozen=True)
class ActionGrid:
    """Sorted, uniformly spaced amplitudes an agent may choose from."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) < 2:
            raise ValueError("grid needs at least two values")
        vals = tuple(float(v) for v in self.values)
        gaps = np.diff(vals)
        if gaps.min() <= 0:
            raise ValueError("grid values must be strictly increasing")
        if gaps.max() - gaps.min() > 1e-9:
            raise ValueError("grid spacing must be uniform")
        object.__setattr__(self, "values", vals)

    @property
    def spacing(self) -> float:
        return self.values[1] - self.values[0]

    def __len__(self) -> int:
        return len(self.values)


def x_action_grid() -> ActionGrid:
    """21 amplitudes 0.00 .. 0.20."""
    return ActionGrid(tuple(round(0.01 * i, 2) for i in range(21)))


def y_action_grid() -> ActionGrid:
    """21 amplitudes -0.10 .. 0.10."""
    return ActionGrid(tuple(round(0.01 * i - 0.10, 2) for i in range(21)))


def drag_envelope(p: DragParams, t: float) -> tuple[float, float]:
    """Envelope amplitudes (cx, cy) at time t in [0, t_g].

    cx is the Gaussian minus its endpoint value so the pulse starts and
    ends at zero; cy is gamma times the time derivative.
    """
    if t < 0.0 or t > p.t_g:
        raise ValueError(f"t={t} outside [0, {p.t_g}]")
    half = p.t_g / 2.0
    base = math.exp(-(half**2) / (2.0 * p.sigma**2))
    gauss = math.exp(-((t - half) ** 2) / (2.0 * p.sigma**2))
    cx = p.amplitude * (gauss - base)
    cy = -p.gamma * p.amplitude * gauss * (t - half) / p.sigma**2
    return cx, cy


def sample_envelope(
    p: DragParams, n_seg: int, omega_d: float | None = None
) -> tm.PwcWaveform:
    """Piecewise-constant waveform from segment-midpoint samples."""
    if n_seg < 1:
        raise ValueError("n_seg must be >= 1")
    if omega_d is None:
        omega_d = tm.default_transmon().omega_d
    tau = p.t_g / n_seg
    segments = tuple(
        drag_envelope(p, (k + 0.5) * tau) for k in range(n_seg)
    )
    return tm.PwcWaveform(segments, tau, omega_d)


def snap_amplitude(grid: ActionGrid, value: float) -> float:
    """Nearest grid value; exact ties go toward zero; out of range clamps."""
    vals = grid.values
    if value <= vals[0]:
        if vals[0] - value > 0.5 * grid.spacing:
            warnings.warn(
                f"amplitude {value} below grid, clamped to {vals[0]}", stacklevel=2
            )
        return vals[0]
    if value >= vals[-1]:
        if value - vals[-1] > 0.5 * grid.spacing:
            warnings.warn(
                f"amplitude {value} above grid, clamped to {vals[-1]}", stacklevel=2
            )
        return vals[-1]
    idx = int(np.searchsorted(vals, value))
    lo, hi = vals[idx - 1], vals[idx]
    d_lo, d_hi = value - lo, hi - value
    if abs(d_lo - d_hi) < 1e-12:
        return lo if abs(lo) <= abs(hi) else hi
    return lo if d_lo < d_hi else hi


def snap_waveform(
    waveform: tm.PwcWaveform, grid_x: ActionGrid, grid_y: ActionGrid
) -> tm.PwcWaveform:
    """Snap every segment amplitude onto the action grids."""
    segments = tuple(
        (snap_amplitude(grid_x, ux), snap_amplitude(grid_y, uy))
        for ux, uy in waveform.segments
    )
    return tm.PwcWaveform(segments, waveform.tau, waveform.omega_d)


def discretize(
    p: DragParams,
    n_seg: int,
    grid_x: ActionGrid,
    grid_y: ActionGrid,
    omega_d: float | None = None,
) -> tm.PwcWaveform:
    """Midpoint-sampled envelope snapped onto the action grids."""
    return snap_waveform(sample_envelope(p, n_seg, omega_d), grid_x, grid_y)


def grid_index(grid: ActionGrid, amplitude: float) -> int:
    """Index of the nearest grid value; rejects out-of-range amplitudes."""
    vals = grid.values
    half = 0.5 * grid.spacing
    if amplitude < vals[0] - half or amplitude > vals[-1] + half:
        raise ValueError(
            f"amplitude {amplitude} outside grid range "
            f"[{vals[0]}, {vals[-1]}] (half-spacing slack {half})"
        )
    return int(np.argmin(np.abs(np.asarray(vals) - amplitude)))


# ---------------------------------------------------------------------------
# Calibration sweeps against the simulator.

AMPLITUDE_STEP = 0.001
GAMMA_STEP = 0.01


def _pulse_fidelity(
    p: DragParams, params: tm.TransmonParams, gate: str, n_seg: int
) -> tuple[float, float]:
    u = tm.evolve(sample_envelope(p, n_seg, params.omega_d), params)
    return tm.fidelity(u, tm.target_state(gate, params.d)), tm.leakage(u)


def _best_amplitude(
    base: DragParams,
    params: tm.TransmonParams,
    gate: str,
    n_seg: int,
    amp_range: tuple[float, float],
) -> DragParams:
    amps = np.arange(amp_range[0], amp_range[1] + AMPLITUDE_STEP / 2, AMPLITUDE_STEP)
    best = None
    for amp in amps:
        cand = replace(base, amplitude=round(float(amp), 3))
        f, _ = _pulse_fidelity(cand, params, gate, n_seg)
        if best is None or f > best[0]:
            best = (f, cand)
    return best[1]


def calibrate_drag(
    params: tm.TransmonParams,
    gate: str = "X",
    t_g: float = 35.6,
    n_seg: int = 20,
    sigma: float | None = None,
    amp_range: tuple[float, float] = (0.02, 0.30),
    gamma_range: tuple[float, float] = (-0.5, 0.5),
    objective: str = "fidelity",
) -> DragParams:
    """Sweep amplitude, then the derivative coefficient, then amplitude again.

    objective selects what the gamma sweep optimizes. "fidelity" is the
    default: on this simulator the derivative term mostly corrects the
    drive-induced phase error, and the gamma that minimizes leakage alone
    degrades the gate. "leakage" keeps the pure leakage-minimizing sweep.
    """
    if objective not in ("fidelity", "leakage"):
        raise ValueError(f"unknown objective {objective!r}")
    if sigma is None:
        sigma = t_g / 4.0
    base = DragParams(amplitude=0.0, sigma=sigma, gamma=0.0, t_g=t_g)
    cand = _best_amplitude(base, params, gate, n_seg, amp_range)
    gammas = np.arange(gamma_range[0], gamma_range[1] + GAMMA_STEP / 2, GAMMA_STEP)
    best = None
    for gamma in gammas:
        trial = replace(cand, gamma=round(float(gamma), 2))
        f, leak = _pulse_fidelity(trial, params, gate, n_seg)
        score = f if objective == "fidelity" else -leak
        if best is None or score > best[0]:
            best = (score, trial)
    return _best_amplitude(best[1], params, gate, n_seg, amp_range)


def calibrate_gaussian(
    params: tm.TransmonParams,
    gate: str = "X",
    t_g: float = 35.6,
    n_seg: int = 20,
    sigma: float | None = None,
    amp_range: tuple[float, float] = (0.02, 0.30),
) -> DragParams:
    """Amplitude-only sweep of the plain Gaussian (gamma = 0)."""
    if sigma is None:
        sigma = t_g / 4.0
    base = DragParams(amplitude=0.0, sigma=sigma, gamma=0.0, t_g=t_g)
    return _best_amplitude(base, params, gate, n_seg, amp_range)
