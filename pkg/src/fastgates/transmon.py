"""d-level transmon simulator under piecewise-constant two-quadrature drive.

All frequencies are angular (rad/ns), times in ns. The working frame rotates
at the drive frequency omega_d with the fast co-rotating terms dropped;
`lab_frame_evolve` integrates the full lab-frame Hamiltonian as a cross-check.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Waveform generator tick. One segment of the default pulse spans 8 ticks.
DT_NS = 0.222222

UNITARITY_TOL = 1e-10


@dataclass(frozen=True)
class TransmonParams:
    """Static device parameters.

    omega_q : qubit 0->1 transition frequency, rad/ns
    alpha   : anharmonicity, rad/ns, negative for a transmon
    d       : number of simulated levels (>= 3 so leakage is visible)
    drive_scale : Rabi rate per unit drive amplitude, rad/ns
    omega_d : drive carrier frequency, rad/ns (defaults to omega_q)
    """

    omega_q: float
    alpha: float
    d: int = 3
    drive_scale: float = 1.0
    omega_d: float | None = None

    def __post_init__(self) -> None:
        if self.d < 3:
            raise ValueError(f"need d >= 3 to track leakage, got d={self.d}")
        if self.alpha >= 0:
            raise ValueError(f"transmon anharmonicity must be negative, got {self.alpha}")
        if self.drive_scale <= 0:
            raise ValueError(f"drive_scale must be positive, got {self.drive_scale}")
        if self.omega_d is None:
            object.__setattr__(self, "omega_d", self.omega_q)

    @property
    def detuning(self) -> float:
        return self.omega_q - self.omega_d


def default_transmon(d: int = 3) -> TransmonParams:
    """5.0 GHz qubit, -330 MHz anharmonicity, resonant drive.

    drive_scale = 1.0 rad/ns puts the calibrated pi-pulse Gaussian peak
    near amplitude 0.19, inside the agents' [0, 0.2] action range.
    """
    return TransmonParams(
        omega_q=TWO_PI * 5.0,
        alpha=TWO_PI * -0.330,
        d=d,
        drive_scale=1.0,
    )


@dataclass(frozen=True)
class PwcWaveform:
    """Piecewise-constant drive envelope.

    segments : tuple of (ux, uy) amplitude pairs, dimensionless
    tau      : segment duration, ns
    omega_d  : carrier frequency this envelope modulates, rad/ns
    """

    segments: tuple[tuple[float, float], ...]
    tau: float
    omega_d: float

    def __post_init__(self) -> None:
        if len(self.segments) == 0:
            raise ValueError("waveform needs at least one segment")
        if self.tau <= 0:
            raise ValueError(f"segment duration must be positive, got {self.tau}")
        object.__setattr__(
            self, "segments", tuple((float(x), float(y)) for x, y in self.segments)
        )

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def duration(self) -> float:
        return self.n_segments * self.tau

    def prefix(self, n: int) -> "PwcWaveform":
        """First n segments as a waveform."""
        return PwcWaveform(self.segments[:n], self.tau, self.omega_d)


def lowering_op(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)


def number_op(d: int) -> np.ndarray:
    return np.diag(np.arange(d)).astype(complex)


def drive_quadrature_ops(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Rotating-frame drive operators (qx, qy).

    qx = a + a' reduces to sigma_x on the qubit subspace, qy = i(a' - a)
    to sigma_y. The carrier phase is fixed so that a positive ux segment
    rotates |0> toward -y on the Bloch sphere, i.e. about the x axis.
    """
    a = lowering_op(d)
    qx = a + a.conj().T
    qy = 1j * (a.conj().T - a)
    return qx, qy


def segment_hamiltonian(params: TransmonParams, ux: float, uy: float) -> np.ndarray:
    """Rotating-frame Hamiltonian for one constant-amplitude segment.

    H = detuning * n + (alpha/2) * n(n-1) + (drive_scale/2) * (ux qx + uy qy)
    """
    d = params.d
    n = np.arange(d)
    diag = params.detuning * n + 0.5 * params.alpha * n * (n - 1)
    qx, qy = drive_quadrature_ops(d)
    h = np.diag(diag).astype(complex)
    h += 0.5 * params.drive_scale * (ux * qx + uy * qy)
    return h


def _expm_herm(h: np.ndarray, tau: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * tau)) @ v.conj().T


def segment_propagator(h: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i h tau) through the eigendecomposition of the Hermitian h."""
    if not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValueError("segment Hamiltonian must be Hermitian")
    return _expm_herm(h, tau)


def evolve(waveform: PwcWaveform, params: TransmonParams) -> np.ndarray:
    """Total rotating-frame propagator, later segments applied leftmost.

    The detuning is taken against the waveform's own carrier frequency.
    """
    u = np.eye(params.d, dtype=complex)
    run = params
    if waveform.omega_d != params.omega_d:
        run = TransmonParams(
            params.omega_q, params.alpha, params.d, params.drive_scale, waveform.omega_d
        )
    for ux, uy in waveform.segments:
        h = segment_hamiltonian(run, ux, uy)
        u = segment_propagator(h, waveform.tau) @ u
    return u


def _lab_hamiltonian(params: TransmonParams, ux: float, uy: float, t: float) -> np.ndarray:
    """Full lab-frame Hamiltonian at time t within a segment."""
    d = params.d
    n = np.arange(d)
    diag = params.omega_q * n + 0.5 * params.alpha * n * (n - 1)
    a = lowering_op(d)
    carrier = ux * math.cos(params.omega_d * t) + uy * math.sin(params.omega_d * t)
    h = np.diag(diag).astype(complex)
    h += params.drive_scale * carrier * (a + a.conj().T)
    return h


# Fourth-order commutator-free Magnus scheme: two exponentials per substep
# with the Hamiltonian sampled at the Gauss-Legendre nodes.
_CF4_NODE = math.sqrt(3.0) / 6.0
_CF4_A1 = 0.25 - _CF4_NODE
_CF4_A2 = 0.25 + _CF4_NODE


def lab_frame_evolve(
    waveform: PwcWaveform, params: TransmonParams, substeps_per_segment: int = 1000
) -> np.ndarray:
    """Integrate the lab-frame Schroedinger equation, no rotating-wave step.

    Returns the propagator transformed into the rotating frame at the final
    time so it is directly comparable with `evolve`. The co-rotating drive
    terms and the carrier are resolved explicitly, so the substep has to
    stay well inside a carrier period.
    """
    if substeps_per_segment < 1:
        raise ValueError("substeps_per_segment must be >= 1")
    dt = waveform.tau / substeps_per_segment
    if dt * params.omega_q > 0.1:
        warnings.warn(
            f"substep resolves only {dt * params.omega_q:.2f} rad of carrier phase; "
            "increase substeps_per_segment",
            stacklevel=2,
        )
    d = params.d
    u = np.eye(d, dtype=complex)
    t0 = 0.0
    for ux, uy in waveform.segments:
        for i in range(substeps_per_segment):
            t = t0 + i * dt
            h1 = _lab_hamiltonian(params, ux, uy, t + (0.5 - _CF4_NODE) * dt)
            h2 = _lab_hamiltonian(params, ux, uy, t + (0.5 + _CF4_NODE) * dt)
            early = _CF4_A2 * h1 + _CF4_A1 * h2
            late = _CF4_A1 * h1 + _CF4_A2 * h2
            u = _expm_herm(late, dt) @ _expm_herm(early, dt) @ u
        t0 += waveform.tau
    phases = np.exp(1j * params.omega_d * t0 * np.arange(d))
    return (phases[:, None] * u).astype(complex)


def frame_transform(params: TransmonParams, t: float) -> np.ndarray:
    """Lab-to-rotating-frame transformation exp(+i omega_d t n)."""
    return np.diag(np.exp(1j * params.omega_d * t * np.arange(params.d)))


def check_unitarity(u: np.ndarray, tol: float = UNITARITY_TOL) -> float:
    """Max-norm deviation of u'u from the identity; raises above tol."""
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if dev > tol:
        raise ValueError(f"propagator lost unitarity: |u'u - 1| = {dev:.3e}")
    return dev


def ground_state(d: int) -> np.ndarray:
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1.0
    return psi


def target_state(gate: str, d: int) -> np.ndarray:
    """State the gate should produce from |0>, embedded in d levels."""
    psi = np.zeros(d, dtype=complex)
    if gate == "X":
        psi[1] = 1.0
    elif gate == "SX":
        psi[0] = 1.0 / math.sqrt(2.0)
        psi[1] = -1j / math.sqrt(2.0)
    else:
        raise ValueError(f"unknown gate {gate!r}, expected 'X' or 'SX'")
    return psi


def ideal_gate(gate: str, d: int) -> np.ndarray:
    """Ideal gate on the qubit subspace, identity on the rest."""
    u = np.eye(d, dtype=complex)
    if gate == "X":
        block = np.array([[0, 1], [1, 0]], dtype=complex)
    elif gate == "SX":
        block = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
    else:
        raise ValueError(f"unknown gate {gate!r}, expected 'X' or 'SX'")
    u[:2, :2] = block
    return u


def fidelity(u: np.ndarray, target: np.ndarray) -> float:
    """|<target| u |0>|^2, the population transferred onto the target state."""
    amp = np.vdot(target, u[:, 0])
    return float(np.abs(amp) ** 2)


def leakage(u: np.ndarray, sum_upper_levels: bool = False) -> float:
    """Population left outside the qubit subspace after acting on |0>.

    Defaults to the |2> population alone; sum_upper_levels adds every
    level above the qubit when d > 3.
    """
    col = u[:, 0]
    if sum_upper_levels:
        return float(np.sum(np.abs(col[2:]) ** 2))
    return float(np.abs(col[2]) ** 2)


# ---------------------------------------------------------------------------
# Waveform serialization.
#
# JSON layout: {"tau_ns": ..., "omega_d_ghz": ..., "segments": [[ux, uy], ...]}
# with omega_d_ghz the ordinary (cycles) frequency omega_d / 2 pi.


def waveform_to_dict(waveform: PwcWaveform, grid_amplitudes: bool = False) -> dict:
    segments: list[list[float]] = []
    for ux, uy in waveform.segments:
        if grid_amplitudes:
            segments.append([round(ux, 2), round(uy, 2)])
        else:
            segments.append([ux, uy])
    return {
        "tau_ns": waveform.tau,
        "omega_d_ghz": waveform.omega_d / TWO_PI,
        "segments": segments,
    }


def waveform_from_dict(payload: dict) -> PwcWaveform:
    try:
        segments = tuple((float(s[0]), float(s[1])) for s in payload["segments"])
        return PwcWaveform(
            segments=segments,
            tau=float(payload["tau_ns"]),
            omega_d=float(payload["omega_d_ghz"]) * TWO_PI,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"malformed waveform payload: {exc}") from exc


def save_waveform(waveform: PwcWaveform, path, grid_amplitudes: bool = False) -> None:
    with open(path, "w") as fh:
        json.dump(waveform_to_dict(waveform, grid_amplitudes), fh, indent=2)
        fh.write("\n")


def load_waveform(path) -> PwcWaveform:
    with open(path) as fh:
        return waveform_from_dict(json.load(fh))


def export_waveform_csv(waveform: PwcWaveform, path, dt: float = DT_NS) -> None:
    """One row per generator tick, segment amplitudes repeated.

    The default pulse has tau = 8 dt, so every segment becomes 8 rows.
    """
    ticks_per_segment = round(waveform.tau / dt)
    # 1.78 ns is the rounded nominal of 8 * 0.222222 ns, so allow 1% slack.
    if ticks_per_segment < 1 or abs(waveform.tau - ticks_per_segment * dt) > 0.01 * waveform.tau:
        raise ValueError(
            f"segment duration {waveform.tau} ns is not a whole number of "
            f"{dt} ns ticks"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "ux", "uy"])
        tick = 0
        for ux, uy in waveform.segments:
            for _ in range(ticks_per_segment):
                writer.writerow([tick, repr(ux), repr(uy)])
                tick += 1
