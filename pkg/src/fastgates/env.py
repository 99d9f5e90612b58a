"""Simulated training environment: transmon + readout chain.

Construction runs the calibration an experiment would do up front: fit the
level discriminator from labeled batches, locate the target-state readout
cluster, and measure the prepared |0> once for the initial agent state.
All randomness flows from one master seed through named substreams, so
every environment interaction is reproducible.
"""

from __future__ import annotations

import numpy as np

from . import pulses as pl
from . import readout as ro
from . import transmon as tm

# substream ids for derived generators
_STREAM_CALIBRATION = 0
_STREAM_TRAINING = 1
_STREAM_PROBE = 2
_STREAM_SYNTH = 3
_STREAM_EVAL = 4
_STREAM_PRETRAIN = 5

STREAMS = {
    "calibration": _STREAM_CALIBRATION,
    "training": _STREAM_TRAINING,
    "probe": _STREAM_PROBE,
    "synthesis": _STREAM_SYNTH,
    "evaluation": _STREAM_EVAL,
    "pretrain": _STREAM_PRETRAIN,
}

DEFAULT_CALIBRATION_SHOTS = 2000


class TransmonEnv:
    """Fixed-target gate environment with shot-based observations."""

    def __init__(
        self,
        params: tm.TransmonParams | None = None,
        model: ro.IqClusterModel | None = None,
        gate: str = "X",
        n_shot: int = 512,
        seed: int = 0,
        tau: float = 1.78,
        calibration_shots: int = DEFAULT_CALIBRATION_SHOTS,
    ):
        if n_shot < 1:
            raise ValueError("n_shot must be >= 1")
        self.params = params if params is not None else tm.default_transmon()
        self.model = model if model is not None else ro.default_cluster_model(self.params.d)
        if self.model.n_levels != self.params.d:
            raise ValueError(
                f"cluster model has {self.model.n_levels} levels, simulator has {self.params.d}"
            )
        self.gate = gate
        self.n_shot = n_shot
        self.seed = seed
        self.tau = tau
        self.target_state = tm.target_state(gate, self.params.d)
        self.ideal_unitary = tm.ideal_gate(gate, self.params.d)
        self._prop_cache: dict[tuple[float, float], np.ndarray] = {}

        cal_batches = [
            ro.sample_readout(
                np.eye(self.params.d)[m],
                self.model,
                calibration_shots,
                self.rng("calibration", m),
            )
            for m in range(self.params.d)
        ]
        self.discriminator = ro.fit_discriminator(cal_batches)
        pooled = np.concatenate([b.as_array() for b in cal_batches])
        self.norm_mean = pooled.mean(axis=0)
        self.norm_std = pooled.std(axis=0)
        self.norm_std[self.norm_std < 1e-12] = 1.0

        ideal_pops = np.abs(self.ideal_unitary[:, 0]) ** 2
        self.target = ro.calibrate_target(
            ideal_pops, self.model, calibration_shots, self.rng("calibration", 100)
        )
        # one measurement of the freshly prepared qubit, before any gate
        ground = np.zeros(self.params.d)
        ground[0] = 1.0
        i0, q0, leak0 = self._measure_populations(
            ground, self.rng("calibration", 101)
        )
        self.s0_iq = (i0, q0)
        self.leak0 = leak0

    # -- randomness -------------------------------------------------------

    def rng(self, stream: str, *path: int) -> np.random.Generator:
        """Generator for a named substream, optionally indexed deeper."""
        return np.random.default_rng([self.seed, STREAMS[stream], *path])

    # -- propagators ------------------------------------------------------

    def segment_propagator(self, ux: float, uy: float) -> np.ndarray:
        key = (float(ux), float(uy))
        prop = self._prop_cache.get(key)
        if prop is None:
            h = tm.segment_hamiltonian(self.params, ux, uy)
            prop = tm.segment_propagator(h, self.tau)
            self._prop_cache[key] = prop
        return prop

    def waveform(self, segments) -> tm.PwcWaveform:
        return tm.PwcWaveform(tuple(segments), self.tau, self.params.omega_d)

    # -- measurement ------------------------------------------------------

    def _measure_populations(self, populations, rng):
        batch = ro.sample_readout(populations, self.model, self.n_shot, rng)
        i_mean, q_mean = ro.batch_mean(batch)
        est = ro.estimate_populations(batch, self.discriminator)
        return i_mean, q_mean, float(est[2])

    def measure(self, unitary: np.ndarray, rng) -> tuple[float, float, float]:
        """One N_shot readout of U|0>: mean (I, Q) and the leakage estimate.

        Both come from the same batch; the leakage channel does not get
        extra shots.
        """
        populations = np.abs(unitary[:, 0]) ** 2
        populations = populations / populations.sum()
        return self._measure_populations(populations, rng)

    def standardize_iq(self, i_mean: float, q_mean: float) -> tuple[float, float]:
        return (
            (i_mean - self.norm_mean[0]) / self.norm_std[0],
            (q_mean - self.norm_mean[1]) / self.norm_std[1],
        )

    # -- exact metrics ----------------------------------------------------

    def exact_metrics(self, waveform: tm.PwcWaveform) -> tuple[float, float]:
        u = tm.evolve(waveform, self.params)
        return tm.fidelity(u, self.target_state), tm.leakage(u)


class PulseBuilder:
    """Grows a pulse segment by segment, tracking the prefix propagator."""

    def __init__(self, env: TransmonEnv):
        self.env = env
        self.segments: list[tuple[float, float]] = []
        self.unitary = np.eye(env.params.d, dtype=complex)

    def add(self, ux: float, uy: float) -> np.ndarray:
        self.segments.append((float(ux), float(uy)))
        self.unitary = self.env.segment_propagator(ux, uy) @ self.unitary
        return self.unitary

    def waveform(self) -> tm.PwcWaveform:
        return self.env.waveform(self.segments)

    def reset(self) -> None:
        self.segments = []
        self.unitary = np.eye(self.env.params.d, dtype=complex)

    @property
    def n_segments(self) -> int:
        return len(self.segments)
