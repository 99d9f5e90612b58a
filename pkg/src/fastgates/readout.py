"""Dispersive (I, Q) readout simulation and level discrimination.

Each measurement shot draws a transmon level from the supplied populations
and then an (I, Q) point from that level's Gaussian cluster. Level
populations are estimated by classifying shots with a linear discriminant
fitted to labeled calibration batches.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

SIGMA_T_FLOOR = 1e-6


@dataclass(frozen=True)
class IqClusterModel:
    """Per-level Gaussian clusters in the (I, Q) plane.

    centers     : one (I, Q) mean per simulated level
    covariances : per-level 2x2 symmetric positive-semidefinite matrices
    """

    centers: tuple[tuple[float, float], ...]
    covariances: tuple[tuple[tuple[float, float], tuple[float, float]], ...]

    def __post_init__(self) -> None:
        if len(self.centers) < 1:
            raise ValueError("need at least one cluster")
        if len(self.centers) != len(self.covariances):
            raise ValueError(
                f"{len(self.centers)} centers but {len(self.covariances)} covariances"
            )
        object.__setattr__(
            self, "centers", tuple((float(i), float(q)) for i, q in self.centers)
        )
        covs = []
        for m, cov in enumerate(self.covariances):
            arr = np.asarray(cov, dtype=float)
            if arr.shape != (2, 2):
                raise ValueError(f"covariance {m} is not 2x2")
            if abs(arr[0, 1] - arr[1, 0]) > 1e-12:
                raise ValueError(f"covariance {m} is not symmetric")
            if np.linalg.eigvalsh(arr).min() < -1e-12:
                raise ValueError(f"covariance {m} is not positive semidefinite")
            covs.append(tuple(tuple(row) for row in arr))
        object.__setattr__(self, "covariances", tuple(covs))

    @property
    def n_levels(self) -> int:
        return len(self.centers)

    def center_array(self) -> np.ndarray:
        return np.array(self.centers, dtype=float)

    def cov_array(self) -> np.ndarray:
        return np.array(self.covariances, dtype=float)


def default_cluster_model(
    d: int = 3, separation: float = 6.0, sigma: float = 1.0
) -> IqClusterModel:
    """Isotropic clusters on a regular polygon.

    Nearest-neighbor center distance is separation * sigma. The default
    separation keeps the per-level misclassification rate around 1e-3 so
    counting classified shots estimates populations to better than 0.005.
    """
    if d < 2:
        raise ValueError("need at least two levels")
    radius = separation * sigma / (2.0 * math.sin(math.pi / d))
    centers = tuple(
        (
            radius * math.cos(2.0 * math.pi * m / d),
            radius * math.sin(2.0 * math.pi * m / d),
        )
        for m in range(d)
    )
    cov = ((sigma**2, 0.0), (0.0, sigma**2))
    return IqClusterModel(centers, (cov,) * d)


@dataclass(frozen=True)
class IqBatch:
    """A batch of integrated single-shot (I, Q) points."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.samples) < 1:
            raise ValueError("batch needs at least one shot")
        object.__setattr__(
            self, "samples", tuple((float(i), float(q)) for i, q in self.samples)
        )

    @property
    def n_shots(self) -> int:
        return len(self.samples)

    def as_array(self) -> np.ndarray:
        return np.array(self.samples, dtype=float)


@dataclass(frozen=True)
class ReadoutTarget:
    """Calibrated target-state readout: mean (I, Q) and per-shot spread."""

    mean: tuple[float, float]
    sigma_t: float

    def __post_init__(self) -> None:
        if self.sigma_t <= 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")
        object.__setattr__(self, "mean", (float(self.mean[0]), float(self.mean[1])))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_readout(populations, model: IqClusterModel, n_shots: int, rng_seed) -> IqBatch:
    """Draw n_shots (I, Q) points for a level-population vector."""
    pops = np.asarray(populations, dtype=float)
    if pops.shape != (model.n_levels,):
        raise ValueError(
            f"got {pops.shape[0] if pops.ndim == 1 else 'non-vector'} populations "
            f"for {model.n_levels} levels"
        )
    if pops.min() < -1e-12:
        raise ValueError(f"negative population {pops.min()}")
    if abs(pops.sum() - 1.0) > 1e-9:
        raise ValueError(f"populations sum to {pops.sum()}, not 1")
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    pops = np.clip(pops, 0.0, None)
    pops = pops / pops.sum()
    rng = _as_rng(rng_seed)
    levels = rng.choice(model.n_levels, size=n_shots, p=pops)
    z = rng.standard_normal((n_shots, 2))
    roots = np.stack([_sqrt_psd(c) for c in model.cov_array()])
    points = model.center_array()[levels] + np.einsum(
        "nij,nj->ni", roots[levels], z
    )
    return IqBatch(tuple(map(tuple, points)))


def batch_mean(batch: IqBatch) -> tuple[float, float]:
    arr = batch.as_array()
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


@dataclass(frozen=True)
class Discriminator:
    """Linear per-class score functions; classify = argmax of scores.

    weights row m and bias m give class m's score w_m . x + b_m, the
    shared-covariance linear discriminant with empirical class priors.
    """

    weights: tuple[tuple[float, float], ...]
    biases: tuple[float, ...]

    def scores(self, points: np.ndarray) -> np.ndarray:
        w = np.array(self.weights, dtype=float)
        b = np.array(self.biases, dtype=float)
        return np.atleast_2d(points) @ w.T + b

    def classify(self, points: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(points), axis=1)


def fit_discriminator(labeled_batches) -> Discriminator:
    """Fit a pooled-covariance linear discriminant, one batch per level."""
    if len(labeled_batches) < 2:
        raise ValueError("need at least two classes")
    arrays = [b.as_array() for b in labeled_batches]
    for m, arr in enumerate(arrays):
        if arr.shape[0] < 10:
            raise ValueError(f"class {m} has {arr.shape[0]} samples, need >= 10")
    n_total = sum(arr.shape[0] for arr in arrays)
    means = [arr.mean(axis=0) for arr in arrays]
    pooled = np.zeros((2, 2))
    for arr, mu in zip(arrays, means):
        centered = arr - mu
        pooled += centered.T @ centered
    pooled /= n_total - len(arrays)
    trace = float(np.trace(pooled))
    if trace <= 0.0:
        pooled = np.eye(2)
    else:
        w = np.linalg.eigvalsh(pooled)
        if w.min() <= 1e-12 * w.max():
            pooled = pooled + 1e-6 * trace * np.eye(2)
    inv = np.linalg.inv(pooled)
    weights = []
    biases = []
    for arr, mu in zip(arrays, means):
        wm = inv @ mu
        prior = arr.shape[0] / n_total
        bm = -0.5 * float(mu @ inv @ mu) + math.log(prior)
        weights.append((float(wm[0]), float(wm[1])))
        biases.append(bm)
    return Discriminator(tuple(weights), tuple(biases))


def estimate_populations(batch: IqBatch, disc: Discriminator) -> np.ndarray:
    """Fraction of shots classified into each level.

    The counts partition the batch, so the fractions sum to 1; the float
    sum is exact whenever n_shots is a power of two (all defaults are).
    """
    labels = disc.classify(batch.as_array())
    counts = np.bincount(labels, minlength=len(disc.biases))
    return counts / batch.n_shots


def calibrate_target(
    populations, model: IqClusterModel, n_shots: int, rng_seed
) -> ReadoutTarget:
    """Readout target for a reference state with the given level populations.

    sigma_t is the per-shot pooled spread sqrt((var_I + var_Q) / 2) of the
    calibration batch, floored at SIGMA_T_FLOOR, not the much smaller
    standard error of the batch mean.
    """
    batch = sample_readout(populations, model, n_shots, rng_seed)
    arr = batch.as_array()
    mean = batch_mean(batch)
    spread = math.sqrt(float(arr.var(axis=0).sum()) / 2.0)
    return ReadoutTarget(mean=mean, sigma_t=max(spread, SIGMA_T_FLOOR))


# ---------------------------------------------------------------------------
# Cluster-model and calibration-batch files.


def model_to_dict(model: IqClusterModel) -> dict:
    return {
        "centers": [list(c) for c in model.centers],
        "covariances": [[list(row) for row in cov] for cov in model.covariances],
    }


def model_from_dict(payload: dict) -> IqClusterModel:
    try:
        return IqClusterModel(
            centers=tuple(tuple(c) for c in payload["centers"]),
            covariances=tuple(
                tuple(tuple(row) for row in cov) for cov in payload["covariances"]
            ),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"malformed cluster model payload: {exc}") from exc


def save_model(model: IqClusterModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> IqClusterModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def export_labeled_csv(labeled_batches, path) -> None:
    """Write calibration batches as (I, Q, label) rows, one batch per level."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["I", "Q", "label"])
        for label, batch in enumerate(labeled_batches):
            for i, q in batch.samples:
                writer.writerow([repr(i), repr(q), label])
