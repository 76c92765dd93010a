"""
Signal model for a weak radioactive source observed by a sensor network.

Each node sees a background count plus measurement noise, and (under H1) an
extra source count whose rate falls off with the squared distance to the
source.  Counts are simulated through their Gaussian approximation:

    H0 : z_i ~ N(lambda_b, lambda_b + sigma_w2)
    H1 : z_i ~ N(lambda_ci + lambda_b, lambda_ci + lambda_b + sigma_w2)

The module also provides the per-node locally optimum (LOD) statistic and the
clairvoyant log-likelihood ratio used as a performance ceiling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class Hypothesis(enum.IntEnum):
    H0 = 0  # source absent
    H1 = 1  # source present


class NodePosition(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class ScenarioParams:
    """Physical parameters of the detection scenario.

    Parameters
    ----------
    lambda_b : float
        Mean background count per sensing interval.
    sigma_w2 : float
        Variance of the additive measurement noise.
    source_intensity : float
        Source intensity ``I_s``; zero means no source signal at all.
    source_pos : tuple of float
        Source coordinates.
    min_dist2 : float
        Lower clamp on the squared node-source distance.
    """

    lambda_b: float = 0.5
    sigma_w2: float = 0.5
    source_intensity: float = 0.5
    source_pos: tuple[float, float] = (1.5, 1.5)
    min_dist2: float = 1e-6

    def __post_init__(self):
        if not self.lambda_b > 0:
            raise ValueError(f"lambda_b must be > 0, got {self.lambda_b}")
        if not self.sigma_w2 > 0:
            raise ValueError(f"sigma_w2 must be > 0, got {self.sigma_w2}")
        if not self.source_intensity >= 0:
            raise ValueError(
                f"source_intensity must be >= 0, got {self.source_intensity}")
        if not self.min_dist2 > 0:
            raise ValueError(f"min_dist2 must be > 0, got {self.min_dist2}")
        pos = tuple(float(c) for c in self.source_pos)
        if len(pos) != 2 or not all(math.isfinite(c) for c in pos):
            raise ValueError(f"source_pos must be two finite numbers, got {self.source_pos}")
        object.__setattr__(self, "source_pos", pos)

    @property
    def h0_variance(self) -> float:
        return self.lambda_b + self.sigma_w2

    def with_source(self, pos=None, intensity=None) -> ScenarioParams:
        """Copy of the parameters with a new source position and/or intensity."""
        return ScenarioParams(
            lambda_b=self.lambda_b,
            sigma_w2=self.sigma_w2,
            source_intensity=self.source_intensity if intensity is None else intensity,
            source_pos=self.source_pos if pos is None else tuple(pos),
            min_dist2=self.min_dist2,
        )


@dataclass(frozen=True)
class Observation:
    node_id: int
    value: float
    hypothesis: Hypothesis


def source_rate(node, params: ScenarioParams):
    """Mean source count reaching a node, ``I_s / max(d^2, min_dist2)``.

    `node` is a :class:`NodePosition` or any array whose last axis holds
    (x, y); the result has the matching shape (a float for a single node).
    """
    pos = np.asarray(node, dtype=float)
    d2 = np.sum((pos - np.asarray(params.source_pos)) ** 2, axis=-1)
    rate = params.source_intensity / np.maximum(d2, params.min_dist2)
    return float(rate) if np.ndim(rate) == 0 else rate


def sample_observations(hyp, positions, params: ScenarioParams,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw one observation per node for all nodes at once.

    Parameters
    ----------
    hyp : Hypothesis
        Ground-truth hypothesis.
    positions : array_like, shape (N, 2)
        Node coordinates.
    params : ScenarioParams
    rng : numpy.random.Generator

    Returns
    -------
    z : ndarray, shape (N,)
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    n = positions.shape[0]
    if Hypothesis(hyp) is Hypothesis.H1:
        lam_c = source_rate(positions, params)
    else:
        lam_c = np.zeros(n)
    mean = lam_c + params.lambda_b
    var = mean + params.sigma_w2
    return rng.normal(mean, np.sqrt(var))


def sample_observation(hyp, node, params: ScenarioParams,
                       rng: np.random.Generator, node_id: int = 0) -> Observation:
    """Single-node version of :func:`sample_observations`."""
    value = sample_observations(hyp, [tuple(node)], params, rng)[0]
    return Observation(node_id=node_id, value=float(value), hypothesis=Hypothesis(hyp))


def local_lod_statistic(z, params: ScenarioParams):
    """Per-node LOD summand ``f(z) = (z - lambda_b) + (z - lambda_b)^2 / (2 (lambda_b + sigma_w2))``."""
    u = np.asarray(z, dtype=float) - params.lambda_b
    f = u + u * u / (2.0 * params.h0_variance)
    return float(f) if np.ndim(f) == 0 else f


def centralized_lod(observations: Sequence[float], params: ScenarioParams) -> float:
    """Network-wide LOD statistic, the sum of the per-node summands."""
    z = np.asarray(observations, dtype=float)
    if z.size == 0:
        raise ValueError("centralized_lod needs at least one observation")
    return float(np.sum(local_lod_statistic(z, params)))


def clairvoyant_llr(z, lambda_ci, params: ScenarioParams):
    """Log-likelihood ratio ``log f1(z; lambda_ci) - log f0(z)`` of one node.

    Both densities are the Gaussian approximations of the count model; the
    centralized clairvoyant statistic is the sum of this over nodes.
    """
    z = np.asarray(z, dtype=float)
    lam = np.asarray(lambda_ci, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda_ci must be >= 0")
    v0 = params.h0_variance
    v1 = v0 + lam
    u = z - params.lambda_b
    llr = -0.5 * np.log(v1 / v0) - (u - lam) ** 2 / (2.0 * v1) + u * u / (2.0 * v0)
    return float(llr) if np.ndim(llr) == 0 else llr


def clairvoyant_lrt(z, positions, params: ScenarioParams) -> float:
    """Centralized clairvoyant statistic: summed LLR with the true source known."""
    lam = source_rate(np.atleast_2d(np.asarray(positions, dtype=float)), params)
    return float(np.sum(clairvoyant_llr(z, lam, params)))
