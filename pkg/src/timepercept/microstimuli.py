"""Time-encoding feature vectors built from decaying stimulus traces.

Each stimulus event deploys a set of ``m`` microstimuli.  A deployed set
carries an exponentially decaying trace height, and each microstimulus reads
that height through a Gaussian bump with a fixed center, so the population
activity sweeps across the set as time passes.  The level of microstimulus
``j`` of a set whose stimulus happened ``t`` steps ago is::

    h = exp(-(1 - xi) * t)
    x_j = h * (1 / sqrt(2*pi)) * exp(-(h - j/m)**2 / (2 * beta**2))

Feature vectors are recomputed from deployment times each step rather than
decayed incrementally, so repeated queries cannot drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OrderingError, ParameterError, StateError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MicrostimuliConfig:
    """Shape of the feature representation.

    Attributes:
        m: number of microstimuli per deployed set.
        xi: trace decay in [0, 1); larger means slower decay.
        beta: width of the Gaussian bumps, > 0.
        zeta: number of stimulus events that may deploy a set.
    """

    m: int = 8
    xi: float = 0.9
    beta: float = 0.2
    zeta: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if not 0.0 <= self.xi < 1.0:
            raise ParameterError(f"xi must lie in [0, 1), got {self.xi}")
        if self.beta <= 0.0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if self.zeta < 1:
            raise ParameterError(f"zeta must be >= 1, got {self.zeta}")

    @property
    def dim(self) -> int:
        """Total feature dimension D = m * zeta."""
        return self.m * self.zeta

    def centers(self) -> np.ndarray:
        """Bump centers j/m for j = 1..m."""
        return np.arange(1, self.m + 1) / self.m


@dataclass(frozen=True)
class FeatureState:
    """Deployment record plus the most recently evaluated feature levels.

    ``deployments`` maps stimulus ids (1-based, up to zeta) to the step at
    which that stimulus deployed its set.  ``levels`` holds the last vector
    returned by :func:`features` (zeros until first evaluated); sets whose
    stimulus has not been deployed contribute exact zeros.
    """

    config: MicrostimuliConfig
    deployments: tuple[tuple[int, int], ...] = ()
    levels: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.levels is None:
            object.__setattr__(self, "levels", np.zeros(self.config.dim))

    def deployment_time(self, stimulus_id: int) -> int | None:
        for sid, t in self.deployments:
            if sid == stimulus_id:
                return t
        return None


def trace_height(t_since_deploy, xi: float):
    """Exponentially decaying trace height exp(-(1 - xi) * t).

    Equals 1 at t = 0 and decreases strictly with t.  Accepts scalars or
    arrays of elapsed steps.
    """
    if not 0.0 <= xi < 1.0:
        raise ParameterError(f"xi must lie in [0, 1), got {xi}")
    return np.exp(-(1.0 - xi) * np.asarray(t_since_deploy, dtype=float))[()]


def gaussian_basis(h, nu, beta: float):
    """Gaussian bump (1/sqrt(2*pi)) * exp(-(h - nu)^2 / (2 beta^2)).

    Peaks at h = nu with value 1/sqrt(2*pi) and is symmetric about nu.
    """
    if beta <= 0.0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return (INV_SQRT_2PI * np.exp(-((h - nu) ** 2) / (2.0 * beta * beta)))[()]


def deploy(state: FeatureState, stimulus_id: int, now: int) -> FeatureState:
    """Record that ``stimulus_id`` deployed its microstimulus set at ``now``.

    Raises:
        StateError: the stimulus already deployed in this episode, or the id
            is outside 1..zeta.
    """
    if not 1 <= stimulus_id <= state.config.zeta:
        raise StateError(
            f"stimulus_id must lie in 1..{state.config.zeta}, got {stimulus_id}"
        )
    if state.deployment_time(stimulus_id) is not None:
        raise StateError(f"stimulus {stimulus_id} already deployed this episode")
    return replace(state, deployments=state.deployments + ((stimulus_id, now),))


def features(state: FeatureState, config: MicrostimuliConfig, now: int) -> np.ndarray:
    """Evaluate the full feature vector at step ``now``.

    Entries of undeployed sets are zero.  For a set deployed at time ``t0``,
    entry ``j`` (1-based within the set) equals ``h * f(h, j/m, beta)`` with
    ``h`` the trace height at ``now - t0``.

    Raises:
        OrderingError: ``now`` precedes a recorded deployment time.
    """
    x = np.zeros(config.dim)
    centers = config.centers()
    for sid, t0 in state.deployments:
        if now < t0:
            raise OrderingError(
                f"feature query at {now} precedes deployment of stimulus {sid} at {t0}"
            )
        h = trace_height(now - t0, config.xi)
        lo = (sid - 1) * config.m
        x[lo : lo + config.m] = h * gaussian_basis(h, centers, config.beta)
    return x


def evaluate(state: FeatureState, config: MicrostimuliConfig, now: int) -> FeatureState:
    """Like :func:`features`, but also returns the state with levels cached."""
    x = features(state, config, now)
    return replace(state, levels=x)
