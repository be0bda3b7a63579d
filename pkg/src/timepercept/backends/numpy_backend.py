"""Pure-numpy implementations of the per-step kernels.

Drop-in fallback for the compiled extension: same call signatures, same
mutation contracts.  See ``backends/__init__`` for how a backend is chosen.
"""

from __future__ import annotations

import numpy as np

from ..microstimuli import INV_SQRT_2PI

NAME = "numpy"


def features_into(
    out: np.ndarray,
    ages: np.ndarray,
    active: np.ndarray,
    m: int,
    xi: float,
    beta: float,
) -> None:
    """Fill ``out`` (length m * zeta) with microstimulus levels.

    ``ages[s]`` is the perceived time since stimulus set ``s`` deployed and
    ``active[s]`` marks deployed sets; inactive sets are zeroed.
    """
    centers = np.arange(1, m + 1) / m
    denom = 2.0 * beta * beta
    for s in range(ages.shape[0]):
        lo = s * m
        if not active[s]:
            out[lo : lo + m] = 0.0
            continue
        h = np.exp(-(1.0 - xi) * ages[s])
        out[lo : lo + m] = h * INV_SQRT_2PI * np.exp(-((h - centers) ** 2) / denom)


def action_values_into(out: np.ndarray, w: np.ndarray, x: np.ndarray) -> None:
    """out <- w @ x for row-per-action weights."""
    np.dot(w, x, out=out)


def td_update(
    w: np.ndarray,
    e: np.ndarray,
    x: np.ndarray,
    action: int,
    delta: float,
    gamma_eta: float,
    alpha: float,
    trace_first: bool,
) -> None:
    """Eligibility-trace decay/accumulation and the taken action's weight step."""
    if trace_first:
        e *= gamma_eta
        e[action] += x
        w[action] += alpha * delta * e[action]
    else:
        w[action] += alpha * delta * e[action]
        e *= gamma_eta
        e[action] += x
