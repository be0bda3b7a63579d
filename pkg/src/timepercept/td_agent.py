"""Linear Q-learning with per-action eligibility traces over microstimuli.

Action values are linear in the shared time features: ``Q(s, a) = w_a . x``.
Each action owns a weight vector and an eligibility-trace vector of the same
length; the taken action accumulates the current features into its trace
while every trace decays by ``gamma * eta`` each step.  Action selection is
epsilon-greedy with geometric exploration decay.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError
from .microstimuli import FeatureState, MicrostimuliConfig

# Update order within a step.  TRACE_FIRST folds the current features into
# the taken action's trace before the weight update reads it; WEIGHTS_FIRST
# applies the weight update with the pre-step traces.  TRACE_FIRST is the
# default (WEIGHTS_FIRST cannot assign credit to an action's own features on
# the step it is taken, which stalls learning of one-shot actions; it is kept
# for sensitivity runs).
TRACE_FIRST = "trace-first"
WEIGHTS_FIRST = "weights-first"
UPDATE_ORDERS = (TRACE_FIRST, WEIGHTS_FIRST)


@dataclass(frozen=True)
class AgentParams:
    """Learning parameters plus the feature configuration.

    Attributes:
        alpha: learning rate, > 0.
        gamma: discount factor in [0, 1].
        eta: eligibility-trace decay in [0, 1].
        epsilon0: initial exploration probability in [0, 1].
        rho: geometric exploration decay in [0, 1].
        micro: microstimuli feature configuration.
        update_order: see TRACE_FIRST / WEIGHTS_FIRST.
    """

    alpha: float = 0.1
    gamma: float = 0.95
    eta: float = 0.8
    epsilon0: float = 1.0
    rho: float = 0.995
    micro: MicrostimuliConfig = field(default_factory=MicrostimuliConfig)
    update_order: str = TRACE_FIRST

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        for name in ("gamma", "eta", "epsilon0", "rho"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")
        if self.update_order not in UPDATE_ORDERS:
            raise ParameterError(
                f"update_order must be one of {UPDATE_ORDERS}, got {self.update_order!r}"
            )


@dataclass
class AgentState:
    """Mutable learner state for one simulation run.

    ``weights`` and ``traces`` are (n_actions, D) arrays; ``epsilon`` is the
    current exploration probability, non-increasing over a run.
    """

    weights: np.ndarray
    traces: np.ndarray
    epsilon: float
    features: FeatureState

    @property
    def n_actions(self) -> int:
        return self.weights.shape[0]


def init_agent(params: AgentParams, n_actions: int, rng: np.random.Generator) -> AgentState:
    """Fresh agent with weights drawn uniformly from [0, 1] and zero traces."""
    d = params.micro.dim
    return AgentState(
        weights=rng.uniform(0.0, 1.0, size=(n_actions, d)),
        traces=np.zeros((n_actions, d)),
        epsilon=params.epsilon0,
        features=FeatureState(config=params.micro),
    )


def q_values(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """All action values w_a . x for the feature vector x."""
    if weights.shape[1] != x.shape[0]:
        raise ValueError(
            f"feature dimension mismatch: weights D={weights.shape[1]}, x D={x.shape[0]}"
        )
    return weights @ x


def q_value(state: AgentState, x: np.ndarray, action: int) -> float:
    """Value of one action: dot product of its weight row with the features."""
    return float(q_values(state.weights, x)[action])


def td_error(r: float, q_next_max: float, q_taken: float, gamma: float) -> float:
    """One-step TD error r + gamma * max_a Q(s', a) - Q(s, a_taken).

    ``q_next_max`` must be 0 at terminal transitions.
    """
    return r + gamma * q_next_max - q_taken


def update(
    state: AgentState,
    delta: float,
    x: np.ndarray,
    taken_action: int,
    params: AgentParams,
) -> AgentState:
    """Apply the trace and weight updates for one step, in place.

    All traces decay by ``gamma * eta``; the taken action's trace then
    accumulates ``x``.  The taken action's weights move by
    ``alpha * delta * e``.  With the default trace-first order the weight
    update reads the freshly accumulated trace; with weights-first it reads
    the pre-step trace (and the trace update follows).
    """
    decay = params.gamma * params.eta
    w = state.weights
    e = state.traces
    if params.update_order == TRACE_FIRST:
        e *= decay
        e[taken_action] += x
        w[taken_action] += params.alpha * delta * e[taken_action]
    else:
        w[taken_action] += params.alpha * delta * e[taken_action]
        e *= decay
        e[taken_action] += x
    return state


def select_action(
    q: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy choice over the action values ``q``.

    With probability ``1 - epsilon`` returns the argmax (ties broken by the
    lowest action index); otherwise a uniformly random action.  At
    ``epsilon == 0`` no random draw is consumed.
    """
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q.shape[0]))
    return int(np.argmax(q))


def decay_epsilon(state: AgentState, rho: float) -> AgentState:
    """Geometric exploration decay epsilon <- rho * epsilon, in place."""
    state.epsilon *= rho
    return state


def copy_agent(state: AgentState) -> AgentState:
    """Independent copy (weights, traces, epsilon, feature record)."""
    return AgentState(
        weights=state.weights.copy(),
        traces=state.traces.copy(),
        epsilon=state.epsilon,
        features=replace(state.features),
    )
