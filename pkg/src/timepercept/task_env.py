"""Two-tone temporal-discrimination environment.

An episode starts in Init.  Pressing Start plays the first tone at t = 1;
after tau Interval states (tau drawn uniformly from {1..L}) the second tone
plays at t = tau + 2.  At the second tone the agent must classify the
elapsed interval as Short (tau <= floor(L/2)) or Long.  Any action taken in
a phase where it makes no sense ends the episode with the incorrect-choice
reward, which keeps every episode bounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ParameterError, UsageError


class Action(IntEnum):
    START = 0
    WAIT = 1
    SHORT = 2
    LONG = 3


ACTION_NAMES = ("start", "wait", "short", "long")
N_ACTIONS = len(Action)


class Phase(IntEnum):
    INIT = 0
    TONE1 = 1
    INTERVAL = 2
    TONE2 = 3
    TERMINAL = 4


@dataclass(frozen=True)
class TaskConfig:
    """Interval range, reporting scale, and reward values.

    ``seconds_per_step`` only converts step counts to seconds in reports; all
    internal computation is in steps.  Wrong-phase actions receive
    ``reward_incorrect`` (whether real animals were punished or merely
    unrewarded is unknown; override to 0 for the unrewarded variant).
    """

    L: int = 8
    seconds_per_step: float = 3.0 / 8.0
    reward_correct: float = 1.0
    reward_incorrect: float = -1.0
    reward_step: float = 0.0

    def __post_init__(self):
        if self.L < 2:
            raise ParameterError(f"L must be >= 2, got {self.L}")
        if self.seconds_per_step <= 0.0:
            raise ParameterError(
                f"seconds_per_step must be > 0, got {self.seconds_per_step}"
            )

    @property
    def boundary(self) -> int:
        """Largest interval classified Short: floor(L/2)."""
        return self.L // 2


@dataclass(frozen=True)
class EnvState:
    phase: Phase
    tau: int
    step_index: int
    tones_heard: int


def classify(tau: int, L: int) -> Action:
    """Correct label for an interval: Short iff tau <= floor(L/2), else Long.

    For odd L the single middle duration ceil(L/2) falls on the Long side.
    """
    if not 1 <= tau <= L:
        raise ParameterError(f"tau must lie in 1..{L}, got {tau}")
    return Action.SHORT if tau <= L // 2 else Action.LONG


def reset(
    config: TaskConfig, rng: np.random.Generator, forced_tau: int | None = None
) -> EnvState:
    """New episode in Init with tau ~ unif{1..L} (or ``forced_tau`` for probes)."""
    if forced_tau is None:
        tau = int(rng.integers(1, config.L + 1))
    else:
        if not 1 <= forced_tau <= config.L:
            raise ParameterError(
                f"forced_tau must lie in 1..{config.L}, got {forced_tau}"
            )
        tau = forced_tau
    return EnvState(phase=Phase.INIT, tau=tau, step_index=0, tones_heard=0)


def step(
    state: EnvState, action: int, config: TaskConfig
) -> tuple[EnvState, float, bool]:
    """Advance one step; returns (next_state, reward, done)."""
    phase = state.phase
    if phase == Phase.TERMINAL:
        raise UsageError("cannot step a terminal episode")

    t_next = state.step_index + 1
    action = int(action)

    if phase == Phase.INIT:
        if action == Action.START:
            return EnvState(Phase.TONE1, state.tau, t_next, 1), config.reward_step, False
    elif phase == Phase.TONE1 or phase == Phase.INTERVAL:
        if action == Action.WAIT:
            # Second tone at t = tau + 2; Interval states fill t = 2..tau+1.
            if t_next == state.tau + 2:
                nxt = EnvState(Phase.TONE2, state.tau, t_next, 2)
            else:
                nxt = EnvState(Phase.INTERVAL, state.tau, t_next, 1)
            return nxt, config.reward_step, False
    else:
        # Phase.TONE2: only a classification ends the episode well.
        if action == Action.SHORT or action == Action.LONG:
            correct = action == int(classify(state.tau, config.L))
            reward = config.reward_correct if correct else config.reward_incorrect
            return (
                EnvState(Phase.TERMINAL, state.tau, t_next, state.tones_heard),
                reward,
                True,
            )

    # Any action that makes no sense in the current phase ends the episode.
    return (
        EnvState(Phase.TERMINAL, state.tau, t_next, state.tones_heard),
        config.reward_incorrect,
        True,
    )


def optimal_actions(tau: int, config: TaskConfig) -> list[Action]:
    """The rewarded action sequence for an episode of interval ``tau``."""
    return (
        [Action.START]
        + [Action.WAIT] * (tau + 1)
        + [classify(tau, config.L)]
    )
