"""Recovering agent parameters from observed behavior.

The estimator works from the empirical conditional distribution of actions
given the episode's interval, p(a | tau, theta), tallied over full training
simulations run at a candidate parameter point.  A held-out history of
(tau_k, actions) pairs is scored by its negative log-likelihood under each
candidate table, and the maximum-likelihood estimate is the candidate with
the smallest score.  Utilities cover exploration filtering (drop actions
taken while epsilon was still high) and observation masks (hide actions or
whole intervals) for partial-observation studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, CoverageError, ParameterError
from .simulate import EpisodeRecord, TimingConfig, run_simulation
from .task_env import ACTION_NAMES, N_ACTIONS, TaskConfig
from .td_agent import AgentParams


@dataclass(frozen=True)
class History:
    """Flat record of observed behavior: one row per action.

    All columns are aligned arrays: ``episode`` is the episode index within
    its simulation, ``tau`` the episode's true interval, ``step`` the
    position within the episode, ``action`` the action index, and
    ``epsilon`` the exploration level when the action was taken.
    """

    episode: np.ndarray
    tau: np.ndarray
    step: np.ndarray
    action: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        n = len(self.episode)
        for name in ("tau", "step", "action", "epsilon"):
            if len(getattr(self, name)) != n:
                raise ParameterError(f"history column {name!r} has mismatched length")

    def __len__(self) -> int:
        return len(self.action)

    @property
    def n_episodes(self) -> int:
        return 0 if len(self) == 0 else int(self.episode.max()) + 1

    @staticmethod
    def empty() -> "History":
        z = np.zeros(0, dtype=int)
        return History(z, z.copy(), z.copy(), z.copy(), np.zeros(0))

    @staticmethod
    def from_records(records: list[EpisodeRecord]) -> "History":
        eps_i, taus, steps, acts, eps_v = [], [], [], [], []
        for rec in records:
            for s, a in enumerate(rec.actions):
                eps_i.append(rec.episode)
                taus.append(rec.tau)
                steps.append(s)
                acts.append(a)
                eps_v.append(rec.epsilon)
        return History(
            np.asarray(eps_i, dtype=int),
            np.asarray(taus, dtype=int),
            np.asarray(steps, dtype=int),
            np.asarray(acts, dtype=int),
            np.asarray(eps_v, dtype=float),
        )

    def select(self, keep: np.ndarray) -> "History":
        return History(
            self.episode[keep],
            self.tau[keep],
            self.step[keep],
            self.action[keep],
            self.epsilon[keep],
        )

    def truncate_episodes(self, n_episodes: int) -> "History":
        """Only the first ``n_episodes`` episodes of the record."""
        return self.select(self.episode < n_episodes)

    def concat(self, other: "History") -> "History":
        return History(
            np.concatenate([self.episode, other.episode]),
            np.concatenate([self.tau, other.tau]),
            np.concatenate([self.step, other.step]),
            np.concatenate([self.action, other.action]),
            np.concatenate([self.epsilon, other.epsilon]),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("episode,tau,step,action,epsilon_t\n")
            for i in range(len(self)):
                fh.write(
                    f"{self.episode[i]},{self.tau[i]},{self.step[i]},"
                    f"{ACTION_NAMES[self.action[i]]},{self.epsilon[i]!r}\n"
                )

    @staticmethod
    def from_csv(path) -> "History":
        eps_i, taus, steps, acts, eps_v = [], [], [], [], []
        import csv as _csv

        with open(path, newline="") as fh:
            for row in _csv.DictReader(fh):
                eps_i.append(int(row["episode"]))
                taus.append(int(row["tau"]))
                steps.append(int(row["step"]))
                acts.append(ACTION_NAMES.index(row["action"]))
                eps_v.append(float(row["epsilon_t"]))
        return History(
            np.asarray(eps_i, dtype=int),
            np.asarray(taus, dtype=int),
            np.asarray(steps, dtype=int),
            np.asarray(acts, dtype=int),
            np.asarray(eps_v, dtype=float),
        )


@dataclass(frozen=True)
class ActionModel:
    """Empirical p(a | tau) table for one candidate parameter point.

    ``counts`` holds the raw per-interval tallies averaged over training
    simulations; ``probs`` the smoothed, row-normalized table.  Additive
    smoothing keeps every probability strictly positive, so any history over
    the covered intervals has finite likelihood.
    """

    theta: dict
    L: int
    probs: np.ndarray
    counts: np.ndarray
    smoothing: float = 0.5
    actions: tuple = ACTION_NAMES

    def row(self, tau: int) -> np.ndarray:
        if not 1 <= tau <= self.L:
            raise CoverageError(f"tau={tau} outside model range 1..{self.L}")
        return self.probs[tau - 1]

    def to_json(self, path) -> None:
        payload = {
            "theta": self.theta,
            "L": self.L,
            "actions": list(self.actions),
            "smoothing": self.smoothing,
            "rows": {str(t + 1): [float(p) for p in self.probs[t]] for t in range(self.L)},
            "counts": {str(t + 1): [float(c) for c in self.counts[t]] for t in range(self.L)},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_json(path) -> "ActionModel":
        with open(path) as fh:
            payload = json.load(fh)
        L = int(payload["L"])
        probs = np.array([payload["rows"][str(t + 1)] for t in range(L)])
        counts = np.array([payload["counts"][str(t + 1)] for t in range(L)])
        return ActionModel(
            theta=payload["theta"],
            L=L,
            probs=probs,
            counts=counts,
            smoothing=float(payload.get("smoothing", 0.5)),
            actions=tuple(payload["actions"]),
        )


@dataclass(frozen=True)
class ObservationMask:
    """Entries to drop from a history: whole actions and/or whole intervals."""

    hidden_actions: frozenset = frozenset()
    hidden_taus: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "hidden_actions", frozenset(int(a) for a in self.hidden_actions))
        object.__setattr__(self, "hidden_taus", frozenset(int(t) for t in self.hidden_taus))
        if len(self.hidden_actions) >= N_ACTIONS:
            raise ConfigError("a mask may not hide every action")

    @staticmethod
    def from_names(action_names=(), taus=()) -> "ObservationMask":
        return ObservationMask(
            hidden_actions=frozenset(ACTION_NAMES.index(a) for a in action_names),
            hidden_taus=frozenset(int(t) for t in taus),
        )


def tally_history(history: History, L: int, n_actions: int = N_ACTIONS) -> np.ndarray:
    """Raw (L, n_actions) occurrence counts of (tau, action) pairs."""
    if len(history) and (history.tau.min() < 1 or history.tau.max() > L):
        raise CoverageError("history contains intervals outside 1..L")
    counts = np.zeros((L, n_actions))
    np.add.at(counts, (history.tau - 1, history.action), 1.0)
    return counts


def model_from_histories(
    histories: list[History],
    theta: dict,
    L: int,
    smoothing: float = 0.5,
    epsilon_threshold: float | None = None,
) -> ActionModel:
    """Average per-simulation tallies, smooth, and normalize per interval.

    ``epsilon_threshold`` restricts the tally to knowledge-exploiting steps
    (recorded epsilon strictly below the threshold).
    """
    if not histories:
        raise ParameterError("need at least one training history")
    counts = np.zeros((L, N_ACTIONS))
    for h in histories:
        if epsilon_threshold is not None:
            h = filter_exploratory(h, epsilon_threshold)
        counts += tally_history(h, L)
    counts /= len(histories)
    probs = counts + smoothing
    probs /= probs.sum(axis=1, keepdims=True)
    return ActionModel(theta=theta, L=L, probs=probs, counts=counts, smoothing=smoothing)


def training_histories(
    theta: AgentParams,
    train_sims: int,
    episodes_per_sim: int,
    config: TaskConfig,
    seed,
    timing: TimingConfig | None = None,
) -> list[History]:
    """Full training runs at one parameter point, as behavior histories."""
    if episodes_per_sim < 1:
        raise ParameterError("episodes_per_sim must be >= 1")
    if timing is None:
        timing = TimingConfig()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    out = []
    for child in ss.spawn(train_sims):
        result = run_simulation(theta, config, timing, episodes_per_sim, child)
        out.append(History.from_records(result.records))
    return out


def build_action_model(
    theta: AgentParams,
    train_sims: int,
    episodes_per_sim: int,
    config: TaskConfig,
    seed,
    timing: TimingConfig | None = None,
    smoothing: float = 0.5,
    theta_label: dict | None = None,
    epsilon_threshold: float | None = None,
) -> ActionModel:
    """Tally (tau, action) occurrences over fresh training simulations."""
    label = theta_label if theta_label is not None else {"m": theta.micro.m}
    histories = training_histories(
        theta, train_sims, episodes_per_sim, config, seed, timing
    )
    return model_from_histories(
        histories, label, config.L, smoothing=smoothing, epsilon_threshold=epsilon_threshold
    )


def history_nll(
    history: History, model: ActionModel, weight_per_episode: bool = False
) -> float:
    """Negative log-likelihood -sum log p(a | tau) of a history under a model.

    With ``weight_per_episode`` each episode contributes total weight 1
    (every action weighted 1/N_k), an optional counterweight for histories
    whose episode lengths vary wildly.
    """
    if len(history) == 0:
        return 0.0
    if history.tau.min() < 1 or history.tau.max() > model.L:
        raise CoverageError("history contains intervals the model does not cover")
    logp = np.log(model.probs[history.tau - 1, history.action])
    if weight_per_episode:
        _, inverse, counts = np.unique(
            history.episode, return_inverse=True, return_counts=True
        )
        logp = logp / counts[inverse]
    return float(-logp.sum())


@dataclass(frozen=True)
class MLEstimate:
    """Argmin-NLL candidate plus the full per-candidate profile."""

    theta_hat: dict
    labels: list
    nlls: np.ndarray
    tied: list = field(default_factory=list)

    def normalized(self) -> np.ndarray:
        """NLL profile scaled to sum to one (likelihood-profile reporting)."""
        total = self.nlls.sum()
        return self.nlls / total if total > 0 else np.full_like(self.nlls, 1.0 / len(self.nlls))


def ml_estimate(
    history: History, models: list[ActionModel], weight_per_episode: bool = False
) -> MLEstimate:
    """Candidate with the smallest NLL; ties keep candidate order and are reported."""
    if not models:
        raise ParameterError("need at least one candidate model")
    nlls = np.array(
        [history_nll(history, m, weight_per_episode=weight_per_episode) for m in models]
    )
    best = float(nlls.min())
    tied = [m.theta for m, v in zip(models, nlls) if v == best]
    return MLEstimate(
        theta_hat=tied[0],
        labels=[m.theta for m in models],
        nlls=nlls,
        tied=tied if len(tied) > 1 else [],
    )


def filter_exploratory(
    history: History, epsilon_threshold: float, epsilon_schedule=None
) -> History:
    """Keep only actions taken while epsilon was strictly below the threshold.

    ``epsilon_schedule`` (aligned with the history rows) overrides the
    recorded per-action epsilon values when supplied.
    """
    eps = history.epsilon if epsilon_schedule is None else np.asarray(epsilon_schedule, dtype=float)
    if len(eps) != len(history):
        raise ParameterError("epsilon schedule does not cover all history steps")
    return history.select(eps < epsilon_threshold)


def apply_mask(history: History, mask: ObservationMask) -> History:
    """Drop entries whose action or interval is hidden by the mask."""
    keep = np.ones(len(history), dtype=bool)
    if mask.hidden_actions:
        keep &= ~np.isin(history.action, sorted(mask.hidden_actions))
    if mask.hidden_taus:
        keep &= ~np.isin(history.tau, sorted(mask.hidden_taus))
    return history.select(keep)


def accuracy(estimates: list, truth) -> float:
    """Percentage of estimates exactly equal to the true parameter label."""
    if not estimates:
        raise ParameterError("need at least one estimate")
    hits = sum(1 for est in estimates if est == truth)
    return 100.0 * hits / len(estimates)
