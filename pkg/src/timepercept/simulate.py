"""Episode engine: microstimuli TD learning on the discrimination task.

One simulation run owns an agent, an environment, and (optionally) the
sensory elapsed-time estimator.  Per episode:

* the first tone deploys microstimulus set 1 at the current step;
* between the tones the agent accumulates sensor readings;
* the second tone triggers an elapsed-time estimate ``tau_hat``; the agent's
  perceived clock snaps to the second-tone index implied by ``tau_hat`` and
  set 2 deploys there, so from that moment the feature vector reflects the
  *estimated* interval rather than the true one;
* every step applies the epsilon-greedy choice, the one-step TD error, the
  eligibility-trace decay/accumulation, and the taken action's weight update.

Exploration decays geometrically once per episode.  The root seed is split
into independent streams for environment sampling, agent exploration (and
weight init), and sensor synthesis, so disabling one component does not
perturb the draws of another.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky

from .backends import BACKEND_NAME, kernels
from .errors import ConfigError, ParameterError
from .external_timing import (
    CandidateEvaluator,
    FitResult,
    OUHyperparams,
    SensorTrace,
    fit_hyperparameters,
    gram_matrix,
    synthesize_trace,
)
from .task_env import ACTION_NAMES, Action, N_ACTIONS, Phase, TaskConfig, classify
from .task_env import optimal_actions, reset, step as env_step
from .td_agent import AgentParams, AgentState, init_agent, select_action

TIMING_GP = "gp"
TIMING_PERFECT = "perfect"


@dataclass(frozen=True)
class TimingConfig:
    """External-timing setup for a simulation run.

    ``mode="gp"`` runs the full sensory pipeline (synthesize a stream during
    the interval, estimate tau by candidate likelihood); ``mode="perfect"``
    short-circuits to tau_hat = tau.  ``lam``/``sigma`` parametrize the
    generating process; when ``fit_hyperparameters`` is set, each run first
    fits its own kernel hyperparameters on a calibration stream of known
    duration (with the interval unknown, lam and the grid spacing are
    confounded, so calibration data must have a known span).
    """

    mode: str = TIMING_GP
    lam: float = 1.0
    sigma: float = 0.1
    channels: int = 10
    samples: int = 16
    fit_hyperparameters: bool = True
    calibration_samples: int = 64
    calibration_channels: int = 32
    fit_init_lam: float = 1.0
    fit_init_sigma: float = 0.1

    def __post_init__(self):
        if self.mode not in (TIMING_GP, TIMING_PERFECT):
            raise ConfigError(f"timing mode must be 'gp' or 'perfect', got {self.mode!r}")
        if self.channels < 1 or self.samples < 2:
            raise ConfigError("timing needs channels >= 1 and samples >= 2")

    def generator(self) -> OUHyperparams:
        return OUHyperparams(lam=self.lam, sigma=self.sigma)


@dataclass
class EpisodeRecord:
    """Per-episode outcome; step traces are kept only when requested."""

    episode: int
    tau: int
    tau_hat: int | None
    epsilon: float
    actions: list[int]
    rewards: list[float]
    classified: bool
    correct: bool
    deltas: list[float] | None = None
    q_trace: list[np.ndarray] | None = None
    phases: list[int] | None = None


@dataclass
class SimResult:
    records: list[EpisodeRecord]
    agent: AgentState
    fitted: OUHyperparams | None
    fit_info: FitResult | None
    backend: str = BACKEND_NAME

    def classification_rate(self) -> float:
        done = [r for r in self.records if r.classified]
        return len(done) / max(len(self.records), 1)

    def accuracy(self) -> float:
        done = [r for r in self.records if r.classified]
        if not done:
            return 0.0
        return sum(r.correct for r in done) / len(done)


class ElapsedTimeOracle:
    """Per-run sensory estimator: fitted hyperparameters + cached factors."""

    def __init__(self, timing: TimingConfig, task: TaskConfig, rng: np.random.Generator):
        self.timing = timing
        self.task = task
        self.rng = rng
        self.fit_info: FitResult | None = None
        if timing.mode == TIMING_PERFECT:
            self.fitted = None
            self._evaluator = None
            self._gen_factors = {}
            return
        truth = timing.generator()
        if timing.fit_hyperparameters:
            # Ambient recording of known duration (unit sample spacing): with
            # the spacing known, lam is identifiable; during trials it is not,
            # because only lam * spacing enters the kernel.
            calib = synthesize_trace(
                timing.calibration_samples - 1,
                truth,
                timing.calibration_channels,
                timing.calibration_samples,
                rng,
            )
            self.fit_info = fit_hyperparameters(
                calib,
                OUHyperparams(lam=timing.fit_init_lam, sigma=timing.fit_init_sigma),
            )
            self.fitted = self.fit_info.params
        else:
            self.fitted = truth
        self._evaluator = CandidateEvaluator(
            range(1, task.L + 1), timing.samples, self.fitted
        )
        # Cholesky factor of the generating kernel per true interval.
        self._gen_factors: dict[int, np.ndarray] = {}

    def estimate(self, true_tau: int) -> int:
        if self.timing.mode == TIMING_PERFECT:
            return true_tau
        low = self._gen_factors.get(true_tau)
        if low is None:
            times = np.linspace(0.0, float(true_tau), self.timing.samples)
            low = cholesky(gram_matrix(times, self.timing.generator()), lower=True)
            self._gen_factors[true_tau] = low
        z = self.rng.standard_normal((self.timing.channels, self.timing.samples))
        return self._evaluator.estimate(z @ low.T)


class Simulation:
    """An agent bound to a task and timing setup, run episode by episode."""

    def __init__(
        self,
        agent_params: AgentParams,
        task: TaskConfig,
        timing: TimingConfig,
        seed,
    ):
        self.params = agent_params
        self.task = task
        self.timing = timing
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        env_ss, agent_ss, sensor_ss = ss.spawn(3)
        self.rng_env = np.random.Generator(np.random.PCG64(env_ss))
        self.rng_agent = np.random.Generator(np.random.PCG64(agent_ss))
        self.rng_sensor = np.random.Generator(np.random.PCG64(sensor_ss))
        self.agent = init_agent(agent_params, N_ACTIONS, self.rng_agent)
        self.oracle = ElapsedTimeOracle(timing, task, self.rng_sensor)
        self._episode_index = 0

        micro = agent_params.micro
        self._m = micro.m
        self._zeta = micro.zeta
        self._xi = micro.xi
        self._beta = micro.beta
        self._dim = micro.dim
        self._gamma_eta = agent_params.gamma * agent_params.eta
        self._trace_first = agent_params.update_order == "trace-first"

    @property
    def fitted(self) -> OUHyperparams | None:
        return self.oracle.fitted

    def run_episode(
        self,
        forced_tau: int | None = None,
        learn: bool = True,
        greedy: bool = False,
        collect_traces: bool = False,
    ) -> EpisodeRecord:
        """One full episode; updates the agent in place when ``learn``."""
        params, task = self.params, self.task
        w, e = self.agent.weights, self.agent.traces
        epsilon = 0.0 if greedy else self.agent.epsilon

        env = reset(task, self.rng_env, forced_tau)
        ages = np.zeros(self._zeta)
        active = np.zeros(self._zeta, dtype=np.uint8)
        deploy_time = np.zeros(self._zeta)
        perceived = 0.0
        tau_hat: int | None = None

        x = np.zeros(self._dim)
        x_next = np.zeros(self._dim)
        q = np.empty(N_ACTIONS)
        q_next = np.empty(N_ACTIONS)
        kernels.action_values_into(q, w, x)

        actions: list[int] = []
        rewards: list[float] = []
        deltas: list[float] | None = [] if collect_traces else None
        q_trace: list[np.ndarray] | None = [] if collect_traces else None
        phases: list[int] | None = [] if collect_traces else None

        while True:
            a = select_action(q, epsilon, self.rng_agent)
            if collect_traces:
                q_trace.append(q.copy())
                phases.append(int(env.phase))
            env_next, r, done = env_step(env, a, task)

            if done:
                q_next_max = 0.0
            else:
                perceived += 1.0
                if env_next.phase == Phase.TONE1:
                    active[0] = 1
                    deploy_time[0] = perceived
                elif env_next.phase == Phase.TONE2:
                    tau_hat = self.oracle.estimate(env.tau)
                    perceived = deploy_time[0] + 1.0 + tau_hat
                    active[1] = 1
                    deploy_time[1] = perceived
                ages[:] = perceived - deploy_time
                kernels.features_into(x_next, ages, active, self._m, self._xi, self._beta)
                kernels.action_values_into(q_next, w, x_next)
                q_next_max = float(q_next.max())

            delta = r + params.gamma * q_next_max - q[a]
            if learn:
                kernels.td_update(
                    w, e, x, a, delta, self._gamma_eta, params.alpha, self._trace_first
                )

            actions.append(int(a))
            rewards.append(float(r))
            if collect_traces:
                deltas.append(float(delta))

            if done:
                break
            env = env_next
            x, x_next = x_next, x
            # Re-read values: the taken action's weights just changed.
            kernels.action_values_into(q, w, x)

        classified = (
            actions[-1] in (int(Action.SHORT), int(Action.LONG))
            and env.phase == Phase.TONE2
        )
        correct = bool(classified and rewards[-1] == task.reward_correct)
        record = EpisodeRecord(
            episode=self._episode_index,
            tau=env.tau,
            tau_hat=tau_hat,
            epsilon=epsilon,
            actions=actions,
            rewards=rewards,
            classified=bool(classified),
            correct=correct,
            deltas=deltas,
            q_trace=q_trace,
            phases=phases,
        )
        self._episode_index += 1
        if learn:
            self.agent.epsilon *= params.rho
        return record

    def run_probe_episode(
        self, tau: int, tau_hat: int | None = None
    ) -> EpisodeRecord:
        """Frozen measurement episode: scripted Start/Wait, greedy choice.

        Follows the rewarded sequence up to the second tone, then takes the
        greedy classification; TD errors are computed but never applied, and
        exploration is off.  ``tau_hat`` overrides the estimator (defaults to
        the true interval so probes are deterministic given the weights).
        """
        params, task = self.params, self.task
        w = self.agent.weights
        if tau_hat is None:
            tau_hat = tau

        env = reset(task, self.rng_env, tau)
        ages = np.zeros(self._zeta)
        active = np.zeros(self._zeta, dtype=np.uint8)
        deploy_time = np.zeros(self._zeta)
        perceived = 0.0

        x = np.zeros(self._dim)
        x_next = np.zeros(self._dim)
        q = np.empty(N_ACTIONS)
        q_next = np.empty(N_ACTIONS)
        kernels.action_values_into(q, w, x)

        script = optimal_actions(tau, task)[:-1]  # Start + Waits; choice is greedy
        actions: list[int] = []
        rewards: list[float] = []
        deltas: list[float] = []
        q_trace: list[np.ndarray] = []
        phases: list[int] = []

        step_i = 0
        while True:
            a = script[step_i] if step_i < len(script) else Action(int(np.argmax(q)))
            q_trace.append(q.copy())
            phases.append(int(env.phase))
            env_next, r, done = env_step(env, a, task)
            if done:
                q_next_max = 0.0
            else:
                perceived += 1.0
                if env_next.phase == Phase.TONE1:
                    active[0] = 1
                    deploy_time[0] = perceived
                elif env_next.phase == Phase.TONE2:
                    perceived = deploy_time[0] + 1.0 + tau_hat
                    active[1] = 1
                    deploy_time[1] = perceived
                ages[:] = perceived - deploy_time
                kernels.features_into(x_next, ages, active, self._m, self._xi, self._beta)
                kernels.action_values_into(q_next, w, x_next)
                q_next_max = float(q_next.max())
            deltas.append(float(r + params.gamma * q_next_max - q[a]))
            actions.append(int(a))
            rewards.append(float(r))
            if done:
                break
            env = env_next
            x, x_next = x_next, x
            q, q_next = q_next, q
            step_i += 1

        classified = actions[-1] in (int(Action.SHORT), int(Action.LONG))
        return EpisodeRecord(
            episode=-1,
            tau=tau,
            tau_hat=tau_hat,
            epsilon=0.0,
            actions=actions,
            rewards=rewards,
            classified=bool(classified),
            correct=bool(classified and rewards[-1] == task.reward_correct),
            deltas=deltas,
            q_trace=q_trace,
            phases=phases,
        )


def run_simulation(
    agent_params: AgentParams,
    task: TaskConfig,
    timing: TimingConfig,
    episodes: int,
    seed,
    forced_tau: int | None = None,
    learn: bool = True,
    greedy: bool = False,
    collect_traces: bool = False,
    agent: AgentState | None = None,
) -> SimResult:
    """Run ``episodes`` episodes on a fresh (or provided) agent."""
    if episodes < 1:
        raise ParameterError(f"episodes must be >= 1, got {episodes}")
    sim = Simulation(agent_params, task, timing, seed)
    if agent is not None:
        sim.agent = agent
    records = [
        sim.run_episode(
            forced_tau=forced_tau, learn=learn, greedy=greedy, collect_traces=collect_traces
        )
        for _ in range(episodes)
    ]
    return SimResult(
        records=records, agent=sim.agent, fitted=sim.fitted, fit_info=sim.oracle.fit_info
    )
