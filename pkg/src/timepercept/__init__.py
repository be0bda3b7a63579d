"""Interval-timing agents and behavioral parameter inference.

A simulation and inference toolkit around a biologically flavored
time-perception loop: stimulus-deployed microstimuli features feed a linear
TD learner on a two-tone temporal-discrimination task, elapsed time between
the tones is estimated from sensory streams by Gaussian-process maximum
likelihood, and the agent's internal timing parameters can be recovered from
its observed actions alone.
"""

__version__ = "0.1.0"

from .backends import BACKEND_NAME
from .microstimuli import MicrostimuliConfig, FeatureState
from .td_agent import AgentParams, AgentState
from .task_env import Action, Phase, TaskConfig, classify
from .external_timing import OUHyperparams, SensorTrace
from .simulate import TimingConfig, run_simulation
from .behavior_inference import ActionModel, History, ObservationMask

__all__ = [
    "__version__",
    "BACKEND_NAME",
    "MicrostimuliConfig",
    "FeatureState",
    "AgentParams",
    "AgentState",
    "Action",
    "Phase",
    "TaskConfig",
    "classify",
    "OUHyperparams",
    "SensorTrace",
    "TimingConfig",
    "run_simulation",
    "ActionModel",
    "History",
    "ObservationMask",
]
