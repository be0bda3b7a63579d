"""Elapsed-time estimation from multichannel sensor streams.

The sensor values observed between two stimuli are modeled as independent
zero-mean Gaussian processes with an Ornstein-Uhlenbeck covariance

    k(dt) = exp(-lam * |dt|) + sigma^2 * [dt == 0].

An interval hypothesis tau places the trace's N samples on an equally spaced
grid spanning [0, tau]; the elapsed-time estimate is the candidate tau with
the highest data likelihood under that grid.  Longer hypothesized intervals
therefore imply slower per-sample decorrelation, which is what makes the
estimate informative -- and also why the kernel hyperparameters must be
fitted on data of *known* duration (with lam free, tau and lam are
confounded through the product lam * dt).

The synthetic stream generator stands in for a robot's ambient sensor
readings: each channel is an exact draw from the same GP.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .errors import (
    EstimationFailureError,
    NumericalDegeneracyError,
    OptimizerDivergenceError,
    ParameterError,
)

LOG_2PI = math.log(2.0 * math.pi)

# Diagonal jitter applied when the nugget is too small to regularize the Gram
# matrix on its own.
_JITTER = 1e-8
_SIGMA_JITTER_THRESHOLD = 1e-4

# Clamping box for the hyperparameter search (log-space ascent cannot reach
# exact zero; hitting a wall is reported via ``at_boundary``).
_LAM_BOUNDS = (1e-6, 1e6)
_SIGMA_BOUNDS = (1e-8, 1e3)


@dataclass(frozen=True)
class OUHyperparams:
    """Ornstein-Uhlenbeck kernel hyperparameters (lam > 0, sigma >= 0)."""

    lam: float = 1.0
    sigma: float = 0.1

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ParameterError(f"lam must be > 0, got {self.lam}")
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SensorTrace:
    """M independent sensor channels sampled at N shared time points.

    ``values`` has shape (M, N).  Sample times are equally spaced over
    [0, span]; ``span`` defaults to N - 1 (unit step).  The span is a nominal
    record of how the data was produced -- elapsed-time estimation ignores it
    and rescales the grid per candidate.
    """

    values: np.ndarray
    span: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ParameterError(f"values must be 2-D (M, N), got shape {v.shape}")
        m, n = v.shape
        if m < 1 or n < 2:
            raise ParameterError(f"need M >= 1 channels and N >= 2 samples, got {v.shape}")
        object.__setattr__(self, "values", v)
        if self.span is None:
            object.__setattr__(self, "span", float(n - 1))
        elif self.span < 0:
            raise ParameterError(f"span must be >= 0, got {self.span}")

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.span, self.n_samples)


def ou_kernel(tau_gap, params: OUHyperparams):
    """OU covariance exp(-lam |tau|) + sigma^2 at gap 0; symmetric in the gap."""
    gap = np.abs(np.asarray(tau_gap, dtype=float))
    k = np.exp(-params.lam * gap)
    k = k + (params.sigma**2) * (gap == 0.0)
    return k[()]


def gram_matrix(times: np.ndarray, params: OUHyperparams) -> np.ndarray:
    """Kernel matrix over the sample times, with jitter for tiny nuggets."""
    gaps = np.abs(times[:, None] - times[None, :])
    k = np.exp(-params.lam * gaps)
    k[np.diag_indices_from(k)] += params.sigma**2
    if params.sigma < _SIGMA_JITTER_THRESHOLD:
        k[np.diag_indices_from(k)] += _JITTER
    return k


def gaussian_log_density(y: np.ndarray, k: np.ndarray) -> float:
    """Sum over rows of y of log N(row; 0, k).

    Works for any N >= 1.  Raises NumericalDegeneracyError if k admits no
    Cholesky factorization.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    try:
        low = cholesky(k, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"Gram matrix is not positive definite: {exc}")
    z = solve_triangular(low, y.T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(low)))
    n = k.shape[0]
    m = y.shape[0]
    return float(-0.5 * np.sum(z * z) - 0.5 * m * (logdet + n * LOG_2PI))


def gp_log_likelihood(trace: SensorTrace, params: OUHyperparams) -> float:
    """Log-likelihood of all channels under the zero-mean GP on the trace grid."""
    return gaussian_log_density(trace.values, gram_matrix(trace.times(), params))


def gp_log_likelihood_and_grad(
    trace: SensorTrace, params: OUHyperparams
) -> tuple[float, np.ndarray]:
    """Log-likelihood and its gradient with respect to (lam, sigma).

    For each hyperparameter p, with phi_i = K^-1 y_i,

        d logp / dp = 0.5 * sum_i phi_i' (dK/dp) phi_i - (M/2) tr(K^-1 dK/dp).
    """
    times = trace.times()
    y = trace.values
    m = y.shape[0]
    gaps = np.abs(times[:, None] - times[None, :])
    k = gram_matrix(times, params)
    try:
        factor = cho_factor(k, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"Gram matrix is not positive definite: {exc}")

    phi = cho_solve(factor, y.T, check_finite=False)  # (N, M)
    low = factor[0]
    logdet = 2.0 * np.sum(np.log(np.diag(low)))
    quad = float(np.sum(y.T * phi))
    ll = -0.5 * quad - 0.5 * m * (logdet + k.shape[0] * LOG_2PI)

    k_inv = cho_solve(factor, np.eye(k.shape[0]), check_finite=False)
    dk_dlam = -gaps * np.exp(-params.lam * gaps)
    dk_dsigma = 2.0 * params.sigma * np.eye(k.shape[0])

    grad = np.empty(2)
    for j, dk in enumerate((dk_dlam, dk_dsigma)):
        data_term = 0.5 * float(np.sum(phi * (dk @ phi)))
        trace_term = 0.5 * m * float(np.sum(k_inv * dk))
        grad[j] = data_term - trace_term
    return float(ll), grad


@dataclass(frozen=True)
class FitResult:
    """Outcome of the hyperparameter search."""

    params: OUHyperparams
    log_likelihood: float
    iterations: int
    converged: bool
    at_boundary: bool


def fit_hyperparameters(
    trace: SensorTrace,
    init: OUHyperparams = OUHyperparams(),
    max_iter: int = 500,
    grad_tol: float = 1e-6,
    ftol: float = 1e-10,
) -> FitResult:
    """Maximize the GP log-likelihood over (lam, sigma).

    Gradient ascent with backtracking line search in log-parameter space,
    which keeps lam > 0 and sigma > 0; parameters that run into the clamping
    box are reported with ``at_boundary`` (sigma at its floor is the
    sigma -> 0 degenerate case).  The returned likelihood never falls below
    the likelihood at ``init``.

    Stops when the projected gradient norm reaches ``grad_tol``, when the
    relative likelihood gain stays below ``ftol`` for several consecutive
    iterations (the nugget direction is often too flat for the gradient test
    to fire), or at the iteration cap.
    """
    if trace.n_samples < 3:
        raise ParameterError("hyperparameter fitting needs N >= 3 samples per channel")

    lam = min(max(init.lam, _LAM_BOUNDS[0]), _LAM_BOUNDS[1])
    sigma = min(max(init.sigma, _SIGMA_BOUNDS[0]), _SIGMA_BOUNDS[1])
    u = np.log([lam, sigma])
    iterates = [(lam, sigma)]

    def eval_at(u_vec):
        p = OUHyperparams(lam=float(np.exp(u_vec[0])), sigma=float(np.exp(u_vec[1])))
        ll, grad_p = gp_log_likelihood_and_grad(trace, p)
        # Chain rule for u = log(p): dll/du = dll/dp * p.
        return ll, grad_p * np.exp(u_vec)

    ll, grad_u = eval_at(u)
    if not np.isfinite(ll):
        raise OptimizerDivergenceError(
            "log-likelihood non-finite at the initial point", iterates
        )

    lo = np.log([_LAM_BOUNDS[0], _SIGMA_BOUNDS[0]])
    hi = np.log([_LAM_BOUNDS[1], _SIGMA_BOUNDS[1]])

    converged = False
    iteration = 0
    step_size = 0.1
    u_prev = None
    g_prev = None
    flat_streak = 0
    for iteration in range(1, max_iter + 1):
        # Projected gradient: directions blocked by the box do not count.
        g_proj = grad_u.copy()
        g_proj[(u <= lo) & (grad_u < 0)] = 0.0
        g_proj[(u >= hi) & (grad_u > 0)] = 0.0
        if np.linalg.norm(g_proj) <= grad_tol:
            converged = True
            break

        # Barzilai-Borwein initial step, refined by backtracking.
        if u_prev is not None:
            du = u - u_prev
            dg = grad_u - g_prev
            denom = float(du @ dg)
            if denom < 0.0:
                step_size = min(max(-float(du @ du) / denom, 1e-6), 1e3)
        u_prev, g_prev = u.copy(), grad_u.copy()

        improved = False
        gain = 0.0
        for _ in range(40):
            u_new = np.clip(u + step_size * g_proj, lo, hi)
            ll_new, grad_new = eval_at(u_new)
            if not np.isfinite(ll_new):
                raise OptimizerDivergenceError(
                    f"log-likelihood non-finite at iteration {iteration}", iterates
                )
            if ll_new > ll:
                gain = ll_new - ll
                u, ll, grad_u = u_new, ll_new, grad_new
                improved = True
                break
            step_size *= 0.5
        iterates.append((float(np.exp(u[0])), float(np.exp(u[1]))))
        if not improved:
            converged = True  # no ascent step at line-search resolution
            break
        if gain <= ftol * (1.0 + abs(ll)):
            flat_streak += 1
            if flat_streak >= 5:
                converged = True
                break
        else:
            flat_streak = 0

    lam, sigma = np.exp(u)
    at_boundary = bool(np.any(u <= lo + 1e-12) or np.any(u >= hi - 1e-12))
    return FitResult(
        params=OUHyperparams(lam=float(lam), sigma=float(sigma)),
        log_likelihood=float(ll),
        iterations=iteration,
        converged=converged,
        at_boundary=at_boundary,
    )


def synthesize_trace(
    true_tau: float,
    params: OUHyperparams,
    n_channels: int,
    n_samples: int,
    rng: np.random.Generator,
) -> SensorTrace:
    """Exact GP draws over N equally spaced times spanning [0, true_tau]."""
    if n_channels < 1 or n_samples < 2:
        raise ParameterError("need n_channels >= 1 and n_samples >= 2")
    times = np.linspace(0.0, float(true_tau), n_samples)
    low = cholesky(gram_matrix(times, params), lower=True)
    z = rng.standard_normal((n_channels, n_samples))
    return SensorTrace(values=z @ low.T, span=float(true_tau))


class CandidateEvaluator:
    """Per-candidate likelihood machinery, factored once and reused.

    For each candidate tau the Gram matrix over linspace(0, tau, N) is
    Cholesky-factored at construction; scoring a trace then costs one
    triangular solve per candidate.
    """

    def __init__(self, candidates, n_samples: int, params: OUHyperparams):
        cands = sorted(int(c) for c in candidates)
        if not cands:
            raise ParameterError("candidate set must be nonempty")
        self.candidates = cands
        self.params = params
        self.n_samples = int(n_samples)
        eye = np.eye(self.n_samples)
        inv_factors = []
        logdets = []
        for c in cands:
            times = np.linspace(0.0, float(c), self.n_samples)
            low = cholesky(gram_matrix(times, params), lower=True)
            inv_factors.append(solve_triangular(low, eye, lower=True, check_finite=False))
            logdets.append(2.0 * float(np.sum(np.log(np.diag(low)))))
        # (n_candidates, N, N) stack of inverse Cholesky factors: scoring a
        # trace is then a single batched matmul.
        self._inv_factors = np.array(inv_factors)
        self._logdets = np.array(logdets)

    def log_likelihoods(self, values: np.ndarray) -> np.ndarray:
        """Per-candidate log-likelihood of an (M, N) value array."""
        m, n = values.shape
        if n != self.n_samples:
            raise ParameterError(
                f"trace has {n} samples but evaluator was built for {self.n_samples}"
            )
        z = self._inv_factors @ values.T  # (n_candidates, N, M)
        quad = np.einsum("cnm,cnm->c", z, z)
        return -0.5 * quad - 0.5 * m * (self._logdets + n * LOG_2PI)

    def estimate(self, values: np.ndarray) -> int:
        lls = self.log_likelihoods(values)
        finite = np.isfinite(lls)
        if not finite.any():
            raise EstimationFailureError("all candidate likelihoods are non-finite")
        lls = np.where(finite, lls, -np.inf)
        # Ties resolve to the smallest tau because candidates are ascending.
        return self.candidates[int(np.argmax(lls))]


def estimate_elapsed_time(
    trace: SensorTrace, fitted: OUHyperparams, candidates
) -> int:
    """Most likely interval among ``candidates`` for the trace's values.

    The N samples are assumed to span [0, tau] under each hypothesis tau;
    ties resolve to the smallest candidate.
    """
    ev = CandidateEvaluator(candidates, trace.n_samples, fitted)
    return ev.estimate(trace.values)


def elapsed_time_log_likelihoods(
    trace: SensorTrace, fitted: OUHyperparams, candidates
) -> tuple[list[int], np.ndarray]:
    """Candidate list (ascending) and the log-likelihood of each."""
    ev = CandidateEvaluator(candidates, trace.n_samples, fitted)
    return ev.candidates, ev.log_likelihoods(trace.values)


def trace_to_csv(trace: SensorTrace, path) -> None:
    """Write (channel, t_index, value) rows; the span is not stored."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "t_index", "value"])
        for ch in range(trace.n_channels):
            for idx in range(trace.n_samples):
                writer.writerow([ch, idx, repr(float(trace.values[ch, idx]))])


def trace_from_csv(path, span: float | None = None) -> SensorTrace:
    """Read a trace written by :func:`trace_to_csv`.

    ``span`` restores the sample spacing if known; the default is the unit
    grid (span = N - 1).
    """
    cells: dict[tuple[int, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            cells[(int(row["channel"]), int(row["t_index"]))] = float(row["value"])
    if not cells:
        raise ParameterError(f"no sensor rows found in {path}")
    n_channels = max(c for c, _ in cells) + 1
    n_samples = max(i for _, i in cells) + 1
    values = np.zeros((n_channels, n_samples))
    for (ch, idx), v in cells.items():
        values[ch, idx] = v
    return SensorTrace(values=values, span=span)
