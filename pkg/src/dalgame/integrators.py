"""Discrete integrators of the gradient-play dynamics ``w' = -v(w)``.

Every step rule takes a field callable ``v`` and returns the next iterate.
``run_trajectory`` drives them over a game (the single-step solver loop),
recording grad norms and player costs.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel, _kernels
from .errors import ConfigError, NonFiniteValue
from .game import as_params, transpose_jvp

METHODS = ("euler", "nesterov", "adam", "rk2", "rk4", "eg", "co")
METHOD_ALIASES = {
    "gd": "euler", "heun": "rk2", "extragradient": "eg", "consensus": "co",
    "nm": "nesterov", "gd-nm": "nesterov", "midpoint": "rk2", "ralston": "rk2",
}
_ALIAS_RK_ALPHA = {"heun": 0.5, "midpoint": 1.0, "ralston": 2.0 / 3.0}

CONVERGED, MAX_ITERS, DIVERGED = "Converged", "MaxIters", "Diverged"
_STATUS = {_kernels.CONVERGED: CONVERGED, _kernels.MAX_ITERS: MAX_ITERS,
           _kernels.DIVERGED: DIVERGED}


def _finite(w, what):
    if not np.all(np.isfinite(w)):
        raise NonFiniteValue(f"{what} produced a non-finite iterate")
    return w


def step_euler(v, w, eta, v0=None):
    """``w+ = w - eta * v(w)``."""
    v0 = v(w) if v0 is None else v0
    return _finite(w - eta * v0, "euler step")


def step_rk2(v, w, eta, rk_alpha=0.5, v0=None):
    """Two-stage Runge-Kutta step.

    ``rk_alpha = 1/2`` is Heun's method, ``1`` the midpoint method and ``2/3``
    Ralston's method.
    """
    if not 0.0 < rk_alpha <= 1.0:
        raise ValueError(f"rk_alpha must be in (0, 1], got {rk_alpha}")
    v0 = v(w) if v0 is None else v0
    mid = w - (eta / (2.0 * rk_alpha)) * v0
    return _finite(w - eta * ((1.0 - rk_alpha) * v0 + rk_alpha * v(mid)), "rk2 step")


def step_rk4(v, w, eta, v0=None):
    v1 = v(w) if v0 is None else v0
    v2 = v(w - 0.5 * eta * v1)
    v3 = v(w - 0.5 * eta * v2)
    v4 = v(w - eta * v3)
    return _finite(w - (eta / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4), "rk4 step")


def step_extragradient(v, w, eta, v0=None):
    v0 = v(w) if v0 is None else v0
    return _finite(w - eta * v(w - eta * v0), "extra-gradient step")


def step_consensus(v, jtv, w, eta, gamma, v0=None):
    """``w+ = w - eta * v(w) - gamma * H(w)^T v(w)``.

    ``jtv(w, u)`` returns ``H(w)^T u``; ``H^T v`` is the gradient of ``0.5*||v||^2``.
    """
    v0 = v(w) if v0 is None else v0
    return _finite(w - eta * v0 - gamma * jtv(w, v0), "consensus step")


@dataclass
class NesterovState:
    w: np.ndarray
    buffer: np.ndarray = None

    def __post_init__(self):
        if self.buffer is None:
            self.buffer = np.zeros_like(self.w)


def step_nesterov(v, state, eta, mu):
    """Look-ahead momentum: ``b+ = mu*b - eta*v(w + mu*b)``, ``w+ = w + b+``."""
    if not 0.0 <= mu < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {mu}")
    buffer = mu * state.buffer - eta * v(state.w + mu * state.buffer)
    return NesterovState(_finite(state.w + buffer, "nesterov step"), buffer)


@dataclass
class AdamState:
    w: np.ndarray
    m: np.ndarray = None
    s: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros_like(self.w)
        if self.s is None:
            self.s = np.zeros_like(self.w)


def step_adam(v, state, eta, beta1=0.9, beta2=0.999, eps=1e-8, v0=None):
    """Bias-corrected Adam update with ``v`` in place of a gradient."""
    g = v(state.w) if v0 is None else v0
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    s = beta2 * state.s + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    s_hat = s / (1.0 - beta2 ** t)
    w = state.w - eta * m_hat / (np.sqrt(s_hat) + eps)
    return AdamState(_finite(w, "adam step"), m, s, t)


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "euler"
    eta: float = 1e-3
    max_iters: int = 1000
    stop_grad_norm: float = 0.0
    divergence_threshold: float = 1e12
    seed: int = 0
    rk_alpha: float = 0.5
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    gamma: float = 0.0
    record_every: int = 1
    keep_params: bool = False
    batch_size: Optional[int] = None

    def __post_init__(self):
        method = str(self.method).lower()
        if method in _ALIAS_RK_ALPHA:
            object.__setattr__(self, "rk_alpha", _ALIAS_RK_ALPHA[method])
        method = METHOD_ALIASES.get(method, method)
        if method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        object.__setattr__(self, "method", method)
        if not self.eta > 0:
            raise ConfigError("eta must be > 0")
        if not 0.0 < self.rk_alpha <= 1.0:
            raise ConfigError("rk_alpha must be in (0, 1]")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.eps_adam > 0):
            raise ConfigError("adam needs beta1, beta2 in [0, 1) and eps_adam > 0")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.max_iters < 0 or self.record_every < 1 or self.stop_grad_norm < 0:
            raise ConfigError("max_iters >= 0, record_every >= 1, stop_grad_norm >= 0 required")

    @property
    def label(self):
        if self.method == "rk2" and self.rk_alpha != 0.5:
            return f"rk2(alpha={self.rk_alpha:g})"
        if self.method == "co":
            return f"co(gamma={self.gamma:g})"
        return self.method


@dataclass
class Record:
    iter: int
    grad_norm: float
    costs: np.ndarray
    params: Optional[np.ndarray] = None
    metrics: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    records: list
    terminal_status: str
    iters: int
    n_field_evals: int
    config: IntegratorConfig = None

    @property
    def final(self):
        return self.records[-1]

    @property
    def grad_norms(self):
        return np.array([r.grad_norm for r in self.records])

    @property
    def record_iters(self):
        return np.array([r.iter for r in self.records])


def _costs_or_nan(game, w):
    try:
        with np.errstate(all="ignore"):
            return np.asarray(game.costs_at(w), dtype=np.float64)
    except (FloatingPointError, OverflowError, ValueError):
        return np.full(game.n_players, np.nan)


def _make_record(game, it, w, gn, config, metrics):
    rec = Record(it, float(gn), _costs_or_nan(game, w))
    if config.keep_params:
        rec.params = w.copy()
    if metrics is not None and np.all(np.isfinite(w)):
        rec.metrics = dict(metrics(w))
    return rec


def _can_use_kernel(game, config):
    return (_accel.NUMBA_ENABLED and hasattr(game, "M") and hasattr(game, "c")
            and config.batch_size is None)


def run_trajectory(game, w0, config, metrics=None, use_kernel=None):
    """Iterate the configured step from ``w0``.

    Records at iteration 0, every ``record_every`` iterations and at the
    terminal iteration.  Stops when ``||v||_2 <= stop_grad_norm``
    (Converged), after ``max_iters`` steps (MaxIters), or when the iterate
    leaves ``||w||_inf <= divergence_threshold`` or turns non-finite
    (Diverged).  Divergence is a status, never an exception.

    ``metrics(w)`` may return extra per-record values.  Affine games run
    through the compiled kernel when numba is enabled (``use_kernel``
    overrides).
    """
    w = np.array(as_params(game, w0).values, dtype=np.float64)
    if use_kernel is None:
        use_kernel = _can_use_kernel(game, config)
    if use_kernel:
        return _run_kernel(game, w, config, metrics)
    return _run_generic(game, w, config, metrics)


def _method_params(config):
    if config.method == "rk2":
        return config.rk_alpha, 0.0, 0.0
    if config.method == "nesterov":
        return config.momentum, 0.0, 0.0
    if config.method == "adam":
        return config.beta1, config.beta2, config.eps_adam
    if config.method == "co":
        return config.gamma, 0.0, 0.0
    return 0.0, 0.0, 0.0


def _run_kernel(game, w, config, metrics):
    p1, p2, p3 = _method_params(config)
    with np.errstate(all="ignore"):
        rec_iters, rec_w, rec_gn, n_rec, status, n_evals = _kernels.run_affine(
            np.ascontiguousarray(game.M), np.ascontiguousarray(game.c), w,
            _kernels.METHOD_CODES[config.method], float(config.eta), p1, p2, p3,
            int(config.max_iters), float(config.stop_grad_norm),
            float(config.divergence_threshold), int(config.record_every),
        )
    records = [
        _make_record(game, int(rec_iters[k]), rec_w[k], rec_gn[k], config, metrics)
        for k in range(n_rec)
    ]
    return Trajectory(records, _STATUS[int(status)], int(rec_iters[n_rec - 1]),
                      int(n_evals), config)


def _batch_source(game, config, rng):
    if config.batch_size is None:
        return lambda: game.field_at
    if not hasattr(game, "batch_field"):
        raise ConfigError(f"{game.name} does not support mini-batches")
    return lambda: game.batch_field(rng, config.batch_size)


def _run_generic(game, w, config, metrics):
    rng = np.random.default_rng(config.seed)
    next_field = _batch_source(game, config, rng)
    method, eta = config.method, config.eta
    nest = NesterovState(w) if method == "nesterov" else None
    adam = AdamState(w) if method == "adam" else None
    fd_jtv = method == "co" and game.jtv_at(w, np.zeros_like(w)) is None
    n_evals = 0
    records = []
    status = MAX_ITERS
    it = 0
    for it in range(config.max_iters + 1):
        v = next_field()
        with np.errstate(all="ignore"):
            try:
                v0 = v(w)
            except (FloatingPointError, OverflowError):
                v0 = np.full_like(w, np.nan)
            n_evals += 1
            gn = float(np.linalg.norm(v0))
        diverged = (not np.isfinite(gn) or not np.all(np.isfinite(w))
                    or np.max(np.abs(w)) > config.divergence_threshold)
        stop = True
        if diverged:
            status = DIVERGED
        elif gn <= config.stop_grad_norm:
            status = CONVERGED
        elif it == config.max_iters:
            status = MAX_ITERS
        else:
            stop = False
        if stop or it % config.record_every == 0:
            records.append(_make_record(game, it, w, gn, config, metrics))
        if stop:
            break

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                if method == "euler":
                    w = step_euler(v, w, eta, v0)
                elif method == "rk2":
                    w = step_rk2(v, w, eta, config.rk_alpha, v0)
                    n_evals += 1
                elif method == "rk4":
                    w = step_rk4(v, w, eta, v0)
                    n_evals += 3
                elif method == "eg":
                    w = step_extragradient(v, w, eta, v0)
                    n_evals += 1
                elif method == "co":
                    w = step_consensus(v, lambda x, u: transpose_jvp(game, x, u), w, eta,
                                       config.gamma, v0)
                    n_evals += 2 * w.size if fd_jtv else 1
                elif method == "nesterov":
                    nest = step_nesterov(v, NesterovState(w, nest.buffer), eta, config.momentum)
                    w = nest.w
                    n_evals += 1
                elif method == "adam":
                    adam = step_adam(v, AdamState(w, adam.m, adam.s, adam.t), eta,
                                     config.beta1, config.beta2, config.eps_adam, v0)
                    w = adam.w
        except NonFiniteValue:
            nan_w = np.full_like(w, np.nan)
            records.append(Record(it + 1, float("nan"), np.full(game.n_players, np.nan),
                                  nan_w if config.keep_params else None))
            status = DIVERGED
            it += 1
            break
    return Trajectory(records, status, it, n_evals, config)


def affine_step_matrix(method, M, eta, rk_alpha=0.5, gamma=0.0, momentum=0.9):
    """Empirical one-step map on ``v(w) = M w``: apply the step to each basis vector.

    For nesterov the state is ``(w, buffer)`` and the map is ``2d x 2d``.
    """
    M = np.asarray(M, dtype=np.float64)
    d = M.shape[0]
    v = lambda x: M @ x
    jtv = lambda x, u: M.T @ u
    if method == "nesterov":
        out = np.empty((2 * d, 2 * d))
        for j in range(2 * d):
            e = np.zeros(2 * d)
            e[j] = 1.0
            s = step_nesterov(v, NesterovState(e[:d], e[d:]), eta, momentum)
            out[:, j] = np.concatenate([s.w, s.buffer])
        return out
    steps = {
        "euler": lambda x: step_euler(v, x, eta),
        "rk2": lambda x: step_rk2(v, x, eta, rk_alpha),
        "rk4": lambda x: step_rk4(v, x, eta),
        "eg": lambda x: step_extragradient(v, x, eta),
        "co": lambda x: step_consensus(v, jtv, x, eta, gamma),
    }
    if method not in steps:
        raise ConfigError(f"no one-step linear map for {method!r}")
    return np.column_stack([steps[method](e) for e in np.eye(d)])
