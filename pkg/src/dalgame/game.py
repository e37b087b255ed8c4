"""Smooth n-player games: player costs, pseudo-gradient and game Hessian.

A game is a set of player costs ``J_i(w)`` over a joint parameter vector ``w``
split into contiguous per-player blocks.  Player ``i`` only controls block
``i``; its "gradient" is the partial gradient of its own cost with respect to
its own block.  Stacking these gives the pseudo-gradient ``v(w)`` whose
Jacobian ``H(w)`` (the game Hessian) is not symmetric in general.
"""

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteValue, PartitionMismatch, UnsupportedGame

FD_BASE_STEP = float(np.cbrt(np.finfo(np.float64).eps))

Partition = tuple  # tuple of (offset, length) pairs


def fd_step(x):
    """Central-difference step for a coordinate with value ``x``."""
    return FD_BASE_STEP * max(1.0, abs(float(x)))


def contiguous_partition(sizes):
    """Partition with consecutive blocks of the given sizes."""
    out, offset = [], 0
    for n in sizes:
        out.append((offset, int(n)))
        offset += int(n)
    return tuple(out)


def validate_partition(partition, d=None):
    part = tuple((int(o), int(n)) for o, n in partition)
    if len(part) < 2:
        raise PartitionMismatch("a game needs at least two players")
    expected = 0
    for i, (offset, length) in enumerate(part):
        if length < 1:
            raise PartitionMismatch(f"player {i} has empty block")
        if offset != expected:
            raise PartitionMismatch(
                f"player {i} block starts at {offset}, expected {expected}"
            )
        expected += length
    if d is not None and expected != d:
        raise PartitionMismatch(f"partition covers {expected} coordinates, vector has {d}")
    return part


@dataclass(frozen=True)
class JointParams:
    """Joint parameter vector with its per-player partition."""

    values: np.ndarray
    partition: Partition

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "partition", validate_partition(self.partition, values.size))

    @classmethod
    def from_blocks(cls, blocks):
        arrays = [np.atleast_1d(np.asarray(b, dtype=np.float64)).reshape(-1) for b in blocks]
        return cls(np.concatenate(arrays), contiguous_partition(a.size for a in arrays))

    @property
    def d(self):
        return self.values.size

    @property
    def n_players(self):
        return len(self.partition)

    def block(self, i):
        offset, length = self.partition[i]
        return self.values[offset:offset + length]

    def with_values(self, values):
        return JointParams(values, self.partition)


@dataclass(frozen=True)
class VectorFieldEval:
    """Pseudo-gradient ``v(w)`` at ``base_point``."""

    value: np.ndarray
    base_point: JointParams

    def block(self, i):
        offset, length = self.base_point.partition[i]
        return self.value[offset:offset + length]

    @property
    def norm(self):
        return float(np.linalg.norm(self.value))


@dataclass(frozen=True)
class GameJacobian:
    """Game Hessian ``H(w) = dv/dw`` at ``base_point`` (not symmetric in general)."""

    matrix: np.ndarray
    base_point: JointParams

    def block(self, i, j):
        oi, ni = self.base_point.partition[i]
        oj, nj = self.base_point.partition[j]
        return self.matrix[oi:oi + ni, oj:oj + nj]

    def diagonal_blocks(self):
        return [self.block(i, i) for i in range(self.base_point.n_players)]


@dataclass(frozen=True)
class DALSplit:
    """Loss/divergence split of a domain-adversarial game.

    ``J1 = l + alpha*d``, ``J2 = l + alpha*lam*d``, ``J3 = -alpha*d`` over the
    three blocks (classifier, feature extractor, domain classifier).
    ``loss_gradient`` and ``divergence_gradient`` return full gradients over
    the joint vector.
    """

    loss_gradient: Callable
    divergence_gradient: Callable
    lam: float = 1.0
    alpha: float = 1.0


class Game:
    """A smooth game given by per-player cost callables.

    Parameters
    ----------
    costs : sequence of callables
        ``costs[i](w)`` returns the scalar cost of player ``i`` at the joint
        vector ``w``.
    partition : sequence of (offset, length)
        Contiguous player blocks of ``w``.
    gradients : sequence of callables, optional
        ``gradients[i](w)`` returns the gradient of ``J_i`` with respect to
        block ``i`` only.  When omitted, central finite differences are used.
    jacobian : callable, optional
        Analytic game Hessian ``w -> H(w)``.
    split : DALSplit, optional
        Exposes the loss/divergence decomposition for DAL-structured games.
    """

    def __init__(self, costs, partition, gradients=None, jacobian=None, split=None, name=None):
        self.partition = validate_partition(partition)
        self.costs = tuple(costs)
        if len(self.costs) != len(self.partition):
            raise PartitionMismatch(
                f"{len(self.costs)} cost functions for {len(self.partition)} players"
            )
        if gradients is not None:
            gradients = tuple(gradients)
            if len(gradients) != len(self.costs):
                raise ValueError("analytic mode needs a gradient for every player")
        self.gradients = gradients
        self._jacobian = jacobian
        self.split = split
        self.name = name or type(self).__name__

    @property
    def n_players(self):
        return len(self.partition)

    @property
    def d(self):
        offset, length = self.partition[-1]
        return offset + length

    @property
    def gradient_mode(self):
        return "analytic" if self.gradients is not None else "central-finite-difference"

    @property
    def has_analytic_jacobian(self):
        return self._jacobian is not None

    # Raw evaluators over plain arrays; no validation.  Subclasses override.

    def costs_at(self, w):
        return np.array([float(J(w)) for J in self.costs])

    def field_at(self, w):
        if self.gradients is None:
            return fd_field(self, w)
        out = np.empty(self.d)
        for (offset, length), grad in zip(self.partition, self.gradients):
            out[offset:offset + length] = grad(w)
        return out

    def jacobian_at(self, w):
        """Analytic ``H(w)`` or ``None``."""
        if self._jacobian is None:
            return None
        return np.asarray(self._jacobian(w), dtype=np.float64)

    def jtv_at(self, w, u):
        """``H(w)^T u`` when an analytic Hessian exists, else ``None``."""
        H = self.jacobian_at(w)
        return None if H is None else H.T @ u

    def params(self, values):
        return JointParams(values, self.partition)


def fd_field(game, w):
    """Pseudo-gradient by central differences of each player's own cost."""
    w = np.array(w, dtype=np.float64)
    out = np.empty_like(w)
    for i, (offset, length) in enumerate(game.partition):
        J = game.costs[i]
        for j in range(offset, offset + length):
            h = fd_step(w[j])
            orig = w[j]
            w[j] = orig + h
            fp = float(J(w))
            w[j] = orig - h
            fm = float(J(w))
            w[j] = orig
            out[j] = (fp - fm) / (2.0 * h)
    return out


def fd_jacobian(field_fn, w):
    """Jacobian of ``field_fn`` at ``w`` by central differences, column by column."""
    w = np.array(w, dtype=np.float64)
    d = w.size
    H = np.empty((d, d))
    for j in range(d):
        h = fd_step(w[j])
        orig = w[j]
        w[j] = orig + h
        vp = field_fn(w)
        w[j] = orig - h
        vm = field_fn(w)
        w[j] = orig
        H[:, j] = (vp - vm) / (2.0 * h)
    return H


def as_params(game, omega):
    if isinstance(omega, JointParams):
        if omega.partition != game.partition:
            raise PartitionMismatch(
                f"point partition {omega.partition} != game partition {game.partition}"
            )
        return omega
    values = np.asarray(omega, dtype=np.float64).reshape(-1)
    if values.size != game.d:
        raise PartitionMismatch(f"point has {values.size} coordinates, game has {game.d}")
    return JointParams(values, game.partition)


def _player_of(partition, index):
    for i, (offset, length) in enumerate(partition):
        if offset <= index < offset + length:
            return i
    return None


def _check_field(partition, v, what):
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        player = _player_of(partition, int(bad[0]))
        raise NonFiniteValue(f"non-finite {what} entry for player {player + 1}", player=player)


def eval_costs(game, omega):
    """Return ``(J_1(w), ..., J_n(w))``; raises NonFiniteValue naming the player."""
    p = as_params(game, omega)
    values = np.asarray(game.costs_at(p.values.copy()), dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        player = int(bad[0])
        raise NonFiniteValue(f"non-finite cost for player {player + 1}", player=player)
    return values


def pseudo_gradient(game, omega):
    """Stacked per-player gradients ``v(w)``."""
    p = as_params(game, omega)
    v = np.asarray(game.field_at(p.values.copy()), dtype=np.float64)
    _check_field(game.partition, v, "gradient")
    return VectorFieldEval(v, p)


def fd_pseudo_gradient(game, omega):
    """Pseudo-gradient by central differences, ignoring analytic gradients."""
    p = as_params(game, omega)
    v = fd_field(game, p.values.copy())
    _check_field(game.partition, v, "gradient")
    return VectorFieldEval(v, p)


def game_hessian(game, omega):
    """Game Hessian ``H(w)``: analytic when available, else central differences of ``v``."""
    p = as_params(game, omega)
    H = game.jacobian_at(p.values.copy())
    if H is None:
        def field_fn(w):
            v = game.field_at(w)
            _check_field(game.partition, v, "gradient")
            return v
        H = fd_jacobian(field_fn, p.values)
    if not np.all(np.isfinite(H)):
        raise NonFiniteValue("non-finite game Hessian entry")
    return GameJacobian(H, p)


def transpose_jvp(game, omega, v=None):
    """``H(w)^T v(w)``, i.e. the gradient of ``0.5*||v(w)||^2``.

    Uses the analytic Hessian when the game has one, otherwise central
    differences of the scalar ``0.5*||v||^2`` (never forms ``H``).
    """
    p = as_params(game, omega)
    w = p.values.copy()
    if v is None:
        v = game.field_at(w)
    out = game.jtv_at(w, v)
    if out is None:
        def half_sq(x):
            fx = game.field_at(x)
            return 0.5 * float(fx @ fx)
        out = np.empty_like(w)
        for j in range(w.size):
            h = fd_step(w[j])
            orig = w[j]
            w[j] = orig + h
            fp = half_sq(w)
            w[j] = orig - h
            fm = half_sq(w)
            w[j] = orig
            out[j] = (fp - fm) / (2.0 * h)
    _check_field(game.partition, out, "Jacobian-vector product")
    return out


class GameClass(enum.Enum):
    POTENTIAL = "Potential"
    PURELY_ADVERSARIAL = "PurelyAdversarial"
    GENERAL = "General"


def classify_game(H, tol):
    """Classify a game from its Hessian (``GameJacobian`` or matrix).

    Potential when ``H`` is symmetric, purely adversarial when ``H`` is
    skew-symmetric or its spectrum is purely imaginary, general otherwise.
    Norms are induced infinity norms.
    """
    M = H.matrix if isinstance(H, GameJacobian) else np.asarray(H, dtype=np.float64)
    if np.linalg.norm(M - M.T, np.inf) <= tol:
        return GameClass.POTENTIAL
    if np.linalg.norm(M + M.T, np.inf) <= tol:
        return GameClass.PURELY_ADVERSARIAL
    if np.all(np.abs(np.linalg.eigvals(M).real) <= tol):
        return GameClass.PURELY_ADVERSARIAL
    return GameClass.GENERAL


def decompose_cooperation_competition(game, omega):
    """Split ``v(w)`` into a potential part and an adversarial part.

    Returns ``(grad_phi, v_hat)`` with ``grad_phi = (d1 l, d2 l, 0)`` the
    gradient of the shared loss ``phi = l`` and
    ``v_hat = (alpha*d1 d, alpha*lam*d2 d, -alpha*d3 d)``.  Their sum is ``v``.
    """
    split = getattr(game, "split", None)
    if split is None or game.n_players != 3:
        raise UnsupportedGame(f"{game.name} does not expose a loss/divergence split")
    p = as_params(game, omega)
    gl = np.asarray(split.loss_gradient(p.values.copy()), dtype=np.float64)
    gd = np.asarray(split.divergence_gradient(p.values.copy()), dtype=np.float64)
    (o1, n1), (o2, n2), (o3, n3) = game.partition
    potential = np.zeros(game.d)
    potential[o1:o1 + n1] = gl[o1:o1 + n1]
    potential[o2:o2 + n2] = gl[o2:o2 + n2]
    adversarial = np.zeros(game.d)
    adversarial[o1:o1 + n1] = split.alpha * gd[o1:o1 + n1]
    adversarial[o2:o2 + n2] = split.alpha * split.lam * gd[o2:o2 + n2]
    adversarial[o3:o3 + n3] = -split.alpha * gd[o3:o3 + n3]
    _check_field(game.partition, potential + adversarial, "decomposition")
    return potential, adversarial
