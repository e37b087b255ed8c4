"""Quadratic games: the worked examples, random spectra, and exact linear flows.

Each player cost is ``J_i(w) = 0.5 * w^T Q_i w + b_i^T w`` with ``Q_i``
symmetric.  The pseudo-gradient is affine, ``v(w) = M w + c``, where block row
``i`` of ``M`` is block row ``i`` of ``Q_i``.
"""

import math

import numpy as np
import scipy.linalg

from .errors import AccuracyContractViolation, NonFiniteValue
from .game import DALSplit, Game, contiguous_partition, validate_partition

EXPM_NORM_LIMIT = 10.0


class QuadraticGame(Game):
    """Game whose player costs are quadratic forms in the joint vector."""

    def __init__(self, Q, partition, b=None, name=None, split_matrices=None):
        partition = validate_partition(partition)
        Q = [np.array(q, dtype=np.float64) for q in Q]
        d = partition[-1][0] + partition[-1][1]
        for i, q in enumerate(Q):
            if q.shape != (d, d):
                raise ValueError(f"Q[{i}] has shape {q.shape}, expected {(d, d)}")
            if not np.allclose(q, q.T, rtol=0.0, atol=1e-12):
                raise ValueError(f"Q[{i}] is not symmetric")
        if b is None:
            b = [np.zeros(d) for _ in Q]
        b = [np.array(x, dtype=np.float64).reshape(d) for x in b]
        self.Q = tuple(Q)
        self.b = tuple(b)

        M = np.zeros((d, d))
        c = np.zeros(d)
        for (offset, length), q, bi in zip(partition, self.Q, self.b):
            M[offset:offset + length] = q[offset:offset + length]
            c[offset:offset + length] = bi[offset:offset + length]
        M.setflags(write=False)
        c.setflags(write=False)
        self.M = M
        self.c = c

        split = None
        self.split_matrices = split_matrices
        if split_matrices is not None:
            L, D, lam, alpha = split_matrices
            L = np.asarray(L, dtype=np.float64)
            D = np.asarray(D, dtype=np.float64)
            split = DALSplit(lambda w: L @ w, lambda w: D @ w, lam=lam, alpha=alpha)

        self.partition = partition
        costs = [self._cost_fn(i) for i in range(len(Q))]
        gradients = [self._grad_fn(i) for i in range(len(Q))]
        super().__init__(costs, partition, gradients=gradients,
                         jacobian=lambda w: self.M, split=split, name=name)

    def _cost_fn(self, i):
        q, bi = self.Q[i], self.b[i]
        return lambda w: 0.5 * float(w @ q @ w) + float(bi @ w)

    def _grad_fn(self, i):
        offset, length = self.partition[i]
        rows, ci = self.M[offset:offset + length], self.c[offset:offset + length]
        return lambda w: rows @ w + ci

    @property
    def is_linear(self):
        """True when ``v(w) = M w`` exactly (stationary point at the origin)."""
        return not np.any(self.c)

    def costs_at(self, w):
        return np.array([0.5 * float(w @ q @ w) + float(bi @ w) for q, bi in zip(self.Q, self.b)])

    def field_at(self, w):
        return self.M @ w + self.c

    def jacobian_at(self, w):
        return np.array(self.M)

    def jtv_at(self, w, u):
        return self.M.T @ u

    def to_dict(self):
        return {
            "name": self.name,
            "partition": [list(p) for p in self.partition],
            "Q": [q.tolist() for q in self.Q],
            "b": [bi.tolist() for bi in self.b],
        }

    @classmethod
    def from_dict(cls, data):
        partition = data.get("partition")
        if partition is None:
            partition = contiguous_partition(data["sizes"])
        return cls(data["Q"], partition, b=data.get("b"), name=data.get("name"))


def _sym(a):
    a = np.asarray(a, dtype=np.float64)
    return 0.5 * (a + a.T)


def make_example1_three_player():
    """``J = 0.5*(w1^2 + 4 w1 w2 + w2^2 - w3^2)`` with ``J1 = J2 = J``, ``J3 = -J``."""
    QJ = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    return QuadraticGame([QJ, QJ, -QJ], contiguous_partition([1, 1, 1]),
                         name="example1-3p")


def make_example1_two_player():
    """The same costs with players ``(w1, w2)`` merged into one team."""
    QJ = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    return QuadraticGame([QJ, -QJ], contiguous_partition([2, 1]), name="example1-2p")


def make_example2(lam=1.0, alpha=1.0):
    """Three-player game with ``l = w1^2 + 2 w1 w2 + w2^2`` and ``d = w2^2 + 99 w2 w3 - w3^2``.

    With ``lam = alpha = 1`` the gradient-play dynamics are ``w' = A w`` with
    ``A = [[-2, -2, 0], [-2, -4, -99], [0, 99, -2]]``.
    """
    L = np.array([[2.0, 2.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 0.0]])
    D = np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 99.0], [0.0, 99.0, -2.0]])
    Q = [L + alpha * D, L + alpha * lam * D, -alpha * D]
    return QuadraticGame(Q, contiguous_partition([1, 1, 1]), name="example2",
                         split_matrices=(L, D, lam, alpha))


EXAMPLE2_A = np.array([[-2.0, -2.0, 0.0], [-2.0, -4.0, -99.0], [0.0, 99.0, -2.0]])

NAMED_GAMES = {
    "example1-3p": make_example1_three_player,
    "example1-2p": make_example1_two_player,
    "example2": make_example2,
}


def named_game(name):
    try:
        return NAMED_GAMES[name]()
    except KeyError:
        raise KeyError(f"unknown game {name!r}; choose from {sorted(NAMED_GAMES)}") from None


def game_from_field_matrix(M, sizes, name=None):
    """Quadratic game whose pseudo-gradient is ``v(w) = M w``.

    Player ``i`` gets ``J_i = 0.5 w_i^T M_ii w_i + w_i^T M_{i,-i} w_{-i}``, so the
    diagonal blocks of ``M`` must be symmetric.
    """
    M = np.asarray(M, dtype=np.float64)
    partition = contiguous_partition(sizes)
    Q = []
    for offset, length in partition:
        sl = slice(offset, offset + length)
        if not np.allclose(M[sl, sl], M[sl, sl].T, atol=1e-12):
            raise ValueError("diagonal blocks of M must be symmetric")
        q = np.zeros_like(M)
        q[sl, :] = M[sl, :]
        q[:, sl] = M[sl, :].T
        q[sl, sl] = _sym(M[sl, sl])
        Q.append(q)
    return QuadraticGame(Q, partition, name=name)


def _pair_order(n_players, d_per_player):
    """Coordinates ordered so consecutive entries belong to different players."""
    return [p * d_per_player + j for j in range(d_per_player) for p in range(n_players)]


def make_random_quadratic(seed, d_per_player=1, spectral_profile="mixed", n_players=3,
                          real_range=(0.5, 2.0), imag_range=(0.5, 3.0)):
    """Random quadratic game with a prescribed spectrum of ``M``.

    Builds ``M = Q (D + S) Q^T`` with ``Q`` block-diagonal orthogonal (one block
    per player), ``D`` diagonal and ``S`` skew, where each 2x2 rotation pairs
    coordinates of two different players so that per-player blocks of ``M``
    stay symmetric.  Profiles:

    ``symmetric``
        ``S = 0``, eigenvalues real in ``real_range`` (potential game).
    ``skew``
        ``D = 0``, eigenvalues ``+-i s`` with ``s`` in ``imag_range`` (Hamiltonian game).
    ``mixed``
        pairs of eigenvalues ``a +- i s``; an unpaired coordinate gets a real ``a``.

    Eigenvalues of ``M`` have real parts in ``real_range`` (so ``-M`` is
    Hurwitz for positive ranges).
    """
    rng = np.random.default_rng(seed)
    d = n_players * d_per_player
    C = np.zeros((d, d))
    order = _pair_order(n_players, d_per_player)
    if spectral_profile == "symmetric":
        for k in range(d):
            C[k, k] = rng.uniform(*real_range)
    elif spectral_profile in ("skew", "mixed"):
        for k in range(0, d - 1, 2):
            i, j = order[k], order[k + 1]
            s = rng.uniform(*imag_range)
            a = rng.uniform(*real_range) if spectral_profile == "mixed" else 0.0
            C[i, i] = C[j, j] = a
            C[i, j], C[j, i] = s, -s
        if d % 2:
            last = order[-1]
            C[last, last] = rng.uniform(*real_range) if spectral_profile == "mixed" else 0.0
    else:
        raise ValueError(f"unknown spectral profile {spectral_profile!r}")

    P = np.zeros((d, d))
    for p in range(n_players):
        sl = slice(p * d_per_player, (p + 1) * d_per_player)
        A = rng.standard_normal((d_per_player, d_per_player))
        q, r = np.linalg.qr(A)
        P[sl, sl] = q * np.sign(np.diag(r))
    M = P @ C @ P.T
    if spectral_profile == "symmetric":
        M = _sym(M)
    elif spectral_profile == "skew":
        M = 0.5 * (M - M.T)
    for p in range(n_players):
        sl = slice(p * d_per_player, (p + 1) * d_per_player)
        M[sl, sl] = _sym(M[sl, sl])
    return game_from_field_matrix(M, [d_per_player] * n_players,
                                  name=f"random-{spectral_profile}-{seed}")


def exact_flow(M, w0, t):
    """``exp(-t M) w0``: the exact solution of ``w' = -M w`` at time ``t``.

    Uses scaling-and-squaring with Pade approximation; the interval is split
    so every factor has ``||tau M||_1 <= 10``.
    """
    M = np.asarray(M, dtype=np.float64)
    w = np.array(w0, dtype=np.float64).reshape(-1)
    if t == 0:
        return w
    norm = float(np.linalg.norm(t * M, 1))
    pieces = max(1, math.ceil(norm / EXPM_NORM_LIMIT))
    E = scipy.linalg.expm(-(t / pieces) * M)
    if not np.all(np.isfinite(E)):
        raise AccuracyContractViolation("matrix exponential overflowed")
    for _ in range(pieces):
        w = E @ w
    if not np.all(np.isfinite(w)):
        raise NonFiniteValue("exact flow produced non-finite state")
    return w


def exact_propagator(M, t):
    """``exp(-t M)`` as a matrix (same splitting as :func:`exact_flow`)."""
    M = np.asarray(M, dtype=np.float64)
    norm = float(np.linalg.norm(t * M, 1))
    pieces = max(1, math.ceil(norm / EXPM_NORM_LIMIT))
    E = scipy.linalg.expm(-(t / pieces) * M)
    return np.linalg.matrix_power(E, pieces)
