"""Local Nash equilibrium certificates.

Three distinct checks at a candidate point ``w``:

* necessary: ``v(w) = 0`` and every own-block Hessian ``d^2 J_i / dw_i^2`` is PSD;
* sufficient: ``v(w) = 0`` and every own-block Hessian is PD;
* strict: ``v(w) = 0`` and ``H + H^T`` is PD.

The strict check is stronger than the sufficient one; the two are never merged.
"""

import enum
from dataclasses import dataclass, fields

import numpy as np

from .errors import AsymmetricInput, SingularBlock, UnsupportedGame
from .game import JointParams, as_params, game_hessian, pseudo_gradient

ANALYTIC_TOL = 1e-8
FD_TOL = 1e-5


def default_tol(game):
    analytic = game.gradient_mode == "analytic" and game.has_analytic_jacobian
    return ANALYTIC_TOL if analytic else FD_TOL


@dataclass(frozen=True)
class NECertificate:
    point: JointParams
    residual: float
    stationary: bool
    necessary_holds: bool = None
    sufficient_holds: bool = None
    strict_holds: bool = None
    min_block_eigenvalues: tuple = ()
    min_symmetrized_eigenvalue: float = None
    tol: float = ANALYTIC_TOL

    def to_report(self):
        """``key: value`` lines."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "point":
                value = " ".join(repr(float(x)) for x in value.values)
            elif f.name == "min_block_eigenvalues":
                value = " ".join(repr(float(x)) for x in value)
            lines.append(f"{f.name}: {value}")
        return "\n".join(lines) + "\n"


def _eigvalsh(S):
    return np.linalg.eigvalsh(0.5 * (S + S.T))


def _base(game, omega, tol):
    p = as_params(game, omega)
    if tol is None:
        tol = default_tol(game)
    v = pseudo_gradient(game, p).value
    residual = float(np.max(np.abs(v))) if v.size else 0.0
    H = game_hessian(game, p)
    min_blocks = tuple(float(_eigvalsh(B)[0]) for B in H.diagonal_blocks())
    return p, tol, residual, H, min_blocks


def check_necessary(game, omega, tol=None):
    """Stationarity plus PSD own-block Hessians (necessary for a local NE)."""
    p, tol, residual, _, min_blocks = _base(game, omega, tol)
    stationary = residual <= tol
    return NECertificate(
        point=p, residual=residual, stationary=stationary,
        necessary_holds=stationary and all(m >= -tol for m in min_blocks),
        min_block_eigenvalues=min_blocks, tol=tol,
    )


def check_sufficient(game, omega, tol=None):
    """Stationarity plus PD own-block Hessians (sufficient for a local NE)."""
    p, tol, residual, _, min_blocks = _base(game, omega, tol)
    stationary = residual <= tol
    return NECertificate(
        point=p, residual=residual, stationary=stationary,
        necessary_holds=stationary and all(m >= -tol for m in min_blocks),
        sufficient_holds=stationary and all(m > tol for m in min_blocks),
        min_block_eigenvalues=min_blocks, tol=tol,
    )


def check_strict_local_ne(game, omega, tol=None):
    """Full certificate including the strict condition ``H + H^T > 0``."""
    p, tol, residual, H, min_blocks = _base(game, omega, tol)
    stationary = residual <= tol
    lam_sym = float(_eigvalsh(H.matrix + H.matrix.T)[0])
    return NECertificate(
        point=p, residual=residual, stationary=stationary,
        necessary_holds=stationary and all(m >= -tol for m in min_blocks),
        sufficient_holds=stationary and all(m > tol for m in min_blocks),
        strict_holds=stationary and lam_sym > tol,
        min_block_eigenvalues=min_blocks, min_symmetrized_eigenvalue=lam_sym, tol=tol,
    )


def best_response(game, omega):
    """Exact best response of every player in a quadratic game.

    Player ``i`` minimizes ``J_i(., w_{-i})`` by solving
    ``Q_i[ii] x = -(Q_i[i,-i] w_{-i} + b_i[i])``; requires PD own blocks.
    """
    if not hasattr(game, "Q"):
        raise UnsupportedGame("best responses are closed-form only for quadratic games")
    w = as_params(game, omega).values
    out = np.empty_like(w)
    for i, (offset, length) in enumerate(game.partition):
        sl = slice(offset, offset + length)
        Q = game.Q[i]
        block = Q[sl, sl]
        try:
            chol = np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise SingularBlock(f"player {i + 1} block Hessian is not positive definite") from None
        rest = Q[sl] @ w - block @ w[sl] + game.b[i][sl]
        y = np.linalg.solve(chol, -rest)
        out[sl] = np.linalg.solve(chol.T, y)
    return out


def br_fixed_point_check(game, omega, tol=ANALYTIC_TOL):
    """True when ``w`` is a fixed point of the joint best-response map."""
    w = as_params(game, omega).values
    return bool(np.max(np.abs(best_response(game, w) - w)) <= tol)


class StationaryKind(enum.Enum):
    STRICT_LOCAL_MIN = "StrictLocalMin"
    STRICT_SADDLE = "StrictSaddle"
    DEGENERATE = "Degenerate"


def classify_stationary_point(hessian, tol=ANALYTIC_TOL):
    """Classify a stationary point of a potential from its symmetric Hessian."""
    S = np.asarray(hessian, dtype=np.float64)
    if np.max(np.abs(S - S.T), initial=0.0) > tol:
        raise AsymmetricInput("Hessian of a potential must be symmetric")
    eig = _eigvalsh(S)
    if eig[0] > tol:
        return StationaryKind.STRICT_LOCAL_MIN
    if eig[0] < -tol and np.all(eig[1:] > tol):
        return StationaryKind.STRICT_SADDLE
    return StationaryKind.DEGENERATE

