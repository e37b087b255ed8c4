"""Asymptotic stability of gradient-play dynamics and of its discretizations.

Continuous side: Hurwitz test on the dynamics Jacobian ``-dv/dw``, the
learning-rate bound implied by the first-order modified ("high-resolution")
ODE of GD, and the corresponding conditions for RK2 and extra-gradient.

Discrete side: for linear fields ``v(w) = M w`` each integrator is a fixed
matrix polynomial in ``-eta*M``; its spectral radius is the exact stability
oracle.  The modified-ODE bounds are reported next to it, never in its place.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceFailure, NotHurwitz, UnsupportedMethod
from .game import as_params, fd_step, game_hessian, pseudo_gradient

EXACT_METHODS = ("euler", "rk2", "rk4", "eg", "co", "nesterov")
MAX_DENSE_DIM = 500


def eigenvalues(J):
    """Complex spectrum of a square matrix, sorted by real part then imaginary part (descending)."""
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {J.shape}")
    if not np.all(np.isfinite(J)):
        raise ConvergenceFailure("matrix has non-finite entries")
    try:
        eig = np.linalg.eigvals(J)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigenvalue iteration failed: {exc}") from exc
    eig = np.asarray(eig, dtype=np.complex128)
    order = np.lexsort((-eig.imag, -eig.real))
    return eig[order]


def gd_eta_bound(spectrum):
    """Largest GD step allowed by the first-order modified ODE.

    ``spectrum`` holds eigenvalues ``a + ib`` of the dynamics Jacobian
    ``-dv/dw`` at a stationary point.  Returns the minimum of
    ``-2a / (b^2 - a^2)`` over eigenvalues with ``|a| < |b|``, or ``None``
    when no eigenvalue has ``|a| < |b|``.
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if np.any(spectrum.real >= 0):
        raise NotHurwitz("every eigenvalue needs a negative real part")
    bounds = [-2.0 * z.real / (z.imag ** 2 - z.real ** 2)
              for z in spectrum if abs(z.real) < abs(z.imag)]
    return min(bounds) if bounds else None


def rk2_stability_flag(spectrum):
    """Modified-ODE condition of any RK2 method: every real part ``a < 0``."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    return bool(np.all(spectrum.real < 0))


@dataclass(frozen=True)
class EGConditionRecord:
    eigenvalue: complex
    value: float
    satisfied: bool


def eg_continuous_condition(spectrum, eta):
    """Per-eigenvalue extra-gradient condition ``a + (eta/2)(a^2 - b^2) < 0``.

    Advisory: the sign convention of the underlying continuous model differs
    from ``w' = -v``.  The exact EG amplification map is authoritative.
    """
    out = []
    for z in np.asarray(spectrum, dtype=np.complex128):
        a, b = z.real, z.imag
        value = a + 0.5 * eta * (a * a - b * b)
        out.append(EGConditionRecord(complex(z), float(value), bool(value < 0)))
    return out


def euler_exact_threshold(spectrum):
    """Exact GD threshold ``min -2a/(a^2+b^2)`` from the dynamics spectrum."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if np.any(spectrum.real >= 0):
        raise NotHurwitz("every eigenvalue needs a negative real part")
    return float(np.min(-2.0 * spectrum.real / np.abs(spectrum) ** 2))


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    hurwitz_stable: bool
    gd_eta_bound: Optional[float]
    rk2_stable_flag: bool
    eg_continuous_note: list = field(default_factory=list)
    eg_eta: Optional[float] = None

    def to_report(self):
        lines = [f"n_eigenvalues: {len(self.eigenvalues)}"]
        for k, z in enumerate(self.eigenvalues):
            lines.append(f"eigenvalue_{k}: {format_complex(z)}")
        lines.append(f"hurwitz_stable: {self.hurwitz_stable}")
        lines.append(f"gd_eta_bound: {_fmt(self.gd_eta_bound)}")
        lines.append(f"rk2_stable_flag: {self.rk2_stable_flag}")
        if self.eg_eta is not None:
            lines.append(f"eg_eta: {self.eg_eta!r}")
            for k, rec in enumerate(self.eg_continuous_note):
                lines.append(f"eg_condition_{k}: {rec.value!r} satisfied={rec.satisfied}")
        return "\n".join(lines) + "\n"


def _fmt(x):
    return "None" if x is None else repr(float(x))


def format_complex(z):
    z = complex(z)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r} {sign} {abs(z.imag)!r}i"


def hurwitz_check(dynamics_jacobian, eta=None, max_dim=MAX_DENSE_DIM):
    """Spectrum and stability verdicts for ``w' = f(w)`` with Jacobian ``dynamics_jacobian``."""
    J = np.asarray(dynamics_jacobian, dtype=np.float64)
    if J.shape[0] > max_dim:
        raise ValueError(f"dense spectra are supported up to d = {max_dim}")
    eig = eigenvalues(J)
    stable = bool(np.all(eig.real < 0))
    bound = gd_eta_bound(eig) if stable else None
    notes = eg_continuous_condition(eig, eta) if eta is not None else []
    return SpectrumReport(eig, stable, bound, rk2_stability_flag(eig), notes, eta)


def amplification_matrix(M, method, eta, rk_alpha=0.5, gamma=0.0, momentum=0.9):
    """Exact one-step matrix of ``method`` on ``v(w) = M w``.

    euler ``I - hM``; rk2 (any ``rk_alpha``) ``I - hM + (hM)^2/2``; rk4 the
    degree-4 Taylor polynomial of ``exp(-hM)``; eg ``I - hM + (hM)^2``;
    co ``I - hM - gamma M^T M``; nesterov acts on the lifted state
    ``(w, buffer)``.  Adam is nonlinear in its state and has no such matrix.
    """
    del rk_alpha  # every RK2 variant has the same linear map
    M = np.asarray(M, dtype=np.float64)
    d = M.shape[0]
    I = np.eye(d)
    Z = -eta * M
    if method == "euler":
        return I + Z
    if method == "rk2":
        return I + Z + 0.5 * Z @ Z
    if method == "rk4":
        out, term = I.copy(), I.copy()
        for k in range(1, 5):
            term = term @ Z / k
            out = out + term
        return out
    if method == "eg":
        return I + Z + Z @ Z
    if method == "co":
        return I + Z - gamma * M.T @ M
    if method == "nesterov":
        B = I + Z
        return np.block([[B, momentum * B], [Z, momentum * B]])
    if method == "adam":
        raise UnsupportedMethod("adam is nonlinear in its moment state")
    raise UnsupportedMethod(f"unknown method {method!r}")


@dataclass(frozen=True)
class StabilityMap:
    amplification: np.ndarray
    spectral_radius: float
    stable: bool


def discrete_stability_map(M, method, eta, rk_alpha=0.5, gamma=0.0, momentum=0.9):
    """Amplification matrix, its spectral radius and ``stable = rho < 1``."""
    G = amplification_matrix(M, method, eta, rk_alpha, gamma, momentum)
    rho = float(np.max(np.abs(eigenvalues(G))))
    return StabilityMap(G, rho, rho < 1.0)


def exact_threshold(M, method, eta_min=1e-8, eta_max=10.0, n_grid=400, rel_tol=1e-12, **kw):
    """Supremum of ``eta`` such that the method is stable on ``(0, eta]``.

    Scans a log grid for the first unstable step, then bisects.  Returns
    ``None`` when even ``eta_min`` is unstable and ``inf`` when the whole
    grid is stable.
    """
    def stable(eta):
        return discrete_stability_map(M, method, eta, **kw).stable

    grid = np.geomspace(eta_min, eta_max, n_grid)
    if not stable(grid[0]):
        return None
    lo = grid[0]
    for eta in grid[1:]:
        if not stable(eta):
            hi = eta
            break
        lo = eta
    else:
        return math.inf
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def stability_sweep(M, methods, etas, **kw):
    """Rows ``(eta, method, spectral_radius, stable)`` for every pair."""
    rows = []
    for method in methods:
        for eta in etas:
            sm = discrete_stability_map(M, method, eta, **kw)
            rows.append((float(eta), method, sm.spectral_radius, sm.stable))
    return rows


@dataclass(frozen=True)
class HighResODE:
    """Modified ODE ``w' = -v(w) - c * dv(w) v(w)`` valid to the stated order in eta."""

    game: object
    correction_coefficient: float
    order_of_validity: int

    def __call__(self, w):
        v = pseudo_gradient(self.game, w).value
        out = -v
        if self.correction_coefficient:
            out = out - self.correction_coefficient * _jvp(self.game, w, v)
        return out


def _jvp(game, w, u):
    """``H(w) u``: analytic Hessian when available, else a directional central difference."""
    p = as_params(game, w)
    H = game.jacobian_at(p.values.copy())
    if H is not None:
        return H @ u
    scale = float(np.linalg.norm(u))
    if scale == 0.0:
        return np.zeros_like(u)
    h = fd_step(np.max(np.abs(p.values), initial=0.0)) / scale
    return (game.field_at(p.values + h * u) - game.field_at(p.values - h * u)) / (2.0 * h)


def high_res_ode(integrator, game, eta):
    """Modified ODE of ``integrator``: GD gets the ``eta/2`` drag; RK2 and RK4 none."""
    if integrator in ("euler", "gd"):
        return HighResODE(game, 0.5 * eta, 1)
    if integrator in ("rk2", "heun"):
        return HighResODE(game, 0.0, 2)
    if integrator == "rk4":
        return HighResODE(game, 0.0, 4)
    raise UnsupportedMethod(f"no modified ODE for {integrator!r}")


def high_res_field(integrator, game, omega, eta):
    return high_res_ode(integrator, game, eta)(omega)


def spectrum_at(game, omega):
    """``hurwitz_check`` of ``-H(w)`` at a point of ``game``."""
    return hurwitz_check(-game_hessian(game, omega).matrix)
