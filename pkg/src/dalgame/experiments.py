"""Multi-run experiments shared by the CLI and the acceptance suite.

Two protocols live here: bisection for the empirical GD step-size boundary
on a linear game, and the optimizer comparison on the DAL toy model (shared
initialization, a step-size grid per method, best-step selection).
"""

from dataclasses import dataclass, field

import numpy as np

from .integrators import DIVERGED, IntegratorConfig, run_trajectory

ACC_EPS = 0.01


def contracts(game, w0, method, eta, n_iters=20000, **kw):
    """True when ``||v||`` shrinks over the second half of an ``n_iters`` run.

    Comparing the last record with the midpoint record ignores the
    transient growth that non-normal dynamics show in the first steps.
    """
    half = n_iters // 2
    cfg = IntegratorConfig(method=method, eta=eta, max_iters=n_iters, record_every=half, **kw)
    tr = run_trajectory(game, w0, cfg)
    if tr.terminal_status == DIVERGED:
        return False
    gn = tr.grad_norms
    return bool(gn[-1] < gn[-2])


def empirical_boundary(game, w0, method="euler", lo=1e-5, hi=1e-2, rel_tol=1e-4,
                       n_iters=20000, **kw):
    """Bisect on ``eta`` between a contracting ``lo`` and a non-contracting ``hi``."""
    if not contracts(game, w0, method, lo, n_iters, **kw):
        raise ValueError(f"lower bracket eta={lo} does not contract")
    if contracts(game, w0, method, hi, n_iters, **kw):
        raise ValueError(f"upper bracket eta={hi} still contracts")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if contracts(game, w0, method, mid, n_iters, **kw):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- DAL optimizer comparison -------------------------------------------------

@dataclass
class ArmSummary:
    method: str
    eta: float
    terminal_status: str
    initial_grad_norm: float
    final_grad_norm: float
    best_target_acc: float
    iters_to_best: int
    n_field_evals: int

    @property
    def decreasing(self):
        """Not diverged, and the grad norm ended below where it started."""
        return (self.terminal_status != DIVERGED
                and np.isfinite(self.final_grad_norm)
                and self.final_grad_norm < self.initial_grad_norm)


def summarize(traj, eps=ACC_EPS):
    """Best target accuracy and the first recorded iteration within ``eps`` of it."""
    recs = [r for r in traj.records if "target_acc" in r.metrics]
    acc = np.array([r.metrics["target_acc"] for r in recs])
    its = np.array([r.iter for r in recs])
    best = float(acc.max())
    first = int(its[np.argmax(acc >= best - eps)])
    gn = traj.grad_norms
    return ArmSummary(traj.config.method, float(traj.config.eta), traj.terminal_status,
                      float(gn[0]), float(gn[-1]), best, first, traj.n_field_evals)


def best_arm(arms):
    """Highest best-target-accuracy among non-diverging arms; ties go to fewer iterations.

    Returns ``None`` when every arm fails the decreasing-grad-norm test.
    """
    ok = [a for a in arms if a.decreasing]
    if not ok:
        return None
    return min(ok, key=lambda a: (-a.best_target_acc, a.iters_to_best, a.eta))


@dataclass
class SeedOutcome:
    seed: int
    arms: dict = field(default_factory=dict)   # method -> list of ArmSummary
    witness_etas: tuple = ()
    best: dict = field(default_factory=dict)    # method -> ArmSummary or None

    @property
    def rk2_converges_where_euler_does_not(self):
        return bool(self.witness_etas)

    @property
    def rk2_not_slower(self):
        e, r = self.best.get("euler"), self.best.get("rk2")
        if r is None:
            return False
        if e is None:
            return True
        return r.iters_to_best <= e.iters_to_best


def compare_optimizers(game, etas, seeds=(0, 1, 2), methods=("euler", "rk2"),
                       max_iters=2000, record_every=10, eps=ACC_EPS):
    """Run every (method, eta) arm from one shared init per seed."""
    out = []
    for seed in seeds:
        w0 = game.init(seed)
        res = SeedOutcome(seed)
        for method in methods:
            res.arms[method] = []
            for eta in etas:
                cfg = IntegratorConfig(method=method, eta=eta, max_iters=max_iters,
                                       record_every=record_every, seed=seed)
                res.arms[method].append(summarize(run_trajectory(game, w0, cfg, game.metrics), eps))
            res.best[method] = best_arm(res.arms[method])
        if "euler" in res.arms and "rk2" in res.arms:
            res.witness_etas = tuple(
                e.eta for e, r in zip(res.arms["euler"], res.arms["rk2"])
                if r.decreasing and not e.decreasing
            )
        out.append(res)
    return out


def majority(flags):
    flags = list(flags)
    return sum(bool(f) for f in flags) * 2 > len(flags)
