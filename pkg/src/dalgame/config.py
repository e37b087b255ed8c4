"""Experiment configuration read from a single TOML file.

Layout::

    seed = 0
    record_every = 1

    [game]            # name = "example1-3p" | "example1-2p" | "example2" | "dal-toy" | "quadratic"
    name = "example2"
    lam = 1.0         # example2 and dal-toy
    alpha = 1.0
    # quadratic literal: sizes = [1, 1, 1], Q = [[[...]], ...], b = [[...], ...]
    # point = [...]   # analysis point, default origin
    # init = [...]    # shared initial iterate, default seeded normal draw

    [task]            # dal-toy only; TaskParams fields
    [model]           # dal-toy only; Architecture fields plus gain, head_gain

    [[arms]]          # IntegratorConfig fields
    method = "euler"
    eta = 5e-4

    [sweep]
    methods = ["euler", "rk2"]
    etas = [...]      # or eta_min, eta_max, n_eta (log-spaced)
    rk_alphas = [...] # optional grids
    gammas = [...]
    lams = [...]

    [analyze]
    eta = 0.001       # optional, for the extra-gradient condition
    train_method = "rk2"   # dal-toy: how the analysis point is reached
    train_eta = 1.0
    train_iters = 2000

    [output]
    dir = "out"

Environment variables are never consulted.
"""

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dal, quadratic
from .errors import ConfigError, DalGameError
from .integrators import IntegratorConfig

QUADRATIC_NAMES = ("example1-3p", "example1-2p", "example2")
GAME_NAMES = QUADRATIC_NAMES + ("dal-toy", "quadratic")
_TOP_KEYS = {"seed", "record_every", "game", "task", "model", "arms", "sweep", "analyze", "output"}
_ARM_KEYS = {f.name for f in dataclasses.fields(IntegratorConfig)} | {"lam"}


@dataclass
class ExperimentConfig:
    game: dict = field(default_factory=lambda: {"name": "example2"})
    task: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    arms: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    analyze: dict = field(default_factory=dict)
    output_dir: str = "out"
    seed: int = 0
    record_every: int = 1

    def with_overrides(self, seed=None, out=None):
        return dataclasses.replace(
            self,
            seed=self.seed if seed is None else int(seed),
            output_dir=self.output_dir if out is None else str(out),
        )


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)


def config_from_dict(raw):
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    game = dict(raw.get("game", {"name": "example2"}))
    if game.get("name") not in GAME_NAMES:
        raise ConfigError(f"game.name must be one of {GAME_NAMES}, got {game.get('name')!r}")
    arms = [dict(a) for a in raw.get("arms", [])]
    for a in arms:
        bad = set(a) - _ARM_KEYS
        if bad:
            raise ConfigError(f"unknown arm keys: {sorted(bad)}")
    cfg = ExperimentConfig(
        game=game,
        task=dict(raw.get("task", {})),
        model=dict(raw.get("model", {})),
        arms=arms,
        sweep=dict(raw.get("sweep", {})),
        analyze=dict(raw.get("analyze", {})),
        output_dir=str(raw.get("output", {}).get("dir", "out")),
        seed=_int(raw.get("seed", 0), "seed"),
        record_every=_int(raw.get("record_every", 1), "record_every"),
    )
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    return cfg


def _int(x, what):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{what} must be an integer")
    return x


def build_game(cfg, lam=None):
    """Game described by ``cfg.game``; ``lam`` overrides the GRL coefficient."""
    g = cfg.game
    name = g["name"]
    lam = float(g.get("lam", 1.0) if lam is None else lam)
    alpha = float(g.get("alpha", 1.0))
    try:
        if name == "example2":
            return quadratic.make_example2(lam=lam, alpha=alpha)
        if name in QUADRATIC_NAMES:
            return quadratic.named_game(name)
        if name == "quadratic":
            for key in ("Q", "sizes"):
                if key not in g:
                    raise ConfigError(f"quadratic game needs game.{key}")
            return quadratic.QuadraticGame.from_dict(
                {"Q": g["Q"], "sizes": g["sizes"], "b": g.get("b"), "name": g.get("label", "quadratic")})
        task_kw = dict(cfg.task)
        for key in ("means", "shift"):
            if key in task_kw:
                task_kw[key] = _tuple(task_kw[key])
        task = dal.make_task(**task_kw)
        arch_kw = {k: v for k, v in cfg.model.items() if k not in ("gain", "head_gain")}
        return dal.DALGame(task, dal.Architecture(**arch_kw), lam=lam, alpha=alpha)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, DalGameError) as exc:
        raise ConfigError(f"invalid game description: {exc}") from None


def _tuple(x):
    return tuple(_tuple(v) if isinstance(v, list) else v for v in x)


def initial_point(cfg, game):
    """Shared starting iterate of every arm."""
    if "init" in cfg.game:
        w0 = np.asarray(cfg.game["init"], dtype=np.float64)
        if w0.shape != (game.d,):
            raise ConfigError(f"game.init must have {game.d} entries")
        return w0
    if isinstance(game, dal.DALGame):
        return game.init(cfg.seed, cfg.model.get("gain", 1.0), cfg.model.get("head_gain", 0.0))
    return np.random.default_rng(cfg.seed).standard_normal(game.d)


def analysis_point(cfg, game):
    if "point" in cfg.game:
        p = np.asarray(cfg.game["point"], dtype=np.float64)
        if p.shape != (game.d,):
            raise ConfigError(f"game.point must have {game.d} entries")
        return p
    return np.zeros(game.d)


def integrator_config(arm, cfg, **extra):
    kw = {"seed": cfg.seed, "record_every": cfg.record_every}
    kw.update(arm)
    kw.update(extra)
    try:
        return IntegratorConfig(**kw)
    except TypeError as exc:
        raise ConfigError(f"invalid arm {arm}: {exc}") from None


def sweep_etas(sweep):
    if "etas" in sweep:
        etas = [float(e) for e in sweep["etas"]]
    elif {"eta_min", "eta_max", "n_eta"} <= set(sweep):
        etas = [float(e) for e in np.geomspace(sweep["eta_min"], sweep["eta_max"], int(sweep["n_eta"]))]
    else:
        raise ConfigError("sweep needs etas or eta_min/eta_max/n_eta")
    if not etas or any(not e > 0 for e in etas):
        raise ConfigError("sweep eta grid must be nonempty and positive")
    return etas
