"""Game-theoretic analysis of domain-adversarial learning.

Players, pseudo-gradients and game Hessians (``game``), local Nash
certificates (``equilibria``), step rules and trajectories (``integrators``),
continuous and discrete stability (``stability``), closed-form quadratic games
(``quadratic``) and a small DANN model exposed as a three-player game
(``dal``).
"""

from ._accel import backend_name
from .dal import Architecture, DALGame, TaskParams, make_task, transfer_accuracy
from .equilibria import (NECertificate, StationaryKind, best_response, br_fixed_point_check,
                         check_necessary, check_strict_local_ne, check_sufficient,
                         classify_stationary_point)
from .errors import (AccuracyContractViolation, AsymmetricInput, ConfigError, ConvergenceFailure,
                     DalGameError, NonFiniteValue, NotHurwitz, PartitionMismatch, SchemaError,
                     SingularBlock, UnsupportedGame, UnsupportedMethod)
from .game import (Game, GameClass, GameJacobian, JointParams, VectorFieldEval, classify_game,
                   decompose_cooperation_competition, eval_costs, fd_pseudo_gradient,
                   game_hessian, pseudo_gradient, transpose_jvp)
from .integrators import (IntegratorConfig, Trajectory, run_trajectory, step_adam,
                          step_consensus, step_euler, step_extragradient, step_nesterov,
                          step_rk2, step_rk4)
from .quadratic import (QuadraticGame, exact_flow, make_example1_three_player,
                        make_example1_two_player, make_example2, make_random_quadratic,
                        named_game)
from .stability import (amplification_matrix, discrete_stability_map, exact_threshold,
                        gd_eta_bound, high_res_field, high_res_ode, hurwitz_check)

__version__ = "0.1.0"
