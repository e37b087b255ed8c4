import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dalgame.errors import ConfigError, NonFiniteValue
from dalgame.game import Game
from dalgame.integrators import (AdamState, IntegratorConfig, NesterovState, affine_step_matrix,
                                 run_trajectory, step_adam, step_consensus, step_euler,
                                 step_extragradient, step_nesterov, step_rk2, step_rk4)
from dalgame.quadratic import exact_flow, make_example2, make_random_quadratic
from dalgame.stability import amplification_matrix

ident = lambda x: x
zero = lambda x: np.zeros_like(x)
one = np.array([1.0])
EX2_A = -make_example2().M


# -- step rules: hand-evaluated cases ---------------------------------------------

def test_euler_scalar():
    assert step_euler(ident, one, 0.1)[0] == pytest.approx(0.9, abs=1e-15)


def test_euler_example2():
    w = np.ones(3)
    expected = w + 1e-3 * EX2_A @ w
    np.testing.assert_allclose(step_euler(make_example2().field_at, w, 1e-3), expected, rtol=1e-15)


def test_heun_scalar():
    assert step_rk2(ident, one, 0.2, 0.5)[0] == pytest.approx(0.82, abs=1e-15)


def test_rk4_scalar():
    assert step_rk4(ident, one, 1.0)[0] == pytest.approx(0.375, abs=1e-15)


def test_extragradient_scalar():
    assert step_extragradient(ident, one, 0.1)[0] == pytest.approx(0.91, abs=1e-15)


def test_consensus_scalar():
    jtv = lambda w, u: u
    assert step_consensus(ident, jtv, one, 0.1, 0.01)[0] == pytest.approx(0.89, abs=1e-15)


def test_consensus_gamma_zero_is_euler():
    M = make_example2().M
    w = np.array([0.2, -0.5, 1.0])
    a = step_consensus(lambda x: M @ x, lambda x, u: M.T @ u, w, 0.01, 0.0)
    np.testing.assert_array_equal(a, step_euler(lambda x: M @ x, w, 0.01))


def test_nesterov_two_steps():
    s = step_nesterov(ident, NesterovState(one.copy()), 0.1, 0.9)
    assert s.buffer[0] == pytest.approx(-0.1) and s.w[0] == pytest.approx(0.9)
    s = step_nesterov(ident, s, 0.1, 0.9)
    assert s.buffer[0] == pytest.approx(-0.171) and s.w[0] == pytest.approx(0.729)


def test_nesterov_mu_zero_is_euler():
    w = np.array([0.4, -1.0])
    s = step_nesterov(lambda x: 2 * x, NesterovState(w), 0.05, 0.0)
    np.testing.assert_allclose(s.w, step_euler(lambda x: 2 * x, w, 0.05))


def test_adam_first_step_moves_eta_per_coordinate():
    w = np.array([1.0, -2.0, 3.0])
    c = np.array([0.5, -4.0, 1e3])
    s = step_adam(lambda x: c, AdamState(w), 0.01)
    np.testing.assert_allclose(s.w - w, -0.01 * np.sign(c), rtol=1e-6)


def test_adam_constant_field_steady_drift():
    c = np.array([2.0, -0.3])
    s = AdamState(np.zeros(2))
    for _ in range(500):
        prev = s.w
        s = step_adam(lambda x: c, s, 0.01)
    np.testing.assert_allclose(s.w - prev, -0.01 * np.sign(c), rtol=1e-6)


@pytest.mark.parametrize("rule", [
    lambda w: step_euler(zero, w, 0.3),
    lambda w: step_rk2(zero, w, 0.3, 0.7),
    lambda w: step_rk4(zero, w, 0.3),
    lambda w: step_extragradient(zero, w, 0.3),
    lambda w: step_consensus(zero, lambda x, u: u, w, 0.3, 0.1),
    lambda w: step_nesterov(zero, NesterovState(w), 0.3, 0.9).w,
    lambda w: step_adam(zero, AdamState(w), 0.3).w,
])
def test_fixed_point_at_zero_field(rule):
    w = np.array([0.5, -1.5, 2.0])
    np.testing.assert_array_equal(rule(w), w)


def test_nonfinite_step_raises():
    with pytest.raises(NonFiniteValue):
        step_euler(lambda x: np.array([np.inf]), one, 0.1)


def test_rk2_alpha_range():
    with pytest.raises(ValueError):
        step_rk2(ident, one, 0.1, 0.0)


# -- linear maps ---------------------------------------------------------------------

@given(seed=st.integers(0, 100_000), eta=st.floats(1e-3, 0.5),
       method=st.sampled_from(["euler", "rk2", "rk4", "eg", "co", "nesterov"]),
       rk_alpha=st.sampled_from([0.5, 2 / 3, 1.0]))
def test_one_step_map_matches_amplification(seed, eta, method, rk_alpha):
    M = make_random_quadratic(seed, 2, "mixed").M
    kw = dict(rk_alpha=rk_alpha, gamma=0.5 * eta ** 2, momentum=0.8)
    emp = affine_step_matrix(method, M, eta, **kw)
    np.testing.assert_allclose(emp, amplification_matrix(M, method, eta, **kw), rtol=0, atol=1e-12)


def _global_error(step, M, w0, eta, T=1.0):
    n = int(round(T / eta))
    h = T / n
    w = w0.copy()
    for _ in range(n):
        w = step(lambda x: M @ x, w, h)
    return h, np.linalg.norm(w - exact_flow(M, w0, T))


@pytest.mark.parametrize("name,step,order,tol", [
    ("euler", step_euler, 1.0, 0.3),
    ("heun", lambda v, w, h: step_rk2(v, w, h, 0.5), 2.0, 0.3),
    ("midpoint", lambda v, w, h: step_rk2(v, w, h, 1.0), 2.0, 0.3),
    ("ralston", lambda v, w, h: step_rk2(v, w, h, 2 / 3), 2.0, 0.3),
    ("rk4", step_rk4, 4.0, 0.5),
])
def test_global_order(name, step, order, tol):
    g = make_random_quadratic(3, 2, "mixed")
    w0 = np.random.default_rng(3).standard_normal(g.d)
    pts = [_global_error(step, g.M, w0, eta) for eta in np.geomspace(1e-3, 1e-1, 5)]
    h, err = map(np.array, zip(*pts))
    slope = np.polyfit(np.log(h), np.log(err), 1)[0]
    assert abs(slope - order) <= tol, (name, slope)


# -- run_trajectory ----------------------------------------------------------------

def test_config_validation():
    for bad in (dict(eta=0.0), dict(method="sgd"), dict(rk_alpha=1.5), dict(momentum=1.0),
                dict(gamma=-1.0), dict(record_every=0), dict(beta1=1.0)):
        with pytest.raises(ConfigError):
            IntegratorConfig(**{"eta": 0.1, **bad})


def test_config_aliases():
    assert IntegratorConfig("heun", 0.1).method == "rk2"
    c = IntegratorConfig("midpoint", 0.1)
    assert c.method == "rk2" and c.rk_alpha == 1.0
    assert IntegratorConfig("gd", 0.1).method == "euler"


def test_example2_euler_converges():
    cfg = IntegratorConfig("euler", 5e-4, max_iters=20000, stop_grad_norm=1.0)
    tr = run_trajectory(make_example2(), np.ones(3), cfg)
    assert tr.terminal_status == "Converged"
    assert tr.final.grad_norm <= 1.0 < tr.records[0].grad_norm


def test_example2_euler_diverges_rk2_converges():
    g = make_example2()
    e = run_trajectory(g, np.ones(3), IntegratorConfig("euler", 5e-3, max_iters=20000))
    r = run_trajectory(g, np.ones(3), IntegratorConfig("rk2", 5e-3, max_iters=20000, stop_grad_norm=1e-8))
    assert e.terminal_status == "Diverged"
    assert r.terminal_status == "Converged"
    assert r.final.grad_norm <= 1e-8


def test_records_ordered_and_final_recorded():
    cfg = IntegratorConfig("rk2", 1e-3, max_iters=1234, record_every=100)
    tr = run_trajectory(make_example2(), np.ones(3), cfg)
    it = tr.record_iters
    assert np.all(np.diff(it) > 0)
    assert it[0] == 0 and it[-1] == 1234 and tr.terminal_status == "MaxIters"
    assert tr.n_field_evals == 2 * 1234 + 1


@pytest.mark.parametrize("method", ["euler", "rk2", "rk4", "eg", "co", "nesterov", "adam"])
def test_kernel_matches_generic(method):
    g = make_random_quadratic(5, 2, "mixed")
    w0 = np.random.default_rng(0).standard_normal(g.d)
    cfg = IntegratorConfig(method, 0.01, max_iters=500, record_every=50, gamma=5e-5, keep_params=True)
    a = run_trajectory(g, w0, cfg, use_kernel=True)
    b = run_trajectory(g, w0, cfg, use_kernel=False)
    assert a.terminal_status == b.terminal_status and a.n_field_evals == b.n_field_evals
    for ra, rb in zip(a.records, b.records):
        assert ra.iter == rb.iter
        np.testing.assert_allclose(ra.params, rb.params, rtol=1e-12, atol=1e-13)


def test_kernel_divergence_matches_generic():
    g = make_example2()
    cfg = IntegratorConfig("euler", 5e-3, max_iters=5000)
    a = run_trajectory(g, np.ones(3), cfg, use_kernel=True)
    b = run_trajectory(g, np.ones(3), cfg, use_kernel=False)
    assert a.terminal_status == b.terminal_status == "Diverged"
    assert a.iters == b.iters


def test_run_is_deterministic():
    g = make_random_quadratic(1, 2, "mixed")
    cfg = IntegratorConfig("adam", 0.05, max_iters=300, keep_params=True)
    a = run_trajectory(g, np.ones(g.d), cfg)
    b = run_trajectory(g, np.ones(g.d), cfg)
    assert all(x.params.tobytes() == y.params.tobytes() for x, y in zip(a.records, b.records))


def test_nonfinite_field_is_divergence_not_error():
    g = Game([lambda w: float(np.exp(w[0] ** 2)), lambda w: 0.0], ((0, 1), (1, 1)),
             gradients=[lambda w: np.array([2 * w[0] * np.exp(w[0] ** 2)]), lambda w: np.zeros(1)])
    tr = run_trajectory(g, [3.0, 0.0], IntegratorConfig("euler", 1.0, max_iters=50))
    assert tr.terminal_status == "Diverged"


def test_config_is_frozen():
    cfg = IntegratorConfig("euler", 0.1)
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.eta = 0.2
