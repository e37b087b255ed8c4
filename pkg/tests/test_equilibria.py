import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dalgame.equilibria import (StationaryKind, best_response, br_fixed_point_check,
                                check_necessary, check_strict_local_ne, check_sufficient,
                                classify_stationary_point)
from dalgame.errors import AsymmetricInput, SingularBlock, UnsupportedGame
from dalgame.game import Game
from dalgame.quadratic import (QuadraticGame, make_example1_three_player, make_example1_two_player,
                               make_example2, make_random_quadratic)

seeds = st.integers(0, 100_000)


def test_example1_three_player_origin_certified():
    g = make_example1_three_player()
    cert = check_sufficient(g, np.zeros(3))
    assert cert.stationary and cert.necessary_holds and cert.sufficient_holds
    np.testing.assert_allclose(cert.min_block_eigenvalues, [1.0, 1.0, 1.0])


def test_example1_two_player_fails_necessary():
    cert = check_necessary(make_example1_two_player(), np.zeros(3))
    assert cert.stationary
    assert not cert.necessary_holds
    assert cert.min_block_eigenvalues[0] == pytest.approx(-1.0)


def test_nonstationary_fails():
    cert = check_strict_local_ne(make_example1_three_player(), [0.1, 0.0, 0.0])
    assert not cert.stationary
    assert not (cert.necessary_holds or cert.sufficient_holds or cert.strict_holds)


def test_example2_sufficient_and_strict():
    cert = check_strict_local_ne(make_example2(), np.zeros(3))
    np.testing.assert_allclose(cert.min_block_eigenvalues, [2.0, 4.0, 2.0])
    assert cert.sufficient_holds and cert.strict_holds
    # H + H^T = [[4,4,0],[4,8,0],[0,0,4]]
    S = np.array([[4.0, 4.0, 0.0], [4.0, 8.0, 0.0], [0.0, 0.0, 4.0]])
    assert cert.min_symmetrized_eigenvalue == pytest.approx(np.linalg.eigvalsh(S)[0], abs=1e-12)


def test_example1_strict_fails_while_sufficient_holds():
    cert = check_strict_local_ne(make_example1_three_player(), np.zeros(3))
    assert cert.sufficient_holds
    assert not cert.strict_holds
    assert cert.min_symmetrized_eigenvalue == pytest.approx(-2.0, abs=1e-12)


def test_indefinite_block_fails_sufficient():
    Q = np.array([[-1.0, 0.0], [0.0, 1.0]])
    g = QuadraticGame([Q, Q], ((0, 1), (1, 1)))
    assert not check_sufficient(g, np.zeros(2)).sufficient_holds


def test_fd_game_uses_looser_tolerance():
    j = lambda w: 0.5 * (w[0] ** 2 + 4 * w[0] * w[1] + w[1] ** 2 - w[2] ** 2)
    g = Game([j, j, lambda w: -j(w)], ((0, 1), (1, 1), (2, 1)))
    cert = check_strict_local_ne(g, np.zeros(3))
    assert cert.tol == 1e-5
    assert cert.sufficient_holds and not cert.strict_holds


def test_report_lines():
    text = check_strict_local_ne(make_example2(), np.zeros(3)).to_report()
    keys = [line.split(":")[0] for line in text.splitlines()]
    assert keys[:3] == ["point", "residual", "stationary"]
    assert "strict_holds: True" in text


# -- best response -------------------------------------------------------------

def test_br_fixed_point_example1():
    g = make_example1_three_player()
    assert br_fixed_point_check(g, np.zeros(3))
    assert not br_fixed_point_check(g, [1.0, 0.0, 0.0])
    assert best_response(g, [1.0, 0.0, 0.0])[0] == 0.0


def test_br_single_player_is_minimizer():
    Q = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    g = QuadraticGame([Q, Q], ((0, 1), (1, 1)), b=[b, b])
    # iterate best responses (Gauss-Seidel on a PD system) and compare with the minimizer
    w = np.zeros(2)
    for _ in range(200):
        w = best_response(g, w)
    np.testing.assert_allclose(w, np.linalg.solve(Q, -b), atol=1e-12)
    assert br_fixed_point_check(g, np.linalg.solve(Q, -b))


def test_br_singular_block():
    with pytest.raises(SingularBlock):
        br_fixed_point_check(make_example1_two_player(), np.zeros(3))


def test_br_non_quadratic():
    g = Game([lambda w: w[0] ** 4, lambda w: w[1] ** 4], ((0, 1), (1, 1)))
    with pytest.raises(UnsupportedGame):
        best_response(g, np.zeros(2))


# -- properties ------------------------------------------------------------------

@given(seed=seeds, dpp=st.integers(1, 3), profile=st.sampled_from(["mixed", "symmetric", "skew"]),
       scale=st.floats(0.0, 1.0))
def test_sufficient_implies_necessary(seed, dpp, profile, scale):
    g = make_random_quadratic(seed, dpp, profile, real_range=(-1.0, 2.0))
    w = scale * np.random.default_rng(seed).standard_normal(g.d) * (seed % 2)
    cert = check_strict_local_ne(g, w)
    if cert.sufficient_holds:
        assert cert.necessary_holds
    if cert.strict_holds:
        assert cert.stationary


@given(seed=seeds, c=st.floats(0.01, 100.0), profile=st.sampled_from(["mixed", "symmetric"]))
def test_verdicts_invariant_to_positive_scaling(seed, c, profile):
    g = make_random_quadratic(seed, 2, profile, real_range=(-1.0, 2.0))
    h = QuadraticGame([c * q for q in g.Q], g.partition)
    a = check_strict_local_ne(g, np.zeros(g.d))
    b = check_strict_local_ne(h, np.zeros(g.d))
    assert (a.necessary_holds, a.sufficient_holds, a.strict_holds) == \
        (b.necessary_holds, b.sufficient_holds, b.strict_holds)


@given(seed=seeds, dpp=st.integers(1, 3), at_origin=st.booleans())
def test_sufficient_iff_br_fixed_point(seed, dpp, at_origin):
    g = make_random_quadratic(seed, dpp, "mixed")
    w = np.zeros(g.d) if at_origin else np.random.default_rng(seed).standard_normal(g.d)
    assert check_sufficient(g, w).sufficient_holds == br_fixed_point_check(g, w)


# -- stationary point classification ---------------------------------------------

def test_classify_stationary_points():
    assert classify_stationary_point(np.eye(3)) is StationaryKind.STRICT_LOCAL_MIN
    assert classify_stationary_point(np.diag([-1.0, 2.0, 3.0])) is StationaryKind.STRICT_SADDLE
    assert classify_stationary_point(np.diag([0.0, 1.0])) is StationaryKind.DEGENERATE


def test_classify_rejects_asymmetric():
    with pytest.raises(AsymmetricInput):
        classify_stationary_point(np.array([[1.0, 2.0], [0.0, 1.0]]))
