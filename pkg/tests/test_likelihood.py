import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from conftest import build_model, make_state, toy_games
from dpmf.likelihood import (
    LikelihoodParams,
    game_loglik,
    sample_score_pair,
    score_pair_logpdf,
)


def test_params_validation():
    with pytest.raises(ValueError):
        LikelihoodParams(0.0, 0.2)
    with pytest.raises(ValueError):
        LikelihoodParams(1.0, 1.0)
    p = LikelihoodParams(10.0, 0.4)
    assert p.log_sigma == pytest.approx(np.log(10.0))
    q = LikelihoodParams.from_transformed(p.log_sigma, p.atanh_rho)
    assert q.sigma == pytest.approx(10.0) and q.rho == pytest.approx(0.4)


def test_logpdf_standard_normal_at_mean():
    p = LikelihoodParams(1.0, 0.0)
    assert score_pair_logpdf((3.0, 4.0), (3.0, 4.0), p) == pytest.approx(
        -1.8378770664093453, rel=1e-12
    )


def test_logpdf_factorizes_when_uncorrelated(rng):
    p = LikelihoodParams(7.0, 0.0)
    for _ in range(20):
        z = rng.normal(100, 15, size=2)
        y = rng.normal(100, 15, size=2)
        expect = norm.logpdf(z[0], y[0], 7.0) + norm.logpdf(z[1], y[1], 7.0)
        assert score_pair_logpdf(tuple(z), tuple(y), p) == pytest.approx(
            expect, rel=1e-12
        )


def test_logpdf_typical_correlation_value_at_mean():
    p = LikelihoodParams(10.0, 0.4)
    assert score_pair_logpdf((0.0, 0.0), (0.0, 0.0), p) == pytest.approx(
        -6.355870558825048, rel=1e-12
    )


def test_logpdf_integrates_to_one():
    p = LikelihoodParams(9.0, 0.55)
    y = np.array([102.0, 96.0])
    n = 200
    span = 8 * p.sigma
    ax = np.linspace(y[0] - span, y[0] + span, n)
    ay = np.linspace(y[1] - span, y[1] + span, n)
    zz = np.stack(np.meshgrid(ax, ay, indexing="ij"), axis=-1).reshape(-1, 2)
    dens = np.exp(score_pair_logpdf(zz, y, p)).reshape(n, n)
    mass = np.trapezoid(np.trapezoid(dens, ay, axis=1), ax)
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_logpdf_maximized_at_mean(rng):
    p = LikelihoodParams(5.0, -0.3)
    y = (10.0, 12.0)
    peak = score_pair_logpdf(y, y, p)
    for _ in range(200):
        z = (y[0] + rng.normal(0, 10), y[1] + rng.normal(0, 10))
        assert score_pair_logpdf(z, y, p) <= peak


@settings(max_examples=100, deadline=None)
@given(
    z0=st.floats(-50, 250),
    z1=st.floats(-50, 250),
    y0=st.floats(-50, 250),
    y1=st.floats(-50, 250),
    sigma=st.floats(0.5, 30),
    rho=st.floats(-0.95, 0.95),
)
def test_logpdf_exchange_symmetry(z0, z1, y0, y1, sigma, rho):
    p = LikelihoodParams(sigma, rho)
    a = score_pair_logpdf((z0, z1), (y0, y1), p)
    b = score_pair_logpdf((z1, z0), (y1, y0), p)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


# -- sampling ---------------------------------------------------------------


def test_sample_degenerate_sigma(rng):
    p = LikelihoodParams(1e-9, 0.3)
    z = sample_score_pair((100.0, 95.0), p, rng)
    assert z[0] == pytest.approx(100.0, abs=1e-6)
    assert z[1] == pytest.approx(95.0, abs=1e-6)


def test_sample_correlation_recovered(rng):
    p = LikelihoodParams(10.0, 0.4)
    draws = np.array([sample_score_pair((0.0, 0.0), p, rng) for _ in range(100_000)])
    corr = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
    assert abs(corr - 0.4) < 0.02
    assert np.std(draws[:, 0]) == pytest.approx(10.0, rel=0.02)


def test_sample_zero_correlation_cross_cov(rng):
    p = LikelihoodParams(5.0, 0.0)
    n = 50_000
    draws = np.array([sample_score_pair((0.0, 0.0), p, rng) for _ in range(n)])
    cross = np.mean(draws[:, 0] * draws[:, 1])
    se = 25.0 / np.sqrt(n)  # var(z0 z1) = sigma^4 under independence
    assert abs(cross) < 3 * se


def test_sample_deterministic_under_seed():
    p = LikelihoodParams(3.0, 0.2)
    a = sample_score_pair((1.0, 2.0), p, np.random.default_rng(42))
    b = sample_score_pair((1.0, 2.0), p, np.random.default_rng(42))
    assert a == b


# -- game log likelihood --------------------------------------------------------


def test_game_loglik_empty_set(rng):
    games = toy_games(rng, n_teams=3, n_games=5)
    model = build_model(games, k=1)
    state = make_state(model, rng)
    assert game_loglik(model, state, game_indices=[]) == 0.0
    unobserved = build_model(games, k=1, observed=False)
    assert game_loglik(unobserved, make_state(unobserved, rng), None) == 0.0


def test_game_loglik_single_game_matches_pair_logpdf(rng):
    games = toy_games(rng, n_teams=2, n_games=1)
    model = build_model(games, k=1)
    state = make_state(model, rng)
    y = model.y_pairs(state)[0]
    expect = score_pair_logpdf(
        (games[0].home_score, games[0].away_score), tuple(y), state.likelihood
    )
    assert game_loglik(model, state) == pytest.approx(expect, rel=1e-12)


def test_game_loglik_bruteforce_sum(rng):
    games = toy_games(rng, n_teams=4, n_games=5)
    model = build_model(games, k=2)
    state = make_state(model, rng)
    y = model.y_pairs(state)
    total = 0.0
    for gi, g in enumerate(games):
        total += score_pair_logpdf(
            (g.home_score, g.away_score), tuple(y[gi]), state.likelihood
        )
    assert game_loglik(model, state) == pytest.approx(total, rel=1e-12)
