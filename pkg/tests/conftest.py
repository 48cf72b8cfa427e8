import datetime as dt

import numpy as np
import pytest

from dpmf.data import GameRecord
from dpmf.kernels import HyperParams, KernelSpec, SeasonCalendar
from dpmf.likelihood import LikelihoodParams
from dpmf.model import DPMFModel, MixingState, ModelState, WhitenedFunctions

EPOCH = dt.date(2002, 10, 1)
NO_SEASONS = SeasonCalendar((), true_gap_weeks=28.0)


def make_game(day, home, away, home_score=100.0, away_score=95.0, season=1,
              home_spread=None, over_under=None):
    return GameRecord(
        date=EPOCH + dt.timedelta(days=day),
        season=season,
        week=day / 7.0,
        home_team=home,
        away_team=away,
        home_score=home_score,
        away_score=away_score,
        home_spread=home_spread,
        over_under=over_under,
    )


def toy_games(rng, n_teams=4, n_games=12, span_days=80, score_scale=100.0):
    teams = [f"T{i}" for i in range(n_teams)]
    days = np.sort(rng.integers(0, span_days, size=n_games))
    games = []
    for i, day in enumerate(days):
        h, a = rng.choice(n_teams, size=2, replace=False)
        games.append(
            make_game(
                int(day),
                teams[h],
                teams[a],
                home_score=float(score_scale + 10 * rng.standard_normal()),
                away_score=float(score_scale + 10 * rng.standard_normal()),
            )
        )
    games.sort(key=lambda g: (g.date, g.home_team, g.away_team))
    return games


def make_state(model, rng, nu_sd=1.0, mixing_u=None, mixing_v=None,
               hypers=None, lik=None):
    k = model.k
    idx = model.index

    def wf():
        return WhitenedFunctions(
            [[nu_sd * rng.standard_normal(len(s)) for s in idx.sites]
             for _ in range(k)]
        )

    if hypers is None:
        hypers = HyperParams(tuple(3.0 for _ in range(model.kernel_spec.n_scales)), 28.0)
    return ModelState(
        whitened_u=wf(),
        whitened_v=wf(),
        mixing_u=mixing_u if mixing_u is not None else MixingState.identity(k),
        mixing_v=mixing_v if mixing_v is not None else MixingState.identity(k),
        hypers_u=[hypers] * k,
        hypers_v=[hypers] * k,
        likelihood=lik if lik is not None else LikelihoodParams(10.0, 0.4),
        members=idx.members,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def build_model(games, k=1, dims=(0, 1), cal=NO_SEASONS, observed=True):
    return DPMFModel(games, k, KernelSpec.ard(dims), cal, observed=observed)
