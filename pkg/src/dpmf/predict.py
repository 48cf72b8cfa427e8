"""Prediction at unseen sites and evaluation metrics.

A retained posterior sample predicts a test game by conditioning each
member's whitened per-feature function on its training values (standard GP
conditional with unit prior variance), drawing the test-site value, mixing
across features, and forming the latent score pair.  Over many retained
samples this yields an equal-weight mixture of bivariate Gaussians, whose
log density is the Rao-Blackwellized predictive estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr

from .data import GameRecord, expert_prediction
from .kernels import (
    HyperParams,
    KernelSpec,
    SeasonCalendar,
    SideInfo,
    chol_jitter,
    cross_gram,
    gram,
)
from .likelihood import LikelihoodParams
from .model import DPMFModel, ModelState, game_sites, softplus


def gp_conditional(
    train_sites: list[SideInfo],
    f_train: np.ndarray,
    test_site: SideInfo,
    spec: KernelSpec,
    hp: HyperParams,
    cal: SeasonCalendar,
) -> tuple[float, float]:
    """Conditional of a zero-mean unit-variance GP at one unseen site.

    mean = k*^T K^-1 f,  var = 1 - k*^T K^-1 k*  (clamped to [0, 1]).
    Training values are treated as noiseless.
    """
    K = gram(train_sites, spec, hp, cal)
    L, _ = chol_jitter(K)
    kstar = cross_gram(train_sites, [test_site], spec, hp, cal)[:, 0]
    a = solve_triangular(L, kstar, lower=True)
    b = solve_triangular(L, np.asarray(f_train, dtype=float), lower=True)
    mean = float(a @ b)
    var = float(np.clip(1.0 - a @ a, 0.0, 1.0))
    return mean, var


class BlockPredictor:
    """Per-block machinery for drawing predictive latent means.

    Precomputes, per (side, feature, member), the conditional weight matrix
    W = K^-1 K* and variances for that member's test sites; a retained
    sample then needs only a dot product per site.  Weights are cached by
    the hyperparameters that built them, so frozen-hyperparameter runs pay
    the solve once per block.
    """

    def __init__(self, model: DPMFModel, test_games: Sequence[GameRecord]):
        self.model = model
        self.test_games = list(test_games)
        self.teams: list[str] = []
        sites_by_team: dict[str, list[SideInfo]] = {}
        # (game, role) -> (team, position in the team's test-site list)
        self.slots: list[list[tuple[str, int]]] = []
        for g in self.test_games:
            home_site, away_site = game_sites(g)
            row = []
            for team, site in ((g.home_team, home_site), (g.away_team, away_site)):
                lst = sites_by_team.setdefault(team, [])
                row.append((team, len(lst)))
                lst.append(site)
            self.slots.append(row)
        self.teams = sorted(sites_by_team)
        self.sites_by_team = sites_by_team
        self._cache: dict[tuple[str, int], tuple[HyperParams, dict]] = {}

    def _weights(self, side: str, kf: int, hp: HyperParams) -> dict:
        key = (side, kf)
        hit = self._cache.get(key)
        if hit is not None and hit[0] == hp:
            return hit[1]
        model = self.model
        chols = model.member_chols(side, kf, hp)
        out: dict[str, tuple[np.ndarray, np.ndarray] | None] = {}
        for team in self.teams:
            mp = model.index.member_pos.get(team)
            if mp is None or len(model.index.sites[mp]) == 0:
                out[team] = None  # no training sites: prior mean 0, var 1
                continue
            kstar = cross_gram(
                model.index.sites[mp],
                self.sites_by_team[team],
                model.kernel_spec,
                hp,
                model.calendar,
            )
            L = chols[mp]
            A = solve_triangular(L, kstar, lower=True)
            W = solve_triangular(L.T, A, lower=False)
            var = np.clip(1.0 - np.einsum("ij,ij->j", kstar, W), 0.0, 1.0)
            out[team] = (W, var)
        self._cache[key] = (hp, out)
        return out

    def draw_means(
        self,
        state: ModelState,
        fu: np.ndarray,
        fv: np.ndarray,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Latent mean pairs at the test games for one retained sample."""
        model = self.model
        k = model.k
        fstar: dict[str, dict[str, np.ndarray]] = {
            side: {t: np.empty((len(self.sites_by_team[t]), k)) for t in self.teams}
            for side in ("u", "v")
        }
        for side, F in (("u", fu), ("v", fv)):
            for kf in range(k):
                hp = state.hypers(side)[kf]
                weights = self._weights(side, kf, hp)
                for team in self.teams:
                    n_test = len(self.sites_by_team[team])
                    w = weights[team]
                    if w is None:
                        mean = np.zeros(n_test)
                        sd = np.ones(n_test)
                    else:
                        W, var = w
                        mp = model.index.member_pos[team]
                        mean = W.T @ F[model.index.rows[mp], kf]
                        sd = np.sqrt(var)
                    fstar[side][team][:, kf] = mean + sd * rng.standard_normal(n_test)

        u_star = {
            t: fstar["u"][t] @ state.mixing_u.chol.T + state.mixing_u.mean
            for t in self.teams
        }
        psi_v_star = {
            t: softplus(fstar["v"][t] @ state.mixing_v.chol.T + state.mixing_v.mean)
            for t in self.teams
        }
        means = np.empty((len(self.test_games), 2))
        for t, ((ht, hi), (at, ai)) in enumerate(self.slots):
            means[t, 0] = u_star[ht][hi] @ psi_v_star[at][ai]
            means[t, 1] = u_star[at][ai] @ psi_v_star[ht][hi]
        return means


def draw_predictive_state(
    model: DPMFModel,
    state: ModelState,
    test_games: Sequence[GameRecord],
    rng: np.random.Generator,
    fu: np.ndarray | None = None,
    fv: np.ndarray | None = None,
) -> np.ndarray:
    """Latent mean pairs at test games for one state (throwaway predictor)."""
    if fu is None:
        fu = model.unwhitened(state, "u")
    if fv is None:
        fv = model.unwhitened(state, "v")
    return BlockPredictor(model, test_games).draw_means(state, fu, fv, rng)


@dataclass
class PredictiveMixture:
    """Equal-weight bivariate Gaussian mixture over one game's score pair."""

    means: np.ndarray  # (S, 2)
    sigmas: np.ndarray  # (S,)
    rhos: np.ndarray  # (S,)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.sigmas = np.atleast_1d(np.asarray(self.sigmas, dtype=float))
        self.rhos = np.atleast_1d(np.asarray(self.rhos, dtype=float))
        if not (len(self.means) == len(self.sigmas) == len(self.rhos) >= 1):
            raise ValueError("mixture needs at least one aligned component")
        if np.any(self.sigmas <= 0) or np.any(np.abs(self.rhos) >= 1):
            raise ValueError("component noise parameters out of range")

    @property
    def n_components(self) -> int:
        return len(self.means)

    @property
    def components(self) -> list[tuple[tuple[float, float], LikelihoodParams]]:
        return [
            ((float(m[0]), float(m[1])), LikelihoodParams(float(s), float(r)))
            for m, s, r in zip(self.means, self.sigmas, self.rhos)
        ]

    @staticmethod
    def from_bank(bank, game_index: int) -> "PredictiveMixture":
        comps = bank.components
        return PredictiveMixture(
            means=np.array([c.means[game_index] for c in comps]),
            sigmas=np.array([c.likelihood.sigma for c in comps]),
            rhos=np.array([c.likelihood.rho for c in comps]),
        )

    def mean_pair(self) -> np.ndarray:
        return self.means.mean(axis=0)

    def _component_logpdfs(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        d = z - self.means
        s2 = self.sigmas**2
        one_m_r2 = 1.0 - self.rhos**2
        quad = (
            d[:, 0] ** 2 - 2.0 * self.rhos * d[:, 0] * d[:, 1] + d[:, 1] ** 2
        ) / (s2 * one_m_r2)
        return -np.log(2 * np.pi) - np.log(s2) - 0.5 * np.log(one_m_r2) - 0.5 * quad

    def home_win_probability(self) -> float:
        """P(home score > away score): each component's score difference is
        Gaussian with mean y_h - y_a and variance 2 sigma^2 (1 - rho)."""
        diff_sd = self.sigmas * np.sqrt(2.0 * (1.0 - self.rhos))
        return float(np.mean(ndtr((self.means[:, 0] - self.means[:, 1]) / diff_sd)))


def mixture_logpdf(mix: PredictiveMixture, z) -> float:
    """Log of the equal-weight mixture density, max-shift stabilized."""
    logps = mix._component_logpdfs(z)
    m = np.max(logps)
    return float(m + np.log(np.mean(np.exp(logps - m))))


@dataclass
class BlockMetrics:
    """Prediction quality over one set of games, stored as pooled sums.

    RMSE pools both score entries of every game (2n terms).  Expert fields
    cover only games that carry both betting lines.
    """

    season: int | str
    block_start_week: float
    block_end_week: float
    n_games: int = 0
    sum_log_prob: float = 0.0
    n_wrong: int = 0
    sse: float = 0.0
    n_expert: int = 0
    n_expert_wrong: int = 0
    expert_sse: float = 0.0

    @property
    def mean_log_prob(self) -> float:
        return self.sum_log_prob / self.n_games if self.n_games else float("nan")

    @property
    def winner_error(self) -> float:
        return self.n_wrong / self.n_games if self.n_games else float("nan")

    @property
    def rmse(self) -> float:
        return float(np.sqrt(self.sse / (2 * self.n_games))) if self.n_games else float("nan")

    @property
    def expert_winner_error(self) -> float:
        return self.n_expert_wrong / self.n_expert if self.n_expert else float("nan")

    @property
    def expert_rmse(self) -> float:
        return (
            float(np.sqrt(self.expert_sse / (2 * self.n_expert)))
            if self.n_expert
            else float("nan")
        )


def compute_metrics(
    mixes: Sequence[PredictiveMixture],
    games: Sequence[GameRecord],
    season: int | str = "all",
    block_start_week: float = float("nan"),
    block_end_week: float = float("nan"),
) -> BlockMetrics:
    """Score a block: mean predictive log probability, winner error, RMSE,
    and the betting-line baseline where lines exist."""
    if len(mixes) != len(games):
        raise ValueError("one mixture per game is required")
    row = BlockMetrics(season, block_start_week, block_end_week)
    for mix, g in zip(mixes, games):
        z = (g.home_score, g.away_score)
        row.n_games += 1
        row.sum_log_prob += mixture_logpdf(mix, z)
        home_won = g.home_score > g.away_score
        if (mix.home_win_probability() > 0.5) != home_won:
            row.n_wrong += 1
        mean = mix.mean_pair()
        row.sse += float((mean[0] - z[0]) ** 2 + (mean[1] - z[1]) ** 2)

        expert = expert_prediction(g.home_spread, g.over_under)
        if expert is not None:
            away_pred, home_pred = expert
            row.n_expert += 1
            if (home_pred > away_pred) != home_won:
                row.n_expert_wrong += 1
            row.expert_sse += float(
                (home_pred - g.home_score) ** 2 + (away_pred - g.away_score) ** 2
            )
    return row


def aggregate_metrics(
    rows: Sequence[BlockMetrics], season: int | str = "all"
) -> BlockMetrics:
    """Pool rows into one row (game-weighted, not block-averaged)."""
    out = BlockMetrics(season, float("nan"), float("nan"))
    for r in rows:
        out.n_games += r.n_games
        out.sum_log_prob += r.sum_log_prob
        out.n_wrong += r.n_wrong
        out.sse += r.sse
        out.n_expert += r.n_expert
        out.n_expert_wrong += r.n_expert_wrong
        out.expert_sse += r.expert_sse
    return out


def density_grid(
    mix: PredictiveMixture, lo: float, hi: float, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mixture density on an n x n grid over [lo, hi]^2 of (home, away).

    Returns (grid axis, density matrix with home varying along rows).
    """
    axis = np.linspace(lo, hi, n)
    hh, aa = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([hh.ravel(), aa.ravel()], axis=1)
    dens = np.zeros(len(pts))
    for (mean, p) in mix.components:
        d0 = pts[:, 0] - mean[0]
        d1 = pts[:, 1] - mean[1]
        s2 = p.sigma**2
        omr = 1.0 - p.rho**2
        quad = (d0 * d0 - 2 * p.rho * d0 * d1 + d1 * d1) / (s2 * omr)
        dens += np.exp(-0.5 * quad) / (2 * np.pi * s2 * np.sqrt(omr))
    dens /= mix.n_components
    return axis, dens.reshape(n, n)
