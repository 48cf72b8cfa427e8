"""Latent state of the factorization model.

Each participant (member) owns K offense functions and K defense functions
of the side information, represented only at the sites where that member
actually played.  Functions are stored *whitened*: nu = L^-1 f, where L is
the Cholesky factor of the member's kernel Gram matrix, so the prior on the
stored vectors is a standard normal for every hyperparameter setting.
Unwhitened per-feature values are mixed across features by the Cholesky
factor of an inter-feature covariance, shifted by a mean vector, and the
defense side is pushed through a softplus so the product

    Y[scorer, conceder](x) = u_scorer(x) . softplus(v_conceder(x))

is free of sign-flip ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import HyperParams, KernelSpec, SeasonCalendar, SideInfo, chol_jitter, gram
from .likelihood import LikelihoodParams

if TYPE_CHECKING:  # pragma: no cover
    from .data import GameRecord

#: Prior standard deviation of the feature mean vectors (centered at the
#: data scale so that the prior-mean product matches the average score).
MU_PRIOR_SD = 5.0
#: Priors on the Cholesky parameterization of the inter-feature covariances.
SIGMA_CHOL_LOGDIAG_SD = 1.5
SIGMA_CHOL_OFFDIAG_SD = 1.0
#: Fallback score scale when a model is built without observations.
DEFAULT_SCORE_CENTER = 100.0


def softplus(r):
    """Overflow-safe ln(1 + e^r); strictly positive and increasing."""
    return np.logaddexp(0.0, r)


def softplus_inv(y):
    """Inverse of softplus: ln(e^y - 1), stable for large y."""
    y = np.asarray(y, dtype=float)
    small = y <= 30.0
    out = np.where(
        small,
        np.log(np.expm1(np.where(small, y, 1.0))),
        y + np.log1p(-np.exp(-np.minimum(y, 700.0))),
    )
    return out if out.ndim else float(out)


def unwhiten(nu: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Map a whitened vector back to raw GP values: f = L nu.

    Constant means are added after feature mixing, not here.
    """
    return chol @ nu


def whiten(f: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unwhiten` via a triangular solve."""
    return solve_triangular(chol, f, lower=True)


def game_sites(game) -> tuple[SideInfo, SideInfo]:
    """Side information carried by the two participants of one game."""
    return (
        SideInfo(raw_week=game.week, is_home=1),
        SideInfo(raw_week=game.week, is_home=0),
    )


class MemberSiteIndex:
    """Where each member's latent functions are represented.

    Every game contributes exactly one site to each of its two participants,
    so with G games there are 2G sites overall.  Each member's sites are kept
    in game order (games must arrive sorted by week), which makes a member's
    Gram Cholesky lower-triangular in time and lets training sets grow by
    appending whitened entries.
    """

    def __init__(self, games: Sequence["GameRecord"]):
        weeks = [g.week for g in games]
        if any(b < a for a, b in zip(weeks, weeks[1:])):
            raise ValueError("games must be sorted by week")
        members = sorted({t for g in games for t in (g.home_team, g.away_team)})
        self.members: tuple[str, ...] = tuple(members)
        self.member_pos = {m: i for i, m in enumerate(members)}
        self.n_games = len(games)

        counts = [0] * len(members)
        for g in games:
            counts[self.member_pos[g.home_team]] += 1
            counts[self.member_pos[g.away_team]] += 1
        offsets = np.concatenate([[0], np.cumsum(counts)])
        self.n_rows = int(offsets[-1])

        self.sites: list[list[SideInfo]] = [[] for _ in members]
        self.rows: list[list[int]] = [[] for _ in members]
        games_of: list[list[int]] = [[] for _ in members]
        self.home_rows = np.empty(len(games), dtype=int)
        self.away_rows = np.empty(len(games), dtype=int)
        fill = list(offsets[:-1])
        for gi, g in enumerate(games):
            home_site, away_site = game_sites(g)
            for team, site, out in (
                (g.home_team, home_site, self.home_rows),
                (g.away_team, away_site, self.away_rows),
            ):
                mp = self.member_pos[team]
                self.sites[mp].append(site)
                self.rows[mp].append(fill[mp])
                games_of[mp].append(gi)
                out[gi] = fill[mp]
                fill[mp] += 1
        self.rows = [np.array(r, dtype=int) for r in self.rows]
        self.games_of = [np.array(g, dtype=int) for g in games_of]

    @property
    def n_members(self) -> int:
        return len(self.members)

    def sites_of(self, member: str) -> list[SideInfo]:
        return self.sites[self.member_pos[member]]


@dataclass
class MixingState:
    """Inter-feature covariance (stored as its Cholesky factor) and mean.

    The Cholesky factor is the primal representation: the covariance is
    always exactly chol @ chol.T, and inference moves the factor's entries
    (log scale on the diagonal, linear off the diagonal).
    """

    chol: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        k = len(self.mean)
        if self.chol.shape != (k, k):
            raise ValueError("mixing factor and mean sizes disagree")
        if np.any(np.diag(self.chol) <= 0):
            raise ValueError("mixing factor needs a positive diagonal")
        if np.any(np.triu(self.chol, 1) != 0):
            raise ValueError("mixing factor must be lower triangular")

    @property
    def k(self) -> int:
        return len(self.mean)

    @property
    def sigma(self) -> np.ndarray:
        return self.chol @ self.chol.T

    @staticmethod
    def identity(k: int) -> "MixingState":
        return MixingState(chol=np.eye(k), mean=np.zeros(k))

    # Flat parameterization used by the samplers: K log-diagonal entries
    # followed by the strict lower triangle in row-major order.
    @property
    def n_chol_params(self) -> int:
        return self.k * (self.k + 1) // 2

    def _chol_coord(self, i: int) -> tuple[int, int, bool]:
        if i < self.k:
            return i, i, True
        i -= self.k
        for r in range(1, self.k):
            if i < r:
                return r, i, False
            i -= r
        raise IndexError("mixing parameter index out of range")

    def get_chol_param(self, i: int) -> float:
        r, c, is_diag = self._chol_coord(i)
        v = self.chol[r, c]
        return float(np.log(v)) if is_diag else float(v)

    def set_chol_param(self, i: int, value: float) -> None:
        r, c, is_diag = self._chol_coord(i)
        self.chol[r, c] = np.exp(value) if is_diag else value

    def clone(self) -> "MixingState":
        return MixingState(chol=self.chol.copy(), mean=self.mean.copy())


@dataclass
class WhitenedFunctions:
    """Whitened per-feature, per-member function values: nu[feature][member]."""

    nu: list[list[np.ndarray]]

    def clone(self) -> "WhitenedFunctions":
        return WhitenedFunctions([[v.copy() for v in row] for row in self.nu])

    def all_values(self) -> np.ndarray:
        vs = [v for row in self.nu for v in row]
        return np.concatenate(vs) if vs else np.empty(0)


@dataclass
class ModelState:
    """Everything the Markov chain moves.

    Whitened function values for both sides, the two mixing states, the 2K
    kernel hyperparameter sets, and the score-noise parameters.  States are
    plain values: clone them to branch a chain.
    """

    whitened_u: WhitenedFunctions
    whitened_v: WhitenedFunctions
    mixing_u: MixingState
    mixing_v: MixingState
    hypers_u: list[HyperParams]
    hypers_v: list[HyperParams]
    likelihood: LikelihoodParams
    members: tuple[str, ...] = ()
    rng_seed: int = 0

    @property
    def k(self) -> int:
        return self.mixing_u.k

    def hypers(self, side: str) -> list[HyperParams]:
        return self.hypers_u if side == "u" else self.hypers_v

    def whitened(self, side: str) -> WhitenedFunctions:
        return self.whitened_u if side == "u" else self.whitened_v

    def mixing(self, side: str) -> MixingState:
        return self.mixing_u if side == "u" else self.mixing_v

    def clone(self) -> "ModelState":
        return ModelState(
            whitened_u=self.whitened_u.clone(),
            whitened_v=self.whitened_v.clone(),
            mixing_u=self.mixing_u.clone(),
            mixing_v=self.mixing_v.clone(),
            hypers_u=list(self.hypers_u),
            hypers_v=list(self.hypers_v),
            likelihood=self.likelihood,
            members=self.members,
            rng_seed=self.rng_seed,
        )


class DPMFModel:
    """Model context: site structure, kernel choice, and training scores.

    Holds everything that is fixed while a chain runs, including a cache of
    per-member Gram Cholesky factors keyed by the hyperparameters that
    produced them.  All methods are read-only on the :class:`ModelState`
    they are given.
    """

    def __init__(
        self,
        games: Sequence["GameRecord"],
        k: int,
        kernel_spec: KernelSpec,
        calendar: SeasonCalendar,
        observed: bool = True,
        score_center: float | None = None,
    ):
        if k < 1:
            raise ValueError("need at least one latent feature")
        self.games = list(games)
        self.k = k
        self.kernel_spec = kernel_spec
        self.calendar = calendar
        self.index = MemberSiteIndex(self.games)
        self.observed = bool(observed) and len(self.games) > 0

        self.scores = np.array(
            [[g.home_score, g.away_score] for g in self.games]
        ).reshape(len(self.games), 2)
        if score_center is None:
            score_center = (
                float(np.mean(self.scores)) if self.observed else DEFAULT_SCORE_CENTER
            )
        self.score_center = score_center

        idx = self.index
        self.member_opp_rows = []
        self._member_is_home = []
        for mp in range(idx.n_members):
            gs = idx.games_of[mp]
            is_home = idx.home_rows[gs] == idx.rows[mp]
            self._member_is_home.append(is_home)
            self.member_opp_rows.append(
                np.where(is_home, idx.away_rows[gs], idx.home_rows[gs])
            )
        self._split_scores()
        self._chol_cache: dict[tuple[str, int], tuple[HyperParams, list]] = {}

    def _split_scores(self) -> None:
        idx = self.index
        self.member_scored = []
        self.member_conceded = []
        for mp in range(idx.n_members):
            gs = idx.games_of[mp]
            is_home = self._member_is_home[mp]
            self.member_scored.append(
                np.where(is_home, self.scores[gs, 0], self.scores[gs, 1])
            )
            self.member_conceded.append(
                np.where(is_home, self.scores[gs, 1], self.scores[gs, 0])
            )

    def set_scores(self, z: np.ndarray) -> None:
        """Swap in a new (G, 2) score matrix (joint-distribution testing)."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.index.n_games, 2):
            raise ValueError("score matrix shape does not match the games")
        self.scores = z.copy()
        self._split_scores()

    # -- prior centers ----------------------------------------------------

    def mu_centers(self) -> tuple[float, float]:
        """Prior centers for the two mean vectors.

        Chosen so the prior-mean product K * c_u * softplus(c_v) equals the
        average observed score.
        """
        c = np.sqrt(self.score_center / self.k)
        return float(c), float(softplus_inv(c))

    def empirical_score_sd(self) -> float:
        if not self.observed:
            return 10.0
        return float(np.std(self.scores))

    # -- latent algebra ---------------------------------------------------

    def member_chols(self, side: str, feature: int, hp: HyperParams) -> list:
        """Per-member Gram Cholesky factors for one hyperparameter set."""
        key = (side, feature)
        cached = self._chol_cache.get(key)
        if cached is not None and cached[0] == hp:
            return cached[1]
        ls = [
            chol_jitter(gram(sites, self.kernel_spec, hp, self.calendar))[0]
            for sites in self.index.sites
        ]
        self._chol_cache[key] = (hp, ls)
        return ls

    def unwhitened(self, state: ModelState, side: str) -> np.ndarray:
        """Raw GP values at every site, one column per feature: (2G, K)."""
        idx = self.index
        out = np.empty((idx.n_rows, self.k))
        wf = state.whitened(side)
        for kf in range(self.k):
            ls = self.member_chols(side, kf, state.hypers(side)[kf])
            for mp in range(idx.n_members):
                out[idx.rows[mp], kf] = ls[mp] @ wf.nu[kf][mp]
        return out

    def latent_site_values(self, state: ModelState) -> tuple[np.ndarray, np.ndarray]:
        """Mixed per-site latent vectors (U, V_raw), each (2G, K).

        V_raw is pre-softplus; apply :func:`softplus` before forming Y.
        """
        fu = self.unwhitened(state, "u")
        fv = self.unwhitened(state, "v")
        u = fu @ state.mixing_u.chol.T + state.mixing_u.mean
        v = fv @ state.mixing_v.chol.T + state.mixing_v.mean
        return u, v

    def y_pairs(self, state: ModelState) -> np.ndarray:
        """Latent score means per game: column 0 home points, 1 away points."""
        u, v_raw = self.latent_site_values(state)
        return self.y_pairs_from_sites(u, softplus(v_raw))

    def y_pairs_from_sites(self, u: np.ndarray, psi_v: np.ndarray) -> np.ndarray:
        idx = self.index
        y_home = np.einsum("ij,ij->i", u[idx.home_rows], psi_v[idx.away_rows])
        y_away = np.einsum("ij,ij->i", u[idx.away_rows], psi_v[idx.home_rows])
        return np.stack([y_home, y_away], axis=1)

    def y_value(self, state: ModelState, game_index: int, direction: str) -> float:
        """One entry of the latent score matrix for one game.

        ``direction="home"`` gives points scored by the home team (its
        offense against the away defense); ``"away"`` the reverse.
        """
        if not 0 <= game_index < self.index.n_games:
            raise IndexError(f"unknown game {game_index}")
        if direction not in ("home", "away"):
            raise ValueError("direction must be 'home' or 'away'")
        pair = self.y_pairs(state)[game_index]
        return float(pair[0] if direction == "home" else pair[1])
