"""Game data: ingestion, rolling evaluation blocks, betting-line baseline,
and a synthetic generator that follows the model's own generative process.

CSV schema (header required, ISO-8601 dates, blank fields for missing
betting lines)::

    date,season,home_team,away_team,home_score,away_score,home_spread,over_under

Week indices are exact day arithmetic from the dataset epoch (the earliest
date unless one is given), divided by seven.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, replace

import numpy as np

from .kernels import HyperParams, KernelSpec, SeasonCalendar, chol_jitter, gram
from .likelihood import LikelihoodParams
from .model import MemberSiteIndex, MixingState, softplus

CSV_FIELDS = (
    "date",
    "season",
    "home_team",
    "away_team",
    "home_score",
    "away_score",
    "home_spread",
    "over_under",
)


@dataclass(frozen=True)
class GameRecord:
    """One observed game: two participants, two scores, optional lines."""

    date: dt.date
    season: int
    week: float
    home_team: str
    away_team: str
    home_score: float
    away_score: float
    home_spread: float | None = None
    over_under: float | None = None

    def __post_init__(self):
        if self.home_team == self.away_team:
            raise ValueError("a game needs two distinct teams")
        for s in (self.home_score, self.away_score):
            if not (np.isfinite(s) and s >= 0):
                raise ValueError(f"scores must be finite and nonnegative, got {s}")
        if self.week < 0:
            raise ValueError("week must be nonnegative")


def _parse_optional(text: str) -> float | None:
    return float(text) if text.strip() else None


def load_games(path, epoch: dt.date | None = None) -> list[GameRecord]:
    """Read, validate and sort a games CSV.

    Raises ValueError with the offending line number on malformed rows,
    invariant violations, or duplicate (date, teams) triples.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
            raise ValueError(
                f"{path}: expected header {','.join(CSV_FIELDS)}, "
                f"got {reader.fieldnames}"
            )
        raw = []
        for lineno, row in enumerate(reader, start=2):
            try:
                raw.append(
                    (
                        dt.date.fromisoformat(row["date"]),
                        int(row["season"]),
                        row["home_team"].strip(),
                        row["away_team"].strip(),
                        float(row["home_score"]),
                        float(row["away_score"]),
                        _parse_optional(row["home_spread"]),
                        _parse_optional(row["over_under"]),
                        lineno,
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path} line {lineno}: malformed row ({exc})")
    if not raw:
        return []
    if epoch is None:
        epoch = min(r[0] for r in raw)

    seen = set()
    games = []
    for date, season, home, away, hs, as_, spread, ou, lineno in raw:
        key = (date, home, away)
        if key in seen:
            raise ValueError(f"{path} line {lineno}: duplicate game {key}")
        seen.add(key)
        try:
            games.append(
                GameRecord(
                    date=date,
                    season=season,
                    week=(date - epoch).days / 7.0,
                    home_team=home,
                    away_team=away,
                    home_score=hs,
                    away_score=as_,
                    home_spread=spread,
                    over_under=ou,
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path} line {lineno}: {exc}")
    games.sort(key=lambda g: (g.date, g.home_team, g.away_team))
    return games


def save_games(games: list[GameRecord], path) -> None:
    """Write games in the documented CSV schema (round-trips exactly)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_FIELDS) + "\n")
        for g in games:
            fh.write(
                ",".join(
                    [
                        g.date.isoformat(),
                        str(g.season),
                        g.home_team,
                        g.away_team,
                        repr(g.home_score),
                        repr(g.away_score),
                        "" if g.home_spread is None else repr(g.home_spread),
                        "" if g.over_under is None else repr(g.over_under),
                    ]
                )
                + "\n"
            )


def build_calendar(
    games: list[GameRecord], true_gap_weeks: float = 28.0
) -> SeasonCalendar:
    """Season boundaries implied by the data's per-season week ranges."""
    seasons = sorted({g.season for g in games})
    spans = {
        s: (
            min(g.week for g in games if g.season == s),
            max(g.week for g in games if g.season == s),
        )
        for s in seasons
    }
    boundaries = []
    for a, b in zip(seasons, seasons[1:]):
        boundaries.append((spans[a][1], spans[b][0]))
    return SeasonCalendar(tuple(boundaries), true_gap_weeks=true_gap_weeks)


@dataclass(frozen=True)
class RollingBlock:
    """One censored prediction task: a test window and its training past."""

    season: int
    block_start_week: float
    block_end_week: float
    train_games: tuple[GameRecord, ...]
    test_games: tuple[GameRecord, ...]

    def __post_init__(self):
        if any(g.week >= self.block_start_week for g in self.train_games):
            raise ValueError("training game at or after block start")
        for g in self.test_games:
            if not self.block_start_week <= g.week < self.block_end_week:
                raise ValueError("test game outside the block span")


def make_rolling_blocks(
    games: list[GameRecord],
    block_weeks: float = 4.0,
    window_seasons: int = 3,
) -> list[RollingBlock]:
    """Split each season into contiguous test blocks with censored training.

    Training sets contain every strictly earlier game, restricted to the
    block's season and the ``window_seasons - 1`` seasons before it.  The
    final block of a season may be shorter than ``block_weeks``.
    """
    weeks = [g.week for g in games]
    if any(b < a for a, b in zip(weeks, weeks[1:])):
        games = sorted(games, key=lambda g: (g.week, g.home_team, g.away_team))
    blocks = []
    for season in sorted({g.season for g in games}):
        in_season = [g for g in games if g.season == season]
        lo = min(g.week for g in in_season)
        hi = max(g.week for g in in_season)
        start = lo
        while start <= hi:
            end = start + block_weeks
            test = tuple(g for g in in_season if start <= g.week < end)
            train = tuple(
                g
                for g in games
                if g.week < start and g.season > season - window_seasons
            )
            if test:
                blocks.append(
                    RollingBlock(
                        season=season,
                        block_start_week=start,
                        block_end_week=end,
                        train_games=train,
                        test_games=test,
                    )
                )
            start = end
    return blocks


def expert_prediction(
    home_spread: float | None, over_under: float | None
) -> tuple[float, float] | None:
    """Score pair implied by the betting lines, as (away, home).

    Solves away + home = over/under and away - home = home spread; returns
    None (skip signal) when either line is missing.
    """
    if home_spread is None or over_under is None:
        return None
    away = (over_under + home_spread) / 2.0
    home = (over_under - home_spread) / 2.0
    return (away, home)


# -- synthetic data --------------------------------------------------------


@dataclass(frozen=True)
class SynthTruth:
    """Hidden state behind a synthetic dataset, for recovery tests."""

    index: MemberSiteIndex
    u: np.ndarray  # (2G, K) mixed offense vectors at every site
    v_raw: np.ndarray  # (2G, K) pre-softplus defense vectors
    y_pairs: np.ndarray  # (G, 2) latent score means
    calendar: SeasonCalendar

    def to_dict(self) -> dict:
        teams = {}
        for mp, name in enumerate(self.index.members):
            rows = self.index.rows[mp]
            sites = self.index.sites[mp]
            teams[name] = {
                "weeks": [s.raw_week for s in sites],
                "is_home": [s.is_home for s in sites],
                "u": self.u[rows].tolist(),
                "v_raw": self.v_raw[rows].tolist(),
            }
        return {"teams": teams}


def round_robin_schedule(
    n_teams: int,
    n_seasons: int,
    season_weeks: float,
    gap_weeks: float,
    rng: np.random.Generator,
    epoch: dt.date = dt.date(2002, 10, 1),
) -> list[tuple[dt.date, int, float, str, str]]:
    """Game slots: each ordered pair meets once per season (one home, one
    away meeting per unordered pair), spread evenly over the season's days."""
    teams = [f"T{i:02d}" for i in range(n_teams)]
    pairs = [(h, a) for h in teams for a in teams if h != a]
    slots = []
    season_days = int(round(season_weeks * 7))
    stride_days = int(round((season_weeks + gap_weeks) * 7))
    for s in range(n_seasons):
        order = list(pairs)
        rng.shuffle(order)
        start_day = s * stride_days
        for i, (home, away) in enumerate(order):
            day = start_day + (i * season_days) // len(order)
            slots.append(
                (epoch + dt.timedelta(days=day), s + 1, day / 7.0, home, away)
            )
    slots.sort(key=lambda t: (t[0], t[3], t[4]))
    return slots


def synth_generate(
    n_teams: int,
    n_seasons: int,
    season_weeks: float,
    gap_weeks: float,
    kernel_spec: KernelSpec,
    hypers_u: list[HyperParams],
    hypers_v: list[HyperParams],
    mixing_u: MixingState,
    mixing_v: MixingState,
    lik: LikelihoodParams,
    seed: int,
    epoch: dt.date = dt.date(2002, 10, 1),
) -> tuple[list[GameRecord], SynthTruth]:
    """Draw a dataset from the generative process.

    Latent functions are sampled from their GPs at a round-robin schedule's
    sites, mixed by the inter-feature Cholesky factors, shifted by the
    means, softplussed on the defense side, and the score pairs drawn from
    the bivariate noise model.  Same seed, same dataset, bit for bit.
    """
    k = mixing_u.k
    if len(hypers_u) != k or len(hypers_v) != k:
        raise ValueError("need one hyperparameter set per feature per side")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    slots = round_robin_schedule(
        n_teams, n_seasons, season_weeks, gap_weeks, rng, epoch
    )
    cal = SeasonCalendar(
        tuple(
            (
                max(w for _, s, w, _, _ in slots if s == i),
                min(w for _, s, w, _, _ in slots if s == i + 1),
            )
            for i in range(1, n_seasons)
        ),
        true_gap_weeks=gap_weeks if n_seasons > 1 else 28.0,
    )

    # Placeholder records to build the site index; scores filled below.
    shell = [
        GameRecord(date=d, season=s, week=w, home_team=h, away_team=a,
                   home_score=0.0, away_score=0.0)
        for d, s, w, h, a in slots
    ]
    index = MemberSiteIndex(shell)

    fu = np.empty((index.n_rows, k))
    fv = np.empty((index.n_rows, k))
    for side, hypers, out in (("u", hypers_u, fu), ("v", hypers_v, fv)):
        for kf in range(k):
            for mp in range(index.n_members):
                L, _ = chol_jitter(
                    gram(index.sites[mp], kernel_spec, hypers[kf], cal)
                )
                out[index.rows[mp], kf] = L @ rng.standard_normal(len(L))

    u = fu @ mixing_u.chol.T + mixing_u.mean
    v_raw = fv @ mixing_v.chol.T + mixing_v.mean
    psi_v = softplus(v_raw)
    y_home = np.einsum("ij,ij->i", u[index.home_rows], psi_v[index.away_rows])
    y_away = np.einsum("ij,ij->i", u[index.away_rows], psi_v[index.home_rows])
    y = np.stack([y_home, y_away], axis=1)
    z = y + rng.standard_normal(y.shape) @ lik.chol().T
    z = np.maximum(z, 0.0)

    games = [
        replace(g, home_score=float(z[i, 0]), away_score=float(z[i, 1]))
        for i, g in enumerate(shell)
    ]
    truth = SynthTruth(index=index, u=u, v_raw=v_raw, y_pairs=y, calendar=cal)
    return games, truth
