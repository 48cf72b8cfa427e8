"""Correlation functions over game side information.

Latent feature functions get their smoothness from correlation kernels over
the side-information space (game week, home/away indicator, optional extra
coordinates).  Everything here is a *correlation* function: unit marginal
variance, value 1 at zero distance.  Amplitudes are handled elsewhere by the
inter-feature mixing matrices.

The one nonstationary ingredient is the season-gap time warp: the off-season
is compressed to an effective number of weeks (a hyperparameter) before the
stationary kernels see the time coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


#: Diagonal jitter levels tried, in order, when a Gram matrix fails to factor.
#: Fixed (not adaptive) so that runs are reproducible under a seed.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class PositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix could not be Cholesky-factored even at maximum jitter."""


@dataclass(frozen=True)
class SideInfo:
    """Side information attached to one participant of one game.

    Attributes
    ----------
    raw_week : float
        Weeks since the dataset epoch (uncompressed calendar time).
    is_home : int
        1 if this participant played at home, 0 otherwise.
    extra : tuple of float
        Optional additional coordinates; appended after (week, home).
    """

    raw_week: float
    is_home: int
    extra: tuple[float, ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.raw_week):
            raise ValueError("raw_week must be finite")
        if self.is_home not in (0, 1):
            raise ValueError("is_home must be 0 or 1")

    def vector(self) -> np.ndarray:
        """Coordinates as [week, is_home, *extra] (week not warped)."""
        return np.array([self.raw_week, float(self.is_home), *self.extra])

    @property
    def n_dims(self) -> int:
        return 2 + len(self.extra)


@dataclass(frozen=True)
class SeasonCalendar:
    """Off-season intervals of a league calendar, in week coordinates.

    ``season_boundaries`` lists, for each gap between consecutive seasons,
    the pair (last week of the earlier season, first week of the later one).
    ``true_gap_weeks`` is the nominal off-season length used by the warp
    (28 for the NBA); synthetic calendars should set it to their actual
    scheduled gap so the warp stays strictly monotone for every gap value.
    """

    season_boundaries: tuple[tuple[float, float], ...] = ()
    true_gap_weeks: float = 28.0

    def __post_init__(self):
        if self.true_gap_weeks <= 0:
            raise ValueError("true_gap_weeks must be positive")
        prev = -np.inf
        for end, start in self.season_boundaries:
            if not end < start:
                raise ValueError(f"boundary ({end}, {start}) is not an interval")
            if end <= prev:
                raise ValueError("season boundaries must be strictly increasing")
            prev = start

    @property
    def ends(self) -> np.ndarray:
        return np.array([b[0] for b in self.season_boundaries])

    @property
    def starts(self) -> np.ndarray:
        return np.array([b[1] for b in self.season_boundaries])


def warp_weeks(raw_weeks: np.ndarray, gap: float, cal: SeasonCalendar) -> np.ndarray:
    """Vectorized season-gap warp.

    Each completed off-season before a point removes ``true_gap - gap``
    effective weeks; a point inside an off-season is compressed linearly
    across the interval, which keeps the warp strictly increasing (game
    weeks never fall inside an off-season, but interpolation makes the map
    well behaved everywhere).
    """
    if not 0.0 < gap <= cal.true_gap_weeks:
        raise ValueError(
            f"season gap {gap} outside prior support (0, {cal.true_gap_weeks}]"
        )
    raw = np.asarray(raw_weeks, dtype=float)
    if len(cal.season_boundaries) == 0:
        return raw.copy()
    shrink = cal.true_gap_weeks - gap
    ends, starts = cal.ends, cal.starts
    completed = np.searchsorted(starts, raw, side="right")
    removed = shrink * completed.astype(float)
    # Partial credit for points strictly inside the next off-season.
    nxt = np.minimum(completed, len(ends) - 1)
    inside = (completed < len(ends)) & (raw > ends[nxt])
    if np.any(inside):
        i = nxt[inside]
        frac = (raw[inside] - ends[i]) / (starts[i] - ends[i])
        removed[inside] += shrink * frac
    return raw - removed


def warp_time(raw_week: float, gap: float, cal: SeasonCalendar) -> float:
    """Effective time of a single raw week under the season-gap warp."""
    if raw_week < 0:
        raise ValueError("raw_week must be nonnegative")
    return float(warp_weeks(np.array([raw_week]), gap, cal)[0])


def side_info_features(
    points: list[SideInfo], gap: float, cal: SeasonCalendar
) -> np.ndarray:
    """Stack side-information points into an (n, D) coordinate matrix.

    Dimension 0 is the warped week; dimension 1 the home indicator; any
    extra coordinates follow unchanged.
    """
    if not points:
        raise ValueError("empty point set")
    X = np.array([p.vector() for p in points])
    X[:, 0] = warp_weeks(X[:, 0], gap, cal)
    return X


@dataclass(frozen=True)
class KernelFactor:
    """One multiplicative factor of a correlation kernel.

    ``family`` is "ard" or "periodic"; ``dims`` indexes the side-info
    coordinate matrix (periodic factors take exactly one dimension and a
    positive ``period``).
    """

    family: str
    dims: tuple[int, ...]
    period: float | None = None

    def __post_init__(self):
        if self.family not in ("ard", "periodic"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.dims:
            raise ValueError("factor needs at least one dimension")
        if self.family == "periodic":
            if len(self.dims) != 1:
                raise ValueError("periodic factor applies to a single dimension")
            if self.period is None or self.period <= 0:
                raise ValueError("periodic factor needs period > 0")


@dataclass(frozen=True)
class KernelSpec:
    """A product of kernel factors plus bookkeeping for their length scales.

    Length scales live in :class:`HyperParams` as one flat tuple, ordered by
    factor and then by dimension within the factor.
    """

    factors: tuple[KernelFactor, ...]

    @staticmethod
    def ard(dims: tuple[int, ...]) -> "KernelSpec":
        return KernelSpec(factors=(KernelFactor("ard", tuple(dims)),))

    @property
    def n_scales(self) -> int:
        return sum(len(f.dims) for f in self.factors)

    @property
    def active_dims(self) -> tuple[int, ...]:
        out: list[int] = []
        for f in self.factors:
            out.extend(f.dims)
        return tuple(out)

    def validate(self, n_dims: int) -> None:
        for f in self.factors:
            for d in f.dims:
                if not 0 <= d < n_dims:
                    raise ValueError(f"kernel dimension {d} not in side info")


@dataclass(frozen=True)
class HyperParams:
    """Length scales for one latent feature's kernel, plus the season gap.

    One instance exists per latent feature per side (2K sets in total), so
    offense and defense weigh the side information independently.
    """

    length_scales: tuple[float, ...]
    season_gap_weeks: float

    def __post_init__(self):
        if any(ell <= 0 for ell in self.length_scales):
            raise ValueError("length scales must be strictly positive")
        if self.season_gap_weeks <= 0:
            raise ValueError("season gap must be strictly positive")

    def replace_scale(self, i: int, value: float) -> "HyperParams":
        scales = list(self.length_scales)
        scales[i] = value
        return HyperParams(tuple(scales), self.season_gap_weeks)

    def replace_gap(self, value: float) -> "HyperParams":
        return HyperParams(self.length_scales, value)


@dataclass(frozen=True)
class HyperPrior:
    """Top-hat prior boxes for one hyperparameter set.

    ``scale_boxes`` aligns with ``HyperParams.length_scales``; ``gap_box``
    is (0, true_gap].  ``sampled_scales`` / ``sampled_gap`` mark which
    coordinates move during inference (pinned coordinates, e.g. the static
    baseline's scales, stay at their initial value).
    """

    scale_boxes: tuple[tuple[float, float], ...]
    gap_box: tuple[float, float]
    sampled_scales: tuple[bool, ...] = field(default=())
    sampled_gap: bool = True

    def __post_init__(self):
        if not self.sampled_scales:
            object.__setattr__(
                self, "sampled_scales", tuple(True for _ in self.scale_boxes)
            )
        if len(self.sampled_scales) != len(self.scale_boxes):
            raise ValueError("sampled_scales does not match scale_boxes")
        for lo, hi in (*self.scale_boxes, self.gap_box):
            if not 0 <= lo < hi:
                raise ValueError("prior boxes need 0 <= lo < hi")

    def contains(self, hp: HyperParams) -> bool:
        if len(hp.length_scales) != len(self.scale_boxes):
            return False
        ok = all(
            lo <= ell <= hi
            for ell, (lo, hi) in zip(hp.length_scales, self.scale_boxes)
        )
        glo, ghi = self.gap_box
        return ok and glo < hp.season_gap_weeks <= ghi

    def initial_hp(self) -> HyperParams:
        """Starting hyperparameters: geometric box midpoints for sampled
        scales, the box top (static limit) for pinned ones, gap at its top
        (identity warp)."""
        scales = tuple(
            float(np.sqrt(lo * hi)) if sampled else float(hi)
            for (lo, hi), sampled in zip(self.scale_boxes, self.sampled_scales)
        )
        return HyperParams(scales, float(self.gap_box[1]))


def corr_ard(
    x1: SideInfo, x2: SideInfo, hp: HyperParams, dims: tuple[int, ...] | None = None
) -> float:
    """Squared-exponential correlation with one length scale per dimension.

    ``exp(-0.5 * sum_d ((x1_d - x2_d) / ell_d)^2)``.  Coordinates are used
    as given (no warping); ``dims`` defaults to the first
    ``len(hp.length_scales)`` side-info dimensions.
    """
    v1, v2 = x1.vector(), x2.vector()
    if dims is None:
        dims = tuple(range(len(hp.length_scales)))
    if len(dims) != len(hp.length_scales):
        raise ValueError("length scales do not match active dimensions")
    z = (v1[list(dims)] - v2[list(dims)]) / np.asarray(hp.length_scales)
    return float(np.exp(-0.5 * np.dot(z, z)))


def corr_periodic(x1: float, x2: float, ell: float, period: float) -> float:
    """Periodic correlation ``exp(-2 sin^2(pi (x1-x2) / period) / ell^2)``.

    Equals 1 whenever x1 - x2 is an integer multiple of the period.
    """
    if ell <= 0 or period <= 0:
        raise ValueError("ell and period must be positive")
    s = np.sin(np.pi * (x1 - x2) / period)
    return float(np.exp(-2.0 * s * s / (ell * ell)))


def _ard_block(Xa: np.ndarray, Xb: np.ndarray, dims, ells) -> np.ndarray:
    za = Xa[:, list(dims)] / np.asarray(ells)
    zb = Xb[:, list(dims)] / np.asarray(ells)
    d2 = np.sum((za[:, None, :] - zb[None, :, :]) ** 2, axis=2)
    return np.exp(-0.5 * d2)


def _periodic_block(
    Xa: np.ndarray, Xb: np.ndarray, dim: int, ell: float, period: float
) -> np.ndarray:
    s = np.sin(np.pi * (Xa[:, dim][:, None] - Xb[:, dim][None, :]) / period)
    return np.exp(-2.0 * s * s / (ell * ell))


def _corr_matrix(
    Xa: np.ndarray, Xb: np.ndarray, spec: KernelSpec, hp: HyperParams
) -> np.ndarray:
    K = np.ones((Xa.shape[0], Xb.shape[0]))
    pos = 0
    for f in spec.factors:
        ells = hp.length_scales[pos : pos + len(f.dims)]
        pos += len(f.dims)
        if f.family == "ard":
            K *= _ard_block(Xa, Xb, f.dims, ells)
        else:
            K *= _periodic_block(Xa, Xb, f.dims[0], ells[0], f.period)
    return K


def gram(
    points: list[SideInfo],
    spec: KernelSpec,
    hp: HyperParams,
    cal: SeasonCalendar,
) -> np.ndarray:
    """Correlation Gram matrix over a set of side-information points.

    The time dimension is warped with ``hp.season_gap_weeks`` before the
    factors are evaluated; product specs multiply factor correlations
    elementwise.  The result is symmetric with an exact unit diagonal.
    """
    if len(hp.length_scales) != spec.n_scales:
        raise ValueError(
            f"{len(hp.length_scales)} length scales for a spec with "
            f"{spec.n_scales} slots"
        )
    X = side_info_features(points, hp.season_gap_weeks, cal)
    spec.validate(X.shape[1])
    K = _corr_matrix(X, X, spec, hp)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def cross_gram(
    points_a: list[SideInfo],
    points_b: list[SideInfo],
    spec: KernelSpec,
    hp: HyperParams,
    cal: SeasonCalendar,
) -> np.ndarray:
    """Rectangular correlation matrix between two point sets.

    Same kernel and warp as :func:`gram`; used for GP conditionals at
    unseen sites.
    """
    if len(hp.length_scales) != spec.n_scales:
        raise ValueError("length scales do not match the kernel spec")
    Xa = side_info_features(points_a, hp.season_gap_weeks, cal)
    Xb = side_info_features(points_b, hp.season_gap_weeks, cal)
    spec.validate(Xa.shape[1])
    return _corr_matrix(Xa, Xb, spec, hp)


def chol_jitter(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factorization with an escalating diagonal jitter ladder.

    Returns (L, eps) with ``L @ L.T = m + eps * I``.  Raises
    :class:`PositiveDefiniteError` if the largest jitter still fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    eye = np.eye(m.shape[0])
    for eps in JITTER_LADDER:
        try:
            L = np.linalg.cholesky(m + eps * eye if eps else m)
            return L, eps
        except np.linalg.LinAlgError:
            continue
    raise PositiveDefiniteError(
        f"matrix not positive definite at jitter {JITTER_LADDER[-1]:g}"
    )
