"""Generic MCMC transition kernels.

Three kernels cover all of inference: univariate slice sampling with
step-out and shrinkage, elliptical slice sampling for latent vectors with
Gaussian priors, and a whitened hyperparameter update that slice-samples
kernel hyperparameters while holding the whitened function values fixed.

All kernels are pure functions of their inputs and the generator handed to
them: identical seeds give identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kernels import (
    HyperParams,
    HyperPrior,
    KernelSpec,
    PositiveDefiniteError,
    SeasonCalendar,
    chol_jitter,
    gram,
)


class SamplerError(RuntimeError):
    """A transition kernel could not complete (pathological target)."""


class InvalidStateError(SamplerError):
    """A kernel was entered at a state with non-finite log likelihood."""


@dataclass(frozen=True)
class SliceConfig:
    """Step-out slice sampling controls."""

    initial_width: float = 1.0
    max_step_outs: int = 16
    max_shrinks: int = 100

    def __post_init__(self):
        if self.initial_width <= 0 or self.max_step_outs <= 0 or self.max_shrinks <= 0:
            raise ValueError("slice configuration values must be positive")


def slice_sample_1d(
    x0: float,
    log_density: Callable[[float], float],
    cfg: SliceConfig,
    rng: np.random.Generator,
) -> float:
    """One univariate slice-sampling update (step-out and shrinkage).

    Draws the slice height as log_density(x0) minus a standard exponential,
    brackets the slice by stepping out from a randomly placed interval of
    ``initial_width``, then shrinks toward x0 until a point on the slice is
    found.  Leaves the target density invariant.
    """
    ly0 = log_density(x0)
    if not np.isfinite(ly0):
        raise InvalidStateError("log density not finite at the current point")
    height = ly0 - rng.exponential(1.0)

    w = cfg.initial_width
    left = x0 - w * rng.uniform()
    right = left + w
    # Split the step-out budget between the two sides (Neal 2003, Fig. 3).
    j = int(np.floor(cfg.max_step_outs * rng.uniform()))
    k = cfg.max_step_outs - 1 - j
    while j > 0 and log_density(left) > height:
        left -= w
        j -= 1
    while k > 0 and log_density(right) > height:
        right += w
        k -= 1

    for _ in range(cfg.max_shrinks):
        x1 = left + rng.uniform() * (right - left)
        if log_density(x1) > height:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise SamplerError(
        f"slice shrinkage exhausted after {cfg.max_shrinks} proposals"
    )


def elliptical_slice(
    f: np.ndarray,
    log_lik: Callable[[np.ndarray], float],
    rng: np.random.Generator,
    prior_chol: np.ndarray | None = None,
    cur_log_lik: float | None = None,
    max_shrinks: int = 1000,
) -> tuple[np.ndarray, float]:
    """One elliptical slice sampling update.

    Targets the posterior proportional to N(f; 0, Sigma) * exp(log_lik(f)),
    where Sigma = prior_chol @ prior_chol.T (identity when ``prior_chol`` is
    None).  The proposal walks the ellipse through f and an auxiliary prior
    draw, shrinking the angle bracket toward 0 on rejection, so the move is
    never vetoed by the Gaussian prior and always terminates.

    Returns (new f, its log likelihood).
    """
    f = np.asarray(f, dtype=float)
    cur = log_lik(f) if cur_log_lik is None else cur_log_lik
    if not np.isfinite(cur):
        raise InvalidStateError("log likelihood not finite at the current state")

    eps = rng.standard_normal(f.shape)
    nu = eps if prior_chol is None else prior_chol @ eps
    threshold = cur + np.log(rng.uniform())

    theta = rng.uniform(0.0, 2.0 * np.pi)
    lo, hi = theta - 2.0 * np.pi, theta
    for _ in range(max_shrinks):
        fp = f * np.cos(theta) + nu * np.sin(theta)
        lp = log_lik(fp)
        if lp > threshold:
            return fp, float(lp)
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        theta = rng.uniform(lo, hi)
    raise SamplerError("elliptical slice bracket shrank without acceptance")


def _box_slice_cfg(span: float) -> SliceConfig:
    # A bracket of the full box span plus a couple of step-outs makes the
    # coordinate nearly uncorrelated across updates under weak likelihoods.
    return SliceConfig(initial_width=max(span, 1e-6), max_step_outs=4, max_shrinks=200)


def whitened_hyper_update(
    nus: Sequence[np.ndarray],
    mean,
    hp: HyperParams,
    site_sets: Sequence[list],
    kernel_spec: KernelSpec,
    cal: SeasonCalendar,
    log_lik_given_f: Callable[[list[np.ndarray]], float],
    prior: HyperPrior,
    cfg: SliceConfig | None,
    rng: np.random.Generator,
    include_gap: bool = True,
) -> HyperParams:
    """Slice-sample one feature's kernel hyperparameters at fixed whitening.

    The whitened vectors ``nus`` (one per member) stay put; every proposed
    hyperparameter setting refactors each member's Gram matrix and maps the
    function values through f = mean + L nu before scoring the likelihood.
    This targets p(theta | nu, data), whose conditional is far flatter than
    the fixed-f one.  Length scales move on the log scale (with the Jacobian
    that keeps the raw-scale top-hat prior uniform); the season gap moves on
    the linear scale.  Cholesky failures inside the box count as density
    -inf and are simply shrunk away.
    """

    def loglik_at(hp_try: HyperParams) -> float:
        try:
            fs = [
                chol_jitter(gram(sites, kernel_spec, hp_try, cal))[0] @ nu + mean
                for sites, nu in zip(site_sets, nus)
            ]
        except PositiveDefiniteError:
            return -np.inf
        return log_lik_given_f(fs)

    for i, sampled in enumerate(prior.sampled_scales):
        if not sampled:
            continue
        lo, hi = prior.scale_boxes[i]

        def log_density(s: float, i=i, lo=lo, hi=hi) -> float:
            ell = np.exp(s)
            if not lo <= ell <= hi:
                return -np.inf
            return s + loglik_at(hp.replace_scale(i, ell))

        coord_cfg = cfg if cfg is not None else _box_slice_cfg(np.log(hi) - np.log(lo))
        s_new = slice_sample_1d(np.log(hp.length_scales[i]), log_density, coord_cfg, rng)
        hp = hp.replace_scale(i, float(np.exp(s_new)))

    if include_gap and prior.sampled_gap:
        glo, ghi = prior.gap_box

        def gap_density(g: float) -> float:
            if not glo < g <= ghi:
                return -np.inf
            return loglik_at(hp.replace_gap(g))

        coord_cfg = cfg if cfg is not None else _box_slice_cfg(ghi - glo)
        g_new = slice_sample_1d(hp.season_gap_weeks, gap_density, coord_cfg, rng)
        hp = hp.replace_gap(float(g_new))

    return hp


# -- chain diagnostics ----------------------------------------------------


def batch_mcse(x: np.ndarray) -> float:
    """Monte Carlo standard error of the mean via batch means.

    Splits the (possibly autocorrelated) series into ~sqrt(n) batches and
    uses the spread of the batch means.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return float(np.std(x) / np.sqrt(max(n, 1)))
    n_batches = max(int(np.floor(np.sqrt(n))), 2)
    size = n // n_batches
    means = x[: n_batches * size].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


def geweke_zscores(forward: np.ndarray, chain: np.ndarray) -> np.ndarray:
    """Z-scores comparing forward-sampled and chain-sampled scalar marginals.

    ``forward`` holds independent draws (n, d); ``chain`` holds successive
    states of the transition being tested (m, d).  The chain side uses a
    batch-means standard error to absorb autocorrelation.  Agreement means
    the transition leaves the generative joint invariant.
    """
    forward = np.atleast_2d(np.asarray(forward, dtype=float))
    chain = np.atleast_2d(np.asarray(chain, dtype=float))
    if forward.shape[1] != chain.shape[1]:
        raise ValueError("monitored scalar counts disagree")
    z = np.empty(forward.shape[1])
    for j in range(forward.shape[1]):
        se_f = np.std(forward[:, j], ddof=1) / np.sqrt(len(forward))
        se_c = batch_mcse(chain[:, j])
        z[j] = (forward[:, j].mean() - chain[:, j].mean()) / np.hypot(se_f, se_c)
    return z
