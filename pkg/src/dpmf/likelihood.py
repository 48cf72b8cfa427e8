"""Bivariate Gaussian observation model for paired scores.

One observation is the pair of points scored by the two sides of a game.
Both entries share a standard deviation and carry a within-game correlation,
so a single game fills two entries of the score matrix with one joint draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Prior standard deviation for the transformed noise parameters
#: (log sigma and atanh rho).
NOISE_PRIOR_SD = 1.5


@dataclass(frozen=True)
class LikelihoodParams:
    """Score-noise parameters: shared std dev and within-game correlation."""

    sigma: float
    rho: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")

    # Unconstrained coordinates used by the slice updates.
    @property
    def log_sigma(self) -> float:
        return float(np.log(self.sigma))

    @property
    def atanh_rho(self) -> float:
        return float(np.arctanh(self.rho))

    @staticmethod
    def from_transformed(log_sigma: float, atanh_rho: float) -> "LikelihoodParams":
        return LikelihoodParams(float(np.exp(log_sigma)), float(np.tanh(atanh_rho)))

    def chol(self) -> np.ndarray:
        """Cholesky factor of the 2x2 score covariance."""
        return self.sigma * np.array(
            [[1.0, 0.0], [self.rho, np.sqrt(1.0 - self.rho * self.rho)]]
        )


def score_pair_logpdf(z, y, p: LikelihoodParams):
    """Log density of observed score pair(s) z around latent mean pair(s) y.

    The covariance is [[s^2, r s^2], [r s^2, s^2]].  Accepts single pairs or
    (..., 2) arrays and broadcasts; returns a float for single pairs.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    d = z - y
    d0, d1 = d[..., 0], d[..., 1]
    s2 = p.sigma * p.sigma
    one_m_r2 = 1.0 - p.rho * p.rho
    quad = (d0 * d0 - 2.0 * p.rho * d0 * d1 + d1 * d1) / (s2 * one_m_r2)
    out = -np.log(2.0 * np.pi) - np.log(s2) - 0.5 * np.log(one_m_r2) - 0.5 * quad
    return float(out) if out.ndim == 0 else out


def sample_score_pair(y, p: LikelihoodParams, rng: np.random.Generator):
    """Draw score pair(s): z = y + A eps with A A^T the score covariance."""
    y = np.asarray(y, dtype=float)
    eps = rng.standard_normal(y.shape)
    z = y + eps @ p.chol().T
    return (float(z[0]), float(z[1])) if z.ndim == 1 else z


def game_loglik(model, state, game_indices=None) -> float:
    """Total log likelihood of the model's observed games.

    Each game contributes one bivariate term covering both of its score
    matrix entries.  ``game_indices`` restricts the sum to a subset.
    Models built without observations contribute zero.
    """
    if not model.observed or model.index.n_games == 0:
        return 0.0
    y = model.y_pairs(state)
    z = model.scores
    if game_indices is not None:
        y = y[game_indices]
        z = z[game_indices]
    if len(z) == 0:
        return 0.0
    return float(np.sum(score_pair_logpdf(z, y, state.likelihood)))
