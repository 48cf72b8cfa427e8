"""Predictive score densities as equal-weight Gaussian mixtures.

Every retained MCMC sample contributes one bivariate Gaussian component:
its predicted latent mean pair plus that sample's noise parameters.  The
mixture gives calibrated joint densities over (home, away) scores; the
winner probability comes from each component's Gaussian score difference.
"""

import numpy as np

from dpmf import (
    ChainSchedule,
    HyperParams,
    HyperPrior,
    KernelSpec,
    LikelihoodParams,
    MixingState,
    PredictiveMixture,
    mixture_logpdf,
    run_block,
    softplus_inv,
    synth_generate,
)
from dpmf.data import RollingBlock
from dpmf.driver import InferenceConfig
from dpmf.predict import density_grid

k = 2
center = 100.0
hp_true = HyperParams((8.0, 0.3), 4.0)
mix_u = MixingState(chol=np.eye(k), mean=np.full(k, np.sqrt(center / k)))
mix_v = MixingState(chol=np.eye(k), mean=np.full(k, float(softplus_inv(np.sqrt(center / k)))))
games, truth = synth_generate(
    n_teams=6, n_seasons=2, season_weeks=8.0, gap_weeks=12.0,
    kernel_spec=KernelSpec.ard((0, 1)),
    hypers_u=[hp_true] * k, hypers_v=[hp_true] * k,
    mixing_u=mix_u, mixing_v=mix_v, lik=LikelihoodParams(6.0, 0.4), seed=9,
)
cal = truth.calendar

# hold out the final two weeks of season 2
cut = max(g.week for g in games) - 2.0
block = RollingBlock(
    season=2,
    block_start_week=cut,
    block_end_week=cut + 4.0,
    train_games=tuple(g for g in games if g.week < cut),
    test_games=tuple(g for g in games if g.week >= cut),
)
print(f"train {len(block.train_games)} games, predict {len(block.test_games)}")

config = InferenceConfig(
    k=k, kernel_spec=KernelSpec.ard((0, 1)), calendar=cal,
    hyper_prior=HyperPrior(scale_boxes=((0.25, 500.0), (0.01, 100.0)),
                           gap_box=(0.0, cal.true_gap_weeks)),
    sample_hypers=False,
)
schedule = ChainSchedule(n_chains=2, cold_burnin=250, warm_burnin=50,
                         thin=2, keep_per_chain=60)
result = run_block(config, block, schedule, seed=5, hyper_mode="frozen",
                   frozen_hypers=([hp_true] * k, [hp_true] * k))
print(f"predictive bank: {len(result.bank)} components per game\n")

for i, g in enumerate(block.test_games[:4]):
    mix = PredictiveMixture.from_bank(result.bank, i)
    mean = mix.mean_pair()
    p_home = mix.home_win_probability()
    lp = mixture_logpdf(mix, (g.home_score, g.away_score))
    hit = "o" if (p_home > 0.5) == (g.home_score > g.away_score) else "x"
    print(f"{g.home_team} vs {g.away_team}: predict "
          f"{mean[0]:5.1f}-{mean[1]:5.1f}  P(home win) {p_home:4.2f}  "
          f"actual {g.home_score:5.1f}-{g.away_score:5.1f} [{hit}]  "
          f"log prob {lp:6.2f}")

# A gridded density for external contour plotting (same format as the CLI's
# `dpmf predict` dump).
mix = PredictiveMixture.from_bank(result.bank, 0)
axis, dens = density_grid(mix, 60.0, 140.0, 81)
peak = np.unravel_index(np.argmax(dens), dens.shape)
print(f"\ndensity grid over [60, 140]^2: peak at home {axis[peak[0]]:.0f}, "
      f"away {axis[peak[1]]:.0f}; mass in box "
      f"{np.trapezoid(np.trapezoid(dens, axis, axis=1), axis):.3f}")
