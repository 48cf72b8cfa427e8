"""GP-coupled probabilistic matrix factorization for paired-score data.

Latent features of each participant are functions of game side information
(time, home/away) with multi-task Gaussian-process priors; inference is
slice-sampling MCMC; evaluation follows a rolling censored-data protocol.
"""

__version__ = "0.1.0"

from .data import (
    GameRecord,
    RollingBlock,
    build_calendar,
    expert_prediction,
    load_games,
    make_rolling_blocks,
    save_games,
    synth_generate,
)
from .driver import (
    ChainRunner,
    ChainSchedule,
    InferenceConfig,
    SampleBank,
    init_cold_state,
    run_block,
    sweep,
)
from .kernels import (
    HyperParams,
    HyperPrior,
    KernelFactor,
    KernelSpec,
    PositiveDefiniteError,
    SeasonCalendar,
    SideInfo,
    chol_jitter,
    corr_ard,
    corr_periodic,
    cross_gram,
    gram,
    warp_time,
)
from .likelihood import LikelihoodParams, game_loglik, sample_score_pair, score_pair_logpdf
from .model import (
    DPMFModel,
    MemberSiteIndex,
    MixingState,
    ModelState,
    WhitenedFunctions,
    softplus,
    softplus_inv,
    unwhiten,
    whiten,
)
from .predict import (
    BlockPredictor,
    PredictiveMixture,
    aggregate_metrics,
    compute_metrics,
    draw_predictive_state,
    gp_conditional,
    mixture_logpdf,
)
from .samplers import (
    SamplerError,
    SliceConfig,
    batch_mcse,
    elliptical_slice,
    geweke_zscores,
    slice_sample_1d,
    whitened_hyper_update,
)
