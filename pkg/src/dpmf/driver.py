"""MCMC orchestration: sweeps, chain schedules, warm starts, checkpoints.

One sweep composes the invariant kernels in a fixed order: elliptical slice
updates of every whitened function vector, slice updates of the mean
vectors, of the mixing Cholesky entries, of the kernel hyperparameters and
the shared season gap (when hyperparameter sampling is on), and of the
score-noise parameters.  ``run_block`` runs a bank of chains against one
censored block, collecting predictive components for the test games.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .data import RollingBlock
from .kernels import (
    HyperParams,
    HyperPrior,
    KernelSpec,
    PositiveDefiniteError,
    SeasonCalendar,
    chol_jitter,
    gram,
)
from .likelihood import NOISE_PRIOR_SD, LikelihoodParams, score_pair_logpdf
from .model import (
    MU_PRIOR_SD,
    SIGMA_CHOL_LOGDIAG_SD,
    SIGMA_CHOL_OFFDIAG_SD,
    DPMFModel,
    MixingState,
    ModelState,
    WhitenedFunctions,
    softplus,
)
from .samplers import SliceConfig, _box_slice_cfg, elliptical_slice, slice_sample_1d, whitened_hyper_update

CHECKPOINT_SCHEMA_VERSION = 1
COLD_START_NU_SD = 0.1
COLD_START_RHO = 0.2


@dataclass(frozen=True)
class ChainSchedule:
    """How many chains to run and how long, per block."""

    n_chains: int = 10
    cold_burnin: int = 1000
    warm_burnin: int = 100
    thin: int = 4
    keep_per_chain: int = 100

    def __post_init__(self):
        for name in ("n_chains", "cold_burnin", "warm_burnin", "thin", "keep_per_chain"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    @property
    def bank_size(self) -> int:
        return self.n_chains * self.keep_per_chain


@dataclass(frozen=True)
class InferenceConfig:
    """Everything a chain needs besides the training games."""

    k: int
    kernel_spec: KernelSpec
    calendar: SeasonCalendar
    hyper_prior: HyperPrior
    sample_hypers: bool = True
    share_season_gap: bool = True
    slice_cfg: SliceConfig = field(default_factory=SliceConfig)
    score_center: float | None = None

    def build_model(self, games, observed: bool = True) -> DPMFModel:
        return DPMFModel(
            games,
            self.k,
            self.kernel_spec,
            self.calendar,
            observed=observed,
            score_center=self.score_center,
        )


@dataclass(frozen=True)
class BankComponent:
    """One retained posterior draw: predictive means plus noise params."""

    means: np.ndarray  # (n_test_games, 2)
    likelihood: LikelihoodParams
    hypers_u: tuple[HyperParams, ...]
    hypers_v: tuple[HyperParams, ...]


@dataclass
class SampleBank:
    components: list[BankComponent]

    def __len__(self) -> int:
        return len(self.components)


@dataclass
class BlockResult:
    bank: SampleBank
    end_states: list[ModelState]
    rngs: list[np.random.Generator] = field(default_factory=list)


def init_cold_state(
    model: DPMFModel,
    config: InferenceConfig,
    rng: np.random.Generator,
    hypers: tuple[list[HyperParams], list[HyperParams]] | None = None,
    rng_seed: int = 0,
) -> ModelState:
    """Fresh chain state: small whitened values, data-scale means, identity
    mixing, empirical score noise."""
    idx = model.index
    k = model.k

    def draw_side():
        return WhitenedFunctions(
            [
                [COLD_START_NU_SD * rng.standard_normal(len(s)) for s in idx.sites]
                for _ in range(k)
            ]
        )

    whitened_u = draw_side()
    whitened_v = draw_side()
    c_u, c_v = model.mu_centers()
    if hypers is None:
        hp0 = config.hyper_prior.initial_hp()
        hypers = ([hp0] * k, [hp0] * k)
    sigma = max(model.empirical_score_sd(), 1e-3)
    return ModelState(
        whitened_u=whitened_u,
        whitened_v=whitened_v,
        mixing_u=MixingState(chol=np.eye(k), mean=np.full(k, c_u)),
        mixing_v=MixingState(chol=np.eye(k), mean=np.full(k, c_v)),
        hypers_u=list(hypers[0]),
        hypers_v=list(hypers[1]),
        likelihood=LikelihoodParams(sigma=sigma, rho=COLD_START_RHO),
        members=idx.members,
        rng_seed=rng_seed,
    )


def extend_state(
    prev: ModelState, model: DPMFModel, rng: np.random.Generator
) -> ModelState:
    """Warm-start a state onto a grown training set.

    Sites are chronological and training sets grow append-only within a
    season, so existing whitened entries are kept (the old function values
    are unchanged up to factorization roundoff) and each new site gets a
    fresh standard-normal entry, i.e. an exact draw from the GP conditional
    at the new sites.
    """
    idx = model.index
    old_pos = {m: i for i, m in enumerate(prev.members)}

    def grow(wf: WhitenedFunctions) -> WhitenedFunctions:
        out = []
        for kf in range(model.k):
            row = []
            for mp, member in enumerate(idx.members):
                n = len(idx.sites[mp])
                if member in old_pos:
                    old = wf.nu[kf][old_pos[member]]
                    if len(old) > n:
                        raise ValueError(
                            f"training set shrank for {member}; warm start "
                            "is only valid within a season"
                        )
                    row.append(
                        np.concatenate([old, rng.standard_normal(n - len(old))])
                    )
                else:
                    row.append(rng.standard_normal(n))
            out.append(row)
        return WhitenedFunctions(out)

    state = prev.clone()
    whitened_u = grow(prev.whitened_u)
    whitened_v = grow(prev.whitened_v)
    return dataclasses.replace(
        state, whitened_u=whitened_u, whitened_v=whitened_v, members=idx.members
    )


class ChainRunner:
    """Executes sweeps for one chain, keeping unwhitened caches current.

    Owns its state and generator; nothing here is shared between chains.
    """

    def __init__(
        self,
        model: DPMFModel,
        state: ModelState,
        config: InferenceConfig,
        rng: np.random.Generator,
    ):
        self.model = model
        self.state = state
        self.config = config
        self.rng = rng
        self.fu = model.unwhitened(state, "u")
        self.fv = model.unwhitened(state, "v")

    # -- helpers -----------------------------------------------------------

    def _pair_loglik(self, y: np.ndarray) -> float:
        if not self.model.observed:
            return 0.0
        return float(
            np.sum(score_pair_logpdf(self.model.scores, y, self.state.likelihood))
        )

    def _side_arrays(self, side: str):
        st = self.state
        if side == "u":
            return self.fu, st.mixing_u
        return self.fv, st.mixing_v

    def current_values(self, side: str) -> np.ndarray:
        F, mix = self._side_arrays(side)
        return F @ mix.chol.T + mix.mean

    def current_y_pairs(self) -> np.ndarray:
        return self.model.y_pairs_from_sites(
            self.current_values("u"), softplus(self.current_values("v"))
        )

    # -- sweep steps ---------------------------------------------------------

    def _update_latents(self, side: str) -> None:
        st, model = self.state, self.model
        idx = model.index
        F, mix = self._side_arrays(side)
        wf = st.whitened(side)
        lik = st.likelihood
        observed = model.observed
        if observed:
            if side == "u":
                psi_v_all = softplus(self.current_values("v"))
            else:
                u_all = self.current_values("u")
        for kf in range(model.k):
            ls = model.member_chols(side, kf, st.hypers(side)[kf])
            col = mix.chol[:, kf].copy()
            for mp in range(idx.n_members):
                nu0 = wf.nu[kf][mp]
                if nu0.size == 0:
                    continue
                L = ls[mp]
                if not observed:
                    loglik = lambda nu: 0.0
                else:
                    rows = idx.rows[mp]
                    opp = model.member_opp_rows[mp]
                    z = np.stack(
                        [model.member_scored[mp], model.member_conceded[mp]], axis=1
                    )
                    base = F[rows] @ mix.chol.T + mix.mean - np.outer(F[rows, kf], col)
                    if side == "u":
                        psi_opp = psi_v_all[opp]
                        y_conc = np.einsum(
                            "ij,ij->i",
                            self.current_values("u")[opp],
                            psi_v_all[rows],
                        )

                        def loglik(nu, L=L, base=base, col=col, psi_opp=psi_opp,
                                   y_conc=y_conc, z=z):
                            u_m = base + (L @ nu)[:, None] * col
                            y_sc = np.einsum("ij,ij->i", u_m, psi_opp)
                            y = np.stack([y_sc, y_conc], axis=1)
                            return float(np.sum(score_pair_logpdf(z, y, lik)))

                    else:
                        v_cur = self.current_values("v")
                        u_opp = u_all[opp]
                        y_sc = np.einsum(
                            "ij,ij->i", u_all[rows], softplus(v_cur[opp])
                        )

                        def loglik(nu, L=L, base=base, col=col, u_opp=u_opp,
                                   y_sc=y_sc, z=z):
                            v_m = base + (L @ nu)[:, None] * col
                            y_conc = np.einsum("ij,ij->i", u_opp, softplus(v_m))
                            y = np.stack([y_sc, y_conc], axis=1)
                            return float(np.sum(score_pair_logpdf(z, y, lik)))

                nu_new, _ = elliptical_slice(nu0, loglik, self.rng)
                wf.nu[kf][mp] = nu_new
                F[idx.rows[mp], kf] = L @ nu_new

    def _update_means(self, side: str) -> None:
        st, model = self.state, self.model
        F, mix = self._side_arrays(side)
        c_u, c_v = model.mu_centers()
        center = c_u if side == "u" else c_v
        observed = model.observed
        if observed:
            if side == "u":
                psi_v_all = softplus(self.current_values("v"))
            else:
                u_all = self.current_values("u")
        for j in range(model.k):

            def log_density(x, j=j):
                prior = -0.5 * ((x - center) / MU_PRIOR_SD) ** 2
                if not observed:
                    return prior
                mean_try = mix.mean.copy()
                mean_try[j] = x
                vals = F @ mix.chol.T + mean_try
                if side == "u":
                    y = model.y_pairs_from_sites(vals, psi_v_all)
                else:
                    y = model.y_pairs_from_sites(u_all, softplus(vals))
                return prior + self._pair_loglik(y)

            mix.mean[j] = slice_sample_1d(
                float(mix.mean[j]), log_density, self.config.slice_cfg, self.rng
            )

    def _update_mixing(self, side: str) -> None:
        st, model = self.state, self.model
        F, mix = self._side_arrays(side)
        observed = model.observed
        if observed:
            if side == "u":
                psi_v_all = softplus(self.current_values("v"))
            else:
                u_all = self.current_values("u")
        for i in range(mix.n_chol_params):
            sd = SIGMA_CHOL_LOGDIAG_SD if i < model.k else SIGMA_CHOL_OFFDIAG_SD

            def log_density(x, i=i, sd=sd):
                prior = -0.5 * (x / sd) ** 2
                if not observed:
                    return prior
                trial = mix.clone()
                trial.set_chol_param(i, x)
                vals = F @ trial.chol.T + mix.mean
                if side == "u":
                    y = model.y_pairs_from_sites(vals, psi_v_all)
                else:
                    y = model.y_pairs_from_sites(u_all, softplus(vals))
                return prior + self._pair_loglik(y)

            new = slice_sample_1d(
                mix.get_chol_param(i), log_density, self.config.slice_cfg, self.rng
            )
            mix.set_chol_param(i, new)

    def _refresh_side_feature(self, side: str, kf: int) -> None:
        st, model = self.state, self.model
        F = self.fu if side == "u" else self.fv
        ls = model.member_chols(side, kf, st.hypers(side)[kf])
        wf = st.whitened(side)
        for mp in range(model.index.n_members):
            F[model.index.rows[mp], kf] = ls[mp] @ wf.nu[kf][mp]

    def _update_hypers(self) -> None:
        st, model = self.state, self.model
        idx = model.index
        prior = self.config.hyper_prior
        per_set_gap = not self.config.share_season_gap
        for side in ("u", "v"):
            F, mix = self._side_arrays(side)
            wf = st.whitened(side)
            for kf in range(model.k):
                if not (any(prior.sampled_scales) or (per_set_gap and prior.sampled_gap)):
                    continue
                col = mix.chol[:, kf].copy()
                if side == "u":
                    psi_v_all = softplus(self.current_values("v"))
                else:
                    u_all = self.current_values("u")
                base = F @ mix.chol.T + mix.mean - np.outer(F[:, kf], col)

                def log_lik_given_f(fs, side=side, kf=kf, base=base, col=col):
                    if not model.observed:
                        return 0.0
                    fcol = np.empty(idx.n_rows)
                    for mp in range(idx.n_members):
                        fcol[idx.rows[mp]] = fs[mp]
                    vals = base + fcol[:, None] * col
                    if side == "u":
                        y = model.y_pairs_from_sites(vals, psi_v_all)
                    else:
                        y = model.y_pairs_from_sites(u_all, softplus(vals))
                    return self._pair_loglik(y)

                hp_new = whitened_hyper_update(
                    wf.nu[kf],
                    0.0,
                    st.hypers(side)[kf],
                    idx.sites,
                    model.kernel_spec,
                    model.calendar,
                    log_lik_given_f,
                    prior,
                    None,
                    self.rng,
                    include_gap=per_set_gap,
                )
                st.hypers(side)[kf] = hp_new
                self._refresh_side_feature(side, kf)
        if self.config.share_season_gap and prior.sampled_gap:
            self._update_shared_gap()

    def _update_shared_gap(self) -> None:
        st, model = self.state, self.model
        idx = model.index
        glo, ghi = self.config.hyper_prior.gap_box

        def values_at_gap(g: float):
            fu = np.empty_like(self.fu)
            fv = np.empty_like(self.fv)
            for side, F in (("u", fu), ("v", fv)):
                wf = st.whitened(side)
                for kf in range(model.k):
                    hp = st.hypers(side)[kf].replace_gap(g)
                    for mp in range(idx.n_members):
                        L, _ = chol_jitter(
                            gram(idx.sites[mp], model.kernel_spec, hp, model.calendar)
                        )
                        F[idx.rows[mp], kf] = L @ wf.nu[kf][mp]
            return fu, fv

        def log_density(g: float) -> float:
            if not glo < g <= ghi:
                return -np.inf
            if not model.observed:
                return 0.0
            try:
                fu, fv = values_at_gap(g)
            except PositiveDefiniteError:
                return -np.inf
            u = fu @ st.mixing_u.chol.T + st.mixing_u.mean
            v = fv @ st.mixing_v.chol.T + st.mixing_v.mean
            return self._pair_loglik(model.y_pairs_from_sites(u, softplus(v)))

        g0 = st.hypers_u[0].season_gap_weeks
        g_new = slice_sample_1d(g0, log_density, _box_slice_cfg(ghi - glo), self.rng)
        for side in ("u", "v"):
            hp_list = st.hypers(side)
            for kf in range(model.k):
                hp_list[kf] = hp_list[kf].replace_gap(float(g_new))
                self._refresh_side_feature(side, kf)

    def _update_noise(self) -> None:
        st, model = self.state, self.model
        y = self.current_y_pairs() if model.observed else None

        def data_term(p: LikelihoodParams) -> float:
            if y is None:
                return 0.0
            return float(np.sum(score_pair_logpdf(model.scores, y, p)))

        t_rho = st.likelihood.atanh_rho

        def log_density_sigma(s: float) -> float:
            prior = -0.5 * (s / NOISE_PRIOR_SD) ** 2
            return prior + data_term(LikelihoodParams.from_transformed(s, t_rho))

        s_new = slice_sample_1d(
            st.likelihood.log_sigma, log_density_sigma, self.config.slice_cfg, self.rng
        )

        def log_density_rho(t: float) -> float:
            prior = -0.5 * (t / NOISE_PRIOR_SD) ** 2
            return prior + data_term(LikelihoodParams.from_transformed(s_new, t))

        t_new = slice_sample_1d(
            t_rho, log_density_rho, self.config.slice_cfg, self.rng
        )
        st.likelihood = LikelihoodParams.from_transformed(s_new, t_new)

    def sweep(self) -> None:
        """One full MCMC sweep over every block of the state."""
        self._update_latents("u")
        self._update_latents("v")
        self._update_means("u")
        self._update_means("v")
        self._update_mixing("u")
        self._update_mixing("v")
        if self.config.sample_hypers:
            self._update_hypers()
        self._update_noise()


def sweep(
    state: ModelState,
    model: DPMFModel,
    config: InferenceConfig,
    rng: np.random.Generator,
) -> ModelState:
    """Functional one-sweep transition (loops should reuse a ChainRunner)."""
    runner = ChainRunner(model, state.clone(), config, rng)
    runner.sweep()
    return runner.state


def run_block(
    config: InferenceConfig,
    block: RollingBlock,
    schedule: ChainSchedule,
    seed: int,
    prev: list[ModelState] | None = None,
    hyper_mode: str = "sample",
    frozen_hypers: tuple[list[HyperParams], list[HyperParams]] | None = None,
) -> BlockResult:
    """Run the chain bank against one censored block.

    Cold starts (no ``prev``) burn for ``cold_burnin`` sweeps; warm starts
    extend the previous end states and burn for ``warm_burnin``.  After
    burn-in, ``keep_per_chain`` samples are retained at ``thin`` spacing,
    each contributing the predictive latent means at the test games plus the
    noise parameters.  With ``hyper_mode="frozen"`` the kernel
    hyperparameters never move.
    """
    from .predict import BlockPredictor  # driver -> predict only here

    if hyper_mode not in ("sample", "frozen"):
        raise ValueError("hyper_mode must be 'sample' or 'frozen'")
    if not block.train_games:
        raise ValueError("empty training data")
    assert all(g.week < block.block_start_week for g in block.train_games)
    if prev is not None and len(prev) != schedule.n_chains:
        raise ValueError("one previous state per chain is required")

    run_config = config
    if hyper_mode == "frozen":
        run_config = dataclasses.replace(config, sample_hypers=False)

    model = run_config.build_model(block.train_games)
    predictor = BlockPredictor(model, block.test_games) if block.test_games else None

    components: list[BankComponent] = []
    end_states: list[ModelState] = []
    rngs: list[np.random.Generator] = []
    for c in range(schedule.n_chains):
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        if prev is None:
            state = init_cold_state(
                model, run_config, rng, hypers=frozen_hypers, rng_seed=seed
            )
            burn = schedule.cold_burnin
        else:
            state = extend_state(prev[c], model, rng)
            burn = schedule.warm_burnin
        runner = ChainRunner(model, state, run_config, rng)
        for _ in range(burn):
            runner.sweep()
        for _ in range(schedule.keep_per_chain):
            for _ in range(schedule.thin):
                runner.sweep()
            if predictor is not None:
                means = predictor.draw_means(runner.state, runner.fu, runner.fv, rng)
            else:
                means = np.zeros((0, 2))
            components.append(
                BankComponent(
                    means=means,
                    likelihood=runner.state.likelihood,
                    hypers_u=tuple(runner.state.hypers_u),
                    hypers_v=tuple(runner.state.hypers_v),
                )
            )
        end_states.append(runner.state)
        rngs.append(rng)
    assert len(components) == schedule.bank_size
    return BlockResult(bank=SampleBank(components), end_states=end_states, rngs=rngs)


# -- serialization ----------------------------------------------------------


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state_dict: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state_dict
    return np.random.Generator(bg)


def state_to_dict(state: ModelState) -> dict:
    def hp_list(hs):
        return [
            {"length_scales": list(h.length_scales), "season_gap_weeks": h.season_gap_weeks}
            for h in hs
        ]

    def wf_dict(wf: WhitenedFunctions):
        return [[v.tolist() for v in row] for row in wf.nu]

    return {
        "members": list(state.members),
        "nu_u": wf_dict(state.whitened_u),
        "nu_v": wf_dict(state.whitened_v),
        "mixing_u": {"chol": state.mixing_u.chol.tolist(), "mean": state.mixing_u.mean.tolist()},
        "mixing_v": {"chol": state.mixing_v.chol.tolist(), "mean": state.mixing_v.mean.tolist()},
        "hypers_u": hp_list(state.hypers_u),
        "hypers_v": hp_list(state.hypers_v),
        "likelihood": {"sigma": state.likelihood.sigma, "rho": state.likelihood.rho},
        "rng_seed": state.rng_seed,
    }


def state_from_dict(d: dict) -> ModelState:
    def hp_list(items):
        return [
            HyperParams(tuple(i["length_scales"]), i["season_gap_weeks"]) for i in items
        ]

    def wf(items):
        return WhitenedFunctions([[np.array(v, dtype=float) for v in row] for row in items])

    return ModelState(
        whitened_u=wf(d["nu_u"]),
        whitened_v=wf(d["nu_v"]),
        mixing_u=MixingState(
            chol=np.array(d["mixing_u"]["chol"]), mean=np.array(d["mixing_u"]["mean"])
        ),
        mixing_v=MixingState(
            chol=np.array(d["mixing_v"]["chol"]), mean=np.array(d["mixing_v"]["mean"])
        ),
        hypers_u=hp_list(d["hypers_u"]),
        hypers_v=hp_list(d["hypers_v"]),
        likelihood=LikelihoodParams(**d["likelihood"]),
        members=tuple(d["members"]),
        rng_seed=d["rng_seed"],
    )


def save_checkpoint(
    path,
    config_payload: dict,
    model: DPMFModel,
    states: list[ModelState],
    rngs: list[np.random.Generator],
    data_path: str,
    epoch_date: str,
    train_max_week: float,
) -> None:
    """Structured-text checkpoint: full chain states plus RNG positions."""
    idx = model.index
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "config": config_payload,
        "data_path": data_path,
        "epoch_date": epoch_date,
        "train_max_week": train_max_week,
        "calendar": {
            "season_boundaries": [list(b) for b in model.calendar.season_boundaries],
            "true_gap_weeks": model.calendar.true_gap_weeks,
        },
        "sites": {
            m: {
                "weeks": [s.raw_week for s in idx.sites[mp]],
                "is_home": [s.is_home for s in idx.sites[mp]],
            }
            for mp, m in enumerate(idx.members)
        },
        "chains": [
            {"state": state_to_dict(s), "rng_state": _rng_state(r)}
            for s, r in zip(states, rngs)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(
            f"checkpoint schema {doc.get('schema_version')} not supported"
        )
    return doc


def save_frozen_hypers(path, hypers_u, hypers_v) -> None:
    """Plain-text frozen hyperparameters, one named parameter per line."""
    lines = []
    for side, hs in (("u", hypers_u), ("v", hypers_v)):
        for kf, hp in enumerate(hs):
            for j, ell in enumerate(hp.length_scales):
                lines.append(f"{side}.k{kf}.scale{j} {ell!r}")
            lines.append(f"{side}.k{kf}.gap {hp.season_gap_weeks!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_frozen_hypers(path, k: int, n_scales: int):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, val = line.split()
            values[name] = float(val)
    out = []
    for side in ("u", "v"):
        hs = []
        for kf in range(k):
            try:
                scales = tuple(
                    values[f"{side}.k{kf}.scale{j}"] for j in range(n_scales)
                )
                gap = values[f"{side}.k{kf}.gap"]
            except KeyError as exc:
                raise ValueError(f"{path}: missing hyperparameter {exc}")
            hs.append(HyperParams(scales, gap))
        out.append(hs)
    return out[0], out[1]
