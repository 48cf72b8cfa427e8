"""Command-line entry point.

Subcommands: ``synth``, ``fit``, ``evaluate-rolling``, ``predict``,
``expert-baseline``.  A run is configured by a JSON file plus flag
overrides; every command writes a metadata record next to its outputs, and
all randomness flows from the single ``seed``, so identical invocations
produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
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
    COLD_START_NU_SD,
    COLD_START_RHO,
    ChainRunner,
    ChainSchedule,
    InferenceConfig,
    load_checkpoint,
    load_frozen_hypers,
    restore_rng,
    run_block,
    save_checkpoint,
    save_frozen_hypers,
    state_from_dict,
)
from .kernels import (
    JITTER_LADDER,
    HyperParams,
    HyperPrior,
    KernelFactor,
    KernelSpec,
    PositiveDefiniteError,
    SeasonCalendar,
)
from .likelihood import NOISE_PRIOR_SD, LikelihoodParams
from .model import (
    MU_PRIOR_SD,
    SIGMA_CHOL_LOGDIAG_SD,
    SIGMA_CHOL_OFFDIAG_SD,
    MixingState,
    softplus_inv,
)
from .predict import (
    BlockPredictor,
    PredictiveMixture,
    aggregate_metrics,
    compute_metrics,
    density_grid,
)
from .samplers import SamplerError

DEFAULT_TIME_BOX = (0.25, 500.0)
DEFAULT_BINARY_BOX = (0.01, 100.0)
VARIANTS = ("pmf", "dpmf_t", "dpmf_h", "dpmf_th")


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration (JSON file merged with flag overrides)."""

    k: int = 2
    variant: str = "dpmf_th"
    seed: int = 0
    schedule: ChainSchedule = field(default_factory=ChainSchedule)
    time_box: tuple[float, float] = DEFAULT_TIME_BOX
    home_box: tuple[float, float] = DEFAULT_BINARY_BOX
    true_gap_weeks: float = 28.0
    share_season_gap: bool = True
    block_weeks: float = 4.0
    window_seasons: int = 3
    score_center: float | None = None
    periodic_period: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    # -- kernel wiring ------------------------------------------------------

    def active_dims(self) -> tuple[int, ...]:
        return {
            "pmf": (0, 1),
            "dpmf_t": (0,),
            "dpmf_h": (1,),
            "dpmf_th": (0, 1),
        }[self.variant]

    def kernel_spec(self) -> KernelSpec:
        factors = [KernelFactor("ard", self.active_dims())]
        if self.periodic_period is not None and 0 in self.active_dims():
            factors.append(KernelFactor("periodic", (0,), self.periodic_period))
        return KernelSpec(tuple(factors))

    def hyper_prior(self) -> HyperPrior:
        spec = self.kernel_spec()
        boxes = []
        for f in spec.factors:
            for d in f.dims:
                if f.family == "periodic":
                    boxes.append(DEFAULT_BINARY_BOX)
                else:
                    boxes.append(self.time_box if d == 0 else self.home_box)
        sampled = self.variant != "pmf"
        return HyperPrior(
            scale_boxes=tuple(boxes),
            gap_box=(0.0, self.true_gap_weeks),
            sampled_scales=tuple(sampled for _ in boxes),
            sampled_gap=self.variant in ("dpmf_t", "dpmf_th"),
        )

    def inference_config(self, calendar: SeasonCalendar) -> InferenceConfig:
        return InferenceConfig(
            k=self.k,
            kernel_spec=self.kernel_spec(),
            calendar=calendar,
            hyper_prior=self.hyper_prior(),
            sample_hypers=True,
            share_season_gap=self.share_season_gap,
            score_center=self.score_center,
        )

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schedule"] = dataclasses.asdict(self.schedule)
        d["time_box"] = list(self.time_box)
        d["home_box"] = list(self.home_box)
        return d

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        d = dict(d)
        if "schedule" in d:
            d["schedule"] = ChainSchedule(**d["schedule"])
        for key in ("time_box", "home_box"):
            if key in d:
                d[key] = tuple(d[key])
        return RunConfig(**d)

    @staticmethod
    def from_file(path) -> "RunConfig":
        with open(path) as fh:
            return RunConfig.from_dict(json.load(fh))


def _config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_metadata(outdir: Path, command: str, cfg: RunConfig, extra: dict) -> None:
    doc = {
        "command": command,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": _config_hash(cfg),
        "design": {
            "jitter_ladder": list(JITTER_LADDER),
            "mu_prior_sd": MU_PRIOR_SD,
            "sigma_chol_logdiag_sd": SIGMA_CHOL_LOGDIAG_SD,
            "sigma_chol_offdiag_sd": SIGMA_CHOL_OFFDIAG_SD,
            "noise_prior_sd": NOISE_PRIOR_SD,
            "cold_start_nu_sd": COLD_START_NU_SD,
            "cold_start_rho": COLD_START_RHO,
            "rmse_pooling": "pooled over both score entries of every game",
            "season_edges": "short final block kept per season",
        },
    }
    doc.update(extra)
    write_json(outdir / "run_metadata.json", doc)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    updates = {}
    for name in ("seed", "k", "variant"):
        val = getattr(args, name, None)
        if val is not None:
            updates[name] = val
    sched = {}
    for flag, fieldname in (
        ("chains", "n_chains"),
        ("cold_burnin", "cold_burnin"),
        ("warm_burnin", "warm_burnin"),
        ("thin", "thin"),
        ("keep", "keep_per_chain"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            sched[fieldname] = val
    if sched:
        updates["schedule"] = dataclasses.replace(cfg.schedule, **sched)
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _full_span_block(games) -> RollingBlock:
    cutoff = max(g.week for g in games) + 1.0
    return RollingBlock(
        season=games[-1].season,
        block_start_week=cutoff,
        block_end_week=cutoff,
        train_games=tuple(games),
        test_games=(),
    )


def _load_frozen(args, cfg: RunConfig):
    if getattr(args, "frozen_hypers", None):
        spec = cfg.kernel_spec()
        frozen = load_frozen_hypers(args.frozen_hypers, cfg.k, spec.n_scales)
        return frozen, "frozen"
    return None, "sample"


# -- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k = args.k
    spec = KernelSpec.ard((0, 1))
    effective_gap = args.effective_gap if args.effective_gap else args.gap_weeks
    hp = HyperParams((args.time_scale, args.home_scale), effective_gap)
    center = args.score_center
    mix_u = MixingState(
        chol=args.amplitude * np.eye(k), mean=np.full(k, np.sqrt(center / k))
    )
    mix_v = MixingState(
        chol=args.amplitude * np.eye(k),
        mean=np.full(k, softplus_inv(np.sqrt(center / k))),
    )
    games, truth = synth_generate(
        n_teams=args.teams,
        n_seasons=args.seasons,
        season_weeks=args.season_weeks,
        gap_weeks=args.gap_weeks,
        kernel_spec=spec,
        hypers_u=[hp] * k,
        hypers_v=[hp] * k,
        mixing_u=mix_u,
        mixing_v=mix_v,
        lik=LikelihoodParams(args.sigma, args.rho),
        seed=args.seed,
    )
    save_games(games, out / "games.csv")
    doc = truth.to_dict()
    doc["generator"] = {
        "teams": args.teams,
        "seasons": args.seasons,
        "season_weeks": args.season_weeks,
        "gap_weeks": args.gap_weeks,
        "effective_gap": effective_gap,
        "k": k,
        "time_scale": args.time_scale,
        "home_scale": args.home_scale,
        "amplitude": args.amplitude,
        "sigma": args.sigma,
        "rho": args.rho,
        "score_center": center,
        "seed": args.seed,
    }
    write_json(out / "truth.json", doc)
    cfg = RunConfig(k=k, seed=args.seed)
    write_metadata(out, "synth", cfg, {"n_games": len(games)})
    print(f"wrote {len(games)} games to {out / 'games.csv'}")
    return 0


# -- fit ----------------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    games = load_games(args.data)
    if not games:
        raise ValueError("no games in the data file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cal = build_calendar(games, cfg.true_gap_weeks)
    icfg = cfg.inference_config(cal)
    frozen, hyper_mode = _load_frozen(args, cfg)

    block = _full_span_block(games)
    result = run_block(
        icfg,
        block,
        cfg.schedule,
        _derive_seed(cfg.seed, 1),
        prev=None,
        hyper_mode=hyper_mode,
        frozen_hypers=frozen,
    )
    model = icfg.build_model(games)
    epoch = min(g.date for g in games).isoformat()
    save_checkpoint(
        out / "checkpoint.json",
        cfg.to_dict(),
        model,
        result.end_states,
        result.rngs,
        str(args.data),
        epoch,
        max(g.week for g in games),
    )
    extra = {"n_games": len(games), "hyper_mode": hyper_mode}
    if args.burn_hypers:
        st0 = result.end_states[0]
        save_frozen_hypers(out / "frozen_hypers.txt", st0.hypers_u, st0.hypers_v)
        _write_hyper_samples(out / "hyper_samples.csv", result.bank, cfg.k)
        extra["frozen_hypers"] = "frozen_hypers.txt"
    write_metadata(out, "fit", cfg, extra)
    print(f"checkpoint written to {out / 'checkpoint.json'}")
    return 0


def _write_hyper_samples(path, bank, k: int) -> None:
    comps = bank.components
    names = []
    for side in ("u", "v"):
        for kf in range(k):
            hp0 = getattr(comps[0], f"hypers_{side}")[kf]
            for j in range(len(hp0.length_scales)):
                names.append(f"{side}.k{kf}.scale{j}")
            names.append(f"{side}.k{kf}.gap")
    with open(path, "w") as fh:
        fh.write("sample," + ",".join(names) + "\n")
        for i, c in enumerate(comps):
            vals = []
            for side in ("u", "v"):
                for hp in getattr(c, f"hypers_{side}"):
                    vals.extend(repr(v) for v in hp.length_scales)
                    vals.append(repr(hp.season_gap_weeks))
            fh.write(f"{i}," + ",".join(vals) + "\n")


# -- evaluate-rolling ----------------------------------------------------------


def cmd_evaluate_rolling(args) -> int:
    cfg = _load_config(args)
    games = load_games(args.data)
    if not games:
        raise ValueError("no games in the data file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cal = build_calendar(games, cfg.true_gap_weeks)
    icfg = cfg.inference_config(cal)
    frozen, hyper_mode = _load_frozen(args, cfg)

    blocks = make_rolling_blocks(games, cfg.block_weeks, cfg.window_seasons)
    rows = []
    skipped = []
    prev_states = None
    prev_block = None
    for bi, block in enumerate(blocks):
        if prev_block is None or block.season != prev_block.season:
            prev_states = None  # cold start at season boundaries
        if not block.train_games:
            skipped.append(
                {"season": block.season, "block_start_week": block.block_start_week}
            )
            prev_states = None
            prev_block = None
            continue
        if prev_states is not None:
            n_prev = len(prev_block.train_games)
            assert block.train_games[:n_prev] == prev_block.train_games, (
                "training set is not an extension of the previous block's"
            )
        result = run_block(
            icfg,
            block,
            cfg.schedule,
            _derive_seed(cfg.seed, 2, bi),
            prev=prev_states,
            hyper_mode=hyper_mode,
            frozen_hypers=frozen,
        )
        mixes = [
            PredictiveMixture.from_bank(result.bank, i)
            for i in range(len(block.test_games))
        ]
        rows.append(
            compute_metrics(
                mixes,
                block.test_games,
                season=block.season,
                block_start_week=block.block_start_week,
                block_end_week=block.block_end_week,
            )
        )
        prev_states = result.end_states
        prev_block = block

    _write_block_report(out / "report_blocks.csv", rows)
    table = _season_table(cfg, rows)
    (out / "report.txt").write_text(table)
    write_metadata(
        out,
        "evaluate-rolling",
        cfg,
        {
            "hyper_mode": hyper_mode,
            "n_blocks": len(rows),
            "skipped_blocks": skipped,
        },
    )
    print(table, end="")
    return 0


def _write_block_report(path, rows) -> None:
    header = (
        "season,block_start_week,block_end_week,n_games,mean_log_prob,"
        "winner_error,rmse,n_expert,expert_winner_error,expert_rmse"
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(
                ",".join(
                    [
                        str(r.season),
                        repr(r.block_start_week),
                        repr(r.block_end_week),
                        str(r.n_games),
                        repr(r.mean_log_prob),
                        repr(r.winner_error),
                        repr(r.rmse),
                        str(r.n_expert),
                        repr(r.expert_winner_error),
                        repr(r.expert_rmse),
                    ]
                )
                + "\n"
            )


def _season_table(cfg: RunConfig, rows) -> str:
    seasons = sorted({r.season for r in rows})
    per = [aggregate_metrics([r for r in rows if r.season == s], s) for s in seasons]
    overall = aggregate_metrics(rows, "all")
    cols = per + [overall]
    label = f"{cfg.variant} K{cfg.k}"
    head = " ".join(f"{str(c.season):>8}" for c in cols)
    lines = [
        "mean predictive log probability",
        f"{'':16} {head}",
        f"{label:16} " + " ".join(f"{c.mean_log_prob:8.3f}" for c in cols),
        "",
        "winner error (%)",
        f"{'':16} {head}",
        f"{label:16} " + " ".join(f"{100 * c.winner_error:8.1f}" for c in cols),
    ]
    if overall.n_expert:
        lines.append(
            f"{'expert':16} "
            + " ".join(f"{100 * c.expert_winner_error:8.1f}" for c in cols)
        )
    lines += [
        "",
        "score RMSE",
        f"{'':16} {head}",
        f"{label:16} " + " ".join(f"{c.rmse:8.2f}" for c in cols),
    ]
    if overall.n_expert:
        lines.append(
            f"{'expert':16} " + " ".join(f"{c.expert_rmse:8.2f}" for c in cols)
        )
    return "\n".join(lines) + "\n"


# -- predict --------------------------------------------------------------------


def _load_fixtures(path, epoch: dt.date) -> list[GameRecord]:
    import csv as _csv

    fixtures = []
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        expected = ("date", "home_team", "away_team")
        if reader.fieldnames is None or tuple(reader.fieldnames) != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                date = dt.date.fromisoformat(row["date"])
                fixtures.append(
                    GameRecord(
                        date=date,
                        season=0,
                        week=(date - epoch).days / 7.0,
                        home_team=row["home_team"].strip(),
                        away_team=row["away_team"].strip(),
                        home_score=0.0,
                        away_score=0.0,
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path} line {lineno}: {exc}")
    if not fixtures:
        raise ValueError(f"{path}: no fixtures")
    return fixtures


def cmd_predict(args) -> int:
    doc = load_checkpoint(args.checkpoint)
    cfg = RunConfig.from_dict(doc["config"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_path = args.data or doc["data_path"]
    epoch = dt.date.fromisoformat(doc["epoch_date"])
    games = load_games(data_path, epoch=epoch)
    cal = SeasonCalendar(
        tuple(tuple(b) for b in doc["calendar"]["season_boundaries"]),
        doc["calendar"]["true_gap_weeks"],
    )
    # Hyperparameters stay frozen at their checkpointed values while the
    # chains are resumed to build the predictive bank.
    icfg = dataclasses.replace(cfg.inference_config(cal), sample_hypers=False)
    model = icfg.build_model(games)

    states = [state_from_dict(c["state"]) for c in doc["chains"]]
    rngs = [restore_rng(c["rng_state"]) for c in doc["chains"]]
    for st in states:
        if st.members != model.index.members or any(
            len(st.whitened_u.nu[0][mp]) != len(model.index.sites[mp])
            for mp in range(model.index.n_members)
        ):
            raise ValueError(
                f"{data_path} does not match the checkpoint's training set"
            )

    fixtures = _load_fixtures(args.fixtures, epoch)
    known = set(model.index.members)
    for f in fixtures:
        for team in (f.home_team, f.away_team):
            if team not in known:
                raise ValueError(f"unknown team {team!r}")

    predictor = BlockPredictor(model, fixtures)
    schedule = cfg.schedule
    per_game: list[list] = [[] for _ in fixtures]
    for state, rng in zip(states, rngs):
        runner = ChainRunner(model, state, icfg, rng)
        for _ in range(schedule.keep_per_chain):
            for _ in range(schedule.thin):
                runner.sweep()
            means = predictor.draw_means(runner.state, runner.fu, runner.fv, rng)
            for i in range(len(fixtures)):
                per_game[i].append(
                    (means[i, 0], means[i, 1], runner.state.likelihood)
                )

    mixtures_doc = []
    for i, f in enumerate(fixtures):
        comps = per_game[i]
        mixtures_doc.append(
            {
                "date": f.date.isoformat(),
                "home_team": f.home_team,
                "away_team": f.away_team,
                "components": [
                    {"y_home": yh, "y_away": ya, "sigma": p.sigma, "rho": p.rho}
                    for yh, ya, p in comps
                ],
            }
        )
        mix = PredictiveMixture(
            means=np.array([(yh, ya) for yh, ya, _ in comps]),
            sigmas=np.array([p.sigma for _, _, p in comps]),
            rhos=np.array([p.rho for _, _, p in comps]),
        )
        axis, dens = density_grid(mix, args.grid_lo, args.grid_hi, args.grid_points)
        with open(out / f"fixture_{i:02d}_density.csv", "w") as fh:
            fh.write("home_score,away_score,density\n")
            for a in range(len(axis)):
                for b in range(len(axis)):
                    fh.write(
                        f"{float(axis[a])!r},{float(axis[b])!r},"
                        f"{float(dens[a, b])!r}\n"
                    )
    write_json(out / "mixtures.json", mixtures_doc)
    write_metadata(
        out,
        "predict",
        cfg,
        {
            "checkpoint": str(args.checkpoint),
            "n_fixtures": len(fixtures),
            "grid": {
                "lo": args.grid_lo,
                "hi": args.grid_hi,
                "points": args.grid_points,
            },
        },
    )
    print(f"wrote predictive mixtures for {len(fixtures)} fixtures to {out}")
    return 0


# -- expert baseline ---------------------------------------------------------


def cmd_expert_baseline(args) -> int:
    games = load_games(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seasons = sorted({g.season for g in games})
    lines = ["season,n_games,winner_error,rmse"]
    totals = [0, 0, 0.0]
    for season in seasons + ["all"]:
        subset = games if season == "all" else [g for g in games if g.season == season]
        n = wrong = 0
        sse = 0.0
        for g in subset:
            pred = expert_prediction(g.home_spread, g.over_under)
            if pred is None:
                continue
            away_pred, home_pred = pred
            n += 1
            if (home_pred > away_pred) != (g.home_score > g.away_score):
                wrong += 1
            sse += (home_pred - g.home_score) ** 2 + (away_pred - g.away_score) ** 2
        err = wrong / n if n else float("nan")
        rmse = float(np.sqrt(sse / (2 * n))) if n else float("nan")
        lines.append(f"{season},{n},{err!r},{rmse!r}")
        if season == "all":
            totals = [n, wrong, sse]
    (out / "expert_baseline.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if totals[0] == 0:
        print("note: no games carried both betting lines")
    return 0


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpmf",
        description="GP-coupled matrix factorization for paired-score prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON run configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--variant", choices=VARIANTS, default=None)
        p.add_argument("--chains", type=int, default=None)
        p.add_argument("--cold-burnin", dest="cold_burnin", type=int, default=None)
        p.add_argument("--warm-burnin", dest="warm_burnin", type=int, default=None)
        p.add_argument("--thin", type=int, default=None)
        p.add_argument("--keep", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--teams", type=int, default=8)
    p.add_argument("--seasons", type=int, default=3)
    p.add_argument("--season-weeks", dest="season_weeks", type=float, default=12.0)
    p.add_argument("--gap-weeks", dest="gap_weeks", type=float, default=16.0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--time-scale", dest="time_scale", type=float, default=3.0)
    p.add_argument("--home-scale", dest="home_scale", type=float, default=0.6)
    p.add_argument("--effective-gap", dest="effective_gap", type=float, default=None)
    p.add_argument("--sigma", type=float, default=6.0)
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--score-center", dest="score_center", type=float, default=100.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit on a full training span")
    add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--burn-hypers", dest="burn_hypers", action="store_true")
    p.add_argument("--frozen-hypers", dest="frozen_hypers", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate-rolling", help="rolling censored evaluation")
    add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frozen-hypers", dest="frozen_hypers", default=None)
    p.set_defaults(func=cmd_evaluate_rolling)

    p = sub.add_parser("predict", help="predictive densities for fixtures")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--fixtures", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", default=None, help="override the checkpointed data path")
    p.add_argument("--grid-lo", dest="grid_lo", type=float, default=60.0)
    p.add_argument("--grid-hi", dest="grid_hi", type=float, default=160.0)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=61)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("expert-baseline", help="betting-line baseline metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expert_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PositiveDefiniteError as exc:
        print(f"error: numerics: {exc}", file=sys.stderr)
    except SamplerError as exc:
        print(f"error: sampler: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: config/data: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
