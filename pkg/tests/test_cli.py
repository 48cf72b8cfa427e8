import json
from pathlib import Path

import numpy as np
import pytest

from dpmf.cli import RunConfig, main
from dpmf.data import load_games
from dpmf.driver import load_checkpoint, load_frozen_hypers

SMALL = [
    "--chains", "1", "--cold-burnin", "5", "--warm-burnin", "2",
    "--thin", "1", "--keep", "3",
]


def run_cli(*args) -> int:
    return main([str(a) for a in args])


def dir_bytes(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    rc = run_cli(
        "synth", "--out", d, "--seed", 3, "--teams", 4, "--seasons", 2,
        "--season-weeks", 8, "--gap-weeks", 10, "--k", 1,
    )
    assert rc == 0
    return d


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory, synth_dir):
    d = tmp_path_factory.mktemp("fit")
    rc = run_cli(
        "fit", "--data", synth_dir / "games.csv", "--out", d,
        "--seed", 7, "--k", 1, *SMALL, "--burn-hypers",
    )
    assert rc == 0
    return d


# -- synth ---------------------------------------------------------------------


def test_synth_outputs(synth_dir):
    games = load_games(synth_dir / "games.csv")
    assert len(games) == 2 * 12  # 4 teams, ordered pairs, 2 seasons
    truth = json.loads((synth_dir / "truth.json").read_text())
    assert set(truth["teams"]) == {g.home_team for g in games} | {
        g.away_team for g in games
    }
    meta = json.loads((synth_dir / "run_metadata.json").read_text())
    assert meta["command"] == "synth"


def test_synth_deterministic(tmp_path, synth_dir):
    d2 = tmp_path / "again"
    rc = run_cli(
        "synth", "--out", d2, "--seed", 3, "--teams", 4, "--seasons", 2,
        "--season-weeks", 8, "--gap-weeks", 10, "--k", 1,
    )
    assert rc == 0
    assert dir_bytes(d2) == dir_bytes(synth_dir)


# -- fit ------------------------------------------------------------------------


def test_fit_checkpoint_loadable(fit_dir, synth_dir):
    doc = load_checkpoint(fit_dir / "checkpoint.json")
    assert doc["schema_version"] == 1
    assert len(doc["chains"]) == 1
    assert doc["data_path"].endswith("games.csv")
    games = load_games(synth_dir / "games.csv")
    assert doc["train_max_week"] == pytest.approx(max(g.week for g in games))


def test_fit_seed_reruns_byte_identical(tmp_path, synth_dir):
    outs = []
    for name in ("one", "two"):
        d = tmp_path / name
        rc = run_cli(
            "fit", "--data", synth_dir / "games.csv", "--out", d,
            "--seed", 7, "--k", 1, *SMALL,
        )
        assert rc == 0
        outs.append(dir_bytes(d))
    assert outs[0] == outs[1]


def test_fit_pmf_variant_emits_pinned_scales(tmp_path, synth_dir):
    d = tmp_path / "pmf"
    rc = run_cli(
        "fit", "--data", synth_dir / "games.csv", "--out", d,
        "--seed", 1, "--k", 1, "--variant", "pmf", *SMALL, "--burn-hypers",
    )
    assert rc == 0
    u, v = load_frozen_hypers(d / "frozen_hypers.txt", k=1, n_scales=2)
    for hp in (*u, *v):
        assert hp.length_scales == (500.0, 100.0)  # static-limit pins
        assert hp.season_gap_weeks == 28.0


def test_fit_burn_hypers_writes_samples(fit_dir):
    lines = (fit_dir / "hyper_samples.csv").read_text().strip().splitlines()
    assert lines[0].startswith("sample,u.k0.scale0")
    assert len(lines) == 1 + 3  # keep_per_chain samples


def test_fit_frozen_hypers_input_round_trip(tmp_path, synth_dir, fit_dir):
    d = tmp_path / "refit"
    rc = run_cli(
        "fit", "--data", synth_dir / "games.csv", "--out", d,
        "--seed", 2, "--k", 1, *SMALL,
        "--frozen-hypers", fit_dir / "frozen_hypers.txt",
    )
    assert rc == 0
    doc = load_checkpoint(d / "checkpoint.json")
    burned = load_frozen_hypers(fit_dir / "frozen_hypers.txt", k=1, n_scales=2)
    got = doc["chains"][0]["state"]["hypers_u"][0]
    assert tuple(got["length_scales"]) == burned[0][0].length_scales


# -- evaluate-rolling --------------------------------------------------------------


@pytest.fixture(scope="module")
def eval_dir(tmp_path_factory, synth_dir):
    d = tmp_path_factory.mktemp("eval")
    rc = run_cli(
        "evaluate-rolling", "--data", synth_dir / "games.csv", "--out", d,
        "--seed", 11, "--k", 1, *SMALL,
    )
    assert rc == 0
    return d


def test_evaluate_report_structure(eval_dir, synth_dir):
    rows = (eval_dir / "report_blocks.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    assert header[:4] == ["season", "block_start_week", "block_end_week", "n_games"]
    assert len(rows) > 2
    meta = json.loads((eval_dir / "run_metadata.json").read_text())
    # the first block of the dataset has no past to train on
    assert len(meta["skipped_blocks"]) >= 1
    games = load_games(synth_dir / "games.csv")
    n_scored = sum(int(r.split(",")[3]) for r in rows[1:])
    n_skipped_games = sum(
        1
        for g in games
        if any(
            g.season == s["season"]
            and s["block_start_week"] <= g.week < s["block_start_week"] + 4.0
            for s in meta["skipped_blocks"]
        )
    )
    assert n_scored == len(games) - n_skipped_games
    table = (eval_dir / "report.txt").read_text()
    assert "mean predictive log probability" in table
    assert "winner error" in table


def test_evaluate_deterministic(tmp_path, synth_dir, eval_dir):
    d2 = tmp_path / "eval2"
    rc = run_cli(
        "evaluate-rolling", "--data", synth_dir / "games.csv", "--out", d2,
        "--seed", 11, "--k", 1, *SMALL,
    )
    assert rc == 0
    assert dir_bytes(d2) == dir_bytes(eval_dir)


def test_evaluate_includes_expert_when_lines_present(tmp_path, synth_dir):
    # copy the synthetic games and attach betting lines to every game
    games = load_games(synth_dir / "games.csv")
    import dataclasses

    from dpmf.data import save_games

    lined = [
        dataclasses.replace(
            g,
            home_spread=round(g.away_score - g.home_score) + 0.5,
            over_under=round(g.home_score + g.away_score) + 0.5,
        )
        for g in games
    ]
    data = tmp_path / "lined.csv"
    save_games(lined, data)
    out = tmp_path / "eval_lined"
    rc = run_cli(
        "evaluate-rolling", "--data", data, "--out", out,
        "--seed", 11, "--k", 1, *SMALL,
    )
    assert rc == 0
    assert "expert" in (out / "report.txt").read_text()
    rows = (out / "report_blocks.csv").read_text().strip().splitlines()[1:]
    assert all(int(r.split(",")[7]) == int(r.split(",")[3]) for r in rows)


# -- predict -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def predict_dir(tmp_path_factory, synth_dir, fit_dir):
    games = load_games(synth_dir / "games.csv")
    d = tmp_path_factory.mktemp("predict")
    fixtures = d / "fixtures.csv"
    g0 = games[len(games) // 2]
    fixtures.write_text(
        "date,home_team,away_team\n"
        f"{g0.date.isoformat()},{g0.home_team},{g0.away_team}\n"
        f"2004-06-01,{g0.away_team},{g0.home_team}\n"
    )
    out = d / "out"
    rc = run_cli(
        "predict", "--checkpoint", fit_dir / "checkpoint.json",
        "--fixtures", fixtures, "--out", out,
        "--grid-lo", 50, "--grid-hi", 150, "--grid-points", 41,
    )
    assert rc == 0
    return d


def test_predict_outputs(predict_dir, synth_dir):
    out = predict_dir / "out"
    doc = json.loads((out / "mixtures.json").read_text())
    assert len(doc) == 2
    comps = doc[0]["components"]
    assert len(comps) == 3  # keep_per_chain from the fit schedule
    means = np.array([[c["y_home"], c["y_away"]] for c in comps])
    # fixture at a training site: density centered in the training score range
    games = load_games(synth_dir / "games.csv")
    scores = np.array([[g.home_score, g.away_score] for g in games])
    assert np.all(np.abs(means.mean(axis=0) - scores.mean()) < 40.0)
    grid = (out / "fixture_00_density.csv").read_text().strip().splitlines()
    assert grid[0] == "home_score,away_score,density"
    assert len(grid) == 1 + 41 * 41


def test_predict_grid_integrates_to_box_mass(predict_dir):
    out = predict_dir / "out"
    doc = json.loads((out / "mixtures.json").read_text())
    from scipy.stats import multivariate_normal

    rows = (out / "fixture_00_density.csv").read_text().strip().splitlines()[1:]
    vals = np.array([[float(x) for x in r.split(",")] for r in rows])
    n = 41
    axis = np.unique(vals[:, 0])
    dens = vals[:, 2].reshape(n, n)
    integral = np.trapezoid(np.trapezoid(dens, axis, axis=1), axis)
    mass = 0.0
    for c in doc[0]["components"]:
        cov = c["sigma"] ** 2 * np.array([[1.0, c["rho"]], [c["rho"], 1.0]])
        mvn = multivariate_normal(mean=[c["y_home"], c["y_away"]], cov=cov)
        lo, hi = axis[0], axis[-1]
        mass += (
            mvn.cdf([hi, hi]) - mvn.cdf([lo, hi]) - mvn.cdf([hi, lo]) + mvn.cdf([lo, lo])
        )
    mass /= len(doc[0]["components"])
    assert integral == pytest.approx(mass, abs=0.02)


def test_predict_deterministic(tmp_path, predict_dir, fit_dir):
    out2 = tmp_path / "again"
    rc = run_cli(
        "predict", "--checkpoint", fit_dir / "checkpoint.json",
        "--fixtures", predict_dir / "fixtures.csv", "--out", out2,
        "--grid-lo", 50, "--grid-hi", 150, "--grid-points", 41,
    )
    assert rc == 0
    assert dir_bytes(out2) == dir_bytes(predict_dir / "out")


def test_predict_unknown_team_named_in_error(tmp_path, fit_dir, capsys):
    fixtures = tmp_path / "f.csv"
    fixtures.write_text("date,home_team,away_team\n2004-01-01,NOPE,T00\n")
    rc = run_cli(
        "predict", "--checkpoint", fit_dir / "checkpoint.json",
        "--fixtures", fixtures, "--out", tmp_path / "o",
    )
    assert rc == 2
    assert "NOPE" in capsys.readouterr().err


# -- expert baseline -----------------------------------------------------------------


def test_expert_baseline_deterministic_recompute(tmp_path):
    from conftest import make_game
    from dpmf.data import save_games

    games = [
        make_game(0, "A", "B", 107.0, 103.0, home_spread=-4.0, over_under=210.0),
        make_game(3, "B", "A", 95.0, 99.0, home_spread=2.0, over_under=200.0),
        make_game(6, "A", "B", 101.0, 99.0),
    ]
    data = tmp_path / "lines.csv"
    save_games(games, data)
    out = tmp_path / "expert"
    assert run_cli("expert-baseline", "--data", data, "--out", out) == 0
    rows = (out / "expert_baseline.csv").read_text().strip().splitlines()
    all_row = [r for r in rows if r.startswith("all,")][0]
    _, n, err, rmse = all_row.split(",")
    # independent recomputation from the line system
    preds = [(103.0, 107.0), (101.0, 99.0)]  # (away, home)
    wrong = sum(
        ((h > a) != (g.home_score > g.away_score))
        for (a, h), g in zip(preds, games[:2])
    )
    sse = sum(
        (h - g.home_score) ** 2 + (a - g.away_score) ** 2
        for (a, h), g in zip(preds, games[:2])
    )
    assert int(n) == 2
    assert float(err) == pytest.approx(wrong / 2)
    assert float(rmse) == pytest.approx(np.sqrt(sse / 4))


# -- config handling --------------------------------------------------------------


def test_config_file_with_overrides(tmp_path, synth_dir):
    cfg_path = tmp_path / "cfg.json"
    cfg = RunConfig(k=1, variant="dpmf_t", seed=4)
    cfg_dict = cfg.to_dict()
    cfg_dict["schedule"].update(
        n_chains=1, cold_burnin=3, warm_burnin=2, thin=1, keep_per_chain=2
    )
    cfg_path.write_text(json.dumps(cfg_dict))
    out = tmp_path / "fitcfg"
    rc = run_cli(
        "fit", "--config", cfg_path, "--data", synth_dir / "games.csv",
        "--out", out, "--variant", "dpmf_h",
    )
    assert rc == 0
    meta = json.loads((out / "run_metadata.json").read_text())
    assert meta["config"]["variant"] == "dpmf_h"  # flag beats file
    assert meta["config"]["k"] == 1
    assert meta["config"]["schedule"]["keep_per_chain"] == 2


def test_missing_data_file_exit_code(tmp_path, capsys):
    rc = run_cli("fit", "--data", tmp_path / "nope.csv", "--out", tmp_path / "o")
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(variant="bogus")
    with pytest.raises(ValueError):
        RunConfig(k=0)
    with pytest.raises(ValueError):
        RunConfig(seed=-1)
