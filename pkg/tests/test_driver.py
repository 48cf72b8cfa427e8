import json

import numpy as np
import pytest

from conftest import NO_SEASONS, make_game, toy_games
from dpmf.data import RollingBlock
from dpmf.driver import (
    ChainRunner,
    ChainSchedule,
    InferenceConfig,
    extend_state,
    init_cold_state,
    load_frozen_hypers,
    restore_rng,
    run_block,
    save_frozen_hypers,
    state_from_dict,
    state_to_dict,
    sweep,
)
from dpmf.kernels import HyperParams, HyperPrior, KernelSpec


def make_config(k=1, sample_hypers=True, share_gap=True, dims=(0, 1), cal=NO_SEASONS):
    boxes = tuple((0.25, 500.0) if d == 0 else (0.01, 100.0) for d in dims)
    return InferenceConfig(
        k=k,
        kernel_spec=KernelSpec.ard(dims),
        calendar=cal,
        hyper_prior=HyperPrior(
            scale_boxes=boxes,
            gap_box=(0.0, cal.true_gap_weeks),
            sampled_gap=bool(cal.season_boundaries),
        ),
        sample_hypers=sample_hypers,
        share_season_gap=share_gap,
    )


def test_schedule_defaults_match_protocol():
    s = ChainSchedule()
    assert (s.n_chains, s.cold_burnin, s.warm_burnin, s.thin, s.keep_per_chain) == (
        10,
        1000,
        100,
        4,
        100,
    )
    assert s.bank_size == 1000
    with pytest.raises(ValueError):
        ChainSchedule(n_chains=0)


def test_cold_start_initialization(rng):
    games = toy_games(rng, n_teams=4, n_games=15)
    config = make_config(k=2)
    model = config.build_model(games)
    state = init_cold_state(model, config, np.random.default_rng(0))
    assert np.allclose(state.mixing_u.chol, np.eye(2))
    c_u, c_v = model.mu_centers()
    assert np.allclose(state.mixing_u.mean, c_u)
    assert np.allclose(state.mixing_v.mean, c_v)
    assert state.likelihood.rho == 0.2
    assert state.likelihood.sigma == pytest.approx(model.empirical_score_sd())
    nu = state.whitened_u.all_values()
    assert np.std(nu) < 0.3  # drawn at sd 0.1
    assert state.members == model.index.members


def test_sweep_deterministic_trajectory(rng):
    games = toy_games(rng, n_teams=3, n_games=10)
    config = make_config(k=1)
    model = config.build_model(games)

    def run(seed):
        state = init_cold_state(model, config, np.random.default_rng(seed))
        r = np.random.default_rng(seed + 1)
        for _ in range(5):
            state = sweep(state, model, config, r)
        return json.dumps(state_to_dict(state), sort_keys=True)

    assert run(9) == run(9)
    assert run(9) != run(10)


def test_runner_caches_stay_consistent(rng):
    # After many sweeps (hyper sampling included), the incremental unwhitened
    # caches must agree with a from-scratch recomputation.
    games = toy_games(rng, n_teams=4, n_games=20)
    config = make_config(k=2)
    model = config.build_model(games)
    state = init_cold_state(model, config, np.random.default_rng(1))
    runner = ChainRunner(model, state, config, np.random.default_rng(2))
    for _ in range(10):
        runner.sweep()
    fu = model.unwhitened(runner.state, "u")
    fv = model.unwhitened(runner.state, "v")
    assert np.max(np.abs(runner.fu - fu)) < 1e-10
    assert np.max(np.abs(runner.fv - fv)) < 1e-10


def test_unobserved_model_prior_moments(rng):
    games = toy_games(rng, n_teams=3, n_games=10)
    config = make_config(k=1, sample_hypers=False)
    model = config.build_model(games, observed=False)
    state = init_cold_state(model, config, np.random.default_rng(3))
    runner = ChainRunner(model, state, config, np.random.default_rng(4))
    pool = []
    for _ in range(300):
        runner.sweep()
        pool.append(runner.state.whitened_u.all_values())
    pool = np.concatenate(pool)
    assert abs(pool.mean()) < 0.1
    assert abs(pool.std() - 1.0) < 0.1


# -- warm starts -----------------------------------------------------------------


def test_extend_state_preserves_function_values(rng):
    games = toy_games(rng, n_teams=3, n_games=14)
    config = make_config(k=1)
    small = config.build_model(games[:8])
    big = config.build_model(games)
    state = init_cold_state(small, config, np.random.default_rng(5))
    fu_small = small.unwhitened(state, "u")
    grown = extend_state(state, big, np.random.default_rng(6))
    fu_big = big.unwhitened(grown, "u")
    for member in small.index.members:
        mp_s = small.index.member_pos[member]
        mp_b = big.index.member_pos[member]
        n_old = len(small.index.sites[mp_s])
        old_rows = small.index.rows[mp_s]
        new_rows = big.index.rows[mp_b][:n_old]
        # exact in real arithmetic; tolerance covers blocked-Cholesky
        # rounding and jitter-level differences between the two Gram sizes
        assert np.allclose(fu_small[old_rows, 0], fu_big[new_rows, 0], atol=1e-8)


def test_extend_state_handles_new_member(rng):
    games = toy_games(rng, n_teams=3, n_games=8)
    extra = make_game(80, "NEW", "T0")
    config = make_config(k=1)
    small = config.build_model(games)
    big = config.build_model(games + [extra])
    state = init_cold_state(small, config, np.random.default_rng(7))
    grown = extend_state(state, big, np.random.default_rng(8))
    mp = big.index.member_pos["NEW"]
    assert len(grown.whitened_u.nu[0][mp]) == 1


def test_extend_state_rejects_shrunk_training_set(rng):
    games = toy_games(rng, n_teams=3, n_games=14)
    config = make_config(k=1)
    big = config.build_model(games)
    small = config.build_model(games[:6])
    state = init_cold_state(big, config, np.random.default_rng(9))
    with pytest.raises(ValueError, match="shrank"):
        extend_state(state, small, np.random.default_rng(10))


# -- run_block ---------------------------------------------------------------------


def _block(games, start, end, season=1):
    train = tuple(g for g in games if g.week < start)
    test = tuple(g for g in games if start <= g.week < end)
    return RollingBlock(
        season=season,
        block_start_week=start,
        block_end_week=end,
        train_games=train,
        test_games=test,
    )


def test_run_block_bank_bookkeeping(rng):
    games = toy_games(rng, n_teams=3, n_games=16, span_days=100)
    block = _block(games, 10.0, 14.0)
    config = make_config(k=1, sample_hypers=False)
    schedule = ChainSchedule(
        n_chains=1, cold_burnin=2, warm_burnin=1, thin=1, keep_per_chain=3
    )
    result = run_block(config, block, schedule, seed=0)
    assert len(result.bank) == 3
    assert result.bank.components[0].means.shape == (len(block.test_games), 2)
    assert len(result.end_states) == 1


def test_run_block_requires_training_data(rng):
    games = toy_games(rng, n_teams=3, n_games=6)
    block = _block(games, 0.0, 99.0)  # nothing strictly earlier
    config = make_config(k=1)
    with pytest.raises(ValueError, match="empty training data"):
        run_block(config, block, ChainSchedule(n_chains=1, cold_burnin=1,
                                               warm_burnin=1, thin=1,
                                               keep_per_chain=1), seed=0)


def test_run_block_frozen_hypers_never_move(rng):
    games = toy_games(rng, n_teams=3, n_games=16, span_days=100)
    block = _block(games, 10.0, 14.0)
    config = make_config(k=1, sample_hypers=True)
    frozen = ([HyperParams((7.0, 0.5), 28.0)], [HyperParams((9.0, 0.7), 28.0)])
    schedule = ChainSchedule(
        n_chains=2, cold_burnin=2, warm_burnin=1, thin=1, keep_per_chain=4
    )
    result = run_block(
        config, block, schedule, seed=1, hyper_mode="frozen", frozen_hypers=frozen
    )
    assert len(result.bank) == 8
    for comp in result.bank.components:
        assert comp.hypers_u == tuple(frozen[0])
        assert comp.hypers_v == tuple(frozen[1])


def test_run_block_sampled_hypers_do_move(rng):
    games = toy_games(rng, n_teams=3, n_games=16, span_days=100)
    block = _block(games, 10.0, 14.0)
    config = make_config(k=1, sample_hypers=True)
    schedule = ChainSchedule(
        n_chains=1, cold_burnin=2, warm_burnin=1, thin=1, keep_per_chain=4
    )
    result = run_block(config, block, schedule, seed=2, hyper_mode="sample")
    seen = {c.hypers_u for c in result.bank.components}
    assert len(seen) > 1


def test_run_block_warm_start_uses_prev_states(rng):
    games = toy_games(rng, n_teams=3, n_games=20, span_days=120)
    config = make_config(k=1, sample_hypers=False)
    schedule = ChainSchedule(
        n_chains=1, cold_burnin=3, warm_burnin=2, thin=1, keep_per_chain=2
    )
    b1 = _block(games, 8.0, 12.0)
    b2 = _block(games, 12.0, 16.0)
    r1 = run_block(config, b1, schedule, seed=3)
    r2 = run_block(config, b2, schedule, seed=4, prev=r1.end_states)
    assert len(r2.bank) == 2
    with pytest.raises(ValueError):
        run_block(config, b2, schedule, seed=5, prev=r1.end_states[:0])


# -- serialization ------------------------------------------------------------------


def test_state_dict_roundtrip(rng):
    games = toy_games(rng, n_teams=3, n_games=10)
    config = make_config(k=2)
    model = config.build_model(games)
    state = init_cold_state(model, config, np.random.default_rng(11))
    back = state_from_dict(json.loads(json.dumps(state_to_dict(state))))
    assert back.members == state.members
    assert back.likelihood == state.likelihood
    assert back.hypers_u == state.hypers_u
    assert np.array_equal(back.mixing_u.chol, state.mixing_u.chol)
    for kf in range(2):
        for mp in range(model.index.n_members):
            assert np.array_equal(
                back.whitened_u.nu[kf][mp], state.whitened_u.nu[kf][mp]
            )


def test_rng_state_roundtrip():
    rng = np.random.default_rng(12)
    rng.standard_normal(10)
    snapshot = json.loads(json.dumps(rng.bit_generator.state))
    clone = restore_rng(snapshot)
    assert np.array_equal(rng.standard_normal(5), clone.standard_normal(5))


def test_frozen_hypers_file_roundtrip(tmp_path):
    hypers_u = [HyperParams((3.0, 0.5), 12.0), HyperParams((7.0, 1.5), 12.0)]
    hypers_v = [HyperParams((2.0, 0.4), 12.0), HyperParams((9.0, 2.5), 12.0)]
    path = tmp_path / "frozen.txt"
    save_frozen_hypers(path, hypers_u, hypers_v)
    u, v = load_frozen_hypers(path, k=2, n_scales=2)
    assert u == hypers_u and v == hypers_v
    with pytest.raises(ValueError, match="missing"):
        load_frozen_hypers(path, k=3, n_scales=2)
