import math
import os
import tempfile

import pytest

jumpcap = pytest.importorskip("jumpcap")


@pytest.fixture
def params():
    return jumpcap.ModelParams()


def test_defaults_validate(params):
    params.validate()
    assert params.T == 1.0
    assert params.kappa == 0.1


def test_sample_jumps_distribution():
    rng = jumpcap.RngStream(seed=1)
    sizes = []
    for _ in range(20000):
        sizes.extend(jumpcap.sample_jumps(5.0, 0.5, 0.02, rng))
    assert all(z > 0 for z in sizes)
    mean = sum(sizes) / len(sizes)
    assert abs(mean - 2.0) < 3 * 2.0 / math.sqrt(len(sizes))


def test_substream_determinism():
    a = jumpcap.substream(jumpcap.RngStream(seed=3), 5)
    b = jumpcap.substream(jumpcap.RngStream(seed=3), 5)
    assert [a.next_unit() for _ in range(8)] == [b.next_unit() for _ in range(8)]


def test_simulate_invariants(params):
    out = jumpcap.simulate(params, steps=20, batch=16, seed=4, threshold=1.58)
    v, c = out["v"], out["c"]
    assert v.shape == (16, 21)
    assert (v >= 0).all() and (v < 1).all()
    assert (c[:, 1:] >= c[:, :-1]).all()

    again = jumpcap.simulate(params, steps=20, batch=16, seed=4, threshold=1.58)
    assert (again["v"] == v).all()


def test_no_jump_closed_form(params):
    params.lambda1 = 0.0
    params.lambda2 = 0.0
    out = jumpcap.simulate(params, steps=50, batch=1, seed=1, scheme="exact-latent")
    v_want, d_want, _ = jumpcap.no_jump_state(params, params.T)
    assert abs(out["v"][0, -1] - v_want) < 1e-10
    assert abs(out["d"][0, -1] - d_want) < 1e-10


def test_mc_cost_matches_analytic_zero_policy(params):
    est, se = jumpcap.mc_cost(params, steps=50, paths=40000, seed=9, threshold=0.0,
                              scheme="exact-latent")
    want = sum(
        (params.T / 50) * math.exp(-params.r * n * params.T / 50)
        * jumpcap.analytic_mean_demand(params, n * params.T / 50)
        for n in range(50)
    )
    assert abs(est - want) < 3 * se


def test_selector_oracle(params):
    a_star, y0_star, entries = jumpcap.select_threshold_mc(
        params, steps=25, a_min=0.0, a_max=3.0, points=4, paths=3000, seed=2
    )
    assert len(entries) == 4
    assert y0_star == min(e[1] for e in entries)
    assert 0.0 <= a_star <= 3.0


def test_tiny_bsde_solve(params):
    cfg = jumpcap.BsdeTrainConfig()
    cfg.batch = 8
    cfg.aux_batch = 32
    cfg.epochs_terminal = 25
    cfg.epochs_other = 8
    cfg.hidden_width = 8
    cfg.seed = 5
    y0, final_losses = jumpcap.solve_bsde(params, steps=4, threshold=1.58, config=cfg)
    assert math.isfinite(y0)
    assert len(final_losses) == 4


def test_tiny_policy_training(params):
    cfg = jumpcap.ControlTrainConfig()
    cfg.batch = 64
    cfg.epochs = 3
    cfg.hidden_width = 8
    cfg.eval_paths = 400
    cfg.seed = 6
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "policy.bin")
        oos, se, history = jumpcap.train_policy(params, steps=10, config=cfg, save_to=path)
        assert len(history) == 3
        assert oos > 0 and se >= 0
        est, _ = jumpcap.mc_cost_policy_file(params, steps=10, paths=500, seed=7,
                                             policy_file=path)
        assert est > 0
        out = jumpcap.mlp_forward_file(path, [[0.0, 0.4, 0.7, 0.0], [0.5, 0.5, 0.5, 0.5]])
        assert out.shape == (2, 2)
        assert (out > 0).all()


def test_build_grid():
    grid = jumpcap.build_grid(0.0, 3.0, 20)
    assert len(grid) == 20
    assert grid[0] == 0.0 and grid[-1] == 3.0
    assert abs(grid[10] - 1.5789473684210527) < 1e-12
