"""MLP building blocks: init, normalization, dropout, loss, Adam, scheduler,
checkpoints."""

import numpy as np
import pytest

from optmanet import ConfigError, ContractError, GradientError, Tape
from optmanet.network import (
    AdamState,
    MlpSpec,
    PlateauScheduler,
    adam_step,
    init_params,
    load_params,
    mlp_forward,
    mse_loss,
    param_count,
    save_params,
    snapshot,
    wrap_params,
)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


SPEC = MlpSpec(n_inputs=3, n_outputs=4, learning_rate=1e-4, batch_size=25)
TINY = MlpSpec(
    n_inputs=2,
    n_outputs=1,
    n_hidden_layers=1,
    nodes_per_layer=3,
    dropout_p=0.0,
    learning_rate=1e-3,
    batch_size=4,
)


def test_spec_validation():
    with pytest.raises(ConfigError):
        MlpSpec(n_inputs=0, n_outputs=1)
    with pytest.raises(ConfigError):
        MlpSpec(n_inputs=1, n_outputs=1, dropout_p=1.0)
    with pytest.raises(ConfigError):
        MlpSpec(n_inputs=1, n_outputs=1, batch_size=1)
    with pytest.raises(ConfigError):
        MlpSpec(n_inputs=1, n_outputs=1, learning_rate=0.0)


def test_init_xavier_bounds_and_biases():
    params, buffers = init_params(SPEC, seed=0)
    bound_in = np.sqrt(6.0 / (3 + 50))
    bound_h = np.sqrt(6.0 / 100)
    assert np.max(np.abs(params["lin_in.w"])) <= bound_in
    assert np.max(np.abs(params["h0.w"])) <= bound_h
    # draws actually reach toward the bound
    assert np.max(np.abs(params["h0.w"])) > 0.8 * bound_h
    for name in ("lin_in.b", "h0.b", "h1.b", "h2.b", "out.b", "norm.beta"):
        assert np.all(params[name] == 0.0)
    assert np.all(params["norm.gamma"] == 1.0)
    assert np.all(buffers["norm.running_mean"] == 0.0)
    assert np.all(buffers["norm.running_var"] == 1.0)
    assert params["lin_in.w"].shape == (50, 3)
    assert params["out.w"].shape == (4, 50)


def test_init_determinism():
    p1, _ = init_params(SPEC, seed=42)
    p2, _ = init_params(SPEC, seed=42)
    p3, _ = init_params(SPEC, seed=43)
    for k in p1:
        assert np.array_equal(p1[k], p2[k])
    assert not np.array_equal(p1["lin_in.w"], p3["lin_in.w"])


def test_param_count():
    params, _ = init_params(SPEC, seed=0)
    expect = 3 + 3 + (50 * 3 + 50) + 3 * (50 * 50 + 50) + (4 * 50 + 4)
    assert param_count(params) == expect


def test_zeroed_params_give_zero_output():
    params, buffers = init_params(TINY, seed=0)
    zeroed = {k: np.zeros_like(v) for k, v in params.items()}
    t = Tape()
    out = mlp_forward(
        t, TINY, wrap_params(t, zeroed, track=False), buffers,
        np.ones((5, 2)), "eval",
    )
    assert np.array_equal(out.values, np.zeros((5, 1)))


def test_eval_forward_deterministic():
    params, buffers = init_params(SPEC, seed=1)
    x = rng_for(2).normal(size=(6, 3))
    outs = []
    for _ in range(2):
        t = Tape()
        outs.append(
            mlp_forward(t, SPEC, wrap_params(t, params, track=False), buffers,
                        x, "eval").values
        )
    assert np.array_equal(outs[0], outs[1])


def test_train_mode_single_row_rejected():
    params, buffers = init_params(SPEC, seed=1)
    t = Tape()
    with pytest.raises(ContractError):
        mlp_forward(t, SPEC, wrap_params(t, params), buffers,
                    np.ones((1, 3)), "train", rng_for(0))


def test_bad_input_width_rejected():
    params, buffers = init_params(SPEC, seed=1)
    t = Tape()
    with pytest.raises(ContractError):
        mlp_forward(t, SPEC, wrap_params(t, params), buffers,
                    np.ones((4, 2)), "eval")


def test_running_stats_update():
    params, buffers = init_params(TINY, seed=0)
    x = np.array([[0.0, 0.0], [2.0, 4.0]])
    t = Tape()
    mlp_forward(t, TINY, wrap_params(t, params), buffers, x, "train", rng_for(0))
    # momentum 0.1; biased var for normalization, unbiased in the running stat
    assert np.allclose(buffers["norm.running_mean"], [[0.1, 0.2]], rtol=0, atol=1e-15)
    assert np.allclose(buffers["norm.running_var"],
                       [[0.9 + 0.1 * 2.0, 0.9 + 0.1 * 8.0]], rtol=0, atol=1e-14)


def test_dropout_keep_fraction_and_inverted_scaling():
    # mask statistics over 1e4 draws of 100 units each, p = 0.1
    p = 0.1
    rng = rng_for(77)
    masks = (rng.random((10000, 100)) >= p) / (1.0 - p)
    frac = np.mean(masks > 0)
    assert abs(frac - 0.9) < 0.01
    assert abs(np.mean(masks) - 1.0) < 0.01  # inverted scaling keeps expectation


def test_dropout_active_only_in_train_mode():
    spec = MlpSpec(n_inputs=2, n_outputs=1, n_hidden_layers=1,
                   nodes_per_layer=50, dropout_p=0.5, batch_size=4)
    params, buffers = init_params(spec, seed=0)
    x = rng_for(5).normal(size=(6, 2))
    rng = rng_for(123)
    t = Tape()
    out_a = mlp_forward(t, spec, wrap_params(t, params, track=False),
                        dict(buffers), x, "train", rng)
    t = Tape()
    out_b = mlp_forward(t, spec, wrap_params(t, params, track=False),
                        dict(buffers), x, "train", rng)
    assert not np.array_equal(out_a.values, out_b.values)  # fresh mask per pass
    t = Tape()
    ev1 = mlp_forward(t, spec, wrap_params(t, params, track=False),
                      dict(buffers), x, "eval")
    t = Tape()
    ev2 = mlp_forward(t, spec, wrap_params(t, params, track=False),
                      dict(buffers), x, "eval")
    assert np.array_equal(ev1.values, ev2.values)


def test_mse_loss_values_and_grad():
    t = Tape()
    pred = t.tensor(np.zeros((2, 2)))
    loss = mse_loss(t, pred, np.ones((2, 2)))
    assert loss.item() == 1.0
    g = t.backward(loss)
    # d/dpred mean((pred-target)^2) = 2(pred-target)/n
    assert np.allclose(g.wrt(pred), -2.0 * np.ones((2, 2)) / 4.0, rtol=0, atol=1e-16)
    t2 = Tape()
    same = t2.tensor([[3.0], [4.0]])
    assert mse_loss(t2, same, np.array([[3.0], [4.0]])).item() == 0.0


def test_adam_zero_gradient_no_change():
    params = {"w": np.array([[1.0, -2.0]])}
    state = AdamState(params)
    adam_step(params, {"w": np.zeros((1, 2))}, state, lr=0.1)
    assert np.array_equal(params["w"], [[1.0, -2.0]])


def test_adam_first_step_sign_rule():
    params = {"w": np.array([[1.0, 1.0, 1.0]])}
    state = AdamState(params)
    g = np.array([[0.3, -7.0, 1e-4]])
    adam_step(params, {"w": g}, state, lr=0.01)
    delta = params["w"] - 1.0
    # first update is -lr * g/(|g| + eps), i.e. roughly -lr*sign(g)
    assert np.allclose(delta, -0.01 * np.sign(g), rtol=1e-3, atol=1e-6)
    assert state.t == 1


def test_adam_rejects_nonfinite_gradient():
    params = {"w": np.ones((1, 1))}
    state = AdamState(params)
    with pytest.raises(GradientError):
        adam_step(params, {"w": np.array([[np.nan]])}, state, lr=0.1)
    with pytest.raises(GradientError):
        adam_step(params, {}, state, lr=0.1)


def test_scheduler_decreasing_keeps_lr():
    s = PlateauScheduler(lr=1e-3)
    for i in range(30):
        s.step(1.0 / (i + 1))
    assert s.lr == 1e-3


def test_scheduler_halves_on_tenth_identical():
    s = PlateauScheduler(lr=1e-3)
    for i in range(9):
        assert s.step(0.5) == 1e-3
    assert s.step(0.5) == 5e-4


def test_scheduler_floor():
    s = PlateauScheduler(lr=4e-7)
    for _ in range(40):
        s.step(1.0)
    assert s.lr == 1e-7


def test_single_batch_loss_decreases():
    spec = MlpSpec(n_inputs=2, n_outputs=1, dropout_p=0.0,
                   learning_rate=1e-6, batch_size=8)
    params, buffers = init_params(spec, seed=3)
    r = rng_for(9)
    x = r.normal(size=(8, 2))
    y = r.normal(size=(8, 1))
    state = AdamState(params)

    def loss_now():
        t = Tape()
        out = mlp_forward(t, spec, wrap_params(t, params, track=False),
                          dict(buffers), x, "eval")
        return float(np.mean((out.values - y) ** 2))

    before = loss_now()
    t = Tape()
    pt = wrap_params(t, params)
    out = mlp_forward(t, spec, pt, dict(buffers), x, "train", rng_for(0))
    loss = mse_loss(t, out, y)
    grads_by_node = t.backward(loss)
    grads = {k: grads_by_node.wrt(v) for k, v in pt.items()}
    adam_step(params, grads, state, lr=1e-6)
    after = loss_now()
    assert after < before


def test_micro_net_gradients_match_finite_differences():
    params, buffers = init_params(TINY, seed=5)
    r = rng_for(11)
    x = r.normal(size=(4, 2))
    y = r.normal(size=(4, 1))

    def loss_value():
        t = Tape()
        out = mlp_forward(t, TINY, wrap_params(t, params, track=False),
                          dict(buffers), x, "train")
        return float(np.mean((out.values - y) ** 2))

    t = Tape()
    pt = wrap_params(t, params)
    out = mlp_forward(t, TINY, pt, dict(buffers), x, "train")
    g = t.backward(mse_loss(t, out, y))
    step = 1e-5
    worst = 0.0
    for name, arr in params.items():
        ad = g.wrt(pt[name])
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            fp = loss_value()
            arr[idx] = orig - step
            fm = loss_value()
            arr[idx] = orig
            fd = (fp - fm) / (2.0 * step)
            err = abs(ad[idx] - fd) / max(abs(ad[idx]), abs(fd), 1e-6)
            worst = max(worst, err)
    assert worst < 1e-4, f"worst param-grad rel err {worst:.2e}"


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    params, buffers = init_params(SPEC, seed=8)
    buffers["norm.running_mean"] += 0.123456789123456789
    path = tmp_path / "ckpt.json"
    save_params(path, params, buffers)
    p2, b2 = load_params(path)
    assert set(p2) == set(params) and set(b2) == set(buffers)
    for k in params:
        assert np.array_equal(params[k], p2[k]), k
        assert params[k].shape == p2[k].shape
    for k in buffers:
        assert np.array_equal(buffers[k], b2[k]), k


def test_checkpoint_bad_format_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else", "trainable": {}, "buffers": {}}')
    with pytest.raises(ConfigError):
        load_params(path)


def test_snapshot_is_independent_copy():
    params, buffers = init_params(TINY, seed=0)
    ps, bs = snapshot(params, buffers)
    params["out.w"][0, 0] += 1.0
    assert ps["out.w"][0, 0] != params["out.w"][0, 0]
