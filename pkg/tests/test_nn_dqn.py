import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import analytic_grads, batch_loss, fd, random_batch, rel_err
from vranpool import dqn
from vranpool.nn import Adam, Mlp, ShapeError
from vranpool.relation import RelationNet


def nets(seed=0, d=8, h=6, n_actions=4):
    rn = RelationNet(d_state=d, hidden=h, rng=seed)
    net = Mlp(d, [h], n_actions, rng=seed + 1)
    target = Mlp(d, [h], n_actions, rng=seed + 2)
    return rn, net, target


@pytest.mark.parametrize("x, y", [(0.5, 0.125), (-2.0, 1.5), (1.0, 0.5), (0.0, 0.0)])
def test_smooth_l1_values(x, y):
    assert dqn.smooth_l1(x) == pytest.approx(y)


@given(st.floats(-5, 5))
def test_smooth_l1_grad_matches_fd(x):
    if abs(abs(x) - 1) < 1e-4:
        return
    h = 1e-6
    num = (dqn.smooth_l1(x + h) - dqn.smooth_l1(x - h)) / (2 * h)
    assert dqn.smooth_l1_grad(x) == pytest.approx(num, abs=1e-6)


def test_td_target():
    assert dqn.td_target(-0.3, 5.0, 0.0) == -0.3
    assert dqn.td_target(-0.3, 5.0, 0.5) == pytest.approx(2.2)


def test_epsilon_schedule():
    assert dqn.epsilon(0, 0.05, 100) == 1.0
    assert dqn.epsilon(100, 0.05, 100) == pytest.approx(0.05 + 0.95 / math.e)
    assert dqn.epsilon(10**6, 0.05, 100) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        dqn.epsilon(-1, 0.05, 100)


def tr(k, n=1):
    return dqn.Transition(np.full(3, float(k)), 1 + k % 4, -k / 10, np.full((n, 4), k / 10))


def test_replay_fifo_eviction():
    buf = dqn.ReplayBuffer(3, 4, 3)
    for k in range(5):
        buf.push(tr(k, 1 + k % 4))
    assert len(buf) == 3
    assert [buf[i].a for i in range(3)] == [1 + k % 4 for k in (2, 3, 4)]
    assert [buf[i].s[0] for i in range(3)] == [2.0, 3.0, 4.0]
    assert buf[0].features.shape == (3, 4)
    with pytest.raises(IndexError):
        buf[3]


def test_replay_capacity_and_shape():
    buf = dqn.ReplayBuffer(10, 2, 3)
    with pytest.raises(ShapeError):
        buf.push(tr(0, 3))
    with pytest.raises(ValueError):
        dqn.ReplayBuffer(0, 2, 3)
    for k in range(4):
        buf.push(tr(k))
    idx = buf.sample(4, np.random.default_rng(0))
    assert sorted(idx.tolist()) == [0, 1, 2, 3]


def test_mlp_backward_finite_differences():
    rng = np.random.default_rng(0)
    mlp = Mlp(5, [7, 6], 3, rng=1)
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((4, 3))
    y, cache = mlp.forward(x)
    dx, grads = mlp.backward(cache, w)
    for name, p in mlp.params.items():
        for _ in range(3):
            idx = tuple(int(rng.integers(k)) for k in p.shape)
            num = fd(lambda: float((mlp.forward(x)[0] * w).sum()), p, idx)
            assert rel_err(grads[name][idx], num) < 1e-5, name
    idx = (1, 2)
    num = fd(lambda: float((mlp.forward(x)[0] * w).sum()), x, idx)
    assert rel_err(dx[idx], num) < 1e-5


def test_mlp_shapes_and_copy():
    a, b = Mlp(3, [4], 2, rng=0), Mlp(3, [4], 2, rng=1)
    with pytest.raises(ShapeError):
        a.forward(np.zeros((2, 4)))
    with pytest.raises(ShapeError):
        a.copy_from(Mlp(3, [5], 2))
    b.copy_from(a)
    x = np.ones((1, 3))
    np.testing.assert_array_equal(a.forward(x)[0], b.forward(x)[0])


def test_adam_first_step_is_lr_times_sign():
    p = {"w": np.array([1.0, -1.0, 2.0])}
    opt = Adam(p, lr=0.1)
    opt.step({"w": np.array([3.0, -0.5, 0.0])})
    np.testing.assert_allclose(p["w"], [0.9, -0.9, 2.0], atol=1e-6)


def test_train_step_gradient_check():
    rn, net, target = nets()
    rng = np.random.default_rng(3)
    feats, counts, actions, rewards = random_batch(rng, 6, 4, 4)
    loss, grads = analytic_grads(rn, net, target, feats, counts, actions, rewards)
    assert loss == pytest.approx(batch_loss(rn, net, target, feats, counts, actions, rewards))
    params = {**{"rn." + k: v for k, v in rn.params.items()}, **{"dqn." + k: v for k, v in net.params.items()}}
    assert set(grads) == set(params)
    for name, p in params.items():
        for _ in range(3):
            idx = tuple(int(rng.integers(k)) for k in p.shape)
            num = fd(lambda: batch_loss(rn, net, target, feats, counts, actions, rewards), p, idx)
            assert rel_err(grads[name][idx], num) < 1e-4, name


def test_zero_loss_batch_gives_zero_gradient():
    rn, net, target = nets()
    feats, counts, actions, _ = random_batch(np.random.default_rng(4), 5, 4, 4)
    s, _ = rn.forward_batch(feats, counts)
    q, _ = net.forward(s)
    rewards = q[np.arange(5), actions - 1]
    loss, grads = analytic_grads(rn, net, target, feats, counts, actions, rewards)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_single_sample_batch():
    rn, net, target = nets()
    feats, counts, actions, rewards = random_batch(np.random.default_rng(5), 1, 4, 4, counts=[1])
    loss, grads = analytic_grads(rn, net, target, feats, counts, actions, rewards)
    assert math.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads.values())


def test_train_step_errors():
    rn, net, target = nets()
    feats, counts, actions, rewards = random_batch(np.random.default_rng(6), 3, 4, 4)
    with pytest.raises(ValueError):
        dqn.train_step(rn, net, target, feats, counts, actions + 4, rewards, Adam({}))
    with pytest.raises(ValueError):
        dqn.train_step(rn, net, target, feats[:0], counts[:0], actions[:0], rewards[:0], Adam({}))
    with pytest.raises(FloatingPointError):
        dqn.train_step(rn, net, target, feats, counts, actions, rewards * np.nan, Adam({}))


def test_train_step_reduces_loss():
    rn, net, target = nets()
    feats, counts, actions, rewards = random_batch(np.random.default_rng(7), 16, 4, 4)
    params = {**{"rn." + k: v for k, v in rn.params.items()}, **{"dqn." + k: v for k, v in net.params.items()}}
    opt = Adam(params, lr=1e-2)
    first = dqn.train_step(rn, net, target, feats, counts, actions, rewards, opt)
    for _ in range(50):
        last = dqn.train_step(rn, net, target, feats, counts, actions, rewards, opt)
    assert last < 0.1 * first


def test_sync_target():
    _, net, target = nets()
    x = np.ones((1, 8))
    assert not np.array_equal(net.forward(x)[0], target.forward(x)[0])
    dqn.sync_target(net, target)
    np.testing.assert_array_equal(net.forward(x)[0], target.forward(x)[0])
    assert all(target.params[k] is not net.params[k] for k in net.params)
    dqn.sync_target(net, target)
    np.testing.assert_array_equal(net.forward(x)[0], target.forward(x)[0])


def test_target_is_inert_at_gamma_zero():
    rn, net, target = nets()
    other = Mlp(8, [6], 4, rng=99)
    batch = random_batch(np.random.default_rng(8), 6, 4, 4)
    la, ga = analytic_grads(rn, net, target, *batch)
    lb, gb = analytic_grads(rn, net, other, *batch)
    assert la == lb
    for k in ga:
        np.testing.assert_array_equal(ga[k], gb[k])
    # with gamma > 0 the target does matter
    lc, _ = analytic_grads(rn, net, other, *batch, gamma=0.5)
    assert lc != la
