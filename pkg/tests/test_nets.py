import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marlab.nets import (
    AdamState,
    Mlp,
    NumericsError,
    adam_step,
    grad_norm_sq,
    load_network,
    save_network,
    soft_update,
)
from oracles import (
    fd_input_grads,
    fd_param_grads,
    max_rel_error,
    mlp_forward_oracle,
    random_net_batch,
)


def zeroed(net):
    for p in net.parameters():
        p[...] = 0.0
    return net


class TestForward:
    def test_zero_parameters_give_zero_output(self):
        net = zeroed(Mlp(3, 2, rng=np.random.default_rng(0)))
        out = net.forward(np.random.default_rng(1).normal(size=(5, 3)))
        assert np.all(out == 0.0)

    def test_single_linear_layer_identity(self):
        net = Mlp(4, 4, hidden=(), rng=np.random.default_rng(0))
        net.weights[0][...] = np.eye(4)
        net.biases[0][...] = 0.0
        x = np.random.default_rng(2).normal(size=(6, 4))
        assert np.array_equal(net.forward(x), x)

    @pytest.mark.parametrize("out_act", ["identity", "tanh"])
    def test_matches_straight_line_oracle(self, out_act):
        rng = np.random.default_rng(7)
        net = Mlp(5, 3, hidden=(8, 8), out_act=out_act, rng=rng)
        x = rng.normal(size=(11, 5))
        got = net.forward(x)
        want = mlp_forward_oracle(net.weights, net.biases, out_act, x)
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_forward_is_pure_and_repeatable(self):
        rng = np.random.default_rng(3)
        net = Mlp(4, 2, rng=rng)
        x = rng.normal(size=(3, 4))
        a = net.forward(x).copy()
        b = net.forward(x)
        assert np.array_equal(a, b)

    def test_identical_rows_yield_identical_outputs(self):
        rng = np.random.default_rng(4)
        net = Mlp(6, 3, rng=rng)
        row = rng.normal(size=6)
        out = net.forward(np.tile(row, (8, 1)))
        assert np.array_equal(out, np.tile(out[0], (8, 1)))

    def test_dimension_mismatch_raises(self):
        net = Mlp(4, 2, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            net.forward(np.zeros((3, 5)))


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(5)
        net = Mlp(4, 2, rng=rng)
        x = rng.normal(size=(7, 4))
        net.forward(x)
        grads, dx = net.backward(np.zeros((7, 2)))
        assert all(np.all(g == 0.0) for g in grads)
        assert np.all(dx == 0.0)

    def test_scalar_chain_rule_by_hand(self):
        # 1-1-1 net: z0 = w0*x + b0, a0 = relu(z0), y = w1*a0 + b1.
        w0, b0, w1, b1 = 1.3, 0.2, -1.1, 0.05
        x, g = 0.7, 2.0
        net = Mlp(1, 1, hidden=(1,), rng=np.random.default_rng(0))
        net.weights[0][...] = w0
        net.biases[0][...] = b0
        net.weights[1][...] = w1
        net.biases[1][...] = b1
        y = net.forward(np.array([[x]]))
        z0 = w0 * x + b0
        a0 = max(z0, 0.0)
        assert y[0, 0] == w1 * a0 + b1
        grads, dx = net.backward(np.array([[g]]))
        dz0 = g * w1 * (1.0 if z0 > 0 else 0.0)
        assert grads[2][0, 0] == g * a0          # dW1
        assert grads[3][0] == g                  # db1
        assert grads[0][0, 0] == dz0 * x         # dW0
        assert grads[1][0] == dz0                # db0
        assert dx[0, 0] == dz0 * w0

    @pytest.mark.parametrize("out_act", ["identity", "tanh"])
    def test_finite_difference_agreement(self, out_act):
        rng = np.random.default_rng(11)
        for _ in range(5):
            net, x = random_net_batch(rng, out_act=out_act)
            upstream = rng.normal(size=(x.shape[0], net.out_dim))
            net.forward(x)
            grads, dx = net.backward(upstream)
            assert max_rel_error(grads, fd_param_grads(net, x, upstream)) <= 1e-5
            assert max_rel_error([dx], [fd_input_grads(net, x, upstream)]) <= 1e-5

    def test_backward_without_forward_raises(self):
        net = Mlp(3, 2, rng=np.random.default_rng(0))
        with pytest.raises(RuntimeError):
            net.backward(np.zeros((1, 2)))


class TestAdam:
    def test_zero_gradients_leave_parameters_unchanged(self):
        rng = np.random.default_rng(6)
        net = Mlp(3, 2, rng=rng)
        before = [p.copy() for p in net.parameters()]
        adam = AdamState.for_net(net)
        adam_step(net, adam, [np.zeros_like(p) for p in net.parameters()])
        assert all(np.array_equal(p, q) for p, q in zip(net.parameters(), before))
        assert adam.t == 1

    def test_single_step_matches_hand_recurrence(self):
        # Scalar p=0, g=1, lr=0.01: hand-evaluated recurrence gives these.
        net = zeroed(Mlp(1, 1, hidden=(), rng=np.random.default_rng(0)))
        adam = AdamState.for_net(net, lr=0.01)
        g = [np.ones((1, 1)), np.zeros(1)]
        adam_step(net, adam, g)
        assert net.weights[0][0, 0] == -0.009999999900000002
        adam_step(net, adam, g)
        assert net.weights[0][0, 0] == -0.019999999799999932

    def test_two_steps_match_vector_oracle(self):
        rng = np.random.default_rng(8)
        net = Mlp(3, 2, rng=rng)
        adam = AdamState.for_net(net, lr=3e-3)
        ref = [p.copy() for p in net.parameters()]
        m = [np.zeros_like(p) for p in ref]
        v = [np.zeros_like(p) for p in ref]
        for t in (1, 2):
            grads = [rng.normal(size=p.shape) for p in net.parameters()]
            adam_step(net, adam, grads)
            for p, g, mm, vv in zip(ref, grads, m, v):
                mm[...] = 0.9 * mm + 0.1 * g
                vv[...] = 0.999 * vv + 0.001 * g * g
                p -= 3e-3 * (mm / (1 - 0.9**t)) / (np.sqrt(vv / (1 - 0.999**t)) + 1e-8)
        for p, q in zip(net.parameters(), ref):
            assert np.allclose(p, q, rtol=0, atol=1e-15)

    def test_non_finite_gradient_raises(self):
        net = Mlp(2, 1, rng=np.random.default_rng(0))
        adam = AdamState.for_net(net)
        grads = [np.zeros_like(p) for p in net.parameters()]
        grads[0][0, 0] = np.nan
        with pytest.raises(NumericsError):
            adam_step(net, adam, grads)


class TestSoftUpdate:
    def test_tau_one_copies_online(self):
        rng = np.random.default_rng(9)
        target, online = Mlp(3, 2, rng=rng), Mlp(3, 2, rng=rng)
        soft_update(target, online, 1.0)
        for t, o in zip(target.parameters(), online.parameters()):
            assert np.array_equal(t, o)

    def test_tau_zero_is_noop(self):
        rng = np.random.default_rng(10)
        target, online = Mlp(3, 2, rng=rng), Mlp(3, 2, rng=rng)
        before = [p.copy() for p in target.parameters()]
        soft_update(target, online, 0.0)
        for t, b in zip(target.parameters(), before):
            assert np.array_equal(t, b)

    def test_paper_tau_moves_zero_target_to_hundredth(self):
        rng = np.random.default_rng(12)
        target = zeroed(Mlp(3, 2, rng=rng))
        online = Mlp(3, 2, rng=rng)
        for p in online.parameters():
            p[...] = 1.0
        soft_update(target, online, 0.01)
        for t in target.parameters():
            assert np.allclose(t, 0.01, rtol=0, atol=1e-16)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            soft_update(
                Mlp(3, 2, rng=np.random.default_rng(0)),
                Mlp(4, 2, rng=np.random.default_rng(0)),
                0.5,
            )

    @settings(max_examples=40, deadline=None)
    @given(tau=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
    def test_affine_blend_property(self, tau, seed):
        rng = np.random.default_rng(seed)
        target, online = Mlp(2, 2, hidden=(3,), rng=rng), Mlp(2, 2, hidden=(3,), rng=rng)
        expect = [tau * o + (1 - tau) * t
                  for t, o in zip(target.parameters(), online.parameters())]
        soft_update(target, online, tau)
        for t, e in zip(target.parameters(), expect):
            assert np.array_equal(t, e)


class TestGradNorm:
    def test_all_zero_is_zero(self):
        assert grad_norm_sq([np.zeros((3, 3)), np.zeros(3)]) == 0.0

    def test_single_entry_three_gives_nine(self):
        assert grad_norm_sq([np.array([[3.0]])]) == 9.0

    def test_random_matches_elementwise_sum(self):
        rng = np.random.default_rng(13)
        grads = [rng.normal(size=(4, 5)), rng.normal(size=5), rng.normal(size=(5, 2))]
        want = sum(float(np.sum(g**2)) for g in grads)
        assert grad_norm_sq(grads) == pytest.approx(want, rel=1e-12)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        net = Mlp(5, 2, out_act="tanh", rng=rng)
        for b in net.biases:
            b[...] = rng.normal(size=b.shape)
        path = tmp_path / "actor.net"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.sizes == net.sizes
        assert loaded.out_act == "tanh"
        for p, q in zip(loaded.parameters(), net.parameters()):
            assert np.array_equal(p, q)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.net"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError):
            load_network(path)

    def test_truncated_file_rejected(self, tmp_path):
        net = Mlp(3, 2, rng=np.random.default_rng(0))
        path = tmp_path / "net.net"
        save_network(net, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            load_network(path)


class TestClipGradients:
    def test_below_threshold_untouched(self):
        from marlab.nets import clip_gradients

        grads = [np.array([[0.3, 0.4]]), np.zeros(2)]  # norm 0.5
        out = clip_gradients(grads, 1.0)
        assert out is grads

    def test_scaled_to_max_norm(self):
        from marlab.nets import clip_gradients, grad_norm_sq

        grads = [np.array([[3.0, 4.0]])]  # norm 5
        out = clip_gradients(grads, 0.5)
        assert np.sqrt(grad_norm_sq(out)) == pytest.approx(0.5, rel=1e-12)
        assert np.allclose(out[0] / np.linalg.norm(out[0]), grads[0] / 5.0)
