import numpy as np
import pytest

from openteam import nn
from openteam import tensor as T
from openteam.tensor import OpError, Tensor, grad_check


class TestInit:
    def test_deterministic_given_seed(self):
        a = nn.init_params(("mlp", [2, 3]), np.random.default_rng(7))
        b = nn.init_params(("mlp", [2, 3]), np.random.default_rng(7))
        assert a.names() == b.names()
        for name in a.names():
            assert np.array_equal(a[name].data, b[name].data)

    def test_biases_zero(self):
        store = nn.init_params(("mlp", [4, 8, 3]), np.random.default_rng(0))
        assert np.all(store["b0"].data == 0) and np.all(store["b1"].data == 0)

    def test_weight_bound_follows_fan_in(self):
        store = nn.init_params(("mlp", [100, 70]), np.random.default_rng(1))
        w = store["w0"].data
        assert w.shape == (100, 70)
        assert np.all(np.abs(w) < 0.1)  # 1/sqrt(100)

    def test_empty_spec_rejected(self):
        with pytest.raises(ValueError):
            nn.init_params((), np.random.default_rng(0))
        with pytest.raises(ValueError):
            nn.init_mlp([5], np.random.default_rng(0))

    def test_lstm_param_shapes(self):
        store = nn.init_params(("lstm", (6, 10)), np.random.default_rng(0))
        assert store["w"].data.shape == (16, 40)
        assert store["b"].data.shape == (40,)


class TestMlpForward:
    def test_zero_params_zero_output(self):
        store = nn.ParamStore({"w0": np.zeros((3, 4)), "b0": np.zeros(4)})
        out = nn.mlp_forward(store, Tensor(np.random.default_rng(0).normal(size=(2, 3))))
        assert np.all(out.data == 0)

    def test_single_layer_is_affine(self):
        rng = np.random.default_rng(5)
        store = nn.init_mlp([3, 2], rng)
        x = Tensor(rng.normal(size=(4, 3)))
        out = nn.mlp_forward(store, x)
        direct = T.matmul(x, store["w0"]) + store["b0"]
        assert np.array_equal(out.data, direct.data)

    def test_gradcheck_two_layer(self):
        rng = np.random.default_rng(9)
        store = nn.init_mlp([3, 5, 1], rng)
        x = Tensor(rng.normal(size=(2, 3)))
        for name in store.names():
            def f(p, name=name):
                out = nn.mlp_forward(store.replace({name: p}), x)
                return T.sum_all(out)
            assert grad_check(f, store[name]) <= 1e-4

    def test_shape_mismatch_rejected(self):
        store = nn.init_mlp([3, 2], np.random.default_rng(0))
        with pytest.raises(OpError):
            nn.mlp_forward(store, Tensor(np.ones((2, 5))))


class TestLstmStep:
    def test_zero_params_zero_cell(self):
        store = nn.ParamStore({"w": np.zeros((7, 12)), "b": np.zeros(12)})
        h, c = nn.lstm_step(store, Tensor(np.ones((2, 4))), (Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3)))))
        assert np.all(h.data == 0) and np.all(c.data == 0)

    def test_zero_params_halve_cell(self):
        store = nn.ParamStore({"w": np.zeros((7, 12)), "b": np.zeros(12)})
        c0 = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 1.0]])
        h, c = nn.lstm_step(store, Tensor(np.ones((2, 4))), (Tensor(np.zeros((2, 3))), Tensor(c0)))
        assert np.allclose(c.data, 0.5 * c0, atol=1e-15)

    def test_gradcheck_through_three_steps(self):
        rng = np.random.default_rng(13)
        store = nn.init_lstm(3, 4, rng)
        xs = [Tensor(rng.normal(size=(2, 3))) for _ in range(3)]
        for name in store.names():
            def f(p, name=name):
                patched = store.replace({name: p})
                h = Tensor(np.zeros((2, 4)))
                c = Tensor(np.zeros((2, 4)))
                for x in xs:
                    h, c = nn.lstm_step(patched, x, (h, c))
                return T.sum_all(h * h)
            assert grad_check(f, store[name]) <= 1e-4


class TestGraphBlock:
    def test_single_node_uses_zero_aggregate(self):
        rng = np.random.default_rng(21)
        store = nn.init_graph_block(3, [4, 5], [4, 6], rng)
        node = Tensor(rng.normal(size=(1, 3)))
        out = nn.graph_block(store, node, 1)
        direct = nn.mlp_forward(
            store, T.concat_last([node, Tensor(np.zeros((1, 5)))]), prefix="node."
        )
        assert np.array_equal(out.data, direct.data)

    def test_permutation_equivariance_exact(self):
        rng = np.random.default_rng(22)
        store = nn.init_graph_block(4, [5, 6], [5, 7], rng)
        nodes = rng.normal(size=(5, 4))
        base = nn.graph_block(store, Tensor(nodes), 5).data
        for _ in range(10):
            perm = rng.permutation(5)
            permuted = nn.graph_block(store, Tensor(nodes[perm]), 5).data
            assert np.array_equal(permuted, base[perm])

    def test_three_nodes_match_edge_by_edge_oracle(self):
        rng = np.random.default_rng(23)
        store = nn.init_graph_block(3, [4, 5], [4, 6], rng)
        nodes = rng.normal(size=(3, 3))
        out = nn.graph_block(store, Tensor(nodes), 3).data

        def mlp(prefix, row):
            return nn.mlp_forward(store, Tensor(row.reshape(1, -1)), prefix=prefix).data[0]

        for k in range(3):
            agg = np.zeros(5)
            for j in range(3):
                if j != k:
                    agg = agg + mlp("edge.", np.concatenate([nodes[j], nodes[k]]))
            expect = mlp("node.", np.concatenate([nodes[k], agg]))
            assert np.allclose(out[k], expect, atol=1e-12)

    def test_zero_agents_rejected(self):
        store = nn.init_graph_block(3, [4, 5], [4, 6], np.random.default_rng(0))
        with pytest.raises(OpError):
            nn.graph_block(store, Tensor(np.zeros((0, 3))), 0)

    def test_gradcheck(self):
        rng = np.random.default_rng(24)
        store = nn.init_graph_block(3, [4, 4], [4, 4], rng)
        nodes = Tensor(rng.normal(size=(3, 3)))
        for name in store.names():
            def f(p, name=name):
                return T.sum_all(nn.graph_block(store.replace({name: p}), nodes, 3))
            assert grad_check(f, store[name]) <= 1e-4


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        rng = np.random.default_rng(31)
        store = nn.init_mlp([3, 2], rng)
        state = nn.AdamState(lr=0.01)
        updated, state = nn.adam_step(store, {"w0": np.zeros((3, 2))}, state)
        assert np.array_equal(updated["w0"].data, store["w0"].data)
        assert state.step == 1

    def test_first_step_magnitude_near_lr(self):
        # With constant gradient g: m_hat = g, v_hat = g^2, so the update is
        # lr * g / (|g| + eps), a bias-corrected sign step.
        store = nn.ParamStore({"w": np.array([1.0, -1.0, 2.0])})
        grads = {"w": np.array([0.3, -0.7, 2.0])}
        updated, _ = nn.adam_step(store, grads, nn.AdamState(lr=0.01))
        delta = updated["w"].data - store["w"].data
        assert np.allclose(np.abs(delta), 0.01, atol=1e-6)
        assert np.all(np.sign(delta) == -np.sign(grads["w"]))

    def test_two_steps_match_reference_replay(self):
        rng = np.random.default_rng(32)
        store = nn.ParamStore({"w": rng.normal(size=(2, 2))})
        g1, g2 = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        state = nn.AdamState(lr=0.05)
        p1, state = nn.adam_step(store, {"w": g1}, state)
        p2, state = nn.adam_step(p1, {"w": g2}, state)

        # independent replay
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        w = store["w"].data.copy()
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        for t, g in enumerate((g1, g2), start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            w = w - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        assert np.allclose(p2["w"].data, w, atol=1e-15)
        assert state.step == 2

    def test_untouched_params_unchanged(self):
        rng = np.random.default_rng(33)
        store = nn.init_mlp([2, 2, 2], rng)
        updated, _ = nn.adam_step(store, {"w0": np.ones((2, 2))}, nn.AdamState())
        assert np.array_equal(updated["w1"].data, store["w1"].data)

    def test_no_nan_from_finite_grads(self):
        rng = np.random.default_rng(34)
        store = nn.ParamStore({"w": rng.normal(size=5)})
        state = nn.AdamState(lr=0.1)
        for scale in (1e-30, 1.0, 1e20):
            store, state = nn.adam_step(store, {"w": rng.normal(size=5) * scale}, state)
            assert np.all(np.isfinite(store["w"].data))

    def test_shape_mismatch_rejected(self):
        store = nn.ParamStore({"w": np.zeros(3)})
        with pytest.raises(OpError):
            nn.adam_step(store, {"w": np.zeros(4)}, nn.AdamState())


class TestPolyak:
    def test_alpha_one_copies_online(self):
        t = nn.ParamStore({"w": np.zeros(3)})
        o = nn.ParamStore({"w": np.array([1.0, 2.0, 3.0])})
        assert np.array_equal(nn.polyak_update(t, o, 1.0)["w"].data, o["w"].data)

    def test_alpha_zero_keeps_target(self):
        t = nn.ParamStore({"w": np.array([5.0, 6.0])})
        o = nn.ParamStore({"w": np.zeros(2)})
        assert np.array_equal(nn.polyak_update(t, o, 0.0)["w"].data, t["w"].data)

    def test_small_alpha_moves_proportionally(self):
        t = nn.ParamStore({"w": np.zeros(4)})
        o = nn.ParamStore({"w": np.ones(4)})
        out = nn.polyak_update(t, o, 1e-3)
        assert np.allclose(out["w"].data, 0.001, atol=1e-18)

    def test_mismatched_stores_rejected(self):
        t = nn.ParamStore({"w": np.zeros(3)})
        o = nn.ParamStore({"v": np.zeros(3)})
        with pytest.raises(OpError):
            nn.polyak_update(t, o, 0.5)
