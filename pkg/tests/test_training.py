import numpy as np
import pytest
from dataclasses import replace
from scipy import stats

from openteam import nn
from openteam import tensor as T
from openteam.config import EpsilonSchedule, NetConfig, default_config
from openteam.envs.base import Observation
from openteam.learner.baseline import (
    PaddedQTrainer,
    SlotMap,
    init_baseline_net,
    pad_observation,
    ql_baseline_forward,
)
from openteam.learner.trainer import CgTrainer, collect_transitions, train
from openteam.openness import OpennessConfig
from openteam.tensor import Tensor, grad_check

SMALL_NET = NetConfig(
    embedding_dim=8,
    utility_hidden=(8, 6),
    edge_hidden=(5, 6),
    node_hidden=(5, 6),
    decoder_hidden=(5,),
    rank=2,
)


def tiny_cfg(algorithm="GPL-Q", env="wolfpack", **kw):
    cfg = default_config(env, algorithm)
    cfg = replace(
        cfg,
        env=replace(cfg.env, horizon=25),
        parallel_envs=2,
        total_steps=24,
        checkpoint_interval=12,
        net=SMALL_NET,
        openness_train=OpennessConfig(
            (5, 8), (2, 4), 3, ("wolf.H1", "wolf.H2") if env == "wolfpack" else ("lbf.H3", "lbf.H6")
        ),
        openness_eval=OpennessConfig(
            (5, 8), (2, 4), 5, ("wolf.H1", "wolf.H2") if env == "wolfpack" else ("lbf.H3", "lbf.H6")
        ),
    )
    return replace(cfg, **kw).validate()


class TestTrainLoop:
    @pytest.mark.parametrize("algorithm", ["GPL-Q", "GPL-SPI", "QL", "QL-AM"])
    @pytest.mark.parametrize("env", ["wolfpack", "lbf"])
    def test_every_algorithm_runs(self, algorithm, env):
        res = train(tiny_cfg(algorithm, env))
        assert [r["global_step"] for r in res.records] == [0, 12, 24]
        assert "value" in res.stores

    def test_zero_learning_rate_freezes_parameters(self):
        cfg = tiny_cfg(lr=1e-30)  # effectively zero; config requires positive
        trainer = CgTrainer(cfg)
        before = {n: trainer.value_params[n].data.copy() for n in trainer.value_params.names()}
        for _ in range(8):
            trainer.run_iteration()
        for name, old in before.items():
            assert np.allclose(trainer.value_params[name].data, old, atol=1e-20)

    def test_total_zero_steps_only_initial_record(self):
        res = train(tiny_cfg(total_steps=0))
        assert [r["global_step"] for r in res.records] == [0]

    def test_fixed_seed_run_is_bit_reproducible(self):
        cfg = tiny_cfg(total_steps=100, checkpoint_interval=50, parallel_envs=2)
        a = train(cfg)
        b = train(cfg)
        assert a.records == b.records
        for store_name, store in a.stores.items():
            other = b.stores[store_name]
            for pname in store.names():
                assert store[pname].data.tobytes() == other[pname].data.tobytes()

    def test_target_store_tracks_value_store(self):
        cfg = tiny_cfg(total_steps=40, checkpoint_interval=40)
        trainer = CgTrainer(cfg)
        for _ in range(10):
            trainer.run_iteration()
        # Polyak mixing keeps the target close to (but behind) the online net.
        for name in trainer.value_params.names():
            online = trainer.value_params[name].data
            target = trainer.target_params[name].data
            assert not np.array_equal(online, target) or np.all(online == target)
            assert np.max(np.abs(online - target)) < 1.0

    def test_window_stats_reset_after_read(self):
        cfg = tiny_cfg(total_steps=80)
        trainer = CgTrainer(cfg)
        for _ in range(30):  # horizon 25, so every env finishes an episode
            trainer.run_iteration()
        first = trainer.window_stats()
        assert first["episodes"] > 0
        second = trainer.window_stats()
        assert second["episodes"] == 0 and second["mean_return"] is None


class TestCollectTransitions:
    def test_episode_structure(self):
        cfg = tiny_cfg()
        episodes = collect_transitions(cfg, steps=60, seed=3)
        assert sum(len(e) for e in episodes) == 60
        for episode in episodes:
            for rec in episode[:-1]:
                assert not rec.done
            assert set(rec.joint_action) == set(rec.roster_ids)


class TestPadObservation:
    def obs(self, order, x_len=2, u_len=4):
        rng = np.random.default_rng(0)
        return Observation(
            u=rng.normal(size=u_len),
            x={j: np.full(x_len, float(j + 1)) for j in order},
            order=list(order),
            learner_id=0,
        )

    def test_no_teammates_all_sentinel_blocks(self):
        slot_map = SlotMap(4)
        vec = pad_observation(self.obs([0]), 5, slot_map)
        assert len(vec) == 2 + 4 * 2 + 4
        assert np.all(vec[2 : 2 + 8] == -1.0)

    def test_blocks_carry_teammate_features(self):
        slot_map = SlotMap(4)
        rng = np.random.default_rng(1)
        slot_map.apply([], [7], rng)
        obs = self.obs([0, 7])
        vec = pad_observation(obs, 5, slot_map)
        s = slot_map.assigned[7]
        assert np.array_equal(vec[2 + 2 * s : 2 + 2 * s + 2], obs.x[7])

    def test_departed_slot_reverts_to_sentinel(self):
        slot_map = SlotMap(4)
        rng = np.random.default_rng(2)
        slot_map.apply([], [7], rng)
        s = slot_map.assigned[7]
        slot_map.apply([7], [], rng)
        vec = pad_observation(self.obs([0]), 5, slot_map)
        assert np.all(vec[2 + 2 * s : 2 + 2 * s + 2] == -1.0)

    def test_slot_assignment_uniform_over_free(self):
        rng = np.random.default_rng(3)
        counts = np.zeros(4)
        for _ in range(10_000):
            m = SlotMap(4)
            m.apply([], [9], rng)
            counts[m.assigned[9]] += 1
        assert stats.chisquare(counts).pvalue > 0.01

    def test_slot_exhaustion_rejected(self):
        slot_map = SlotMap(1)
        rng = np.random.default_rng(4)
        slot_map.apply([], [1], rng)
        with pytest.raises(ValueError):
            slot_map.apply([], [2], rng)

    def test_probs_widen_blocks(self):
        slot_map = SlotMap(2)
        rng = np.random.default_rng(5)
        slot_map.apply([], [3], rng)
        obs = self.obs([0, 3])
        probs = {3: np.array([0.25, 0.25, 0.25, 0.25, 0.0])}
        vec = pad_observation(obs, 3, slot_map, probs=probs)
        assert len(vec) == 2 + 2 * (2 + 5) + 4
        s = slot_map.assigned[3]
        block = vec[2 + 7 * s : 2 + 7 * s + 7]
        assert np.array_equal(block[:2], obs.x[3])
        assert np.array_equal(block[2:], probs[3])


class TestBaselineForward:
    def test_zero_params_zero_values(self):
        params = init_baseline_net(10, 5, SMALL_NET, np.random.default_rng(0))
        zeroed = params.replace({n: np.zeros(params[n].data.shape) for n in params.names()})
        q, _ = ql_baseline_forward(
            zeroed, np.ones(10), (Tensor(np.zeros((1, 8))), Tensor(np.zeros((1, 8))))
        )
        assert np.all(q.data == 0)

    def test_deterministic(self):
        params = init_baseline_net(10, 5, SMALL_NET, np.random.default_rng(1))
        state = (Tensor(np.zeros((1, 8))), Tensor(np.zeros((1, 8))))
        x = np.linspace(-1, 1, 10)
        a, _ = ql_baseline_forward(params, x, state)
        b, _ = ql_baseline_forward(params, x, state)
        assert a.data.tobytes() == b.data.tobytes()

    def test_wrong_length_rejected(self):
        params = init_baseline_net(10, 5, SMALL_NET, np.random.default_rng(2))
        state = (Tensor(np.zeros((1, 8))), Tensor(np.zeros((1, 8))))
        with pytest.raises(ValueError):
            ql_baseline_forward(params, np.ones(11), state)

    def test_gradcheck_through_two_steps(self):
        rng = np.random.default_rng(3)
        params = init_baseline_net(6, 4, SMALL_NET, rng)
        x1, x2 = rng.normal(size=6), rng.normal(size=6)
        for name in ("embed.lstm.w", "head.w0", "embed.fc.w0"):
            def f(p, name=name):
                patched = params.replace({name: p})
                state = (Tensor(np.zeros((1, 8))), Tensor(np.zeros((1, 8))))
                _, state = ql_baseline_forward(patched, x1, state)
                q, _ = ql_baseline_forward(patched, x2, state)
                return T.sum_all(q * q)
            assert grad_check(f, params[name]) <= 1e-4
