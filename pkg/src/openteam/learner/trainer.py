"""Synchronous training over parallel open-team environments.

Every iteration advances all environments by one step. Per-agent network
passes (embeddings, utility heads, the message-passing model) run once over
the rows of all environments stacked together; the cheap per-team algebra
(joint values, marginalization, losses) runs per environment. Gradients of
the value loss and the agent-model loss are accumulated over a configured
number of iterations, applied with Adam, and the value-side target copy
tracks the online parameters by Polyak averaging every step.

The target pathway keeps its own recurrent state: after each transition it
is realigned to the new roster and advanced with the target parameters,
while the next-state teammate distributions come from the online agent model
(advanced one step ahead and then discarded).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from .. import tensor as T
from ..config import RunConfig
from ..envs.session import make_session
from ..openness import LEARNER_ID
from ..tensor import Tape, Tensor, backward
from .model import EmbeddingStore, embed_rows, init_model_net, init_value_net, preprocess
from .values import (
    AgentModelOutput,
    UtilityTables,
    act,
    agent_model_loss,
    marginal_q,
    marginal_values,
    model_rows,
    spi_policy,
    td_target,
    utility_rows,
)


@dataclass
class TransitionRecord:
    """One environment transition as observed by the learner."""

    obs: object
    roster_ids: list[int]
    joint_action: dict[int, int]
    learner_action: int
    reward: float
    next_obs: object
    done: bool
    departures: list[int]
    arrivals: list[int]


@dataclass
class TrainResult:
    stores: dict
    records: list


@dataclass
class _Slot:
    session: object
    store: EmbeddingStore
    obs: object = None
    pending_online: tuple = ((), ())
    pending_target: tuple | None = ((), ())
    episode_return: float = 0.0


class _Layout:
    """Row bookkeeping for one stacked batch over many environments."""

    def __init__(self, obs_list, batches):
        self.rows = np.concatenate(batches, axis=0) if batches else np.zeros((0, 0))
        self.groups = []
        self.slices = []
        self.orders = []
        self.learner_rows = []
        start = 0
        for obs, batch in zip(obs_list, batches):
            n = batch.shape[0]
            self.groups.append((start, n))
            self.slices.append((start, start + n))
            self.orders.append(list(obs.order))
            learner_row = start + obs.order.index(obs.learner_id)
            self.learner_rows.extend([learner_row] * n)
            start += n

    def stack_state(self, slots, which):
        hs, cs = [], []
        for slot in slots:
            h, c = slot.store.stacked(which)
            hs.append(h)
            cs.append(c)
        return np.concatenate(hs, axis=0), np.concatenate(cs, axis=0)


def _env_tables(sing, fac, layout, e, learner_id, action_count, rank) -> UtilityTables:
    lo, hi = layout.slices[e]
    rows = list(range(lo, hi))
    return UtilityTables(
        learner_id,
        layout.orders[e],
        action_count,
        rank,
        T.select_rows(sing, rows),
        T.select_rows(fac, rows),
    )


def _env_probs(all_probs, layout, e, learner_id) -> AgentModelOutput:
    lo, hi = layout.slices[e]
    order = layout.orders[e]
    teammate_rows = [lo + i for i, j in enumerate(order) if j != learner_id]
    teammates = [j for j in order if j != learner_id]
    if not teammates:
        return AgentModelOutput([], Tensor(np.zeros((0, all_probs.data.shape[-1]))))
    return AgentModelOutput(teammates, T.select_rows(all_probs, teammate_rows))


def _realign_rows(old_order, h_rows, c_rows, new_order, dim):
    """Drop departed rows, zero rows for arrivals; align to `new_order`."""
    index = {a: r for r, a in enumerate(old_order)}
    h = np.zeros((len(new_order), dim))
    c = np.zeros((len(new_order), dim))
    for r, agent_id in enumerate(new_order):
        if agent_id in index:
            h[r] = h_rows[index[agent_id]]
            c[r] = c_rows[index[agent_id]]
    return h, c


def _explore_param(cfg: RunConfig, global_step: int) -> float:
    if cfg.algorithm == "GPL-SPI":
        return cfg.tau
    return cfg.epsilon.value(global_step, cfg.total_steps)


class CgTrainer:
    """Trainer for the coordination-graph learner (GPL-Q / GPL-SPI)."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        if cfg.algorithm not in ("GPL-Q", "GPL-SPI"):
            raise ValueError(f"CgTrainer cannot run {cfg.algorithm!r}")
        self.cfg = cfg
        self.mode = "QL" if cfg.algorithm == "GPL-Q" else "SPI"
        seeds = np.random.SeedSequence(cfg.seed).spawn(3 + cfg.parallel_envs)
        init_rng = np.random.default_rng(seeds[0])
        self.learner_rng = np.random.default_rng(seeds[1])

        probe = make_session(cfg.env, cfg.openness_train, np.random.default_rng(0))
        x_len, u_len = probe.obs_dims
        self.in_dim = x_len + u_len
        self.action_count = probe.action_count

        self.value_params = init_value_net(self.in_dim, self.action_count, cfg.net, init_rng)
        self.model_params = init_model_net(self.in_dim, self.action_count, cfg.net, init_rng)
        self.target_params = self.value_params.replace({})
        self.opt_value = nn.AdamState(lr=cfg.lr)
        self.opt_model = nn.AdamState(lr=cfg.lr)
        self.acc_value: dict[str, np.ndarray] = {}
        self.acc_model: dict[str, np.ndarray] = {}

        self.slots = []
        for i in range(cfg.parallel_envs):
            session = make_session(cfg.env, cfg.openness_train, np.random.default_rng(seeds[3 + i]))
            slot = _Slot(session, EmbeddingStore(cfg.net.embedding_dim))
            slot.obs = session.reset()
            slot.pending_online = ([], list(slot.obs.order))
            slot.pending_target = ([], list(slot.obs.order))
            self.slots.append(slot)

        self.global_step = 0
        self.iteration = 0
        self.window_returns: list[float] = []
        self.window_nll_sum = 0.0
        self.window_nll_count = 0
        self.window_qbar_sum = 0.0
        self.window_qbar_count = 0

    def stores(self) -> dict:
        return {
            "value": self.value_params,
            "agent_model": self.model_params,
            "target_value": self.target_params,
        }

    def window_stats(self) -> dict:
        returns = self.window_returns
        n = len(returns)
        mean = float(np.mean(returns)) if n else None
        ci = None
        if n > 1:
            ci = float(1.96 * np.std(returns, ddof=1) / np.sqrt(n))
        elif n == 1:
            ci = 0.0
        stats = {
            "episodes": n,
            "mean_return": mean,
            "ci95": ci,
            "agent_model_nll": (
                self.window_nll_sum / self.window_nll_count if self.window_nll_count else None
            ),
            "mean_qbar": (
                self.window_qbar_sum / self.window_qbar_count if self.window_qbar_count else None
            ),
        }
        self.window_returns = []
        self.window_nll_sum = 0.0
        self.window_nll_count = 0
        self.window_qbar_sum = 0.0
        self.window_qbar_count = 0
        return stats

    def run_iteration(self):
        """One synchronous step across every environment."""
        cfg = self.cfg
        explore = _explore_param(cfg, self.global_step)
        tape = Tape()
        vparams = self.value_params.bind(tape)
        mparams = self.model_params.bind(tape)

        batches = []
        for slot in self.slots:
            dep, arr = slot.pending_online
            batch, _ = preprocess(slot.obs, slot.store, dep, arr, maps=("value", "model"))
            if slot.pending_target is not None:
                preprocess(slot.obs, slot.store, *slot.pending_target, maps=("target",))
                slot.pending_target = None
            batches.append(batch)
        layout = _Layout([s.obs for s in self.slots], batches)

        hq0, cq0 = layout.stack_state(self.slots, "value")
        hm0, cm0 = layout.stack_state(self.slots, "model")
        hq, cq = embed_rows(vparams, layout.rows, hq0, cq0)
        hm, cm = embed_rows(mparams, layout.rows, hm0, cm0)
        sing, fac = utility_rows(vparams, hq, layout.learner_rows)
        all_probs = model_rows(mparams, hm, layout.groups)

        # Action selection from the marginalized values (no gradient needed).
        actions = []
        sing_data, fac_data, probs_data = sing.data, fac.data, all_probs.data
        for e in range(len(self.slots)):
            lo, hi = layout.slices[e]
            learner_local = layout.learner_rows[lo] - lo
            team_rows = [r for r in range(lo, hi) if r != layout.learner_rows[lo]]
            qbar = marginal_values(
                sing_data[lo:hi],
                fac_data[lo:hi],
                probs_data[team_rows],
                learner_local,
                cfg.net.rank,
            )
            actions.append(act(qbar, self.mode, explore, self.learner_rng))
            self.window_qbar_sum += float(qbar.mean())
            self.window_qbar_count += 1

        results = [slot.session.step(a) for slot, a in zip(self.slots, actions)]

        # Advance online recurrent state (detached between iterations).
        for e, slot in enumerate(self.slots):
            lo, hi = layout.slices[e]
            slot.store.write("value", hq.data[lo:hi], cq.data[lo:hi])
            slot.store.write("model", hm.data[lo:hi], cm.data[lo:hi])

        targets = self._target_values(layout, results, (hm.data, cm.data))

        scale = 1.0 / (len(self.slots) * cfg.update_interval)
        v_total = self._batched_value_loss(layout, sing, fac, results, targets, scale)
        self._accumulate(self.acc_value, vparams, backward(v_total))
        m_total = self._batched_model_loss(layout, all_probs, results, scale)
        if m_total is not None:
            self._accumulate(self.acc_model, mparams, backward(m_total))

        self.iteration += 1
        self.global_step += len(self.slots)
        if self.iteration % cfg.update_interval == 0:
            if self.acc_value:
                self.value_params, self.opt_value = nn.adam_step(
                    self.value_params, self.acc_value, self.opt_value
                )
            if self.acc_model:
                self.model_params, self.opt_model = nn.adam_step(
                    self.model_params, self.acc_model, self.opt_model
                )
            self.acc_value = {}
            self.acc_model = {}
        self.target_params = nn.polyak_update(
            self.target_params, self.value_params, cfg.polyak_alpha
        )

        for slot, res in zip(self.slots, results):
            slot.episode_return += res.reward
            if res.done:
                self.window_returns.append(slot.episode_return)
                slot.episode_return = 0.0
                old_order = list(res.obs.order)
                slot.obs = slot.session.reset()
                slot.pending_online = (old_order, list(slot.obs.order))
                slot.pending_target = (old_order, list(slot.obs.order))
            else:
                slot.obs = res.obs
                slot.pending_online = (res.departures, res.arrivals)

    def _batched_value_loss(self, layout, sing, fac, results, targets, scale):
        """Mean half-squared TD error over all environments, built from the
        stacked utility rows with per-environment segment sums."""
        cfg = self.cfg
        n_rows = layout.rows.shape[0]
        actions = np.empty(n_rows, dtype=np.intp)
        for e, res in enumerate(results):
            lo, _ = layout.slices[e]
            for i, agent_id in enumerate(layout.orders[e]):
                actions[lo + i] = res.joint_action[agent_id]
        onehot = np.zeros((n_rows, self.action_count))
        onehot[np.arange(n_rows), actions] = 1.0
        rank = cfg.net.rank

        rep = np.repeat(onehot, rank, axis=0)
        fac2 = T.reshape(fac, (n_rows * rank, self.action_count))
        g = T.reshape(T.sum_axis(fac2 * Tensor(rep), 1), (n_rows, rank))
        env_segments = [(lo, hi) for lo, hi in layout.slices]
        g_env = T.segment_sum(g, env_segments)  # (P, rank)
        pair = T.sum_axis(g_env * g_env, 1) - T.reshape(
            T.segment_sum(T.reshape(T.sum_axis(g * g, 1), (n_rows, 1)), env_segments),
            (len(results),),
        )
        singles_rows = T.reshape(T.sum_axis(sing * Tensor(onehot), 1), (n_rows, 1))
        singles = T.reshape(T.segment_sum(singles_rows, env_segments), (len(results),))
        joint = singles + pair
        diff = joint - Tensor(np.asarray(targets))
        return T.scalar_mul(T.sum_all(diff * diff), 0.5 * scale)

    def _batched_model_loss(self, layout, all_probs, results, scale):
        """Summed teammate-action NLL over all environments (None if no
        teammate acted anywhere this step)."""
        rows, actions = [], []
        for e, res in enumerate(results):
            lo, _ = layout.slices[e]
            for i, agent_id in enumerate(layout.orders[e]):
                if agent_id != LEARNER_ID:
                    rows.append(lo + i)
                    actions.append(res.joint_action[agent_id])
        if not rows:
            return None
        onehot = np.zeros((len(rows), self.action_count))
        onehot[np.arange(len(rows)), actions] = 1.0
        p = T.sum_axis(T.select_rows(all_probs, rows) * Tensor(onehot), 1)
        from .values import PROB_FLOOR

        floored = T.relu(p - Tensor(PROB_FLOOR)) + Tensor(PROB_FLOOR)
        nll = T.scalar_mul(T.sum_all(T.log(floored)), -1.0)
        self.window_nll_sum += float(nll.data)
        self.window_nll_count += len(rows)
        return T.scalar_mul(nll, scale)

    def _target_values(self, layout, results, model_state):
        """Bootstrapped targets from the target-parameter pathway at s'."""
        cfg = self.cfg
        hm_rows, cm_rows = model_state
        live = [e for e, res in enumerate(results) if not res.done]
        targets = [float(res.reward) for res in results]
        if not live:
            return targets

        next_batches = []
        borrowed_h, borrowed_c = [], []
        for e in live:
            slot, res = self.slots[e], results[e]
            batch, _ = preprocess(
                res.obs, slot.store, res.departures, res.arrivals, maps=("target",)
            )
            next_batches.append(batch)
            lo, hi = layout.slices[e]
            h, c = _realign_rows(
                layout.orders[e],
                hm_rows[lo:hi],
                cm_rows[lo:hi],
                res.obs.order,
                cfg.net.embedding_dim,
            )
            borrowed_h.append(h)
            borrowed_c.append(c)

        next_layout = _Layout([results[e].obs for e in live], next_batches)
        ht0 = np.concatenate([self.slots[e].store.stacked("target")[0] for e in live])
        ct0 = np.concatenate([self.slots[e].store.stacked("target")[1] for e in live])
        ht, ct = embed_rows(self.target_params, next_layout.rows, ht0, ct0)
        for i, e in enumerate(live):
            lo, hi = next_layout.slices[i]
            self.slots[e].store.write("target", ht.data[lo:hi], ct.data[lo:hi])

        sing_t, fac_t = utility_rows(self.target_params, ht, next_layout.learner_rows)
        hm_next, _ = embed_rows(
            self.model_params,
            next_layout.rows,
            np.concatenate(borrowed_h),
            np.concatenate(borrowed_c),
        )
        probs_next = model_rows(self.model_params, hm_next, next_layout.groups)

        sing_d, fac_d, probs_d = sing_t.data, fac_t.data, probs_next.data
        for i, e in enumerate(live):
            lo, hi = next_layout.slices[i]
            learner_row = next_layout.learner_rows[lo]
            team_rows = [r for r in range(lo, hi) if r != learner_row]
            qbar = marginal_values(
                sing_d[lo:hi],
                fac_d[lo:hi],
                probs_d[team_rows],
                learner_row - lo,
                cfg.net.rank,
            )
            targets[e] = td_target(
                results[e].reward, qbar, self.mode, cfg.gamma, cfg.tau, terminal=False
            )
        return targets

    def _accumulate(self, acc, bound, grads):
        for name, leaf in bound.items():
            g = grads.get(leaf.tid)
            if g is None:
                continue
            if name in acc:
                acc[name] = acc[name] + g.data
            else:
                acc[name] = g.data


def _tensor_sum(tensors):
    total = tensors[0]
    for t in tensors[1:]:
        total = total + t
    return total


def train(cfg: RunConfig, on_record=None) -> TrainResult:
    """Run the configured algorithm; emits a record at every checkpoint
    boundary (starting with global step 0) through `on_record`."""
    if cfg.algorithm in ("GPL-Q", "GPL-SPI"):
        trainer = CgTrainer(cfg)
    else:
        from .baseline import PaddedQTrainer

        trainer = PaddedQTrainer(cfg)

    records = []

    def emit():
        stats = trainer.window_stats()
        record = {"global_step": trainer.global_step, **stats}
        records.append(record)
        if on_record is not None:
            on_record(trainer.global_step, trainer.stores(), record)

    emit()
    next_boundary = cfg.checkpoint_interval
    while trainer.global_step < cfg.total_steps:
        trainer.run_iteration()
        while trainer.global_step >= next_boundary and next_boundary <= cfg.total_steps:
            emit()
            next_boundary += cfg.checkpoint_interval
    return TrainResult(trainer.stores(), records)


class GplPolicy:
    """Single-environment acting for evaluation and analysis."""

    def __init__(self, cfg: RunConfig, value_params, model_params, rng, sample_spi=None):
        self.cfg = cfg
        self.value_params = value_params
        self.model_params = model_params
        self.rng = rng
        self.sample_spi = cfg.algorithm == "GPL-SPI" if sample_spi is None else sample_spi
        self.store = EmbeddingStore(cfg.net.embedding_dim)
        self.last_tables = None
        self.last_qbar = None

    def reset(self, obs):
        self.store = EmbeddingStore(self.cfg.net.embedding_dim)
        self.pending = ([], list(obs.order))

    def act(self, obs) -> int:
        dep, arr = self.pending
        batch, _ = preprocess(obs, self.store, dep, arr, maps=("value", "model"))
        hq0, cq0 = self.store.stacked("value")
        hm0, cm0 = self.store.stacked("model")
        hq, cq = embed_rows(self.value_params, batch, hq0, cq0)
        hm, cm = embed_rows(self.model_params, batch, hm0, cm0)
        learner_rows = [obs.order.index(obs.learner_id)] * len(obs.order)
        sing, fac = utility_rows(self.value_params, hq, learner_rows)
        tables = UtilityTables(
            obs.learner_id,
            list(obs.order),
            sing.data.shape[-1],
            self.cfg.net.rank,
            sing,
            fac,
        )
        probs_rows = model_rows(self.model_params, hm, [(0, len(obs.order))])
        teammates = [j for j in obs.order if j != obs.learner_id]
        if teammates:
            rows = [obs.order.index(j) for j in teammates]
            probs = AgentModelOutput(teammates, T.select_rows(probs_rows, rows))
        else:
            probs = AgentModelOutput([], Tensor(np.zeros((0, probs_rows.data.shape[-1]))))
        qbar = marginal_q(tables, probs, obs.learner_id).data
        self.store.write("value", hq.data, cq.data)
        self.store.write("model", hm.data, cm.data)
        self.last_tables = tables
        self.last_qbar = qbar
        if self.sample_spi:
            p = spi_policy(Tensor(qbar), self.cfg.tau).data
            return int(self.rng.choice(len(qbar), p=p))
        best = np.flatnonzero(qbar == qbar.max())
        return int(best[self.rng.integers(0, len(best))])

    def observe(self, result):
        if result.done:
            self.pending = (list(result.obs.order), list(result.obs.order))
        else:
            self.pending = (result.departures, result.arrivals)


def collect_transitions(cfg: RunConfig, steps: int, seed: int) -> list:
    """Roll out a uniform-random learner; returns a list of episodes."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    session = make_session(cfg.env, cfg.openness_train, rng)
    episodes = []
    current = []
    obs = session.reset()
    for _ in range(steps):
        action = int(rng.integers(0, session.action_count))
        res = session.step(action)
        current.append(
            TransitionRecord(
                obs,
                list(obs.order),
                dict(res.joint_action),
                action,
                res.reward,
                res.obs,
                res.done,
                list(res.departures),
                list(res.arrivals),
            )
        )
        obs = res.obs
        if res.done:
            episodes.append(current)
            current = []
            obs = session.reset()
    if current:
        episodes.append(current)
    return episodes


def heldout_nll(model_params, cfg: RunConfig, episodes) -> float:
    """Mean per-action negative log likelihood over stored episodes."""
    total, count = 0.0, 0
    dim = cfg.net.embedding_dim
    for episode in episodes:
        store = EmbeddingStore(dim)
        pending = ([], list(episode[0].roster_ids))
        for rec in episode:
            batch, _ = preprocess(rec.obs, store, *pending, maps=("model",))
            h0, c0 = store.stacked("model")
            hm, cm = embed_rows(model_params, batch, h0, c0)
            store.write("model", hm.data, cm.data)
            observed = {
                j: a for j, a in rec.joint_action.items() if j != rec.obs.learner_id
            }
            if observed:
                probs_rows = model_rows(model_params, hm, [(0, len(rec.roster_ids))])
                teammates = [j for j in rec.roster_ids if j != rec.obs.learner_id]
                rows = [rec.roster_ids.index(j) for j in teammates]
                out = AgentModelOutput(teammates, T.select_rows(probs_rows, rows))
                total += float(agent_model_loss(out, observed).data)
                count += len(observed)
            pending = (rec.departures, rec.arrivals)
            if rec.done:
                break
    return total / max(count, 1)


def train_agent_model_supervised(
    cfg: RunConfig,
    episodes,
    seed: int,
    epochs: int = 2,
    window: int = 4,
    lr: float = None,
    group_size: int = 8,
    progress=None,
):
    """Supervised training of the agent model on stored transitions.

    Equal-length episodes are replayed in lockstep groups so each forward
    pass covers every agent of every episode in the group; losses are
    backpropagated through truncated windows, with hidden states detached at
    window boundaries. `progress(epoch, params)` is called after each epoch
    when given (e.g. for early stopping by returning True).
    """
    init_rng = np.random.default_rng(np.random.SeedSequence(seed))
    probe_obs = episodes[0][0].obs
    in_dim = len(probe_obs.x[probe_obs.learner_id]) + len(probe_obs.u)
    action_count = 6 if cfg.env.name == "lbf" else 5
    params = init_model_net(in_dim, action_count, cfg.net, init_rng)
    opt = nn.AdamState(lr=cfg.lr if lr is None else lr)
    dim = cfg.net.embedding_dim

    by_length = {}
    for episode in episodes:
        by_length.setdefault(len(episode), []).append(episode)
    groups = []
    for length in sorted(by_length):
        bucket = by_length[length]
        for lo in range(0, len(bucket), group_size):
            groups.append(bucket[lo : lo + group_size])

    for epoch in range(epochs):
        for group in groups:
            length = len(group[0])
            stores = [EmbeddingStore(dim) for _ in group]
            pendings = [([], list(ep[0].roster_ids)) for ep in group]
            for start in range(0, length, window):
                tape = Tape()
                bound = params.bind(tape)
                losses = []
                n_actions = 0
                for t in range(start, min(start + window, length)):
                    batches = []
                    row_groups = []
                    action_rows = []
                    actions = []
                    offset = 0
                    for i, episode in enumerate(group):
                        rec = episode[t]
                        batch, _ = preprocess(
                            rec.obs, stores[i], *pendings[i], maps=("model",)
                        )
                        pendings[i] = (rec.departures, rec.arrivals)
                        batches.append(batch)
                        row_groups.append((offset, batch.shape[0]))
                        for r, agent_id in enumerate(rec.roster_ids):
                            if agent_id != rec.obs.learner_id:
                                action_rows.append(offset + r)
                                actions.append(rec.joint_action[agent_id])
                        offset += batch.shape[0]
                    stacked = np.concatenate(batches, axis=0)
                    h0 = np.concatenate([s.stacked("model")[0] for s in stores])
                    c0 = np.concatenate([s.stacked("model")[1] for s in stores])
                    hm, cm = embed_rows(bound, stacked, h0, c0)
                    for i, (lo, count) in enumerate(row_groups):
                        stores[i].write("model", hm.data[lo : lo + count], cm.data[lo : lo + count])
                    if action_rows:
                        probs = model_rows(bound, hm, row_groups)
                        onehot = np.zeros((len(action_rows), action_count))
                        onehot[np.arange(len(action_rows)), actions] = 1.0
                        picked = T.sum_axis(
                            T.select_rows(probs, action_rows) * Tensor(onehot), 1
                        )
                        floored = T.relu(picked - Tensor(1e-12)) + Tensor(1e-12)
                        losses.append(T.scalar_mul(T.sum_all(T.log(floored)), -1.0))
                        n_actions += len(action_rows)
                if losses:
                    total = T.scalar_mul(_tensor_sum(losses), 1.0 / n_actions)
                    grads = backward(total)
                    named = {}
                    for name, leaf in bound.items():
                        g = grads.get(leaf.tid)
                        if g is not None:
                            named[name] = g.data
                    if named:
                        params, opt = nn.adam_step(params, named, opt)
        if progress is not None and progress(epoch, params):
            break
    return params
