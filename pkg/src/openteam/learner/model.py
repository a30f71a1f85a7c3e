"""Type embeddings under openness.

Every agent's behavior is summarized by a recurrent embedding: two fully
connected layers feed an LSTM cell whose hidden state is the agent's type
vector. Two independent recurrences are kept (one for the value network, one
for the agent model) so their gradients never interfere, plus a target-side
copy of the value recurrence.

Between steps the per-agent (hidden, cell) pairs are realigned with the
roster: rows of departed agents are dropped and arriving agents start from
exact zeros. At the end of an episode everything resets (all agents depart,
the next episode's initial agents arrive).
"""

from __future__ import annotations

import numpy as np

from .. import nn
from .. import tensor as T
from ..tensor import Tensor


class EmbeddingStore:
    """Per-agent (hidden, cell) pairs for the three recurrences."""

    MAPS = ("value", "model", "target")

    def __init__(self, dim: int):
        self.dim = dim
        self.value: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.model: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.target: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def map(self, which: str) -> dict:
        return getattr(self, which)

    def ids(self):
        return list(self.value)

    def stacked(self, which: str):
        """(H, C) arrays in key order; (0, dim) when empty."""
        entries = list(self.map(which).values())
        if not entries:
            zero = np.zeros((0, self.dim))
            return zero, zero
        return (
            np.stack([h for h, _ in entries]),
            np.stack([c for _, c in entries]),
        )

    def write(self, which: str, h_rows: np.ndarray, c_rows: np.ndarray):
        m = self.map(which)
        for row, agent_id in enumerate(m):
            m[agent_id] = (h_rows[row], c_rows[row])


def preprocess(obs, store: EmbeddingStore, departures, arrivals, maps=None):
    """Remove departed rows, zero-initialize arrivals, and build the batch.

    Returns (B, store) with B holding one concat(x_j, u) row per agent in the
    store's (== roster's) order. At episode end callers pass every previous
    agent as departed and the new episode's roster as arrivals.
    """
    zeros = np.zeros(store.dim)
    for which in maps or EmbeddingStore.MAPS:
        m = store.map(which)
        for agent_id in departures:
            m.pop(agent_id, None)
        for agent_id in arrivals:
            if agent_id in m:
                raise ValueError(f"arriving agent {agent_id} already has stored state")
            m[agent_id] = (zeros, zeros)
        if list(m) != obs.order:
            # Keys must match the roster; order follows the observation.
            if set(m) != set(obs.order):
                raise ValueError(
                    f"store keys {sorted(m)} do not match roster {sorted(obs.order)}"
                )
            reordered = {agent_id: m[agent_id] for agent_id in obs.order}
            m.clear()
            m.update(reordered)
    return obs.batch_rows(), store


def embed_rows(params, batch, h, c, prefix="embed."):
    """Two FC layers then one LSTM step over a row batch of agents."""
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    x = T.leaky_relu(T.matmul(x, params[f"{prefix}fc.w0"]) + params[f"{prefix}fc.b0"])
    x = T.leaky_relu(T.matmul(x, params[f"{prefix}fc.w1"]) + params[f"{prefix}fc.b1"])
    h = h if isinstance(h, Tensor) else Tensor(h)
    c = c if isinstance(c, Tensor) else Tensor(c)
    return nn.lstm_step(params, x, (h, c), prefix=f"{prefix}lstm.")


def embed_types(params, batch, store: EmbeddingStore, which: str = "value"):
    """Advance one recurrence for every agent; h' is the type embedding.

    Returns (h', c') tensors aligned with the store's key order. The caller
    decides when to write the advanced state back via ``store.write``.
    """
    if batch.shape[0] != len(store.map(which)):
        raise ValueError(
            f"batch has {batch.shape[0]} rows but store holds {len(store.map(which))} agents"
        )
    h, c = store.stacked(which)
    return embed_rows(params, batch, h, c)


def init_embedding(in_dim, width, rng, values, prefix="embed."):
    fc = nn.init_mlp([in_dim, width, width], rng, prefix=f"{prefix}fc.")
    lstm = nn.init_lstm(width, width, rng, prefix=f"{prefix}lstm.")
    for name, t in fc.items():
        values[name] = t
    for name, t in lstm.items():
        values[name] = t


def init_value_net(in_dim, action_count, net_cfg, rng) -> nn.ParamStore:
    """Type embedding plus singular/pairwise utility heads."""
    values = {}
    init_embedding(in_dim, net_cfg.embedding_dim, rng, values)
    pair_in = 2 * net_cfg.embedding_dim
    for name, t in nn.init_mlp(
        [pair_in, *net_cfg.utility_hidden, action_count], rng, prefix="sing."
    ).items():
        values[name] = t
    for name, t in nn.init_mlp(
        [pair_in, *net_cfg.utility_hidden, net_cfg.rank * action_count], rng, prefix="fac."
    ).items():
        values[name] = t
    return nn.ParamStore(values)


def init_model_net(in_dim, action_count, net_cfg, rng) -> nn.ParamStore:
    """Type embedding plus message-passing block and action decoder."""
    values = {}
    init_embedding(in_dim, net_cfg.embedding_dim, rng, values)
    graph = nn.init_graph_block(
        net_cfg.embedding_dim, net_cfg.edge_hidden, net_cfg.node_hidden, rng
    )
    for name, t in graph.items():
        values["graph." + name] = t
    dec = nn.init_mlp(
        [net_cfg.node_hidden[-1], *net_cfg.decoder_hidden, action_count], rng, prefix="dec."
    )
    for name, t in dec.items():
        values[name] = t
    return nn.ParamStore(values)
