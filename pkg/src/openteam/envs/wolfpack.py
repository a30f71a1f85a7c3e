"""Wolfpack: hunters chase fleeing prey on a 10x10 grid.

A prey is captured when at least two hunters stand on cells 4-adjacent to
it. Every capture pays the learner twice the capturing pack's size if the
learner is in the pack; standing alone next to a prey costs -0.5. Captured
prey respawn at a random empty cell, so the prey count stays constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..openness import LEARNER_ID, Roster
from .base import (
    MOVE_ACTIONS,
    STAY,
    WOLF_ACTIONS,
    Observation,
    chebyshev,
    manhattan,
    move_target,
    resolve_moves,
    sample_empty_cell,
)


@dataclass
class WolfState:
    width: int
    height: int
    positions: dict[int, tuple[int, int]]  # hunters
    prey: list[tuple[int, int]]
    step: int = 0
    horizon: int = 200

    def occupied_cells(self):
        return set(self.positions.values()) | set(self.prey)

    def copy(self) -> "WolfState":
        return WolfState(
            self.width, self.height, dict(self.positions), list(self.prey), self.step, self.horizon
        )


def wolf_reset(rng, agent_ids, cfg) -> WolfState:
    state = WolfState(cfg.width, cfg.height, {}, [], 0, cfg.horizon)
    for agent_id in agent_ids:
        state.positions[agent_id] = sample_empty_cell(
            rng, state.occupied_cells(), cfg.width, cfg.height
        )
    for _ in range(cfg.prey_count):
        state.prey.append(
            sample_empty_cell(rng, state.occupied_cells(), cfg.width, cfg.height)
        )
    return state


def add_agent(state: WolfState, agent_id: int, rng) -> None:
    state.positions[agent_id] = sample_empty_cell(
        rng, state.occupied_cells(), state.width, state.height
    )


def remove_agent(state: WolfState, agent_id: int) -> None:
    del state.positions[agent_id]


def prey_act(state: WolfState, prey_index: int, rng) -> int:
    """Flee move: maximize the minimum Chebyshev distance to any hunter.

    Each action is scored by the in-grid cell it would reach (off-grid moves
    score like staying); ties are broken uniformly at random.
    """
    pos = state.prey[prey_index]
    hunters = list(state.positions.values())
    scores = []
    for action in WOLF_ACTIONS:
        target = move_target(pos, action, state.width, state.height)
        if hunters:
            scores.append(min(chebyshev(target, h) for h in hunters))
        else:
            scores.append(0)
    best = max(scores)
    choices = [a for a, s in zip(WOLF_ACTIONS, scores) if s == best]
    return int(choices[int(rng.integers(0, len(choices)))])


def wolf_step(state: WolfState, actions: dict[int, int], rng):
    """Move hunters and prey simultaneously, then resolve captures.

    Returns (state', learner reward, done).
    """
    if set(actions) != set(state.positions):
        raise ValueError(
            f"joint action covers {sorted(actions)} but roster is {sorted(state.positions)}"
        )
    for agent_id, action in actions.items():
        if action not in WOLF_ACTIONS:
            raise ValueError(f"invalid action {action} for agent {agent_id}")

    new = state.copy()
    prey_keys = [("prey", i) for i in range(len(new.prey))]
    current = dict(new.positions)
    current.update(dict(zip(prey_keys, new.prey)))
    proposals = {
        a: move_target(new.positions[a], act, new.width, new.height)
        for a, act in actions.items()
        if act in MOVE_ACTIONS
    }
    for key, prey_pos in zip(prey_keys, new.prey):
        action = prey_act(state, key[1], rng)
        if action in MOVE_ACTIONS:
            proposals[key] = move_target(prey_pos, action, new.width, new.height)
    resolved = resolve_moves(current, proposals, set(), new.width, new.height)
    new.positions = {a: resolved[a] for a in new.positions}
    new.prey = [resolved[k] for k in prey_keys]

    reward = 0.0
    for i, prey_pos in enumerate(new.prey):
        pack = [a for a, p in new.positions.items() if manhattan(p, prey_pos) == 1]
        if len(pack) >= 2:
            if LEARNER_ID in pack:
                reward += 2.0 * len(pack)
            new.prey[i] = sample_empty_cell(
                rng, new.occupied_cells(), new.width, new.height
            )
        elif pack == [LEARNER_ID]:
            reward -= 0.5

    new.step += 1
    return new, reward, new.step >= new.horizon


def encode_wolf_obs(state: WolfState, roster: Roster) -> Observation:
    """u = prey (row, col) slots in index order; x = hunter (row, col)."""
    u = np.array([coord for pos in state.prey for coord in pos], dtype=float)
    x = {
        j: np.array(state.positions[j], dtype=float)
        for j in roster.ids
    }
    return Observation(u=u, x=x, order=roster.ids, learner_id=LEARNER_ID)
