"""Run orchestration: training runs, evaluation, config hashing."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from ..config import ConfigError, RunConfig, config_from_dict, config_to_dict
from ..envs.session import make_session
from ..learner.baseline import BaselinePolicy
from ..learner.trainer import GplPolicy, train
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint, shape_diff
from .metrics import MetricRecord, append_record


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def run_training(cfg: RunConfig, out_dir) -> str:
    """Train per config; writes a config copy, the metric stream, and one
    checkpoint per boundary into `out_dir`. Returns the directory."""
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    if os.path.exists(metrics_path):
        os.remove(metrics_path)
    digest = config_hash(cfg)

    def on_record(global_step, stores, record):
        ckpt = os.path.join(out_dir, f"ckpt_{global_step:09d}.otck")
        save_checkpoint(stores, ckpt, config_hash=digest, global_step=global_step)
        append_record(
            metrics_path,
            MetricRecord(
                global_step=global_step,
                episodes=record["episodes"],
                mean_return=record["mean_return"],
                ci95=record["ci95"],
                agent_model_nll=record["agent_model_nll"],
                mean_qbar=record["mean_qbar"],
            ),
        )

    train(cfg, on_record=on_record)
    return out_dir


def _check_compatible(cfg: RunConfig, stores: dict):
    from ..learner.baseline import init_baseline_net
    from ..learner.model import init_model_net, init_value_net

    probe = make_session(cfg.env, cfg.openness_eval, np.random.default_rng(0))
    x_len, u_len = probe.obs_dims
    in_dim = x_len + u_len
    rng = np.random.default_rng(0)
    if cfg.algorithm in ("GPL-Q", "GPL-SPI"):
        expected = {
            "value": init_value_net(in_dim, probe.action_count, cfg.net, rng).shapes(),
            "agent_model": init_model_net(in_dim, probe.action_count, cfg.net, rng).shapes(),
        }
    else:
        block = x_len + (probe.action_count if cfg.algorithm == "QL-AM" else 0)
        input_len = x_len + (cfg.max_team_pad - 1) * block + u_len
        expected = {
            "value": init_baseline_net(input_len, probe.action_count, cfg.net, rng).shapes()
        }
        if cfg.algorithm == "QL-AM":
            expected["agent_model"] = init_model_net(
                in_dim, probe.action_count, cfg.net, rng
            ).shapes()
    problems = []
    for name, shapes in expected.items():
        if name not in stores:
            problems.append(f"checkpoint lacks store {name!r}")
            continue
        problems.extend(f"{name}.{p}" for p in shape_diff(shapes, stores[name].shapes()))
    if problems:
        raise CheckpointError(
            "checkpoint incompatible with config:\n  " + "\n  ".join(problems)
        )


def evaluate(
    checkpoint_path, cfg: RunConfig, episodes: int, seed: int, team_limit: int | None = None
) -> MetricRecord:
    """Mean return (with 95% CI) of the stored policy under the evaluation
    openness process. Pure function of (checkpoint, config, seed)."""
    if episodes < 1:
        raise ConfigError("need at least one evaluation episode")
    stores, manifest = load_checkpoint(checkpoint_path)
    openness = cfg.openness_eval
    if team_limit is not None:
        from dataclasses import replace

        openness = replace(openness, team_limit=team_limit)
    eval_cfg = cfg
    _check_compatible(cfg, stores)

    seeds = np.random.SeedSequence(seed).spawn(2)
    env_rng = np.random.default_rng(seeds[0])
    policy_rng = np.random.default_rng(seeds[1])
    session = make_session(cfg.env, openness, env_rng)
    if cfg.algorithm in ("GPL-Q", "GPL-SPI"):
        policy = GplPolicy(eval_cfg, stores["value"], stores["agent_model"], policy_rng)
    else:
        policy = BaselinePolicy(
            eval_cfg, stores["value"], stores.get("agent_model"), policy_rng
        )

    returns = []
    nll = None
    for _ in range(episodes):
        obs = session.reset()
        policy.reset(obs)
        total = 0.0
        done = False
        while not done:
            action = policy.act(obs)
            res = session.step(action)
            policy.observe(res)
            total += res.reward
            obs = res.obs
            done = res.done
        returns.append(total)

    mean = float(np.mean(returns))
    ci = float(1.96 * np.std(returns, ddof=1) / np.sqrt(len(returns))) if len(returns) > 1 else 0.0
    return MetricRecord(
        global_step=int(manifest.get("global_step", 0)),
        episodes=len(returns),
        mean_return=mean,
        ci95=ci,
        agent_model_nll=nll,
        mean_qbar=None,
    )


def random_policy_record(cfg: RunConfig, episodes: int, seed: int, team_limit=None) -> MetricRecord:
    """Uniform-random learner baseline under the same evaluation process."""
    openness = cfg.openness_eval
    if team_limit is not None:
        from dataclasses import replace

        openness = replace(openness, team_limit=team_limit)
    seeds = np.random.SeedSequence(seed).spawn(2)
    session = make_session(cfg.env, openness, np.random.default_rng(seeds[0]))
    rng = np.random.default_rng(seeds[1])
    returns = []
    for _ in range(episodes):
        session.reset()
        total = 0.0
        done = False
        while not done:
            res = session.step(int(rng.integers(0, session.action_count)))
            total += res.reward
            done = res.done
        returns.append(total)
    mean = float(np.mean(returns))
    ci = float(1.96 * np.std(returns, ddof=1) / np.sqrt(len(returns))) if len(returns) > 1 else 0.0
    return MetricRecord(0, len(returns), mean, ci)
