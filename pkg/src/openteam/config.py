"""Run configuration: environment, openness, networks, training schedule.

Configs round-trip through plain JSON dicts with nested sections. Defaults
mirror the grid-world setup this package targets: 16 parallel environments,
Adam at 2.5e-4, updates every 4 parallel steps, Polyak 1e-3, rank-5 pairwise
factors, and the 100/70-60/30-70/20 layer widths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .envs.base import EnvConfig
from .openness import OpennessConfig
from .teammates import LBF_TYPES, WOLF_TYPES

ALGORITHMS = ("GPL-Q", "GPL-SPI", "QL", "QL-AM")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetConfig:
    embedding_dim: int = 100
    utility_hidden: tuple[int, ...] = (70, 60)
    edge_hidden: tuple[int, ...] = (30, 70)
    node_hidden: tuple[int, ...] = (30, 70)
    decoder_hidden: tuple[int, ...] = (20,)
    rank: int = 5

    def validate(self):
        sizes = (
            self.embedding_dim,
            *self.utility_hidden,
            *self.edge_hidden,
            *self.node_hidden,
            *self.decoder_hidden,
            self.rank,
        )
        if any(s < 1 for s in sizes):
            raise ConfigError("network sizes must be positive")
        return self


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    anneal_fraction: float = 0.75

    def value(self, step: int, total_steps: int) -> float:
        horizon = max(1, int(self.anneal_fraction * total_steps))
        frac = min(1.0, step / horizon)
        return self.start + frac * (self.end - self.start)

    def validate(self):
        if not (0 <= self.end <= 1 and 0 <= self.start <= 1):
            raise ConfigError("epsilon must stay within [0, 1]")
        if not 0 < self.anneal_fraction <= 1:
            raise ConfigError("anneal fraction must be in (0, 1]")
        return self


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    openness_train: OpennessConfig
    openness_eval: OpennessConfig
    algorithm: str = "GPL-Q"
    net: NetConfig = field(default_factory=NetConfig)
    gamma: float = 0.99
    tau: float = 0.1
    lr: float = 2.5e-4
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    parallel_envs: int = 16
    total_steps: int = 200_000
    update_interval: int = 4
    polyak_alpha: float = 1e-3
    checkpoint_interval: int = 10_000
    max_team_pad: int = 5
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        self.net.validate()
        self.epsilon.validate()
        self.openness_train.validate()
        self.openness_eval.validate()
        if self.algorithm == "GPL-SPI" and self.tau <= 0:
            raise ConfigError("GPL-SPI needs a positive temperature")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.parallel_envs < 1:
            raise ConfigError("need at least one environment")
        if self.total_steps < 0:
            raise ConfigError("total steps must be >= 0")
        if self.update_interval < 1 or self.checkpoint_interval < 1:
            raise ConfigError("intervals must be >= 1")
        if not 0 < self.polyak_alpha <= 1:
            raise ConfigError("polyak alpha must be in (0, 1]")
        limit = max(self.openness_train.team_limit, self.openness_eval.team_limit)
        if self.max_team_pad < limit:
            raise ConfigError("padded input must cover the largest team limit")
        return self


def _default_pool(env_name: str):
    return WOLF_TYPES if env_name == "wolfpack" else LBF_TYPES


def _default_openness(env_name: str, team_limit: int) -> OpennessConfig:
    if env_name == "wolfpack":
        return OpennessConfig((25, 35), (15, 25), team_limit, _default_pool(env_name))
    return OpennessConfig((15, 25), (10, 20), team_limit, _default_pool(env_name))


def default_config(env_name: str, algorithm: str = "GPL-Q") -> RunConfig:
    return RunConfig(
        env=EnvConfig.defaults(env_name),
        openness_train=_default_openness(env_name, 3),
        openness_eval=_default_openness(env_name, 5),
        algorithm=algorithm,
    ).validate()


def _openness_to_dict(o: OpennessConfig) -> dict:
    return {
        "active": list(o.active_range),
        "waiting": list(o.waiting_range),
        "team_limit": o.team_limit,
        "type_pool": list(o.type_pool),
    }


def _openness_from_dict(d: dict) -> OpennessConfig:
    return OpennessConfig(
        tuple(d["active"]), tuple(d["waiting"]), int(d["team_limit"]), tuple(d["type_pool"])
    )


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "environment": {
            "name": cfg.env.name,
            "width": cfg.env.width,
            "height": cfg.env.height,
            "horizon": cfg.env.horizon,
            "n_objects": cfg.env.n_objects,
            "prey_count": cfg.env.prey_count,
        },
        "openness": {
            "train": _openness_to_dict(cfg.openness_train),
            "eval": _openness_to_dict(cfg.openness_eval),
        },
        "algorithm": cfg.algorithm,
        "network": {
            "embedding_dim": cfg.net.embedding_dim,
            "utility_hidden": list(cfg.net.utility_hidden),
            "edge_hidden": list(cfg.net.edge_hidden),
            "node_hidden": list(cfg.net.node_hidden),
            "decoder_hidden": list(cfg.net.decoder_hidden),
            "rank": cfg.net.rank,
        },
        "training": {
            "gamma": cfg.gamma,
            "tau": cfg.tau,
            "lr": cfg.lr,
            "epsilon": {
                "start": cfg.epsilon.start,
                "end": cfg.epsilon.end,
                "anneal_fraction": cfg.epsilon.anneal_fraction,
            },
            "parallel_envs": cfg.parallel_envs,
            "total_steps": cfg.total_steps,
            "update_interval": cfg.update_interval,
            "polyak_alpha": cfg.polyak_alpha,
            "checkpoint_interval": cfg.checkpoint_interval,
            "max_team_pad": cfg.max_team_pad,
        },
        "seed": cfg.seed,
    }


def config_from_dict(data: dict) -> RunConfig:
    try:
        env_name = data["environment"]["name"]
        base = EnvConfig.defaults(env_name)
        env_section = data["environment"]
        env = EnvConfig(
            name=env_name,
            width=int(env_section.get("width", base.width)),
            height=int(env_section.get("height", base.height)),
            horizon=int(env_section.get("horizon", base.horizon)),
            n_objects=int(env_section.get("n_objects", base.n_objects)),
            prey_count=int(env_section.get("prey_count", base.prey_count)),
        )
        openness = data.get("openness", {})
        train_o = (
            _openness_from_dict(openness["train"])
            if "train" in openness
            else _default_openness(env_name, 3)
        )
        eval_o = (
            _openness_from_dict(openness["eval"])
            if "eval" in openness
            else _default_openness(env_name, 5)
        )
        net_section = data.get("network", {})
        defaults = NetConfig()
        net = NetConfig(
            embedding_dim=int(net_section.get("embedding_dim", defaults.embedding_dim)),
            utility_hidden=tuple(net_section.get("utility_hidden", defaults.utility_hidden)),
            edge_hidden=tuple(net_section.get("edge_hidden", defaults.edge_hidden)),
            node_hidden=tuple(net_section.get("node_hidden", defaults.node_hidden)),
            decoder_hidden=tuple(net_section.get("decoder_hidden", defaults.decoder_hidden)),
            rank=int(net_section.get("rank", defaults.rank)),
        )
        tr = data.get("training", {})
        eps_section = tr.get("epsilon", {})
        eps = EpsilonSchedule(
            start=float(eps_section.get("start", 1.0)),
            end=float(eps_section.get("end", 0.05)),
            anneal_fraction=float(eps_section.get("anneal_fraction", 0.75)),
        )
        cfg = RunConfig(
            env=env,
            openness_train=train_o,
            openness_eval=eval_o,
            algorithm=data.get("algorithm", "GPL-Q"),
            net=net,
            gamma=float(tr.get("gamma", 0.99)),
            tau=float(tr.get("tau", 0.1)),
            lr=float(tr.get("lr", 2.5e-4)),
            epsilon=eps,
            parallel_envs=int(tr.get("parallel_envs", 16)),
            total_steps=int(tr.get("total_steps", 200_000)),
            update_interval=int(tr.get("update_interval", 4)),
            polyak_alpha=float(tr.get("polyak_alpha", 1e-3)),
            checkpoint_interval=int(tr.get("checkpoint_interval", 10_000)),
            max_team_pad=int(tr.get("max_team_pad", 5)),
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc
    return cfg.validate()
