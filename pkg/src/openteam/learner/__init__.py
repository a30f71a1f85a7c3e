from .model import (
    EmbeddingStore,
    embed_rows,
    embed_types,
    init_model_net,
    init_value_net,
    preprocess,
)
from .values import (
    AgentModelOutput,
    UtilityTables,
    act,
    agent_model_loss,
    compute_utilities,
    joint_q,
    marginal_q,
    spi_policy,
    td_target,
    teammate_probs,
    value_loss,
)

__all__ = [
    "EmbeddingStore",
    "embed_rows",
    "embed_types",
    "init_model_net",
    "init_value_net",
    "preprocess",
    "AgentModelOutput",
    "UtilityTables",
    "act",
    "agent_model_loss",
    "compute_utilities",
    "joint_q",
    "marginal_q",
    "spi_policy",
    "td_target",
    "teammate_probs",
    "value_loss",
]
