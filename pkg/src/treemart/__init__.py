"""Path-length martingales in linear recursive random trees."""

from .model import BST, PORT, RT, InvalidParams, ModelParams, make_params, mary, p_oriented, parse_model
from .tree_sim import ReplicaSeed, grow

__all__ = [
    "BST", "PORT", "RT", "InvalidParams", "ModelParams", "ReplicaSeed",
    "grow", "make_params", "mary", "p_oriented", "parse_model",
]
