"""Semi-autoregressive dependency graph parsing for enhanced UD."""

from .conllu import (
    DepEdge,
    ParsedSentence,
    Token,
    delexicalize_label,
    parse_conllu,
    relexicalize_label,
    write_conllu,
)
from .engine import TrainConfig, decode, decode_variant, teacher_force_loss, train
from .graph import (
    DepGraph,
    Hierarchy,
    break_cycles,
    build_hierarchy,
    components_to_graph,
    longest_path_oracle,
    restore_edges,
)
from .metrics import elas, gms, hierarchy_accuracy
from .model import ModelConfig, Parser, Vocab

__version__ = "0.1.0"

__all__ = [
    "DepEdge",
    "DepGraph",
    "Hierarchy",
    "ModelConfig",
    "ParsedSentence",
    "Parser",
    "Token",
    "TrainConfig",
    "Vocab",
    "break_cycles",
    "build_hierarchy",
    "components_to_graph",
    "decode",
    "decode_variant",
    "delexicalize_label",
    "elas",
    "gms",
    "hierarchy_accuracy",
    "longest_path_oracle",
    "parse_conllu",
    "relexicalize_label",
    "restore_edges",
    "teacher_force_loss",
    "train",
    "write_conllu",
]
