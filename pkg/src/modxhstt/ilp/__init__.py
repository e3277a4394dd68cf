"""Integer programming model generation, output and decoding."""

from .builder import BuildOptions, PoolSub, build_model, choice_pools, subevent_pool
from .decode import DecodeError, NotRepresentable, decode_solution, encode_solution, read_values
from .model import IlpModel, Lin, ModelError, Row, Var
from .writers import column_aliases, emit_lp, emit_mps, registry_json, row_aliases, stats_json

__all__ = [
    "BuildOptions", "PoolSub", "build_model", "choice_pools", "subevent_pool",
    "DecodeError", "NotRepresentable", "decode_solution", "encode_solution", "read_values",
    "IlpModel", "Lin", "ModelError", "Row", "Var",
    "column_aliases", "emit_lp", "emit_mps", "registry_json", "row_aliases", "stats_json",
]
