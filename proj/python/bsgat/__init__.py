"""Behavior-similarity graphs and graph attention for NetFlow records.

Thin wrapper over the compiled extension. Every pipeline entry point takes
the JSON run config as a string (empty string = defaults), mirroring the
command-line tool.
"""

from ._core import (
    build_graph,
    degree_histogram,
    edge_counts,
    evaluate,
    export_embeddings,
    gini,
    synth,
    train,
)

__all__ = [
    "build_graph",
    "degree_histogram",
    "edge_counts",
    "evaluate",
    "export_embeddings",
    "gini",
    "synth",
    "train",
]
