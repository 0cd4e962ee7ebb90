"""File formats: BIF networks, model documents, graph files and datasets."""

from .bif import BifDocument, bif_to_scm, parse_bif, read_bif, scm_to_bif, serialize_bif
from .datasets import read_dataset, write_dataset
from .fitting import fit_mle_and_orient
from .graphs import PartialGraph, parse_graph_output, read_graph_output
from .scm_format import load_model, load_scm, save_model, save_scm

__all__ = [
    "BifDocument",
    "PartialGraph",
    "bif_to_scm",
    "fit_mle_and_orient",
    "load_model",
    "load_scm",
    "parse_bif",
    "parse_graph_output",
    "read_bif",
    "read_dataset",
    "read_graph_output",
    "save_model",
    "save_scm",
    "scm_to_bif",
    "serialize_bif",
    "write_dataset",
]
