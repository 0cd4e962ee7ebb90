"""JSON document format for structural causal models.

Layout::

    {
      "format": "causal-distances/scm",
      "version": 1,
      "kind": "StructuralModel",
      "variables": [{"name": "A", "domain": {"type": "continuous"}}, ...],
      "edges": [["A", "B"], ...],
      "mechanisms": {"A": {"type": "linear", ...}, ...},
      "noises": {"A": {"type": "gaussian", "mean": 0.0, "std": 1.0}, ...}
    }
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from ..errors import ModelError
from ..mechanisms import domain_from_dict, mechanism_from_dict, noise_from_dict
from ..scm import ModelKind, Scm
from .bif import bif_to_scm, read_bif, scm_to_bif, serialize_bif

logger = logging.getLogger(__name__)

FORMAT_TAG = "causal-distances/scm"
FORMAT_VERSION = 1


def scm_to_document(m: Scm) -> Dict[str, Any]:
    labels = m.labels
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "kind": m.kind.value,
        "variables": [
            {"name": lab, "domain": m.domains[v].to_dict()}
            for v, lab in enumerate(labels)
        ],
        "edges": [[labels[a], labels[b]] for a, b in sorted(m.graph.edges)],
        "mechanisms": {lab: m.mechanisms[v].to_dict() for v, lab in enumerate(labels)},
        "noises": {lab: m.noises[v].to_dict() for v, lab in enumerate(labels)},
    }


def scm_from_document(doc: Dict[str, Any]) -> Scm:
    """Inverse of ``scm_to_document``.

    Raises:
        ModelError: If a field is missing or a variant tag is unknown.
    """
    if doc.get("format", FORMAT_TAG) != FORMAT_TAG:
        raise ModelError(f"not a model document: format '{doc.get('format')}'")
    try:
        variables = doc["variables"]
        labels = [var["name"] for var in variables]
        domains = {var["name"]: domain_from_dict(var["domain"]) for var in variables}
        mechanisms = {
            lab: mechanism_from_dict(spec) for lab, spec in doc["mechanisms"].items()
        }
        noises = {lab: noise_from_dict(spec) for lab, spec in doc["noises"].items()}
        edges = [tuple(edge) for edge in doc["edges"]]
        kind = ModelKind(doc.get("kind", ModelKind.STRUCTURAL.value))
    except KeyError as e:
        raise ModelError(f"model document is missing field {e.args[0]}")
    except ValueError as e:
        raise ModelError(f"bad model document: {e}")
    return Scm.build(labels, edges, mechanisms, noises, domains, kind)


def save_scm(m: Scm, path: Union[str, Path]) -> Path:
    """Write ``m`` as a JSON document."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scm_to_document(m), f, indent=2)
    logger.info(f"Saved model with {m.node_count} nodes to {path}")
    return path


def load_scm(path: Union[str, Path]) -> Scm:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelError(f"{path} is not valid JSON: {e}")
    return scm_from_document(doc)


def load_model(path: Union[str, Path]) -> Scm:
    """Load a ``.bif`` network or a JSON model document, chosen by suffix."""
    path = Path(path)
    if path.suffix.lower() == ".bif":
        return bif_to_scm(read_bif(path))
    return load_scm(path)


def save_model(m: Scm, path: Union[str, Path]) -> Path:
    """Write ``m`` as BIF when the suffix is ``.bif``, as JSON otherwise."""
    path = Path(path)
    if path.suffix.lower() != ".bif":
        return save_scm(m, path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_bif(scm_to_bif(m, path.stem)), encoding="utf-8")
    logger.info(f"Saved network with {m.node_count} nodes to {path}")
    return path
