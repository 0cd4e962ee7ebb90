"""Header-bearing CSV datasets.

Discrete columns may hold state names or integer codes; both are mapped to
codes of the model's domain on load.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from ..errors import DomainError, ModelError
from ..mechanisms import Discrete
from ..scm import SampleMatrix, Scm

logger = logging.getLogger(__name__)


def write_dataset(samples: SampleMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples.to_frame().to_csv(path, index=False)
    return path


def frame_to_samples(frame: pd.DataFrame, m: Scm) -> SampleMatrix:
    """Columns of ``frame`` reordered and coded to match ``m``.

    Raises:
        ModelError: If a model variable has no column or names repeat.
        DomainError: If a value lies outside its variable's domain.
    """
    if frame.columns.duplicated().any():
        raise ModelError("dataset has repeated column names")
    missing = [lab for lab in m.labels if lab not in frame.columns]
    if missing:
        raise ModelError(f"dataset has no column for {', '.join(missing)}")
    if frame.empty:
        raise ModelError("dataset has no rows")
    columns = []
    for v, lab in enumerate(m.labels):
        domain = m.domains[v]
        raw = frame[lab]
        if isinstance(domain, Discrete):
            columns.append(np.array([domain.code(_state(x)) for x in raw], dtype=float))
        else:
            values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
            if not np.all(np.isfinite(values)):
                raise DomainError(f"column {lab} holds non-numeric values")
            columns.append(values)
    return SampleMatrix(np.column_stack(columns), m.labels, m.cardinalities)


def _state(x: object) -> str:
    if isinstance(x, (float, np.floating)) and float(x).is_integer():
        return str(int(x))
    return str(x)


def read_dataset(path: Union[str, Path], m: Scm) -> SampleMatrix:
    """Load a CSV dataset for the variables of ``m``."""
    frame = pd.read_csv(path)
    samples = frame_to_samples(frame, m)
    logger.info(f"Loaded {samples.k} rows from {path}")
    return samples
