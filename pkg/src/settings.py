"""Runtime settings for causal-distances.

Values come from the environment (optionally a ``.env`` file) and can be
overridden per call or per CLI invocation.
"""

import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return max(1, value)


# Worker cap shared by every thread pool in the package
THREADS = _int_env("CAUSAL_DIST_THREADS", os.cpu_count() or 1)

# Largest sample count solved exactly by the assignment OT solver
EXACT_SOLVE_CAP = _int_env("CAUSAL_DIST_EXACT_CAP", 1024)

# Largest graph handed to Markov-equivalence enumeration
MEC_NODE_CAP = _int_env("CAUSAL_DIST_MEC_CAP", 8)

# Cached density vectors per likelihood cache
CACHE_SIZE = _int_env("CAUSAL_DIST_CACHE_SIZE", 4096)

LOG_FILE: Optional[str] = os.getenv("CAUSAL_DIST_LOG_FILE") or None


def worker_count(requested: Optional[int] = None) -> int:
    """Number of workers to use, never above ``CAUSAL_DIST_THREADS``."""
    if requested is None:
        return THREADS
    return max(1, min(int(requested), THREADS))
