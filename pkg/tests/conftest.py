# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

# --- Ensure repo root is importable (so workers/core imports resolve) ---
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from core.registry import ModeRegistry  # noqa: E402
from workers.protocols import ClusterGraph  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def one_qubit():
    return ModeRegistry.for_qubits(["1"])


@pytest.fixture
def two_qubits():
    return ModeRegistry.for_qubits(["1", "2"])


@pytest.fixture
def cz_pairs():
    """Two 2-qubit clusters 3-1 and 2-4; 1 and 2 are the link qubits."""
    return ClusterGraph([], [("3", "1"), ("2", "4")])
