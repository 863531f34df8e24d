import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from openset import ActivationRecord

FIXTURES = Path(__file__).parent / "fixtures"


def make_record(rid, split, label, av, predicted=None):
    return ActivationRecord(
        id=rid,
        split=split,
        true_label=label,
        av=np.asarray(av, dtype=np.float64),
        predicted_label=predicted,
    )


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURES
