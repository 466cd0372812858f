import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phantom import build_phantom  # noqa: E402


@pytest.fixture(scope="session")
def cohort(tmp_path_factory):
    """The 60-patient synthetic cohort shared by the heavier tests."""
    root = tmp_path_factory.mktemp("cohort")
    return build_phantom(str(root), n_patients=60, seed=0)
