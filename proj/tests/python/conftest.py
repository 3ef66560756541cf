import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("MULQG_CLI") or shutil.which("mulqg")
    if not path:
        pytest.skip("mulqg executable not available")
    return path
