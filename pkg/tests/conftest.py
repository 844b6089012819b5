import sys
from pathlib import Path

import pytest
from threadpoolctl import threadpool_limits

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session", autouse=True)
def _pin_blas_threads():
    # network training is only bit-reproducible at a fixed BLAS thread count
    with threadpool_limits(limits=1):
        yield
